// Copyright 2026 The VP-NTK Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VPNTK_EXPERIMENT_H_
#define VPNTK_EXPERIMENT_H_

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "vpntk/config.h"
#include "vpntk/evaluation.h"
#include "vpntk/training.h"

namespace vpntk {

inline constexpr int kResultsSchemaVersion = 1;

struct PrivacyReport {
  bool enabled = false;
  double epsilon = 0.0;
  double delta = 0.0;
  double sigma = 0.0;
  double sensitivity = 0.0;
  double noise_std = 0.0;
  int64_t m = 0;
  int private_read_count = 0;
  bool sealed = false;
};

// Guard state observed when a pipeline stage finished.
struct StageRecord {
  std::string name;
  double start_seconds = 0.0;
  double seconds = 0.0;
  int private_reads = 0;
  bool sealed = false;
};

struct RunRecord {
  ExperimentConfig config;
  std::string status = "ok";  // "ok" or "failed"
  std::string failed_stage;
  std::string error;
  PrivacyReport privacy;
  std::vector<double> loss_trace;
  double accuracy = std::numeric_limits<double>::quiet_NaN();
  int num_classes = 0;
  int64_t train_size = 0;
  int64_t test_size = 0;
  std::vector<int> label_mapping;
  uint64_t generator_checksum_before = 0;
  uint64_t generator_checksum_after = 0;
  uint64_t extractor_checksum_before = 0;
  uint64_t extractor_checksum_after = 0;
  double wall_clock_seconds = 0.0;
  std::vector<StageRecord> stages;
  std::vector<std::pair<std::string, std::string>> artifacts;
};

// Test seams. `after_release` runs right after the private embedding has been
// released, with the dataset and the (sealed) guard.
struct RunHooks {
  std::function<void(const PrivateDataset&, AccessGuard&)> after_release;
};

// Stages, in order: ingest, backbones, label_mapping, calibrate, release,
// train, synthesize, evaluate, persist. When output_dir is set the record,
// results files and the trained checkpoint are written there; a failing
// stage leaves a FAILED marker and the partial record. Errors: the failing
// stage's error, with the stage name prepended to its message.
RunRecord RunExperiment(const ExperimentConfig& config, const RunHooks& hooks = {});

nlohmann::ordered_json RecordToJson(const RunRecord& record);
RunRecord RecordFromJson(const nlohmann::ordered_json& json);

// Writes <stem>.txt (aligned table) and <stem>.jsonl (schema header line,
// then one record per line). Output depends only on the records.
// Errors: unwritable path -> kIoError.
void ExportResults(const std::vector<RunRecord>& records, const std::string& stem);
// Errors: kNotFound, kParseError, kVersionMismatch.
std::vector<RunRecord> ReadRunRecords(const std::string& jsonl_path);

// Paper-style grid for kappa, eta, alpha or loss.
std::vector<std::string> DefaultGrid(const std::string& parameter);

using ExperimentRunner = std::function<RunRecord(const ExperimentConfig&)>;

struct SweepOutcome {
  AblationResult result;
  std::vector<RunRecord> records;  // successful runs, grid-major
};

// Full pipeline per (value, repeat); repeat r shifts the run seeds by r.
// With an output_dir, each cell writes to <output_dir>/<parameter>=<value>/r<r>.
SweepOutcome RunSweep(const ExperimentConfig& base, const std::string& parameter,
                      const std::vector<std::string>& grid, int k,
                      const ExperimentRunner& runner = {});

// <stem>.txt with "value mean std n" rows and <stem>.jsonl with one line per
// grid value.
void ExportAblation(const AblationResult& result, const std::string& stem);

}  // namespace vpntk

#endif  // VPNTK_EXPERIMENT_H_
