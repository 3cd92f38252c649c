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

#ifndef VPNTK_CONFIG_H_
#define VPNTK_CONFIG_H_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "vpntk/evaluation.h"
#include "vpntk/losses.h"
#include "vpntk/ntk_features.h"
#include "vpntk/training.h"
#include "vpntk/vprompt.h"

namespace vpntk {

enum class PipelineMode { kVpNtk, kDpNtkBaseline };

PipelineMode ParsePipelineMode(const std::string& name);
std::string PipelineModeName(PipelineMode mode);

struct Seeds {
  uint64_t data = 0;       // toy dataset generation and the train/test split
  uint64_t backbone = 0;   // toy generator / extractor parameters
  uint64_t init = 0;       // NTK network, prompts, baseline generator
  uint64_t noise = 0;      // Gaussian mechanism
  uint64_t latents = 0;    // training latents
  uint64_t mapping = 0;    // label mapping
  uint64_t downstream = 0; // synthesis latents and downstream classifier
};

// Every knob of one experiment. Field names double as config-file keys and
// CLI flags (see ConfigKeys()).
struct ExperimentConfig {
  std::string dataset = "toy3";
  std::string generator = "toy";
  std::string extractor = "toy";

  double epsilon = 1.0;
  double delta = 1e-5;
  bool privacy_disabled = false;

  PipelineMode mode = PipelineMode::kVpNtk;
  PromptSpace prompt_space = PromptSpace::kFeature;
  double kappa = 16.0;
  double eta = 1e-2;
  double generator_eta = 10.0;
  double alpha = 0.05;
  LossMode loss = LossMode::kMixed;
  double w_mmd = 1.0;
  double w_cos = 1.0;
  bool per_column_cosine = false;
  Optimizer optimizer = Optimizer::kGradientDescent;
  bool fixed_latents = false;
  int max_steps = 200;
  int n_per_class = 64;
  int synth_per_class = 500;

  std::vector<int> ntk_hidden = {512};
  Activation ntk_activation = Activation::kTanh;
  ClassifierKind classifier = ClassifierKind::kLogistic;

  Seeds seeds;
  std::string output_dir;

  bool operator==(const ExperimentConfig&) const;
};

// Ordered list of every config key.
const std::vector<std::string>& ConfigKeys();

// Sets one field from its text form. "loss_mode" is accepted for "loss".
// Errors: unknown key or unparsable value -> kInvalidArgument.
void ApplyKeyValue(ExperimentConfig& config, const std::string& key,
                   const std::string& value);

// Flat "key = value" text, '#' starts a comment.
ExperimentConfig ParseConfigText(const std::string& text,
                                 ExperimentConfig base = {});
ExperimentConfig LoadConfigFile(const std::string& path,
                                ExperimentConfig base = {});

// Text form of every field, in ConfigKeys() order; numbers round-trip.
std::vector<std::pair<std::string, std::string>> ToKeyValues(
    const ExperimentConfig& config);
std::string ToConfigText(const ExperimentConfig& config);

nlohmann::ordered_json ConfigToJson(const ExperimentConfig& config);
ExperimentConfig ConfigFromJson(const nlohmann::json& json);

// Validates ranges and cross-field constraints. Errors: kInvalidArgument.
void ValidateConfig(const ExperimentConfig& config);

// Seeds for seed repeat r: every per-run seed shifted by r; dataset and
// backbone seeds unchanged.
ExperimentConfig WithRepeat(ExperimentConfig config, int repeat);

std::string FormatDouble(double value);

}  // namespace vpntk

#endif  // VPNTK_CONFIG_H_
