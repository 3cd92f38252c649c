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

// Command-line front end: run, sweep, calibrate, inspect.

#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vpntk/config.h"
#include "vpntk/error.h"
#include "vpntk/experiment.h"
#include "vpntk/privacy.h"

namespace {

using vpntk::ExperimentConfig;

struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> values;
};

void AddConfigFlags(CLI::App* app, ConfigFlags& flags) {
  app->add_option("-c,--config", flags.config_file, "key = value config file");
  for (const std::string& key : vpntk::ConfigKeys()) {
    app->add_option("--" + key, flags.values[key])->group("Experiment");
  }
}

ExperimentConfig ResolveConfig(const CLI::App* app, const ConfigFlags& flags) {
  ExperimentConfig config;
  if (!flags.config_file.empty()) config = vpntk::LoadConfigFile(flags.config_file);
  for (const auto& [key, value] : flags.values) {
    if (app->count("--" + key) > 0) vpntk::ApplyKeyValue(config, key, value);
  }
  return config;
}

std::vector<std::string> SplitList(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void PrintRecord(const vpntk::RunRecord& r) {
  std::printf("status        %s\n", r.status.c_str());
  if (r.status != "ok") {
    std::printf("failed stage  %s\n", r.failed_stage.c_str());
    std::printf("error         %s\n", r.error.c_str());
  }
  std::printf("mode          %s\n", vpntk::PipelineModeName(r.config.mode).c_str());
  std::printf("dataset       %s (%lld train / %lld test, %d classes)\n",
              r.config.dataset.c_str(), static_cast<long long>(r.train_size),
              static_cast<long long>(r.test_size), r.num_classes);
  if (r.privacy.enabled) {
    std::printf("privacy       eps=%s delta=%s sigma=%.10g noise_std=%.6g\n",
                vpntk::FormatDouble(r.privacy.epsilon).c_str(),
                vpntk::FormatDouble(r.privacy.delta).c_str(), r.privacy.sigma,
                r.privacy.noise_std);
  } else {
    std::printf("privacy       disabled\n");
  }
  std::printf("private reads %d (sealed: %s)\n", r.privacy.private_read_count,
              r.privacy.sealed ? "yes" : "no");
  if (!r.loss_trace.empty()) {
    std::printf("loss          %.6g -> %.6g over %zu steps\n", r.loss_trace.front(),
                r.loss_trace.back(), r.loss_trace.size());
  }
  std::printf("accuracy      %.4f\n", r.accuracy);
  std::printf("wall clock    %.1f s\n", r.wall_clock_seconds);
  for (const auto& [name, path] : r.artifacts) {
    std::printf("artifact      %-18s %s\n", name.c_str(), path.c_str());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Private synthetic data via visual prompting and NTK mean embeddings"};
  app.require_subcommand(1);

  ConfigFlags run_flags;
  CLI::App* run = app.add_subcommand("run", "Run one experiment");
  AddConfigFlags(run, run_flags);
  bool print_config = false;
  run->add_flag("--print-config", print_config, "Print the resolved config and exit");

  ConfigFlags sweep_flags;
  CLI::App* sweep = app.add_subcommand("sweep", "Ablation over one parameter");
  AddConfigFlags(sweep, sweep_flags);
  std::string parameter;
  std::string grid_text;
  int repeats = 3;
  std::string sweep_out = "ablation";
  sweep->add_option("--param", parameter, "kappa, eta, alpha or loss")->required();
  sweep->add_option("--grid", grid_text, "Comma-separated values (default: built-in grid)");
  sweep->add_option("--repeats", repeats, "Seed repeats per cell")->check(CLI::Range(3, 1000));
  sweep->add_option("--out", sweep_out, "Output stem for the table files");

  CLI::App* calibrate = app.add_subcommand("calibrate", "Print the noise multiplier for (eps, delta)");
  double epsilon = 1.0;
  double delta = 1e-5;
  int64_t m = 0;
  calibrate->add_option("--epsilon", epsilon)->required();
  calibrate->add_option("--delta", delta)->required();
  calibrate->add_option("--m", m, "Dataset size; also prints the per-entry noise std");

  CLI::App* inspect = app.add_subcommand("inspect", "Dump run records from a .jsonl file");
  std::string inspect_path;
  bool as_json = false;
  inspect->add_option("path", inspect_path)->required();
  inspect->add_flag("--json", as_json, "Print the raw records");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      const ExperimentConfig config = ResolveConfig(run, run_flags);
      if (print_config) {
        std::cout << vpntk::ToConfigText(config);
        return 0;
      }
      PrintRecord(vpntk::RunExperiment(config));
    } else if (sweep->parsed()) {
      const ExperimentConfig config = ResolveConfig(sweep, sweep_flags);
      const std::vector<std::string> grid =
          grid_text.empty() ? vpntk::DefaultGrid(parameter) : SplitList(grid_text);
      const vpntk::SweepOutcome outcome = vpntk::RunSweep(config, parameter, grid, repeats);
      vpntk::ExportAblation(outcome.result, sweep_out);
      vpntk::ExportResults(outcome.records, sweep_out + "_runs");
      for (const auto& cell : outcome.result.cells) {
        std::printf("%-8s %.4f +- %.4f (%zu ok, %zu failed)\n", cell.value.c_str(), cell.mean,
                    cell.std, cell.accuracies.size(), cell.errors.size());
        for (const std::string& e : cell.errors) std::printf("    %s\n", e.c_str());
      }
      std::printf("wrote %s.txt %s.jsonl %s_runs.txt %s_runs.jsonl\n", sweep_out.c_str(),
                  sweep_out.c_str(), sweep_out.c_str(), sweep_out.c_str());
    } else if (calibrate->parsed()) {
      const double sigma = vpntk::CalibrateNoiseMultiplier(epsilon, delta);
      std::printf("sigma %.17g\n", sigma);
      if (m > 0) {
        std::printf("noise_std %.17g\n", sigma * vpntk::EmbeddingSensitivity(m));
      }
    } else if (inspect->parsed()) {
      const std::vector<vpntk::RunRecord> records = vpntk::ReadRunRecords(inspect_path);
      for (size_t i = 0; i < records.size(); ++i) {
        if (as_json) {
          std::cout << vpntk::RecordToJson(records[i]).dump(2) << "\n";
        } else {
          if (i > 0) std::printf("\n");
          std::printf("record %zu\n", i);
          PrintRecord(records[i]);
        }
      }
    }
  } catch (const vpntk::Error& e) {
    std::fprintf(stderr, "vpntk: %s\n", e.what());
    return 2;
  }
  return 0;
}
