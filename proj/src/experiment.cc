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

#include "vpntk/experiment.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <type_traits>

#include "vpntk/dataset.h"
#include "vpntk/error.h"
#include "vpntk/privacy.h"

namespace vpntk {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using ojson = nlohmann::ordered_json;

constexpr char kRecordSchema[] = "vpntk.run_record";
constexpr char kAblationSchema[] = "vpntk.ablation";

double Seconds(Clock::time_point from, Clock::time_point to) {
  return std::chrono::duration<double>(to - from).count();
}

// Image shape implied by checkpoint backbones; the builtin toys use the
// default 1x16x16.
ImageShape ResolveImageShape(const ExperimentConfig& config) {
  if (config.mode == PipelineMode::kVpNtk && config.prompt_space == PromptSpace::kFeature &&
      config.extractor != "toy") {
    const Checkpoint ckpt = ReadCheckpoint(config.extractor);
    if (ckpt.kind == CheckpointKind::kExtractor && ckpt.meta.size() >= 3) {
      return {static_cast<int>(ckpt.meta[0]), static_cast<int>(ckpt.meta[1]),
              static_cast<int>(ckpt.meta[2])};
    }
  }
  if (config.mode == PipelineMode::kVpNtk && config.generator != "toy") {
    const Checkpoint ckpt = ReadCheckpoint(config.generator);
    if (ckpt.kind == CheckpointKind::kGenerator && ckpt.meta.size() >= 6) {
      return {static_cast<int>(ckpt.meta[3]), static_cast<int>(ckpt.meta[4]),
              static_cast<int>(ckpt.meta[5])};
    }
  }
  return {};
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorCode::kIoError, "cannot write '" + path.string() + "'");
  out << text;
  if (!out.flush()) Fail(ErrorCode::kIoError, "write failed for '" + path.string() + "'");
}

void EnsureParent(const fs::path& path) {
  const fs::path parent = path.parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  fs::create_directories(parent, ec);
  if (ec) Fail(ErrorCode::kIoError, "cannot create '" + parent.string() + "': " + ec.message());
}

std::string Fixed(double value, int digits) {
  if (std::isnan(value)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, value);
  return buf;
}

std::string AlignedTable(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows) {
  std::vector<size_t> width(header.size());
  for (size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    std::string out;
    for (size_t i = 0; i < cells.size(); ++i) {
      std::string cell = cells[i];
      if (i + 1 < cells.size()) cell.resize(width[i], ' ');
      out += cell;
      if (i + 1 < cells.size()) out += "  ";
    }
    return out + "\n";
  };
  std::string out = line(header);
  for (const auto& row : rows) out += line(row);
  return out;
}

double JsonDouble(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

// Stage bookkeeping for one run.
class StageClock {
 public:
  StageClock(RunRecord& record, const AccessGuard& guard)
      : record_(record), guard_(guard), start_(Clock::now()) {}

  template <typename Fn>
  auto Run(const std::string& name, Fn&& fn) {
    current_ = name;
    const Clock::time_point begin = Clock::now();
    auto finish = [&] {
      const Clock::time_point end = Clock::now();
      record_.stages.push_back({name, Seconds(start_, begin), Seconds(begin, end),
                                guard_.private_read_count(), guard_.sealed()});
    };
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      finish();
    } else {
      auto result = fn();
      finish();
      return result;
    }
  }

  const std::string& current() const { return current_; }
  double elapsed() const { return Seconds(start_, Clock::now()); }

 private:
  RunRecord& record_;
  const AccessGuard& guard_;
  Clock::time_point start_;
  std::string current_;
};

void FillPrivacy(RunRecord& record, const PrivacyParams& params, const AccessGuard& guard) {
  record.privacy.enabled = params.enabled;
  record.privacy.epsilon = params.epsilon;
  record.privacy.delta = params.delta;
  record.privacy.sigma = params.sigma;
  record.privacy.sensitivity = params.sensitivity;
  record.privacy.noise_std = params.noise_std();
  record.privacy.m = params.m;
  record.privacy.private_read_count = guard.private_read_count();
  record.privacy.sealed = guard.sealed();
}

void Persist(RunRecord& record, const fs::path& dir) {
  record.artifacts.emplace_back("record", (dir / "record.jsonl").string());
  record.artifacts.emplace_back("results_table", (dir / "record.txt").string());
  ExportResults({record}, (dir / "record").string());
}

}  // namespace

RunRecord RunExperiment(const ExperimentConfig& config, const RunHooks& hooks) {
  RunRecord record;
  record.config = config;
  AccessGuard guard;
  StageClock clock(record, guard);
  const fs::path out_dir = config.output_dir;
  std::optional<PrivacyParams> privacy;

  try {
    ValidateConfig(config);
    const bool baseline = config.mode == PipelineMode::kDpNtkBaseline;
    const bool pixel = !baseline && config.prompt_space == PromptSpace::kPixel;

    IngestedDataset data = clock.Run("ingest", [&] {
      return IngestDataset(config.dataset, ResolveImageShape(config), config.seeds.data);
    });
    record.num_classes = data.num_classes;
    record.train_size = static_cast<int64_t>(data.train.size());
    record.test_size = static_cast<int64_t>(data.test.size());
    const int num_classes = data.num_classes;
    const ImageShape shape = data.shape;

    std::shared_ptr<const ConditionalGenerator> generator;
    std::shared_ptr<const FeatureExtractor> extractor;
    std::unique_ptr<NtkFeatureMap> feature_map;
    clock.Run("backbones", [&] {
      if (!baseline) {
        if (config.generator == "toy") {
          ToyGenerator::Options options;
          options.shape = shape;
          options.seed = config.seeds.backbone;
          generator = std::make_shared<ToyGenerator>(options);
        } else {
          generator = LoadGenerator(config.generator);
        }
        if (!(generator->image_shape() == shape)) {
          Fail(ErrorCode::kShapeMismatch, "generator image shape disagrees with the dataset");
        }
      }
      if (baseline || pixel) {
        // Pixel payloads go to the NTK map as flattened images.
        extractor = std::make_shared<IdentityExtractor>(shape);
      } else if (config.extractor == "toy") {
        ToyFeatureExtractor::Options options;
        options.shape = shape;
        options.seed = config.seeds.backbone;
        extractor = std::make_shared<ToyFeatureExtractor>(options);
      } else {
        extractor = LoadExtractor(config.extractor);
        if (!(extractor->image_shape() == shape)) {
          Fail(ErrorCode::kShapeMismatch, "extractor image shape disagrees with the dataset");
        }
      }
      NtkConfig ntk;
      ntk.input_dim = extractor->feat_dim();
      ntk.hidden_widths = config.ntk_hidden;
      ntk.init_seed = config.seeds.init;
      ntk.activation = config.ntk_activation;
      feature_map = std::make_unique<NtkFeatureMap>(ntk);
    });

    std::optional<LabelMapping> mapping;
    clock.Run("label_mapping", [&] {
      if (baseline) return;
      mapping = RandomLabelMapping(num_classes, generator->num_source_classes(),
                                   config.seeds.mapping);
      record.label_mapping = mapping->table();
    });

    PrivateDataset private_data(std::move(data.train.images), std::move(data.train.labels),
                                num_classes, shape);
    clock.Run("calibrate", [&] {
      privacy = config.privacy_disabled
                    ? PrivacyParams::Disabled(private_data.size())
                    : PrivacyParams::Calibrated(config.epsilon, config.delta,
                                                private_data.size());
      FillPrivacy(record, *privacy, guard);
    });

    MeanEmbedding target = clock.Run("release", [&] {
      MeanEmbedding released = ReleasePrivateEmbedding(private_data, *feature_map, *extractor,
                                                       *privacy, config.seeds.noise, guard);
      if (hooks.after_release) hooks.after_release(private_data, guard);
      FillPrivacy(record, *privacy, guard);
      return released;
    });

    TrainOptions train;
    train.eta = baseline ? config.generator_eta : config.eta;
    train.max_steps = config.max_steps;
    train.n_per_class = config.n_per_class;
    train.loss.mode = config.loss;
    train.loss.alpha = config.alpha;
    train.loss.w_mmd = config.w_mmd;
    train.loss.w_cos = config.w_cos;
    train.loss.per_column_cosine = config.per_column_cosine;
    train.loss.allow_clean_target = config.privacy_disabled;
    train.latent_seed = config.seeds.latents;
    train.fixed_latents = config.fixed_latents;
    train.optimizer = config.optimizer;

    std::optional<PromptBank> bank;
    std::optional<BaselineGenerator> trained_generator;
    clock.Run("train", [&] {
      if (baseline) {
        BaselineGenerator::Options options;
        options.num_classes = num_classes;
        options.shape = shape;
        options.seed = config.seeds.init;
        GeneratorTrainingResult result =
            TrainGeneratorDpNtk(train, target, BaselineGenerator(options), *feature_map);
        record.loss_trace = result.state.loss_trace;
        trained_generator.emplace(std::move(result.generator));
        record.extractor_checksum_before = record.extractor_checksum_after =
            extractor->Checksum();
        return;
      }
      const int prompt_dim = pixel ? shape.size() : extractor->feat_dim();
      PromptBank initial = InitPrompts(num_classes, prompt_dim, config.prompt_space,
                                       config.kappa, config.seeds.init);
      PromptTrainingResult result = TrainPrompts(train, target, *generator, *extractor,
                                                 *feature_map, std::move(initial), *mapping);
      record.loss_trace = result.state.loss_trace;
      record.generator_checksum_before = result.generator_checksum_before;
      record.generator_checksum_after = result.generator_checksum_after;
      record.extractor_checksum_before = result.extractor_checksum_before;
      record.extractor_checksum_after = result.extractor_checksum_after;
      bank.emplace(std::move(result.bank));
    });

    SyntheticDataset synthetic = clock.Run("synthesize", [&] {
      if (baseline) {
        return SynthesizeImages(*trained_generator, num_classes, config.synth_per_class,
                                config.seeds.downstream);
      }
      return SynthesizeDataset(*generator, *bank, *mapping, *extractor,
                               config.synth_per_class, config.seeds.downstream);
    });

    clock.Run("evaluate", [&] {
      std::unique_ptr<Classifier> classifier =
          TrainDownstream(synthetic, config.seeds.downstream, config.classifier);
      if (synthetic.kind == PayloadKind::kFeature) {
        std::vector<Vector> test_features;
        test_features.reserve(data.test.size());
        for (const Vector& image : data.test.images) test_features.push_back(extractor->Extract(image));
        record.accuracy = EvaluateAccuracy(*classifier, test_features, data.test.labels);
      } else {
        record.accuracy = EvaluateAccuracy(*classifier, data.test.images, data.test.labels);
      }
    });

    clock.Run("persist", [&] {
      if (out_dir.empty()) return;
      std::error_code ec;
      fs::create_directories(out_dir, ec);
      if (ec) Fail(ErrorCode::kIoError, "cannot create '" + out_dir.string() + "'");
      if (baseline) {
        const fs::path path = out_dir / "baseline_generator.ckpt";
        WriteCheckpoint(path.string(), trained_generator->ToCheckpoint());
        record.artifacts.emplace_back("baseline_generator", path.string());
      } else {
        const fs::path path = out_dir / "prompts.ckpt";
        WriteCheckpoint(path.string(), PromptsToCheckpoint(*bank));
        record.artifacts.emplace_back("prompts", path.string());
      }
      WriteText(out_dir / "config.txt", ToConfigText(config));
      record.artifacts.emplace_back("config", (out_dir / "config.txt").string());
      fs::remove(out_dir / "FAILED", ec);
    });
    record.wall_clock_seconds = clock.elapsed();
    if (!out_dir.empty()) Persist(record, out_dir);
    return record;
  } catch (const Error& e) {
    const std::string stage = clock.current().empty() ? "config" : clock.current();
    record.status = "failed";
    record.failed_stage = stage;
    record.error = e.what();
    record.wall_clock_seconds = clock.elapsed();
    if (privacy) FillPrivacy(record, *privacy, guard);
    if (!out_dir.empty()) {
      try {
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        WriteText(out_dir / "FAILED", "stage " + stage + "\n" + record.error + "\n");
        Persist(record, out_dir);
      } catch (const Error&) {
        // The original failure is the one worth reporting.
      }
    }
    throw Error(e.code(), "stage " + stage + ": " + e.detail());
  }
}

ojson RecordToJson(const RunRecord& r) {
  ojson j = ojson::object();
  j["schema"] = kRecordSchema;
  j["schema_version"] = kResultsSchemaVersion;
  j["status"] = r.status;
  j["failed_stage"] = r.failed_stage;
  j["error"] = r.error;
  j["config"] = ConfigToJson(r.config);
  j["privacy"] = {{"enabled", r.privacy.enabled},
                  {"epsilon", r.privacy.epsilon},
                  {"delta", r.privacy.delta},
                  {"sigma", r.privacy.sigma},
                  {"sensitivity", r.privacy.sensitivity},
                  {"noise_std", r.privacy.noise_std},
                  {"m", r.privacy.m},
                  {"private_read_count", r.privacy.private_read_count},
                  {"sealed", r.privacy.sealed}};
  j["accuracy"] = r.accuracy;
  j["num_classes"] = r.num_classes;
  j["train_size"] = r.train_size;
  j["test_size"] = r.test_size;
  j["label_mapping"] = r.label_mapping;
  j["checksums"] = {{"generator_before", r.generator_checksum_before},
                    {"generator_after", r.generator_checksum_after},
                    {"extractor_before", r.extractor_checksum_before},
                    {"extractor_after", r.extractor_checksum_after}};
  j["loss_trace"] = r.loss_trace;
  j["wall_clock_seconds"] = r.wall_clock_seconds;
  ojson stages = ojson::array();
  for (const StageRecord& s : r.stages) {
    stages.push_back({{"name", s.name},
                      {"start_seconds", s.start_seconds},
                      {"seconds", s.seconds},
                      {"private_reads", s.private_reads},
                      {"sealed", s.sealed}});
  }
  j["stages"] = stages;
  ojson artifacts = ojson::object();
  for (const auto& [name, path] : r.artifacts) artifacts[name] = path;
  j["artifacts"] = artifacts;
  return j;
}

RunRecord RecordFromJson(const nlohmann::ordered_json& j) {
  try {
    if (j.value("schema", std::string()) != kRecordSchema) {
      Fail(ErrorCode::kParseError, "not a run record");
    }
    if (j.at("schema_version").get<int>() != kResultsSchemaVersion) {
      Fail(ErrorCode::kVersionMismatch,
           "run record schema version " + j.at("schema_version").dump());
    }
    RunRecord r;
    r.status = j.at("status").get<std::string>();
    r.failed_stage = j.at("failed_stage").get<std::string>();
    r.error = j.at("error").get<std::string>();
    r.config = ConfigFromJson(j.at("config"));
    const auto& p = j.at("privacy");
    r.privacy.enabled = p.at("enabled").get<bool>();
    r.privacy.epsilon = JsonDouble(p.at("epsilon"));
    r.privacy.delta = JsonDouble(p.at("delta"));
    r.privacy.sigma = JsonDouble(p.at("sigma"));
    r.privacy.sensitivity = JsonDouble(p.at("sensitivity"));
    r.privacy.noise_std = JsonDouble(p.at("noise_std"));
    r.privacy.m = p.at("m").get<int64_t>();
    r.privacy.private_read_count = p.at("private_read_count").get<int>();
    r.privacy.sealed = p.at("sealed").get<bool>();
    r.accuracy = JsonDouble(j.at("accuracy"));
    r.num_classes = j.at("num_classes").get<int>();
    r.train_size = j.at("train_size").get<int64_t>();
    r.test_size = j.at("test_size").get<int64_t>();
    r.label_mapping = j.at("label_mapping").get<std::vector<int>>();
    const auto& c = j.at("checksums");
    r.generator_checksum_before = c.at("generator_before").get<uint64_t>();
    r.generator_checksum_after = c.at("generator_after").get<uint64_t>();
    r.extractor_checksum_before = c.at("extractor_before").get<uint64_t>();
    r.extractor_checksum_after = c.at("extractor_after").get<uint64_t>();
    for (const auto& v : j.at("loss_trace")) r.loss_trace.push_back(JsonDouble(v));
    r.wall_clock_seconds = JsonDouble(j.at("wall_clock_seconds"));
    for (const auto& s : j.at("stages")) {
      r.stages.push_back({s.at("name").get<std::string>(), JsonDouble(s.at("start_seconds")),
                          JsonDouble(s.at("seconds")), s.at("private_reads").get<int>(),
                          s.at("sealed").get<bool>()});
    }
    for (auto it = j.at("artifacts").begin(); it != j.at("artifacts").end(); ++it) {
      r.artifacts.emplace_back(it.key(), it.value().get<std::string>());
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kParseError, std::string("malformed run record: ") + e.what());
  }
}

void ExportResults(const std::vector<RunRecord>& records, const std::string& stem) {
  const fs::path base(stem);
  EnsureParent(base);
  std::vector<std::vector<std::string>> rows;
  for (size_t i = 0; i < records.size(); ++i) {
    const RunRecord& r = records[i];
    const ExperimentConfig& c = r.config;
    rows.push_back({std::to_string(i), PipelineModeName(c.mode), c.dataset,
                    r.privacy.enabled ? FormatDouble(c.epsilon) : "off",
                    r.privacy.enabled ? FormatDouble(c.delta) : "off",
                    Fixed(r.privacy.sigma, 6), FormatDouble(c.kappa), FormatDouble(c.eta),
                    FormatDouble(c.alpha), LossModeName(c.loss), std::to_string(c.max_steps),
                    std::to_string(r.privacy.private_read_count),
                    r.loss_trace.empty() ? "nan" : Fixed(r.loss_trace.back(), 6),
                    Fixed(r.accuracy, 4), r.status});
  }
  WriteText(base.string() + ".txt",
            AlignedTable({"run", "mode", "dataset", "epsilon", "delta", "sigma", "kappa", "eta",
                          "alpha", "loss", "steps", "reads", "final_loss", "accuracy", "status"},
                         rows));
  std::string jsonl = ojson{{"schema", kRecordSchema},
                            {"schema_version", kResultsSchemaVersion},
                            {"records", records.size()}}
                          .dump() +
                      "\n";
  for (const RunRecord& r : records) jsonl += RecordToJson(r).dump() + "\n";
  WriteText(base.string() + ".jsonl", jsonl);
}

std::vector<RunRecord> ReadRunRecords(const std::string& jsonl_path) {
  std::ifstream in(jsonl_path);
  if (!in) Fail(ErrorCode::kNotFound, "cannot read '" + jsonl_path + "'");
  std::vector<RunRecord> records;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::ordered_json j;
    try {
      j = nlohmann::ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      Fail(ErrorCode::kParseError, std::string("bad JSON line: ") + e.what());
    }
    if (header) {
      header = false;
      if (j.value("schema", std::string()) != kRecordSchema) {
        Fail(ErrorCode::kParseError, "'" + jsonl_path + "' is not a run record file");
      }
      if (j.value("schema_version", -1) != kResultsSchemaVersion) {
        Fail(ErrorCode::kVersionMismatch, "unsupported results schema version");
      }
      continue;
    }
    records.push_back(RecordFromJson(j));
  }
  if (header) Fail(ErrorCode::kParseError, "'" + jsonl_path + "' is empty");
  return records;
}

std::vector<std::string> DefaultGrid(const std::string& parameter) {
  if (parameter == "kappa") return {"2", "4", "8", "16", "32"};
  if (parameter == "eta") return {"1e-5", "1e-4", "1e-3", "1e-2", "0.1", "1"};
  if (parameter == "alpha") return {"0.01", "0.05", "0.1", "1"};
  if (parameter == "loss" || parameter == "loss_mode") return {"mmd", "mixed", "cosine"};
  Fail(ErrorCode::kInvalidArgument, "no default grid for '" + parameter + "'");
}

SweepOutcome RunSweep(const ExperimentConfig& base, const std::string& parameter,
                      const std::vector<std::string>& grid, int k,
                      const ExperimentRunner& runner) {
  {
    // Reject unknown parameters and bad values before any run starts.
    ExperimentConfig probe = base;
    for (const std::string& value : grid) ApplyKeyValue(probe, parameter, value);
  }
  SweepOutcome outcome;
  const ExperimentRunner run =
      runner ? runner : [](const ExperimentConfig& c) { return RunExperiment(c); };
  outcome.result = AggregateSweep(parameter, grid, k, [&](const std::string& value, int repeat) {
    ExperimentConfig config = WithRepeat(base, repeat);
    ApplyKeyValue(config, parameter, value);
    if (!base.output_dir.empty()) {
      config.output_dir =
          (fs::path(base.output_dir) / (parameter + "=" + value) / ("r" + std::to_string(repeat)))
              .string();
    }
    RunRecord record = run(config);
    outcome.records.push_back(record);
    return record.accuracy;
  });
  return outcome;
}

void ExportAblation(const AblationResult& result, const std::string& stem) {
  const fs::path base(stem);
  EnsureParent(base);
  std::vector<std::vector<std::string>> rows;
  std::string jsonl = ojson{{"schema", kAblationSchema},
                            {"schema_version", kResultsSchemaVersion},
                            {"parameter", result.parameter}}
                          .dump() +
                      "\n";
  for (const AblationCell& cell : result.cells) {
    rows.push_back({cell.value, Fixed(cell.mean, 4), Fixed(cell.std, 4),
                    std::to_string(cell.accuracies.size()), std::to_string(cell.errors.size())});
    jsonl += ojson{{"value", cell.value},
                   {"mean", cell.mean},
                   {"std", cell.std},
                   {"accuracies", cell.accuracies},
                   {"errors", cell.errors}}
                 .dump() +
             "\n";
  }
  WriteText(base.string() + ".txt",
            AlignedTable({"value", "mean", "std", "n", "failed"}, rows));
  WriteText(base.string() + ".jsonl", jsonl);
}

}  // namespace vpntk
