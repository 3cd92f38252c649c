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

#include "vpntk/config.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "vpntk/error.h"

namespace vpntk {
namespace {

enum class FieldType { kString, kDouble, kInt, kBool, kSeed, kEnum, kIntList };

struct Field {
  const char* key;
  FieldType type;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

[[noreturn]] void BadValue(const std::string& key, const std::string& value) {
  Fail(ErrorCode::kInvalidArgument, "invalid value '" + value + "' for '" + key + "'");
}

double ParseDouble(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) BadValue(key, value);
    return v;
  } catch (const std::logic_error&) {
    BadValue(key, value);
  }
}

int64_t ParseInt(const std::string& key, const std::string& value) {
  int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) BadValue(key, value);
  return v;
}

uint64_t ParseSeed(const std::string& key, const std::string& value) {
  uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) BadValue(key, value);
  return v;
}

bool ParseBool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  BadValue(key, value);
}

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

#define VPNTK_STRING(name)                                                Field{#name, FieldType::kString,                                              [](const ExperimentConfig& c) { return c.name; },                       [](ExperimentConfig& c, const std::string& v) { c.name = v; }}
#define VPNTK_DOUBLE(name)                                                Field{#name, FieldType::kDouble,                                              [](const ExperimentConfig& c) { return FormatDouble(c.name); },         [](ExperimentConfig& c, const std::string& v) { c.name = ParseDouble(#name, v); }}
#define VPNTK_INT(name)                                                   Field{#name, FieldType::kInt,                                                 [](const ExperimentConfig& c) { return std::to_string(c.name); },         [](ExperimentConfig& c, const std::string& v) {                           c.name = static_cast<int>(ParseInt(#name, v)); }}
#define VPNTK_BOOL(name)                                                  Field{#name, FieldType::kBool,                                                [](const ExperimentConfig& c) { return std::string(c.name ? "true" : "false"); },         [](ExperimentConfig& c, const std::string& v) { c.name = ParseBool(#name, v); }}
#define VPNTK_SEED(name)                                                  Field{"seed_" #name, FieldType::kSeed,                                        [](const ExperimentConfig& c) { return std::to_string(c.seeds.name); },         [](ExperimentConfig& c, const std::string& v) {                           c.seeds.name = ParseSeed("seed_" #name, v); }}

const std::vector<Field>& Fields() {
  static const std::vector<Field> fields = {
      VPNTK_STRING(dataset),
      VPNTK_STRING(generator),
      VPNTK_STRING(extractor),
      VPNTK_DOUBLE(epsilon),
      VPNTK_DOUBLE(delta),
      VPNTK_BOOL(privacy_disabled),
      Field{"mode", FieldType::kEnum,
            [](const ExperimentConfig& c) { return PipelineModeName(c.mode); },
            [](ExperimentConfig& c, const std::string& v) { c.mode = ParsePipelineMode(v); }},
      Field{"prompt_space", FieldType::kEnum,
            [](const ExperimentConfig& c) { return PromptSpaceName(c.prompt_space); },
            [](ExperimentConfig& c, const std::string& v) { c.prompt_space = ParsePromptSpace(v); }},
      VPNTK_DOUBLE(kappa),
      VPNTK_DOUBLE(eta),
      VPNTK_DOUBLE(generator_eta),
      VPNTK_DOUBLE(alpha),
      Field{"loss", FieldType::kEnum,
            [](const ExperimentConfig& c) { return LossModeName(c.loss); },
            [](ExperimentConfig& c, const std::string& v) { c.loss = ParseLossMode(v); }},
      VPNTK_DOUBLE(w_mmd),
      VPNTK_DOUBLE(w_cos),
      VPNTK_BOOL(per_column_cosine),
      Field{"optimizer", FieldType::kEnum,
            [](const ExperimentConfig& c) { return OptimizerName(c.optimizer); },
            [](ExperimentConfig& c, const std::string& v) { c.optimizer = ParseOptimizer(v); }},
      VPNTK_BOOL(fixed_latents),
      VPNTK_INT(max_steps),
      VPNTK_INT(n_per_class),
      VPNTK_INT(synth_per_class),
      Field{"ntk_hidden", FieldType::kIntList,
            [](const ExperimentConfig& c) {
              std::string out;
              for (size_t i = 0; i < c.ntk_hidden.size(); ++i) {
                out += (i ? "," : "") + std::to_string(c.ntk_hidden[i]);
              }
              return out;
            },
            [](ExperimentConfig& c, const std::string& v) {
              std::vector<int> widths;
              std::stringstream ss(v);
              std::string item;
              while (std::getline(ss, item, ',')) {
                widths.push_back(static_cast<int>(ParseInt("ntk_hidden", Trim(item))));
              }
              c.ntk_hidden = std::move(widths);
            }},
      Field{"ntk_activation", FieldType::kEnum,
            [](const ExperimentConfig& c) { return ActivationName(c.ntk_activation); },
            [](ExperimentConfig& c, const std::string& v) { c.ntk_activation = ParseActivation(v); }},
      Field{"classifier", FieldType::kEnum,
            [](const ExperimentConfig& c) { return ClassifierKindName(c.classifier); },
            [](ExperimentConfig& c, const std::string& v) { c.classifier = ParseClassifierKind(v); }},
      VPNTK_SEED(data),
      VPNTK_SEED(backbone),
      VPNTK_SEED(init),
      VPNTK_SEED(noise),
      VPNTK_SEED(latents),
      VPNTK_SEED(mapping),
      VPNTK_SEED(downstream),
      VPNTK_STRING(output_dir),
  };
  return fields;
}

#undef VPNTK_STRING
#undef VPNTK_DOUBLE
#undef VPNTK_INT
#undef VPNTK_BOOL
#undef VPNTK_SEED

const Field* FindField(const std::string& key) {
  const std::string k = key == "loss_mode" ? "loss" : key;
  for (const Field& f : Fields()) {
    if (k == f.key) return &f;
  }
  return nullptr;
}

}  // namespace

PipelineMode ParsePipelineMode(const std::string& name) {
  if (name == "vp_ntk") return PipelineMode::kVpNtk;
  if (name == "dp_ntk_baseline") return PipelineMode::kDpNtkBaseline;
  Fail(ErrorCode::kInvalidArgument, "unknown mode '" + name + "'");
}

std::string PipelineModeName(PipelineMode mode) {
  return mode == PipelineMode::kVpNtk ? "vp_ntk" : "dp_ntk_baseline";
}

std::string FormatDouble(double value) {
  // Shortest text that parses back to the same double.
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

bool ExperimentConfig::operator==(const ExperimentConfig& other) const {
  return ToKeyValues(*this) == ToKeyValues(other);
}

const std::vector<std::string>& ConfigKeys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const Field& f : Fields()) k.emplace_back(f.key);
    return k;
  }();
  return keys;
}

void ApplyKeyValue(ExperimentConfig& config, const std::string& key,
                   const std::string& value) {
  const Field* field = FindField(key);
  if (field == nullptr) Fail(ErrorCode::kInvalidArgument, "unknown config key '" + key + "'");
  field->set(config, value);
}

ExperimentConfig ParseConfigText(const std::string& text, ExperimentConfig base) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      Fail(ErrorCode::kInvalidArgument,
           "config line " + std::to_string(line_no) + " is not 'key = value'");
    }
    ApplyKeyValue(base, Trim(line.substr(0, eq)), Trim(line.substr(eq + 1)));
  }
  return base;
}

ExperimentConfig LoadConfigFile(const std::string& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) Fail(ErrorCode::kNotFound, "cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseConfigText(ss.str(), std::move(base));
}

std::vector<std::pair<std::string, std::string>> ToKeyValues(
    const ExperimentConfig& config) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const Field& f : Fields()) out.emplace_back(f.key, f.get(config));
  return out;
}

std::string ToConfigText(const ExperimentConfig& config) {
  std::string out;
  for (const auto& [k, v] : ToKeyValues(config)) out += k + " = " + v + "\n";
  return out;
}

nlohmann::ordered_json ConfigToJson(const ExperimentConfig& config) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const Field& f : Fields()) {
    const std::string v = f.get(config);
    switch (f.type) {
      case FieldType::kDouble: j[f.key] = std::stod(v); break;
      case FieldType::kInt: j[f.key] = std::stoll(v); break;
      case FieldType::kSeed: j[f.key] = std::stoull(v); break;
      case FieldType::kBool: j[f.key] = (v == "true"); break;
      default: j[f.key] = v; break;
    }
  }
  return j;
}

ExperimentConfig ConfigFromJson(const nlohmann::json& json) {
  ExperimentConfig config;
  for (auto it = json.begin(); it != json.end(); ++it) {
    const nlohmann::json& v = it.value();
    std::string text;
    if (v.is_string()) {
      text = v.get<std::string>();
    } else if (v.is_boolean()) {
      text = v.get<bool>() ? "true" : "false";
    } else if (v.is_number_unsigned()) {
      text = std::to_string(v.get<uint64_t>());
    } else if (v.is_number_integer()) {
      text = std::to_string(v.get<int64_t>());
    } else if (v.is_number_float()) {
      text = FormatDouble(v.get<double>());
    } else {
      Fail(ErrorCode::kParseError, "config field '" + it.key() + "' has an unsupported type");
    }
    ApplyKeyValue(config, it.key(), text);
  }
  return config;
}

void ValidateConfig(const ExperimentConfig& c) {
  if (!c.privacy_disabled) {
    Require(c.epsilon > 0.0 && std::isfinite(c.epsilon), "epsilon must be finite and positive");
    Require(c.delta > 0.0 && c.delta < 1.0, "delta must lie in (0, 1)");
  }
  Require(c.kappa >= 0.0, "kappa must be nonnegative");
  Require(c.eta > 0.0 && c.generator_eta > 0.0, "learning rates must be positive");
  Require(c.alpha >= 0.0 && c.w_mmd >= 0.0 && c.w_cos >= 0.0, "loss weights must be nonnegative");
  Require(c.max_steps >= 0, "max_steps must be >= 0");
  Require(c.n_per_class >= 1 && c.synth_per_class >= 1, "per-class sample counts must be >= 1");
  for (int w : c.ntk_hidden) Require(w > 0, "ntk_hidden widths must be positive");
}

ExperimentConfig WithRepeat(ExperimentConfig config, int repeat) {
  const auto r = static_cast<uint64_t>(repeat);
  config.seeds.init += r;
  config.seeds.noise += r;
  config.seeds.latents += r;
  config.seeds.mapping += r;
  config.seeds.downstream += r;
  return config;
}

}  // namespace vpntk
