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

#include "vpntk/vprompt.h"

#include <numeric>
#include <sstream>

#include "vpntk/error.h"
#include "vpntk/rng.h"

namespace vpntk {

namespace {
constexpr double kPromptInitStd = 1e-2;
}  // namespace

PromptSpace ParsePromptSpace(const std::string& name) {
  if (name == "feature") return PromptSpace::kFeature;
  if (name == "pixel") return PromptSpace::kPixel;
  Fail(ErrorCode::kInvalidArgument, "unknown prompt space '" + name + "'");
}

std::string PromptSpaceName(PromptSpace space) {
  return space == PromptSpace::kFeature ? "feature" : "pixel";
}

LabelMapping::LabelMapping(std::vector<int> table, int num_source_classes,
                           uint64_t seed)
    : table_(std::move(table)), num_source_classes_(num_source_classes), seed_(seed) {
  Require(!table_.empty() && num_source_classes_ > 0,
          "label mapping needs at least one class on each side");
  for (int t : table_) {
    Require(t >= 0 && t < num_source_classes_, "label mapping entry out of range");
  }
}

int LabelMapping::operator()(int private_class) const {
  if (private_class < 0 || private_class >= num_private_classes()) {
    std::ostringstream oss;
    oss << "no label mapping entry for private class " << private_class;
    Fail(ErrorCode::kInvalidState, oss.str());
  }
  return table_[private_class];
}

LabelMapping RandomLabelMapping(int num_private_classes, int num_source_classes,
                                uint64_t seed) {
  if (num_private_classes <= 0 || num_source_classes <= 0) {
    Fail(ErrorCode::kInvalidArgument, "label mapping needs nonzero class counts");
  }
  Rng rng(seed, "label_mapping");
  std::vector<int> table(num_private_classes);
  if (num_source_classes >= num_private_classes) {
    // Partial Fisher-Yates over the source classes.
    std::vector<int> pool(num_source_classes);
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < num_private_classes; ++i) {
      const int j = i + static_cast<int>(rng.Below(num_source_classes - i));
      std::swap(pool[i], pool[j]);
      table[i] = pool[i];
    }
  } else {
    for (int& t : table) t = static_cast<int>(rng.Below(num_source_classes));
  }
  return LabelMapping(std::move(table), num_source_classes, seed);
}

PromptBank InitPrompts(int num_private_classes, int prompt_dim,
                       PromptSpace space, double kappa, uint64_t seed) {
  Require(num_private_classes >= 1 && prompt_dim >= 1,
          "prompt bank dimensions must be >= 1");
  Require(kappa >= 0.0, "kappa must be nonnegative");
  Rng rng(seed, "prompts/init");
  PromptBank bank;
  bank.prompts.resize(num_private_classes, prompt_dim);
  for (int r = 0; r < num_private_classes; ++r)
    for (int c = 0; c < prompt_dim; ++c)
      bank.prompts(r, c) = kPromptInitStd * rng.Normal();
  bank.kappa = kappa;
  bank.space = space;
  return bank;
}

Vector ApplyPrompt(const PromptBank& bank, const Vector& raw, int private_class) {
  if (raw.size() != bank.prompt_dim()) {
    Fail(ErrorCode::kInvalidArgument, "raw vector does not match prompt_dim");
  }
  Require(private_class >= 0 && private_class < bank.num_classes(),
          "private class out of range for prompt bank");
  return raw + bank.kappa * bank.prompts.row(private_class).transpose();
}

Checkpoint PromptsToCheckpoint(const PromptBank& bank) {
  Tensor prompts{{bank.num_classes(), bank.prompt_dim()}, {}};
  prompts.data.reserve(static_cast<size_t>(bank.prompts.size()));
  for (int r = 0; r < bank.num_classes(); ++r)
    for (int c = 0; c < bank.prompt_dim(); ++c)
      prompts.data.push_back(static_cast<float>(bank.prompts(r, c)));
  Tensor kappa{{1}, {static_cast<float>(bank.kappa)}};
  return Checkpoint{CheckpointKind::kPrompts,
                    {bank.num_classes(), bank.prompt_dim(),
                     bank.space == PromptSpace::kFeature ? 0 : 1},
                    {std::move(prompts), std::move(kappa)}};
}

PromptBank PromptsFromCheckpoint(const Checkpoint& checkpoint) {
  if (checkpoint.kind != CheckpointKind::kPrompts) {
    Fail(ErrorCode::kKindMismatch, "checkpoint does not hold prompts");
  }
  if (checkpoint.meta.size() != 3 || checkpoint.tensors.size() != 2) {
    Fail(ErrorCode::kShapeMismatch, "prompt checkpoint has the wrong layout");
  }
  const int64_t rows = checkpoint.meta[0];
  const int64_t cols = checkpoint.meta[1];
  if (checkpoint.tensors[0].shape != std::vector<int64_t>{rows, cols} ||
      checkpoint.tensors[1].shape != std::vector<int64_t>{1}) {
    Fail(ErrorCode::kShapeMismatch, "prompt tensor shapes disagree with header");
  }
  PromptBank bank;
  bank.prompts.resize(rows, cols);
  for (int64_t i = 0; i < rows * cols; ++i)
    bank.prompts.data()[i] = checkpoint.tensors[0].data[static_cast<size_t>(i)];
  bank.kappa = checkpoint.tensors[1].data[0];
  bank.space = checkpoint.meta[2] == 0 ? PromptSpace::kFeature : PromptSpace::kPixel;
  return bank;
}

}  // namespace vpntk
