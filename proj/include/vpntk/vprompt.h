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

#ifndef VPNTK_VPROMPT_H_
#define VPNTK_VPROMPT_H_

#include <cstdint>
#include <string>
#include <vector>

#include "vpntk/checkpoint.h"
#include "vpntk/linalg.h"

namespace vpntk {

enum class PromptSpace { kFeature, kPixel };

PromptSpace ParsePromptSpace(const std::string& name);
std::string PromptSpaceName(PromptSpace space);

// Fixed assignment of private classes to generator condition classes. Built
// from class counts and a seed only, before any private data is read.
class LabelMapping {
 public:
  LabelMapping(std::vector<int> table, int num_source_classes, uint64_t seed);

  int operator()(int private_class) const;
  int num_private_classes() const { return static_cast<int>(table_.size()); }
  int num_source_classes() const { return num_source_classes_; }
  uint64_t seed() const { return seed_; }
  const std::vector<int>& table() const { return table_; }

 private:
  std::vector<int> table_;
  int num_source_classes_;
  uint64_t seed_;
};

// Seeded draw without replacement when num_source >= num_private (injective),
// with replacement otherwise.
LabelMapping RandomLabelMapping(int num_private_classes, int num_source_classes,
                                uint64_t seed);

// One trainable prompt row per private class; the effective perturbation is
// kappa * prompts.row(c).
struct PromptBank {
  RowMatrix prompts;
  double kappa = 0.0;
  PromptSpace space = PromptSpace::kFeature;

  int num_classes() const { return static_cast<int>(prompts.rows()); }
  int prompt_dim() const { return static_cast<int>(prompts.cols()); }
};

// Rows drawn i.i.d. N(0, 1e-4) from the "prompts/init" stream.
PromptBank InitPrompts(int num_private_classes, int prompt_dim,
                       PromptSpace space, double kappa, uint64_t seed);

// raw + kappa * prompts.row(private_class).
Vector ApplyPrompt(const PromptBank& bank, const Vector& raw, int private_class);

Checkpoint PromptsToCheckpoint(const PromptBank& bank);
PromptBank PromptsFromCheckpoint(const Checkpoint& checkpoint);

}  // namespace vpntk

#endif  // VPNTK_VPROMPT_H_
