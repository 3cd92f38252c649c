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

#ifndef VPNTK_LOSSES_H_
#define VPNTK_LOSSES_H_

#include <string>

#include "vpntk/embeddings.h"
#include "vpntk/linalg.h"
#include "vpntk/vprompt.h"

namespace vpntk {

enum class LossMode { kMmd, kCosine, kMixed };

LossMode ParseLossMode(const std::string& name);
std::string LossModeName(LossMode mode);

struct LossConfig {
  LossMode mode = LossMode::kMixed;
  double alpha = 0.05;
  // Unit weights: "equal proportions" keeps each term at its own scale.
  double w_mmd = 1.0;
  double w_cos = 1.0;
  // Average per-class cosine instead of cosine on the flattened matrices.
  bool per_column_cosine = false;
  // Accept a clean (un-noised) target. Only for explicitly non-private runs.
  bool allow_clean_target = false;
};

// ||P - Q||_F^2. Errors: shape mismatch -> kInvalidArgument.
double MmdLoss(const Matrix& p, const Matrix& q);
// 1 - <vec P, vec Q> / (||P||_F ||Q||_F). Errors: zero-norm argument ->
// kDegenerateInput.
double CosineLoss(const Matrix& p, const Matrix& q);
// Mean over columns of 1 - cos(P_c, Q_c).
double ColumnCosineLoss(const Matrix& p, const Matrix& q);
// sum_c ||prompts[c]||_2^2. Alpha is applied by TotalLoss.
double PromptPenalty(const PromptBank& bank);

struct LossBreakdown {
  double total = 0.0;
  double mmd = 0.0;
  double cosine = 0.0;
  double penalty = 0.0;
  // d total / d mu_Q.
  Matrix grad_embedding;
  // Direct d total / d prompts (the penalty term only); the path through
  // mu_Q is added by PromptGradient.
  RowMatrix grad_prompts;
};

// mode mmd -> w_mmd * mmd; cosine -> w_cos * cosine; mixed -> both; plus
// alpha * PromptPenalty(bank) in every mode (bank may be null for the
// generator baseline). Errors: target not true_noisy (and not permitted
// clean) -> kPrivacyViolation.
LossBreakdown TotalLoss(const LossConfig& config, const MeanEmbedding& target,
                        const MeanEmbedding& synthetic, const PromptBank* bank);

}  // namespace vpntk

#endif  // VPNTK_LOSSES_H_
