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

#include "vpntk/losses.h"

#include "vpntk/error.h"

namespace vpntk {
namespace {

void RequireSameShape(const Matrix& p, const Matrix& q) {
  if (p.rows() != q.rows() || p.cols() != q.cols()) {
    Fail(ErrorCode::kInvalidArgument, "embeddings differ in shape");
  }
}

// Value and gradient (w.r.t. q) of 1 - cos(p, q) for flattened blocks.
double CosineTerm(const Eigen::Ref<const Vector>& p, const Eigen::Ref<const Vector>& q,
                  Eigen::Ref<Vector> grad_q) {
  const double np = p.norm();
  const double nq = q.norm();
  if (np == 0.0 || nq == 0.0) {
    Fail(ErrorCode::kDegenerateInput, "cosine loss of a zero-norm embedding");
  }
  const double cos = p.dot(q) / (np * nq);
  grad_q = -(p / (np * nq) - cos * q / (nq * nq));
  return 1.0 - cos;
}

}  // namespace

LossMode ParseLossMode(const std::string& name) {
  if (name == "mmd") return LossMode::kMmd;
  if (name == "cosine") return LossMode::kCosine;
  if (name == "mixed") return LossMode::kMixed;
  Fail(ErrorCode::kInvalidArgument, "unknown loss mode '" + name + "'");
}

std::string LossModeName(LossMode mode) {
  switch (mode) {
    case LossMode::kMmd: return "mmd";
    case LossMode::kCosine: return "cosine";
    case LossMode::kMixed: return "mixed";
  }
  return "unknown";
}

double MmdLoss(const Matrix& p, const Matrix& q) {
  RequireSameShape(p, q);
  return (p - q).squaredNorm();
}

double CosineLoss(const Matrix& p, const Matrix& q) {
  RequireSameShape(p, q);
  Vector grad(p.size());
  return CosineTerm(p.reshaped(), q.reshaped(), grad);
}

double ColumnCosineLoss(const Matrix& p, const Matrix& q) {
  RequireSameShape(p, q);
  Vector grad(p.rows());
  double sum = 0.0;
  for (Eigen::Index c = 0; c < p.cols(); ++c) sum += CosineTerm(p.col(c), q.col(c), grad);
  return sum / static_cast<double>(p.cols());
}

double PromptPenalty(const PromptBank& bank) { return bank.prompts.squaredNorm(); }

LossBreakdown TotalLoss(const LossConfig& config, const MeanEmbedding& target,
                        const MeanEmbedding& synthetic, const PromptBank* bank) {
  const bool noisy = target.kind == EmbeddingKind::kTrueNoisy;
  const bool clean_ok =
      target.kind == EmbeddingKind::kTrueClean && config.allow_clean_target;
  if (!noisy && !clean_ok) {
    Fail(ErrorCode::kPrivacyViolation,
         "loss target must be the released noisy embedding, got " +
             EmbeddingKindName(target.kind));
  }
  Require(config.alpha >= 0.0 && config.w_mmd >= 0.0 && config.w_cos >= 0.0,
          "loss weights must be nonnegative");
  const Matrix& p = target.matrix;
  const Matrix& q = synthetic.matrix;
  RequireSameShape(p, q);

  LossBreakdown out;
  out.grad_embedding = Matrix::Zero(q.rows(), q.cols());
  const bool use_mmd = config.mode != LossMode::kCosine;
  const bool use_cos = config.mode != LossMode::kMmd;
  if (use_mmd) {
    out.mmd = MmdLoss(p, q);
    out.total += config.w_mmd * out.mmd;
    out.grad_embedding += config.w_mmd * 2.0 * (q - p);
  }
  if (use_cos) {
    Matrix grad(q.rows(), q.cols());
    if (config.per_column_cosine) {
      const double cols = static_cast<double>(q.cols());
      for (Eigen::Index c = 0; c < q.cols(); ++c) {
        out.cosine += CosineTerm(p.col(c), q.col(c), grad.col(c)) / cols;
      }
      grad /= cols;
    } else {
      out.cosine = CosineTerm(p.reshaped(), q.reshaped(), grad.reshaped());
    }
    out.total += config.w_cos * out.cosine;
    out.grad_embedding += config.w_cos * grad;
  }
  if (bank != nullptr) {
    out.penalty = PromptPenalty(*bank);
    out.total += config.alpha * out.penalty;
    out.grad_prompts = 2.0 * config.alpha * bank->prompts;
  }
  return out;
}

}  // namespace vpntk
