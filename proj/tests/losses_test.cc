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

#include <cmath>

#include <gtest/gtest.h>

#include "test_util.h"

namespace vpntk {
namespace {

using testing::ExpectErrorCode;

Matrix RandomMatrix(Rng& rng, int rows, int cols) {
  return Matrix::NullaryExpr(rows, cols, [&] { return rng.Normal(); });
}

MeanEmbedding Noisy(const Matrix& m) { return {m, EmbeddingKind::kTrueNoisy, 100}; }
MeanEmbedding Synthetic(const Matrix& m) { return {m, EmbeddingKind::kSynthetic, 30}; }

TEST(MmdLossTest, Examples) {
  Matrix p(2, 2);
  p << 1, 0, 0, 0;
  EXPECT_EQ(MmdLoss(p, p), 0.0);
  EXPECT_EQ(MmdLoss(p, Matrix::Zero(2, 2)), 1.0);
  ExpectErrorCode([&] { MmdLoss(p, Matrix::Zero(3, 2)); }, ErrorCode::kInvalidArgument);
}

TEST(MmdLossTest, MatchesDoubleLoopAndIsSymmetric) {
  Rng rng(1, "test/mmd");
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = RandomMatrix(rng, 8, 3);
    const Matrix b = RandomMatrix(rng, 8, 3);
    double sum = 0.0;
    for (int r = 0; r < 8; ++r) {
      for (int c = 0; c < 3; ++c) sum += (a(r, c) - b(r, c)) * (a(r, c) - b(r, c));
    }
    EXPECT_NEAR(MmdLoss(a, b), sum, 1e-12);
    EXPECT_EQ(MmdLoss(a, b), MmdLoss(b, a));
    EXPECT_GE(MmdLoss(a, b), 0.0);
  }
}

TEST(CosineLossTest, Examples) {
  Rng rng(2, "test/cos");
  const Matrix p = RandomMatrix(rng, 5, 2);
  EXPECT_NEAR(CosineLoss(p, 2.0 * p), 0.0, 1e-12);
  EXPECT_NEAR(CosineLoss(p, -p), 2.0, 1e-12);
  Matrix e1 = Matrix::Zero(3, 1), e2 = Matrix::Zero(3, 1);
  e1(0, 0) = 1.0;
  e2(1, 0) = 1.0;
  EXPECT_NEAR(CosineLoss(e1, e2), 1.0, 1e-15);
  ExpectErrorCode([&] { CosineLoss(p, Matrix::Zero(5, 2)); }, ErrorCode::kDegenerateInput);
}

TEST(CosineLossTest, PositiveScaleInvariance) {
  Rng rng(3, "test/cos-scale");
  const Matrix p = RandomMatrix(rng, 6, 3);
  const Matrix q = RandomMatrix(rng, 6, 3);
  for (double c : {1e-3, 1.0, 1e3}) {
    EXPECT_NEAR(CosineLoss(c * p, q), CosineLoss(p, q), 1e-12);
    EXPECT_NEAR(ColumnCosineLoss(c * p, q), ColumnCosineLoss(p, q), 1e-12);
  }
  const double v = CosineLoss(p, q);
  EXPECT_GE(v, 0.0);
  EXPECT_LE(v, 2.0);
}

TEST(ColumnCosineLossTest, AveragesColumns) {
  Matrix p(2, 2), q(2, 2);
  p << 1, 0, 0, 1;
  q << 1, 0, 0, -1;
  EXPECT_NEAR(ColumnCosineLoss(p, q), (0.0 + 2.0) / 2.0, 1e-15);
}

TEST(PromptPenaltyTest, Examples) {
  PromptBank bank = InitPrompts(2, 2, PromptSpace::kFeature, 1.0, 0);
  bank.prompts.setZero();
  EXPECT_EQ(PromptPenalty(bank), 0.0);
  PromptBank one = InitPrompts(1, 2, PromptSpace::kFeature, 1.0, 0);
  one.prompts << 3, 4;
  EXPECT_EQ(PromptPenalty(one), 25.0);
  Rng rng(4, "test/penalty");
  PromptBank random = InitPrompts(4, 6, PromptSpace::kFeature, 1.0, 0);
  random.prompts = RowMatrix::NullaryExpr(4, 6, [&] { return rng.Normal(); });
  double sum = 0.0;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 6; ++c) sum += random.prompts(r, c) * random.prompts(r, c);
  }
  EXPECT_NEAR(PromptPenalty(random), sum, 1e-12);
}

TEST(TotalLossTest, MixedIsZeroAtMatch) {
  Rng rng(5, "test/total");
  const Matrix p = RandomMatrix(rng, 5, 3);
  LossConfig cfg;
  cfg.alpha = 0.0;
  EXPECT_NEAR(TotalLoss(cfg, Noisy(p), Synthetic(p), nullptr).total, 0.0, 1e-12);
}

TEST(TotalLossTest, PenaltyContributesAlphaTimesNorm) {
  Rng rng(6, "test/total-pen");
  const Matrix p = RandomMatrix(rng, 4, 2);
  PromptBank bank = InitPrompts(2, 3, PromptSpace::kFeature, 1.0, 0);
  bank.prompts.setZero();
  bank.prompts(0, 0) = 1.0;
  LossConfig cfg;
  cfg.alpha = 1.0;
  cfg.mode = LossMode::kMmd;
  const LossBreakdown out = TotalLoss(cfg, Noisy(p), Synthetic(p), &bank);
  EXPECT_EQ(out.total, 1.0);
  EXPECT_EQ(out.penalty, 1.0);
  EXPECT_EQ(out.grad_prompts(0, 0), 2.0);
}

TEST(TotalLossTest, ModesCombineTerms) {
  Rng rng(7, "test/modes");
  const Matrix p = RandomMatrix(rng, 4, 2);
  const Matrix q = RandomMatrix(rng, 4, 2);
  LossConfig cfg;
  cfg.alpha = 0.0;
  cfg.w_mmd = 2.0;
  cfg.w_cos = 3.0;
  cfg.mode = LossMode::kMmd;
  EXPECT_NEAR(TotalLoss(cfg, Noisy(p), Synthetic(q), nullptr).total, 2.0 * MmdLoss(p, q), 1e-12);
  cfg.mode = LossMode::kCosine;
  EXPECT_NEAR(TotalLoss(cfg, Noisy(p), Synthetic(q), nullptr).total, 3.0 * CosineLoss(p, q), 1e-12);
  cfg.mode = LossMode::kMixed;
  EXPECT_NEAR(TotalLoss(cfg, Noisy(p), Synthetic(q), nullptr).total,
              2.0 * MmdLoss(p, q) + 3.0 * CosineLoss(p, q), 1e-12);
  cfg.per_column_cosine = true;
  EXPECT_NEAR(TotalLoss(cfg, Noisy(p), Synthetic(q), nullptr).total,
              2.0 * MmdLoss(p, q) + 3.0 * ColumnCosineLoss(p, q), 1e-12);
}

TEST(TotalLossTest, EmbeddingGradientMatchesFiniteDifferences) {
  Rng rng(8, "test/grad");
  const Matrix p = RandomMatrix(rng, 5, 3);
  const Matrix q = RandomMatrix(rng, 5, 3);
  for (LossMode mode : {LossMode::kMmd, LossMode::kCosine, LossMode::kMixed}) {
    for (bool per_column : {false, true}) {
      LossConfig cfg;
      cfg.mode = mode;
      cfg.per_column_cosine = per_column;
      const Matrix grad = TotalLoss(cfg, Noisy(p), Synthetic(q), nullptr).grad_embedding;
      const double h = 1e-6;
      Matrix fd(5, 3);
      for (int r = 0; r < 5; ++r) {
        for (int c = 0; c < 3; ++c) {
          Matrix up = q, down = q;
          up(r, c) += h;
          down(r, c) -= h;
          fd(r, c) = (TotalLoss(cfg, Noisy(p), Synthetic(up), nullptr).total -
                      TotalLoss(cfg, Noisy(p), Synthetic(down), nullptr).total) /
                     (2 * h);
        }
      }
      EXPECT_LE((grad - fd).norm() / fd.norm(), 1e-6) << LossModeName(mode) << per_column;
    }
  }
}

TEST(TotalLossTest, MonotoneInAlpha) {
  Rng rng(9, "test/alpha");
  const Matrix p = RandomMatrix(rng, 4, 2);
  const Matrix q = RandomMatrix(rng, 4, 2);
  const PromptBank bank = InitPrompts(2, 3, PromptSpace::kFeature, 1.0, 1);
  double last = -1.0;
  for (double alpha : {0.0, 0.01, 0.05, 0.1, 1.0}) {
    LossConfig cfg;
    cfg.alpha = alpha;
    const double v = TotalLoss(cfg, Noisy(p), Synthetic(q), &bank).total;
    EXPECT_GE(v, last);
    last = v;
  }
}

TEST(TotalLossTest, RefusesCleanTargetUnlessNonPrivate) {
  Rng rng(10, "test/clean");
  const Matrix p = RandomMatrix(rng, 3, 2);
  const MeanEmbedding clean{p, EmbeddingKind::kTrueClean, 10};
  LossConfig cfg;
  ExpectErrorCode([&] { TotalLoss(cfg, clean, Synthetic(p), nullptr); },
                  ErrorCode::kPrivacyViolation);
  ExpectErrorCode([&] { TotalLoss(cfg, Synthetic(p), Synthetic(p), nullptr); },
                  ErrorCode::kPrivacyViolation);
  cfg.allow_clean_target = true;
  EXPECT_NO_THROW(TotalLoss(cfg, clean, Synthetic(p), nullptr));
}

TEST(LossModeTest, ParsesNames) {
  EXPECT_EQ(ParseLossMode("mmd"), LossMode::kMmd);
  EXPECT_EQ(ParseLossMode("cosine"), LossMode::kCosine);
  EXPECT_EQ(ParseLossMode("mixed"), LossMode::kMixed);
  EXPECT_EQ(LossModeName(LossMode::kMixed), "mixed");
  ExpectErrorCode([] { ParseLossMode("sinkhorn"); }, ErrorCode::kInvalidArgument);
}

}  // namespace
}  // namespace vpntk
