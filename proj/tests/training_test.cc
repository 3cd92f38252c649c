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

#include "vpntk/training.h"

#include <cmath>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "test_util.h"
#include "vpntk/dataset.h"

namespace vpntk {
namespace {

using testing::ExpectErrorCode;
using testing::RandomVector;
using testing::RelativeError;

ToyFeatureExtractor SmallExtractor(int feat_dim = 8) {
  ToyFeatureExtractor::Options o;
  o.feat_dim = feat_dim;
  return ToyFeatureExtractor(o);
}

PrivateDataset SmallPrivateData(int n, uint64_t seed = 0) {
  IngestedDataset toy = MakeToy3(seed);
  toy.train.images.resize(n);
  toy.train.labels.resize(n);
  return PrivateDataset(toy.train.images, toy.train.labels, 3, toy.shape);
}

TEST(AccessGuardTest, SecondReleaseIsPrivacyViolation) {
  const PrivateDataset data = SmallPrivateData(12);
  const ToyFeatureExtractor fe = SmallExtractor();
  const NtkFeatureMap map(testing::SmallNtk(8, 6));
  AccessGuard guard;
  const PrivacyParams privacy = PrivacyParams::Calibrated(1.0, 1e-5, data.size());
  ReleasePrivateEmbedding(data, map, fe, privacy, 0, guard);
  EXPECT_EQ(guard.private_read_count(), 1);
  EXPECT_TRUE(guard.sealed());
  ExpectErrorCode([&] { ReleasePrivateEmbedding(data, map, fe, privacy, 0, guard); },
                  ErrorCode::kPrivacyViolation);
  ExpectErrorCode([&] { guard.Read(data); }, ErrorCode::kPrivacyViolation);
  EXPECT_EQ(guard.private_read_count(), 1);
}

TEST(AccessGuardTest, ZeroNoiseReleaseEqualsTrueEmbedding) {
  const PrivateDataset data = SmallPrivateData(9);
  const ToyFeatureExtractor fe = SmallExtractor();
  const NtkFeatureMap map(testing::SmallNtk(8, 6));
  AccessGuard guard;
  const MeanEmbedding released =
      ReleasePrivateEmbedding(data, map, fe, PrivacyParams::Disabled(9), 0, guard);
  const IngestedDataset toy = MakeToy3(0);
  std::vector<FeatureVector> feats;
  std::vector<int> labels;
  for (int i = 0; i < 9; ++i) {
    feats.push_back(map.Feature(fe.Extract(toy.train.images[i])));
    labels.push_back(toy.train.labels[i]);
  }
  EXPECT_EQ(released.kind, EmbeddingKind::kTrueNoisy);
  EXPECT_LE((released.matrix - TrueMeanEmbedding(feats, labels, 3).matrix).cwiseAbs().maxCoeff(),
            1e-15);
}

TEST(AccessGuardTest, NoiseHasCalibratedScale) {
  const PrivateDataset data = SmallPrivateData(30);
  const ToyFeatureExtractor fe = SmallExtractor();
  const NtkFeatureMap map(testing::SmallNtk(8, 40));
  const PrivacyParams privacy = PrivacyParams::Calibrated(1.0, 1e-5, 30);
  AccessGuard g1, g2;
  const Matrix noisy = ReleasePrivateEmbedding(data, map, fe, privacy, 3, g1).matrix;
  const Matrix clean = ReleasePrivateEmbedding(data, map, fe, PrivacyParams::Disabled(30), 3, g2).matrix;
  const Matrix diff = noisy - clean;
  const double sd = std::sqrt(diff.array().square().mean());
  EXPECT_NEAR(sd, privacy.noise_std(), 0.1 * privacy.noise_std());
}

TEST(AccessGuardTest, RejectsEmptyOrMiscountedData) {
  const ToyFeatureExtractor fe = SmallExtractor();
  const NtkFeatureMap map(testing::SmallNtk(8, 6));
  const PrivateDataset empty({}, {}, 3, ImageShape{});
  AccessGuard guard;
  ExpectErrorCode([&] { ReleasePrivateEmbedding(empty, map, fe, PrivacyParams::Disabled(1), 0, guard); },
                  ErrorCode::kInvalidArgument);
  const PrivateDataset data = SmallPrivateData(5);
  AccessGuard other;
  ExpectErrorCode([&] { ReleasePrivateEmbedding(data, map, fe, PrivacyParams::Disabled(6), 0, other); },
                  ErrorCode::kInvalidArgument);
}

// Seeded micro pipeline: toy generator, 8-dim toy FE, small NTK map, a noisy
// target released from a slice of toy3.
struct Micro {
  ToyGenerator gen{ToyGenerator::Options{}};
  ToyFeatureExtractor fe = SmallExtractor();
  NtkFeatureMap map{testing::SmallNtk(8, 12)};
  LabelMapping mapping = RandomLabelMapping(3, 10, 0);
  MeanEmbedding target;

  Micro() {
    const PrivateDataset data = SmallPrivateData(60);
    AccessGuard guard;
    target = ReleasePrivateEmbedding(data, map, fe, PrivacyParams::Calibrated(1.0, 1e-5, 60), 0,
                                     guard);
  }

  TrainOptions Options(int steps) const {
    TrainOptions o;
    o.max_steps = steps;
    o.n_per_class = 3;
    return o;
  }
};

double ObjectiveAt(const Micro& p, const TrainOptions& o, const PromptBank& bank) {
  return EvaluatePromptObjective(o, p.target, p.gen, p.fe, p.map, bank, p.mapping, 0).loss.total;
}

Vector FlatFiniteDifference(const Micro& p, const TrainOptions& o, PromptBank bank, double h) {
  Vector fd(bank.prompts.size());
  int k = 0;
  for (int r = 0; r < bank.num_classes(); ++r) {
    for (int c = 0; c < bank.prompt_dim(); ++c, ++k) {
      const double keep = bank.prompts(r, c);
      bank.prompts(r, c) = keep + h;
      const double up = ObjectiveAt(p, o, bank);
      bank.prompts(r, c) = keep - h;
      const double down = ObjectiveAt(p, o, bank);
      bank.prompts(r, c) = keep;
      fd[k] = (up - down) / (2 * h);
    }
  }
  return fd;
}

Vector Flat(const RowMatrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

TEST(PromptObjectiveTest, GradientMatchesFiniteDifferencesInEveryMode) {
  const Micro p;
  for (LossMode mode : {LossMode::kMmd, LossMode::kCosine, LossMode::kMixed}) {
    TrainOptions o = p.Options(1);
    o.loss.mode = mode;
    const PromptBank bank = InitPrompts(3, 8, PromptSpace::kFeature, 16.0, 1);
    const RowMatrix grad =
        EvaluatePromptObjective(o, p.target, p.gen, p.fe, p.map, bank, p.mapping, 0).grad_prompts;
    EXPECT_LE(RelativeError(Flat(grad), FlatFiniteDifference(p, o, bank, 1e-5)), 1e-4)
        << LossModeName(mode);
  }
}

TEST(TrainPromptsTest, ZeroStepsReturnsBankUnchanged) {
  const Micro p;
  const PromptBank bank = InitPrompts(3, 8, PromptSpace::kFeature, 16.0, 1);
  const PromptTrainingResult r =
      TrainPrompts(p.Options(0), p.target, p.gen, p.fe, p.map, bank, p.mapping);
  EXPECT_EQ(r.bank.prompts, bank.prompts);
  EXPECT_TRUE(r.state.loss_trace.empty());
  EXPECT_EQ(r.state.step, 0);
}

TEST(TrainPromptsTest, SingleStepIsGradientDescent) {
  const Micro p;
  TrainOptions o = p.Options(1);
  o.eta = 1e-2;
  const PromptBank bank = InitPrompts(3, 8, PromptSpace::kFeature, 16.0, 2);
  const PromptTrainingResult r = TrainPrompts(o, p.target, p.gen, p.fe, p.map, bank, p.mapping);
  const Vector expected_update = -o.eta * FlatFiniteDifference(p, o, bank, 1e-5);
  EXPECT_LE(RelativeError(Flat(r.bank.prompts - bank.prompts), expected_update), 1e-3);
  ASSERT_EQ(r.state.loss_trace.size(), 1u);
  EXPECT_EQ(r.state.loss_trace[0], ObjectiveAt(p, o, bank));
}

TEST(TrainPromptsTest, StandardConfigurationReducesLossAndKeepsBackbonesFrozen) {
  // kappa 16, eta 1e-2, alpha 0.05, mixed loss, noiseless target, 200 steps.
  ToyGenerator gen{ToyGenerator::Options{}};
  ToyFeatureExtractor fe{ToyFeatureExtractor::Options{}};
  const NtkFeatureMap map(testing::SmallNtk(64, 64));
  IngestedDataset toy = MakeToy3(0);
  const PrivateDataset data(toy.train.images, toy.train.labels, 3, toy.shape);
  AccessGuard guard;
  const MeanEmbedding target =
      ReleasePrivateEmbedding(data, map, fe, PrivacyParams::Disabled(data.size()), 0, guard);
  TrainOptions o;
  o.n_per_class = 16;
  o.loss.allow_clean_target = true;
  ASSERT_EQ(o.eta, 1e-2);
  ASSERT_EQ(o.loss.alpha, 0.05);
  ASSERT_EQ(o.loss.mode, LossMode::kMixed);
  ASSERT_EQ(o.max_steps, 200);
  const LabelMapping mapping = RandomLabelMapping(3, 10, 0);
  const PromptTrainingResult r =
      TrainPrompts(o, target, gen, fe, map, InitPrompts(3, 64, PromptSpace::kFeature, 16.0, 0), mapping);
  ASSERT_EQ(r.state.loss_trace.size(), 200u);
  EXPECT_LT(r.state.loss_trace.back(), r.state.loss_trace.front());
  EXPECT_EQ(r.generator_checksum_before, r.generator_checksum_after);
  EXPECT_EQ(r.extractor_checksum_before, r.extractor_checksum_after);
  EXPECT_EQ(r.generator_checksum_after, gen.Checksum());
}

TEST(TrainPromptsTest, DeterministicUnderSeeds) {
  const Micro p;
  TrainOptions o = p.Options(8);
  const PromptBank bank = InitPrompts(3, 8, PromptSpace::kFeature, 16.0, 3);
  const auto a = TrainPrompts(o, p.target, p.gen, p.fe, p.map, bank, p.mapping);
  const auto b = TrainPrompts(o, p.target, p.gen, p.fe, p.map, bank, p.mapping);
  EXPECT_EQ(a.state.loss_trace, b.state.loss_trace);
  EXPECT_EQ(a.bank.prompts, b.bank.prompts);
  o.latent_seed = 1;
  const auto c = TrainPrompts(o, p.target, p.gen, p.fe, p.map, bank, p.mapping);
  EXPECT_NE(a.state.loss_trace, c.state.loss_trace);
}

TEST(TrainPromptsTest, FixedLatentsReuseOneDraw) {
  const Micro p;
  TrainOptions o = p.Options(2);
  o.fixed_latents = true;
  o.eta = 1e-12;
  const PromptBank bank = InitPrompts(3, 8, PromptSpace::kFeature, 16.0, 3);
  const auto r = TrainPrompts(o, p.target, p.gen, p.fe, p.map, bank, p.mapping);
  EXPECT_NEAR(r.state.loss_trace[0], r.state.loss_trace[1], 1e-9);
}

TEST(TrainPromptsTest, AdamAlsoDescends) {
  const Micro p;
  TrainOptions o = p.Options(30);
  o.optimizer = Optimizer::kAdam;
  o.fixed_latents = true;
  const PromptBank bank = InitPrompts(3, 8, PromptSpace::kFeature, 16.0, 3);
  const auto r = TrainPrompts(o, p.target, p.gen, p.fe, p.map, bank, p.mapping);
  EXPECT_LT(r.state.loss_trace.back(), r.state.loss_trace.front());
}

TEST(TrainPromptsTest, DivergenceReportsStepAndEta) {
  const Micro p;
  TrainOptions o = p.Options(400);
  o.eta = 1e3;
  o.loss.alpha = 1.0;
  try {
    TrainPrompts(o, p.target, p.gen, p.fe, p.map, InitPrompts(3, 8, PromptSpace::kFeature, 16.0, 0),
                 p.mapping);
    FAIL() << "expected divergence";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDivergence);
    EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("eta=1000"), std::string::npos);
  }
}

TEST(TrainPromptsTest, RejectsTrainableGenerator) {
  const Micro p;
  BaselineGenerator::Options bo;
  bo.num_classes = 10;
  const BaselineGenerator trainable(bo);
  ExpectErrorCode(
      [&] {
        TrainPrompts(p.Options(1), p.target, trainable, p.fe, p.map,
                     InitPrompts(3, 8, PromptSpace::kFeature, 16.0, 0), p.mapping);
      },
      ErrorCode::kInvalidArgument);
}

TEST(TrainPromptsTest, RejectsCleanTarget) {
  const Micro p;
  MeanEmbedding clean = p.target;
  clean.kind = EmbeddingKind::kTrueClean;
  ExpectErrorCode(
      [&] {
        TrainPrompts(p.Options(1), clean, p.gen, p.fe, p.map,
                     InitPrompts(3, 8, PromptSpace::kFeature, 16.0, 0), p.mapping);
      },
      ErrorCode::kPrivacyViolation);
}

// Generator whose parameter checksum changes between reads.
class DriftingGenerator final : public ConditionalGenerator {
 public:
  int latent_dim() const override { return inner_.latent_dim(); }
  int num_source_classes() const override { return inner_.num_source_classes(); }
  ImageShape image_shape() const override { return inner_.image_shape(); }
  Vector Generate(const Vector& z, int c) const override { return inner_.Generate(z, c); }
  uint64_t Checksum() const override { return ++reads_; }

 private:
  ToyGenerator inner_{ToyGenerator::Options{}};
  mutable uint64_t reads_ = 0;
};

TEST(TrainPromptsTest, DetectsBackboneChange) {
  const Micro p;
  const DriftingGenerator drifting;
  ExpectErrorCode(
      [&] {
        TrainPrompts(p.Options(1), p.target, drifting, p.fe, p.map,
                     InitPrompts(3, 8, PromptSpace::kFeature, 16.0, 0), p.mapping);
      },
      ErrorCode::kInvalidState);
}

TEST(OptimizerTest, ParsesNames) {
  EXPECT_EQ(ParseOptimizer("gd"), Optimizer::kGradientDescent);
  EXPECT_EQ(ParseOptimizer("adam"), Optimizer::kAdam);
  EXPECT_EQ(OptimizerName(Optimizer::kAdam), "adam");
  ExpectErrorCode([] { ParseOptimizer("sgd-momentum"); }, ErrorCode::kInvalidArgument);
}

BaselineGenerator::Options TinyBaseline() {
  BaselineGenerator::Options o;
  o.latent_dim = 3;
  o.num_classes = 2;
  o.hidden = 5;
  o.shape = ImageShape{1, 3, 3};
  o.seed = 4;
  return o;
}

TEST(BaselineGeneratorTest, ParameterVjpMatchesFiniteDifferences) {
  BaselineGenerator gen(TinyBaseline());
  Rng rng(1, "test/baseline-vjp");
  const Vector z = RandomVector(rng, 3);
  const Vector cot = RandomVector(rng, 9);
  const Vector theta = gen.parameters();
  const Vector fd = testing::CentralDifference(
      [&](const Vector& t) {
        BaselineGenerator g = gen;
        g.set_parameters(t);
        return cot.dot(g.Generate(z, 1));
      },
      theta, 1e-6);
  EXPECT_LE(RelativeError(gen.ParameterVjp(z, 1, cot), fd), 1e-6);
  const Vector x = gen.Generate(z, 0);
  EXPECT_GE(x.minCoeff(), 0.0);
  EXPECT_LE(x.maxCoeff(), 1.0);
}

TEST(BaselineGeneratorTest, CheckpointRoundTrip) {
  const BaselineGenerator gen(TinyBaseline());
  const BaselineGenerator back(gen.ToCheckpoint());
  const Vector z = Vector::Constant(3, 0.3);
  EXPECT_LE((back.Generate(z, 1) - gen.Generate(z, 1)).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_FALSE(gen.frozen());
  ExpectErrorCode([] { BaselineGenerator(ToyGenerator(ToyGenerator::Options{}).ToCheckpoint()); },
                  ErrorCode::kKindMismatch);
}

struct BaselineSetup {
  ImageShape shape{1, 3, 3};
  IdentityExtractor id{shape};
  NtkFeatureMap map{testing::SmallNtk(9, 7)};
  MeanEmbedding target;

  BaselineSetup() {
    Rng rng(2, "test/baseline-data");
    std::vector<Vector> images;
    std::vector<int> labels;
    for (int i = 0; i < 20; ++i) {
      Vector x(9);
      for (int k = 0; k < 9; ++k) x[k] = rng.Uniform();
      images.push_back(x);
      labels.push_back(i % 2);
    }
    const PrivateDataset data(images, labels, 2, shape);
    AccessGuard guard;
    target = ReleasePrivateEmbedding(data, map, id, PrivacyParams::Disabled(20), 0, guard);
  }
};

TEST(BaselineTrainingTest, ObjectiveGradientMatchesFiniteDifferences) {
  const BaselineSetup s;
  BaselineGenerator gen(TinyBaseline());
  TrainOptions o;
  o.n_per_class = 3;
  o.loss.allow_clean_target = true;
  const Vector grad = EvaluateGeneratorObjective(o, s.target, gen, s.map, 0).grad_params;
  const Vector fd = testing::CentralDifference(
      [&](const Vector& t) {
        BaselineGenerator g = gen;
        g.set_parameters(t);
        return EvaluateGeneratorObjective(o, s.target, g, s.map, 0).loss;
      },
      gen.parameters(), 1e-6);
  EXPECT_LE(RelativeError(grad, fd), 1e-4);
}

TEST(BaselineTrainingTest, ZeroStepsAndTraceLength) {
  const BaselineSetup s;
  TrainOptions o;
  o.n_per_class = 3;
  o.loss.allow_clean_target = true;
  o.max_steps = 0;
  const BaselineGenerator gen(TinyBaseline());
  EXPECT_EQ(TrainGeneratorDpNtk(o, s.target, gen, s.map).generator.parameters(), gen.parameters());
  o.max_steps = 7;
  EXPECT_EQ(TrainGeneratorDpNtk(o, s.target, gen, s.map).state.loss_trace.size(), 7u);
}

TEST(BaselineTrainingTest, MmdHalvesOnToy3) {
  // Noiseless toy3 release in pixel space, 500 plain GD steps.
  const IngestedDataset toy = MakeToy3(0);
  const IdentityExtractor id(toy.shape);
  NtkConfig nc = testing::SmallNtk(toy.shape.size(), 128);
  const NtkFeatureMap map(nc);
  const PrivateDataset data(toy.train.images, toy.train.labels, 3, toy.shape);
  AccessGuard guard;
  const MeanEmbedding target =
      ReleasePrivateEmbedding(data, map, id, PrivacyParams::Disabled(data.size()), 0, guard);
  TrainOptions o;
  o.eta = 10.0;
  o.max_steps = 500;
  o.n_per_class = 16;
  o.loss.allow_clean_target = true;
  BaselineGenerator::Options bo;
  bo.num_classes = 3;
  const GeneratorTrainingResult r = TrainGeneratorDpNtk(o, target, BaselineGenerator(bo), map);
  ASSERT_EQ(r.state.loss_trace.size(), 500u);
  EXPECT_LT(r.state.loss_trace.back(), 0.5 * r.state.loss_trace.front());
}

}  // namespace
}  // namespace vpntk
