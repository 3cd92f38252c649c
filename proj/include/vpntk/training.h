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

#ifndef VPNTK_TRAINING_H_
#define VPNTK_TRAINING_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vpntk/backbones.h"
#include "vpntk/embeddings.h"
#include "vpntk/losses.h"
#include "vpntk/ntk_features.h"
#include "vpntk/privacy.h"
#include "vpntk/vprompt.h"

namespace vpntk {

// Private training records. The contents are reachable only through
// AccessGuard::Read, which counts every pass and refuses reads once sealed.
class PrivateDataset {
 public:
  PrivateDataset(std::vector<Vector> images, std::vector<int> labels,
                 int num_classes, ImageShape shape);

  int64_t size() const { return static_cast<int64_t>(labels_.size()); }
  int num_classes() const { return num_classes_; }
  ImageShape shape() const { return shape_; }

 private:
  friend class AccessGuard;

  std::vector<Vector> images_;
  std::vector<int> labels_;
  int num_classes_;
  ImageShape shape_;
};

struct PrivateView {
  std::span<const Vector> images;
  std::span<const int> labels;
};

class AccessGuard {
 public:
  // Errors: sealed guard -> kPrivacyViolation.
  PrivateView Read(const PrivateDataset& dataset);
  void Seal() { sealed_ = true; }

  int private_read_count() const { return private_read_count_; }
  bool sealed() const { return sealed_; }

 private:
  int private_read_count_ = 0;
  bool sealed_ = false;
};

// One pass over the private data (FE -> phi -> per-class mean), Gaussian
// perturbation with standard deviation privacy.sigma * 2/m, then the guard is
// sealed. The clean embedding is moved into the perturbation and does not
// survive. Errors: sealed guard -> kPrivacyViolation; empty dataset or
// privacy.m != dataset size -> kInvalidArgument.
MeanEmbedding ReleasePrivateEmbedding(const PrivateDataset& dataset,
                                      const NtkFeatureMap& feature_map,
                                      const FeatureExtractor& extractor,
                                      const PrivacyParams& privacy,
                                      uint64_t noise_seed, AccessGuard& guard);

enum class Optimizer { kGradientDescent, kAdam };

Optimizer ParseOptimizer(const std::string& name);
std::string OptimizerName(Optimizer optimizer);

struct TrainOptions {
  double eta = 1e-2;
  int max_steps = 200;
  // Synthetic samples per private class in each step.
  int n_per_class = 64;
  LossConfig loss;
  uint64_t latent_seed = 0;
  // Reuse one latent draw for every step instead of fresh latents.
  bool fixed_latents = false;
  Optimizer optimizer = Optimizer::kGradientDescent;
};

struct TrainState {
  int step = 0;
  std::vector<double> loss_trace;
  double eta = 0.0;
  int max_steps = 0;
  uint64_t rng_seed = 0;
};

struct PromptTrainingResult {
  PromptBank bank;
  TrainState state;
  uint64_t generator_checksum_before = 0;
  uint64_t generator_checksum_after = 0;
  uint64_t extractor_checksum_before = 0;
  uint64_t extractor_checksum_after = 0;
};

// Optimizes only the prompt rows against the released embedding. Each step
// draws fresh latents (stream index = step) unless fixed_latents is set.
// Errors: non-finite loss -> kDivergence; unfrozen backbone ->
// kInvalidArgument; target kind -> kPrivacyViolation (via TotalLoss).
PromptTrainingResult TrainPrompts(const TrainOptions& options,
                                  const MeanEmbedding& target,
                                  const ConditionalGenerator& generator,
                                  const FeatureExtractor& extractor,
                                  const NtkFeatureMap& feature_map,
                                  PromptBank bank, const LabelMapping& mapping);

// One gradient evaluation of the prompt objective at `bank` (exposed for
// gradient checks and single-step tests).
struct PromptObjective {
  LossBreakdown loss;
  RowMatrix grad_prompts;
};
PromptObjective EvaluatePromptObjective(const TrainOptions& options,
                                        const MeanEmbedding& target,
                                        const ConditionalGenerator& generator,
                                        const FeatureExtractor& extractor,
                                        const NtkFeatureMap& feature_map,
                                        const PromptBank& bank,
                                        const LabelMapping& mapping,
                                        uint64_t stream_index);

// Small trainable class-conditional MLP generator for the DP-NTK baseline:
//   x = sigmoid(W2 tanh(W1 [z; onehot(y)] + b1) + b2).
class BaselineGenerator final : public ConditionalGenerator {
 public:
  struct Options {
    int latent_dim = 16;
    int num_classes = 3;
    int hidden = 128;
    ImageShape shape;
    uint64_t seed = 0;
  };

  explicit BaselineGenerator(const Options& options);
  explicit BaselineGenerator(const Checkpoint& checkpoint);

  int latent_dim() const override { return options_.latent_dim; }
  int num_source_classes() const override { return options_.num_classes; }
  ImageShape image_shape() const override { return options_.shape; }
  Vector Generate(const Vector& z, int source_class) const override;
  uint64_t Checksum() const override;
  bool frozen() const override { return false; }

  // Gradient of <grad_image, Generate(z, y)> w.r.t. the flat parameters.
  Vector ParameterVjp(const Vector& z, int source_class,
                      const Vector& grad_image) const;

  const Vector& parameters() const { return params_; }
  void set_parameters(const Vector& params);

  Checkpoint ToCheckpoint() const;

 private:
  Vector Input(const Vector& z, int source_class) const;

  Options options_;
  // W1 (hidden x in, row-major), b1, W2 (pixels x hidden, row-major), b2.
  Vector params_;
};

struct GeneratorTrainingResult {
  BaselineGenerator generator;
  TrainState state;
};

// Gradient descent on the MMD between the released pixel-space embedding and
// the generator's embedding (loss mode is forced to mmd, no penalty).
GeneratorTrainingResult TrainGeneratorDpNtk(const TrainOptions& options,
                                            const MeanEmbedding& target,
                                            BaselineGenerator generator,
                                            const NtkFeatureMap& feature_map);

// Loss and parameter gradient of the baseline objective for one latent draw.
struct GeneratorObjective {
  double loss = 0.0;
  Vector grad_params;
};
GeneratorObjective EvaluateGeneratorObjective(const TrainOptions& options,
                                              const MeanEmbedding& target,
                                              const BaselineGenerator& generator,
                                              const NtkFeatureMap& feature_map,
                                              uint64_t stream_index);

}  // namespace vpntk

#endif  // VPNTK_TRAINING_H_
