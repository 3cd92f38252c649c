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

#ifndef VPNTK_EMBEDDINGS_H_
#define VPNTK_EMBEDDINGS_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vpntk/backbones.h"
#include "vpntk/linalg.h"
#include "vpntk/ntk_features.h"
#include "vpntk/rng.h"
#include "vpntk/vprompt.h"

namespace vpntk {

enum class EmbeddingKind { kTrueClean, kTrueNoisy, kSynthetic };

std::string EmbeddingKindName(EmbeddingKind kind);

// Per-class mean embedding, feature_dim x num_classes. Column c holds
// (1/count) * sum of the features labelled c.
struct MeanEmbedding {
  Matrix matrix;
  EmbeddingKind kind = EmbeddingKind::kTrueClean;
  int64_t count = 0;
};

// Errors: empty input, length mismatch, label out of range, non-unit feature
// -> kInvalidArgument.
MeanEmbedding TrueMeanEmbedding(std::span<const FeatureVector> features,
                                std::span<const int> labels, int num_classes);

// Adds i.i.d. N(0, (2 sigma / m)^2) noise to every entry, drawn from the
// dedicated "embedding/noise" stream. Takes the clean embedding by value so
// the caller can move it in and never hold the clean copy afterwards.
// Errors: kind != kTrueClean -> kInvalidState.
MeanEmbedding PerturbEmbedding(MeanEmbedding embedding, double sigma,
                               int64_t m, uint64_t seed);

// Uniform-balanced assignment of synthetic samples to private classes,
// class-major order.
std::vector<int> BalancedLabelPlan(int num_classes, int per_class);

// Standard normal latent from a stream.
Vector DrawLatent(Rng& rng, int latent_dim);

// Forward path of one synthetic sample.
struct SyntheticSample {
  int label = 0;
  // Feature mode: FE(G(z, map(y))). Pixel mode: G(z, map(y)).
  Vector raw;
  // Feature mode: raw + kappa * prompt. Pixel mode: clip01(raw + kappa *
  // prompt). This is the released payload.
  Vector prompted;
  // Input to the NTK feature map: `prompted` in feature mode,
  // FE(prompted) in pixel mode.
  Vector ntk_input;
};

SyntheticSample MakeSyntheticSample(const ConditionalGenerator& generator,
                                    const FeatureExtractor& extractor,
                                    const PromptBank& bank,
                                    const LabelMapping& mapping,
                                    const Vector& z, int private_class);

struct SyntheticPass {
  MeanEmbedding embedding;
  std::vector<SyntheticSample> samples;
  // phi(ntk_input) and the pre-normalization gradient norm, per sample.
  std::vector<FeatureVector> features;
  std::vector<double> gradient_norms;
};

// mu_Q = (1/n) sum_i phi(x'_i) y'_i^T over n = label_plan.size() samples.
// Latent z_i is the i-th draw of Rng(latent_seed, "latents", stream_index).
// Accumulation is in sample order, so the result is bit-stable.
SyntheticPass SyntheticMeanEmbedding(const ConditionalGenerator& generator,
                                     const FeatureExtractor& extractor,
                                     const PromptBank& bank,
                                     const LabelMapping& mapping,
                                     const NtkFeatureMap& feature_map,
                                     std::span<const int> label_plan,
                                     uint64_t latent_seed,
                                     uint64_t stream_index = 0);

// Chain rule from d(loss)/d(mu_Q) back to every prompt entry.
RowMatrix PromptGradient(const SyntheticPass& pass, const Matrix& grad_embedding,
                         const PromptBank& bank,
                         const FeatureExtractor& extractor,
                         const NtkFeatureMap& feature_map);

}  // namespace vpntk

#endif  // VPNTK_EMBEDDINGS_H_
