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

#include "vpntk/embeddings.h"

#include <cmath>
#include <sstream>

#include "vpntk/error.h"
#include "vpntk/rng.h"

namespace vpntk {
namespace {
constexpr double kUnitNormTolerance = 1e-6;
}  // namespace

std::string EmbeddingKindName(EmbeddingKind kind) {
  switch (kind) {
    case EmbeddingKind::kTrueClean: return "true_clean";
    case EmbeddingKind::kTrueNoisy: return "true_noisy";
    case EmbeddingKind::kSynthetic: return "synthetic";
  }
  return "unknown";
}

MeanEmbedding TrueMeanEmbedding(std::span<const FeatureVector> features,
                                std::span<const int> labels, int num_classes) {
  if (features.empty()) Fail(ErrorCode::kInvalidArgument, "no features to embed");
  Require(features.size() == labels.size(), "features and labels differ in length");
  Require(num_classes >= 1, "num_classes must be >= 1");
  const auto dim = features.front().values.size();
  const double m = static_cast<double>(features.size());
  MeanEmbedding out{Matrix::Zero(dim, num_classes), EmbeddingKind::kTrueClean,
                    static_cast<int64_t>(features.size())};
  for (size_t i = 0; i < features.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || y >= num_classes) {
      std::ostringstream oss;
      oss << "label " << y << " of record " << i << " outside [0, " << num_classes << ")";
      Fail(ErrorCode::kInvalidArgument, oss.str());
    }
    const Vector& f = features[i].values;
    Require(f.size() == dim, "features differ in dimension");
    if (std::abs(f.norm() - 1.0) > kUnitNormTolerance) {
      Fail(ErrorCode::kInvalidArgument, "feature is not unit-norm");
    }
    out.matrix.col(y) += f / m;
  }
  return out;
}

MeanEmbedding PerturbEmbedding(MeanEmbedding embedding, double sigma, int64_t m,
                               uint64_t seed) {
  if (embedding.kind != EmbeddingKind::kTrueClean) {
    Fail(ErrorCode::kInvalidState, "only a clean true embedding can be perturbed, got " +
                                       EmbeddingKindName(embedding.kind));
  }
  Require(sigma >= 0.0 && std::isfinite(sigma), "sigma must be finite and >= 0");
  Require(m >= 1, "m must be >= 1");
  if (sigma > 0.0) {
    const double stddev = 2.0 * sigma / static_cast<double>(m);
    Rng rng(seed, "embedding/noise");
    // Column-major fill order is part of the reproducibility contract.
    double* data = embedding.matrix.data();
    for (Eigen::Index i = 0; i < embedding.matrix.size(); ++i) {
      data[i] += stddev * rng.Normal();
    }
  }
  embedding.kind = EmbeddingKind::kTrueNoisy;
  return embedding;
}

std::vector<int> BalancedLabelPlan(int num_classes, int per_class) {
  Require(num_classes >= 1 && per_class >= 1, "label plan sizes must be >= 1");
  std::vector<int> plan;
  plan.reserve(static_cast<size_t>(num_classes) * per_class);
  for (int c = 0; c < num_classes; ++c) plan.insert(plan.end(), per_class, c);
  return plan;
}

Vector DrawLatent(Rng& rng, int latent_dim) {
  Vector z(latent_dim);
  for (int i = 0; i < latent_dim; ++i) z(i) = rng.Normal();
  return z;
}

SyntheticSample MakeSyntheticSample(const ConditionalGenerator& generator,
                                    const FeatureExtractor& extractor,
                                    const PromptBank& bank,
                                    const LabelMapping& mapping,
                                    const Vector& z, int private_class) {
  SyntheticSample s;
  s.label = private_class;
  const Vector image = generator.Generate(z, mapping(private_class));
  if (bank.space == PromptSpace::kFeature) {
    s.raw = extractor.Extract(image);
    s.prompted = ApplyPrompt(bank, s.raw, private_class);
    s.ntk_input = s.prompted;
  } else {
    s.raw = image;
    s.prompted = ApplyPrompt(bank, s.raw, private_class).cwiseMax(0.0).cwiseMin(1.0);
    s.ntk_input = extractor.Extract(s.prompted);
  }
  return s;
}

SyntheticPass SyntheticMeanEmbedding(const ConditionalGenerator& generator,
                                     const FeatureExtractor& extractor,
                                     const PromptBank& bank,
                                     const LabelMapping& mapping,
                                     const NtkFeatureMap& feature_map,
                                     std::span<const int> label_plan,
                                     uint64_t latent_seed,
                                     uint64_t stream_index) {
  if (label_plan.empty()) Fail(ErrorCode::kInvalidArgument, "synthetic sample count n must be >= 1");
  const int num_classes = bank.num_classes();
  const double n = static_cast<double>(label_plan.size());
  SyntheticPass pass;
  pass.embedding = {Matrix::Zero(feature_map.feature_dim(), num_classes),
                    EmbeddingKind::kSynthetic,
                    static_cast<int64_t>(label_plan.size())};
  pass.samples.reserve(label_plan.size());
  pass.features.reserve(label_plan.size());
  pass.gradient_norms.reserve(label_plan.size());
  Rng rng(latent_seed, "latents", stream_index);
  for (int y : label_plan) {
    Require(y >= 0 && y < num_classes, "label plan entry out of range");
    const Vector z = DrawLatent(rng, generator.latent_dim());
    SyntheticSample s = MakeSyntheticSample(generator, extractor, bank, mapping, z, y);
    double norm = 0.0;
    FeatureVector phi = feature_map.Feature(s.ntk_input, &norm);
    pass.embedding.matrix.col(y) += phi.values / n;
    pass.samples.push_back(std::move(s));
    pass.features.push_back(std::move(phi));
    pass.gradient_norms.push_back(norm);
  }
  return pass;
}

RowMatrix PromptGradient(const SyntheticPass& pass, const Matrix& grad_embedding,
                         const PromptBank& bank,
                         const FeatureExtractor& extractor,
                         const NtkFeatureMap& feature_map) {
  if (grad_embedding.rows() != pass.embedding.matrix.rows() ||
      grad_embedding.cols() != pass.embedding.matrix.cols()) {
    Fail(ErrorCode::kInvalidArgument, "embedding gradient has the wrong shape");
  }
  const double n = static_cast<double>(pass.samples.size());
  RowMatrix grad = RowMatrix::Zero(bank.num_classes(), bank.prompt_dim());
  for (size_t i = 0; i < pass.samples.size(); ++i) {
    const SyntheticSample& s = pass.samples[i];
    const Vector v = grad_embedding.col(s.label) / n;
    const Vector g_input = feature_map.FeatureInputVjp(
        s.ntk_input, pass.features[i], pass.gradient_norms[i], v);
    if (bank.space == PromptSpace::kFeature) {
      grad.row(s.label) += bank.kappa * g_input.transpose();
    } else {
      Vector g_image = extractor.Vjp(s.prompted, g_input);
      // Clipping passes gradient only where the prompted pixel is interior.
      const Vector unclipped = ApplyPrompt(bank, s.raw, s.label);
      for (Eigen::Index p = 0; p < g_image.size(); ++p) {
        if (unclipped(p) <= 0.0 || unclipped(p) >= 1.0) g_image(p) = 0.0;
      }
      grad.row(s.label) += bank.kappa * g_image.transpose();
    }
  }
  return grad;
}

}  // namespace vpntk
