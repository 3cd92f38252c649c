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
#include <sstream>

#include "vpntk/error.h"
#include "vpntk/rng.h"

namespace vpntk {

PrivateDataset::PrivateDataset(std::vector<Vector> images, std::vector<int> labels,
                               int num_classes, ImageShape shape)
    : images_(std::move(images)),
      labels_(std::move(labels)),
      num_classes_(num_classes),
      shape_(shape) {
  Require(images_.size() == labels_.size(), "images and labels differ in length");
  Require(num_classes_ >= 1, "num_classes must be >= 1");
  for (size_t i = 0; i < images_.size(); ++i) {
    Require(images_[i].size() == shape_.size(), "private image has the wrong shape");
    Require(labels_[i] >= 0 && labels_[i] < num_classes_, "private label out of range");
  }
}

PrivateView AccessGuard::Read(const PrivateDataset& dataset) {
  if (sealed_) {
    Fail(ErrorCode::kPrivacyViolation,
         "private dataset read after the noisy embedding was released");
  }
  ++private_read_count_;
  return PrivateView{dataset.images_, dataset.labels_};
}

MeanEmbedding ReleasePrivateEmbedding(const PrivateDataset& dataset,
                                      const NtkFeatureMap& feature_map,
                                      const FeatureExtractor& extractor,
                                      const PrivacyParams& privacy,
                                      uint64_t noise_seed, AccessGuard& guard) {
  if (guard.sealed()) {
    Fail(ErrorCode::kPrivacyViolation, "the private embedding was already released");
  }
  if (dataset.size() == 0) Fail(ErrorCode::kInvalidArgument, "private dataset is empty");
  if (privacy.m != dataset.size()) {
    std::ostringstream oss;
    oss << "privacy parameters were calibrated for m=" << privacy.m
        << " but the dataset holds " << dataset.size() << " records";
    Fail(ErrorCode::kInvalidArgument, oss.str());
  }
  if (privacy.enabled && !(privacy.sigma > 0.0)) {
    Fail(ErrorCode::kInvalidArgument, "privacy is enabled but sigma is not positive");
  }

  const PrivateView view = guard.Read(dataset);
  std::vector<FeatureVector> features;
  features.reserve(view.images.size());
  for (const Vector& image : view.images) {
    features.push_back(feature_map.Feature(extractor.Extract(image)));
  }
  MeanEmbedding noisy = PerturbEmbedding(
      TrueMeanEmbedding(features, view.labels, dataset.num_classes()),
      privacy.sigma, dataset.size(), noise_seed);
  for (FeatureVector& f : features) f.values.setZero();
  guard.Seal();
  return noisy;
}

Optimizer ParseOptimizer(const std::string& name) {
  if (name == "gd") return Optimizer::kGradientDescent;
  if (name == "adam") return Optimizer::kAdam;
  Fail(ErrorCode::kInvalidArgument, "unknown optimizer '" + name + "'");
}

std::string OptimizerName(Optimizer optimizer) {
  return optimizer == Optimizer::kGradientDescent ? "gd" : "adam";
}

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

// Applies one optimizer step to a flat parameter block.
template <typename Block>
class Stepper {
 public:
  Stepper(Optimizer optimizer, double eta, const Block& like)
      : optimizer_(optimizer), eta_(eta) {
    if (optimizer_ == Optimizer::kAdam) {
      m_ = Block::Zero(like.rows(), like.cols());
      v_ = Block::Zero(like.rows(), like.cols());
    }
  }

  void Step(Block& params, const Block& grad) {
    if (optimizer_ == Optimizer::kGradientDescent) {
      params -= eta_ * grad;
      return;
    }
    ++t_;
    m_ = kAdamBeta1 * m_ + (1.0 - kAdamBeta1) * grad;
    v_ = kAdamBeta2 * v_ + (1.0 - kAdamBeta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(kAdamBeta1, t_);
    const double c2 = 1.0 - std::pow(kAdamBeta2, t_);
    params.array() -=
        eta_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + kAdamEps);
  }

 private:
  Optimizer optimizer_;
  double eta_;
  Block m_, v_;
  int t_ = 0;
};

void ValidateOptions(const TrainOptions& options) {
  Require(options.eta > 0.0 && std::isfinite(options.eta), "eta must be positive");
  Require(options.max_steps >= 0, "max_steps must be >= 0");
  Require(options.n_per_class >= 1, "n_per_class must be >= 1");
}

[[noreturn]] void Diverged(int step, double eta, double loss) {
  std::ostringstream oss;
  oss << "loss became " << loss << " at step " << step << " with eta=" << eta;
  Fail(ErrorCode::kDivergence, oss.str());
}

}  // namespace

PromptObjective EvaluatePromptObjective(const TrainOptions& options,
                                        const MeanEmbedding& target,
                                        const ConditionalGenerator& generator,
                                        const FeatureExtractor& extractor,
                                        const NtkFeatureMap& feature_map,
                                        const PromptBank& bank,
                                        const LabelMapping& mapping,
                                        uint64_t stream_index) {
  const std::vector<int> plan =
      BalancedLabelPlan(bank.num_classes(), options.n_per_class);
  const SyntheticPass pass =
      SyntheticMeanEmbedding(generator, extractor, bank, mapping, feature_map,
                             plan, options.latent_seed, stream_index);
  PromptObjective out;
  out.loss = TotalLoss(options.loss, target, pass.embedding, &bank);
  out.grad_prompts = out.loss.grad_prompts +
                     PromptGradient(pass, out.loss.grad_embedding, bank,
                                    extractor, feature_map);
  return out;
}

PromptTrainingResult TrainPrompts(const TrainOptions& options,
                                  const MeanEmbedding& target,
                                  const ConditionalGenerator& generator,
                                  const FeatureExtractor& extractor,
                                  const NtkFeatureMap& feature_map,
                                  PromptBank bank, const LabelMapping& mapping) {
  ValidateOptions(options);
  Require(generator.frozen() && extractor.frozen(),
          "prompt training requires frozen backbones");
  Require(mapping.num_private_classes() == bank.num_classes(),
          "label mapping and prompt bank disagree on the class count");

  PromptTrainingResult result;
  result.generator_checksum_before = generator.Checksum();
  result.extractor_checksum_before = extractor.Checksum();
  TrainState& state = result.state;
  state.eta = options.eta;
  state.max_steps = options.max_steps;
  state.rng_seed = options.latent_seed;
  state.loss_trace.reserve(static_cast<size_t>(options.max_steps));

  Stepper<RowMatrix> stepper(options.optimizer, options.eta, bank.prompts);
  for (int step = 0; step < options.max_steps; ++step) {
    const uint64_t stream = options.fixed_latents ? 0 : static_cast<uint64_t>(step);
    const PromptObjective objective =
        EvaluatePromptObjective(options, target, generator, extractor,
                                feature_map, bank, mapping, stream);
    const double loss = objective.loss.total;
    if (!std::isfinite(loss) || !objective.grad_prompts.allFinite()) {
      Diverged(step, options.eta, loss);
    }
    state.loss_trace.push_back(loss);
    stepper.Step(bank.prompts, objective.grad_prompts);
    if (!bank.prompts.allFinite()) Diverged(step, options.eta, loss);
    state.step = step + 1;
  }

  result.generator_checksum_after = generator.Checksum();
  result.extractor_checksum_after = extractor.Checksum();
  if (result.generator_checksum_after != result.generator_checksum_before ||
      result.extractor_checksum_after != result.extractor_checksum_before) {
    Fail(ErrorCode::kInvalidState, "a frozen backbone changed during prompt training");
  }
  result.bank = std::move(bank);
  return result;
}

// ---------------------------------------------------------------------------
// BaselineGenerator

BaselineGenerator::BaselineGenerator(const Options& options) : options_(options) {
  Require(options.latent_dim > 0 && options.num_classes > 0 && options.hidden > 0,
          "baseline generator dimensions must be positive");
  Require(options.shape.size() > 0, "baseline generator image shape is empty");
  const int in = options.latent_dim + options.num_classes;
  const int hidden = options.hidden;
  const int pixels = options.shape.size();
  params_.resize(static_cast<Eigen::Index>(hidden) * in + hidden +
                 static_cast<Eigen::Index>(pixels) * hidden + pixels);
  Rng rng(options.seed, "baseline_generator/init");
  Eigen::Index pos = 0;
  for (int i = 0; i < hidden * in; ++i) params_(pos++) = rng.Normal() / std::sqrt(double(in));
  for (int i = 0; i < hidden; ++i) params_(pos++) = 0.0;
  for (int i = 0; i < pixels * hidden; ++i) params_(pos++) = rng.Normal() / std::sqrt(double(hidden));
  for (int i = 0; i < pixels; ++i) params_(pos++) = 0.0;
}

BaselineGenerator::BaselineGenerator(const Checkpoint& checkpoint) {
  if (checkpoint.kind != CheckpointKind::kBaselineGenerator) {
    Fail(ErrorCode::kKindMismatch, "checkpoint does not hold a baseline generator");
  }
  if (checkpoint.meta.size() != 6 || checkpoint.tensors.size() != 1) {
    Fail(ErrorCode::kShapeMismatch, "baseline generator checkpoint has the wrong layout");
  }
  const auto& m = checkpoint.meta;
  options_.latent_dim = static_cast<int>(m[0]);
  options_.num_classes = static_cast<int>(m[1]);
  options_.hidden = static_cast<int>(m[2]);
  options_.shape = {static_cast<int>(m[3]), static_cast<int>(m[4]), static_cast<int>(m[5])};
  const int64_t in = options_.latent_dim + options_.num_classes;
  const int64_t pixels = options_.shape.size();
  const int64_t expected = options_.hidden * in + options_.hidden +
                           pixels * options_.hidden + pixels;
  if (checkpoint.tensors[0].shape != std::vector<int64_t>{expected}) {
    Fail(ErrorCode::kShapeMismatch, "baseline generator parameter count mismatch");
  }
  params_.resize(expected);
  for (int64_t i = 0; i < expected; ++i) params_(i) = checkpoint.tensors[0].data[i];
}

Vector BaselineGenerator::Input(const Vector& z, int source_class) const {
  if (source_class < 0 || source_class >= options_.num_classes) {
    Fail(ErrorCode::kInvalidArgument, "baseline generator class out of range");
  }
  if (z.size() != options_.latent_dim || !z.allFinite()) {
    Fail(ErrorCode::kInvalidArgument, "latent vector is malformed");
  }
  Vector u = Vector::Zero(options_.latent_dim + options_.num_classes);
  u.head(options_.latent_dim) = z;
  u(options_.latent_dim + source_class) = 1.0;
  return u;
}

namespace {

struct MlpView {
  Eigen::Map<const RowMatrix> w1;
  Eigen::Map<const Vector> b1;
  Eigen::Map<const RowMatrix> w2;
  Eigen::Map<const Vector> b2;
};

MlpView View(const Vector& p, int in, int hidden, int pixels) {
  const double* d = p.data();
  return MlpView{Eigen::Map<const RowMatrix>(d, hidden, in),
                 Eigen::Map<const Vector>(d + hidden * in, hidden),
                 Eigen::Map<const RowMatrix>(d + hidden * in + hidden, pixels, hidden),
                 Eigen::Map<const Vector>(d + hidden * in + hidden + pixels * hidden, pixels)};
}

}  // namespace

Vector BaselineGenerator::Generate(const Vector& z, int source_class) const {
  const Vector u = Input(z, source_class);
  const MlpView v = View(params_, static_cast<int>(u.size()), options_.hidden,
                         options_.shape.size());
  const Vector h = (v.w1 * u + v.b1).array().tanh().matrix();
  return (1.0 / (1.0 + (-(v.w2 * h + v.b2).array()).exp())).matrix();
}

Vector BaselineGenerator::ParameterVjp(const Vector& z, int source_class,
                                       const Vector& grad_image) const {
  const Vector u = Input(z, source_class);
  const int in = static_cast<int>(u.size());
  const int hidden = options_.hidden;
  const int pixels = options_.shape.size();
  Require(grad_image.size() == pixels, "image gradient has the wrong length");
  const MlpView v = View(params_, in, hidden, pixels);
  const Vector h = (v.w1 * u + v.b1).array().tanh().matrix();
  const Vector x = (1.0 / (1.0 + (-(v.w2 * h + v.b2).array()).exp())).matrix();

  Vector grad(params_.size());
  const Vector go = grad_image.array() * x.array() * (1.0 - x.array());
  const Vector gh = v.w2.transpose() * go;
  const Vector ga = gh.array() * (1.0 - h.array().square());
  double* g = grad.data();
  Eigen::Map<RowMatrix>(g, hidden, in).noalias() = ga * u.transpose();
  Eigen::Map<Vector>(g + hidden * in, hidden) = ga;
  Eigen::Map<RowMatrix>(g + hidden * in + hidden, pixels, hidden).noalias() =
      go * h.transpose();
  Eigen::Map<Vector>(g + hidden * in + hidden + pixels * hidden, pixels) = go;
  return grad;
}

uint64_t BaselineGenerator::Checksum() const {
  return Fnv1a64(std::span<const unsigned char>(
      reinterpret_cast<const unsigned char*>(params_.data()),
      static_cast<size_t>(params_.size()) * sizeof(double)));
}

void BaselineGenerator::set_parameters(const Vector& params) {
  Require(params.size() == params_.size(), "parameter vector has the wrong length");
  params_ = params;
}

Checkpoint BaselineGenerator::ToCheckpoint() const {
  Tensor t{{params_.size()}, {}};
  t.data.reserve(static_cast<size_t>(params_.size()));
  for (Eigen::Index i = 0; i < params_.size(); ++i) {
    t.data.push_back(static_cast<float>(params_(i)));
  }
  const ImageShape& s = options_.shape;
  return Checkpoint{CheckpointKind::kBaselineGenerator,
                    {options_.latent_dim, options_.num_classes, options_.hidden,
                     s.channels, s.height, s.width},
                    {std::move(t)}};
}

GeneratorObjective EvaluateGeneratorObjective(const TrainOptions& options,
                                              const MeanEmbedding& target,
                                              const BaselineGenerator& generator,
                                              const NtkFeatureMap& feature_map,
                                              uint64_t stream_index) {
  const int classes = generator.num_source_classes();
  const std::vector<int> plan = BalancedLabelPlan(classes, options.n_per_class);
  const double n = static_cast<double>(plan.size());
  Rng rng(options.latent_seed, "latents", stream_index);
  std::vector<Vector> latents;
  std::vector<Vector> images;
  latents.reserve(plan.size());
  images.reserve(plan.size());
  MeanEmbedding synthetic{Matrix::Zero(feature_map.feature_dim(), classes),
                          EmbeddingKind::kSynthetic, static_cast<int64_t>(plan.size())};
  for (int y : plan) {
    latents.push_back(DrawLatent(rng, generator.latent_dim()));
    images.push_back(generator.Generate(latents.back(), y));
    synthetic.matrix.col(y) += feature_map.Feature(images.back()).values / n;
  }

  LossConfig mmd_only = options.loss;
  mmd_only.mode = LossMode::kMmd;
  const LossBreakdown loss = TotalLoss(mmd_only, target, synthetic, nullptr);

  GeneratorObjective out;
  out.loss = loss.total;
  out.grad_params = Vector::Zero(generator.parameters().size());
  for (size_t i = 0; i < plan.size(); ++i) {
    double norm = 0.0;
    const FeatureVector phi = feature_map.Feature(images[i], &norm);
    const Vector g_image = feature_map.FeatureInputVjp(
        images[i], phi, norm, loss.grad_embedding.col(plan[i]) / n);
    out.grad_params += generator.ParameterVjp(latents[i], plan[i], g_image);
  }
  return out;
}

GeneratorTrainingResult TrainGeneratorDpNtk(const TrainOptions& options,
                                            const MeanEmbedding& target,
                                            BaselineGenerator generator,
                                            const NtkFeatureMap& feature_map) {
  ValidateOptions(options);
  TrainState state;
  state.eta = options.eta;
  state.max_steps = options.max_steps;
  state.rng_seed = options.latent_seed;
  Vector params = generator.parameters();
  Stepper<Vector> stepper(options.optimizer, options.eta, params);
  for (int step = 0; step < options.max_steps; ++step) {
    const uint64_t stream = options.fixed_latents ? 0 : static_cast<uint64_t>(step);
    const GeneratorObjective objective =
        EvaluateGeneratorObjective(options, target, generator, feature_map, stream);
    if (!std::isfinite(objective.loss) || !objective.grad_params.allFinite()) {
      Diverged(step, options.eta, objective.loss);
    }
    state.loss_trace.push_back(objective.loss);
    stepper.Step(params, objective.grad_params);
    if (!params.allFinite()) Diverged(step, options.eta, objective.loss);
    generator.set_parameters(params);
    state.step = step + 1;
  }
  return GeneratorTrainingResult{std::move(generator), std::move(state)};
}

}  // namespace vpntk
