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

#include "vpntk/evaluation.h"

#include <cmath>
#include <set>
#include <sstream>

#include "vpntk/embeddings.h"
#include "vpntk/error.h"
#include "vpntk/rng.h"

namespace vpntk {
namespace {

constexpr double kGradientTolerance = 1e-5;
constexpr int kMaxEpochs = 2000;
constexpr double kL2 = 1e-4;
constexpr int kMlpHidden = 64;
constexpr double kMlpLearningRate = 1e-2;
constexpr double kStdFloor = 1e-8;

void RequireTrainable(const SyntheticDataset& data) {
  if (data.payloads.empty() || data.payloads.size() != data.labels.size()) {
    Fail(ErrorCode::kInvalidArgument, "training set is empty or malformed");
  }
  std::set<int> classes(data.labels.begin(), data.labels.end());
  if (classes.size() < 2) {
    Fail(ErrorCode::kInvalidArgument, "downstream training needs at least two classes");
  }
  if (*classes.begin() < 0) Fail(ErrorCode::kInvalidArgument, "negative label");
}

struct Standardizer {
  Vector mean;
  Vector inv_std;

  static Standardizer Fit(const Matrix& x) {  // rows are samples
    Standardizer s;
    s.mean = x.colwise().mean().transpose();
    const Matrix centered = x.rowwise() - s.mean.transpose();
    const Vector var = centered.array().square().colwise().mean().transpose();
    s.inv_std = var.array().sqrt().max(kStdFloor).inverse().matrix();
    return s;
  }

  Vector Apply(const Vector& v) const {
    return (v - mean).cwiseProduct(inv_std);
  }
};

Matrix StackRows(const std::vector<Vector>& payloads) {
  const auto d = payloads.front().size();
  Matrix x(static_cast<Eigen::Index>(payloads.size()), d);
  for (size_t i = 0; i < payloads.size(); ++i) {
    Require(payloads[i].size() == d, "payloads differ in dimension");
    x.row(static_cast<Eigen::Index>(i)) = payloads[i].transpose();
  }
  return x;
}

// Row-wise softmax.
Matrix Softmax(const Matrix& logits) {
  Matrix p = logits.colwise() - logits.rowwise().maxCoeff();
  p = p.array().exp().matrix();
  return p.array().colwise() / p.rowwise().sum().array();
}

class LogisticRegression final : public Classifier {
 public:
  LogisticRegression(Standardizer standardizer, Matrix weights, Vector bias)
      : standardizer_(std::move(standardizer)),
        weights_(std::move(weights)),
        bias_(std::move(bias)) {}

  int num_classes() const override { return static_cast<int>(bias_.size()); }
  Vector Scores(const Vector& payload) const override {
    Require(payload.size() == standardizer_.mean.size(),
            "payload dimension does not match the classifier");
    return weights_.transpose() * standardizer_.Apply(payload) + bias_;
  }

  const Matrix& weights() const { return weights_; }

 private:
  Standardizer standardizer_;
  Matrix weights_;  // d x C
  Vector bias_;
};

class Mlp final : public Classifier {
 public:
  Mlp(Standardizer standardizer, Matrix w1, Vector b1, Matrix w2, Vector b2)
      : standardizer_(std::move(standardizer)),
        w1_(std::move(w1)), b1_(std::move(b1)),
        w2_(std::move(w2)), b2_(std::move(b2)) {}

  int num_classes() const override { return static_cast<int>(b2_.size()); }
  Vector Scores(const Vector& payload) const override {
    Require(payload.size() == standardizer_.mean.size(),
            "payload dimension does not match the classifier");
    const Vector h = (w1_.transpose() * standardizer_.Apply(payload) + b1_).array().tanh().matrix();
    return w2_.transpose() * h + b2_;
  }

 private:
  Standardizer standardizer_;
  Matrix w1_;  // d x H
  Vector b1_;
  Matrix w2_;  // H x C
  Vector b2_;
};

// Largest eigenvalue of x^T x / n by power iteration from a fixed start.
double GramSpectralNorm(const Matrix& x) {
  Vector v = Vector::Ones(x.cols()).normalized();
  double lambda = 0.0;
  for (int i = 0; i < 50; ++i) {
    Vector w = x.transpose() * (x * v) / static_cast<double>(x.rows());
    lambda = w.norm();
    if (lambda == 0.0) break;
    v = w / lambda;
  }
  return lambda;
}

std::unique_ptr<Classifier> TrainLogistic(const Matrix& raw, const std::vector<int>& labels,
                                          int classes, uint64_t seed) {
  const Standardizer standardizer = Standardizer::Fit(raw);
  Matrix x = (raw.rowwise() - standardizer.mean.transpose()).array().rowwise() *
             standardizer.inv_std.transpose().array();
  const auto n = x.rows();
  const auto d = x.cols();
  Matrix y = Matrix::Zero(n, classes);
  for (Eigen::Index i = 0; i < n; ++i) y(i, labels[static_cast<size_t>(i)]) = 1.0;

  // Augment with a constant column so the bias shares the update.
  Matrix xa(n, d + 1);
  xa << x, Matrix::Ones(n, 1);
  // Softmax cross-entropy Hessian is bounded by (1/2) X^T X / n.
  const double lipschitz = 0.5 * GramSpectralNorm(xa) + kL2;
  const double step = 1.0 / lipschitz;

  Rng rng(seed, "downstream/init");
  Matrix w(d + 1, classes);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = 1e-3 * rng.Normal();
  Matrix w_prev = w;
  auto gradient = [&](const Matrix& at) {
    Matrix g = xa.transpose() * (Softmax(xa * at) - y) / static_cast<double>(n);
    g.topRows(d) += kL2 * at.topRows(d);
    return g;
  };
  // Nesterov-accelerated gradient descent (FISTA momentum schedule).
  double t = 1.0;
  for (int epoch = 0; epoch < kMaxEpochs; ++epoch) {
    if (gradient(w).norm() < kGradientTolerance) break;
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const Matrix look = w + ((t - 1.0) / t_next) * (w - w_prev);
    w_prev = w;
    w = look - step * gradient(look);
    t = t_next;
  }
  return std::make_unique<LogisticRegression>(standardizer, w.topRows(d),
                                              w.row(d).transpose());
}

std::unique_ptr<Classifier> TrainMlp(const Matrix& raw, const std::vector<int>& labels,
                                     int classes, uint64_t seed) {
  const Standardizer standardizer = Standardizer::Fit(raw);
  const Matrix x = (raw.rowwise() - standardizer.mean.transpose()).array().rowwise() *
                   standardizer.inv_std.transpose().array();
  const auto n = x.rows();
  const auto d = x.cols();
  Matrix y = Matrix::Zero(n, classes);
  for (Eigen::Index i = 0; i < n; ++i) y(i, labels[static_cast<size_t>(i)]) = 1.0;

  Rng rng(seed, "downstream/init");
  Matrix w1(d, kMlpHidden), w2(kMlpHidden, classes);
  for (Eigen::Index i = 0; i < w1.size(); ++i) w1.data()[i] = rng.Normal() / std::sqrt(double(d));
  for (Eigen::Index i = 0; i < w2.size(); ++i) w2.data()[i] = rng.Normal() / std::sqrt(double(kMlpHidden));
  Vector b1 = Vector::Zero(kMlpHidden), b2 = Vector::Zero(classes);

  // Adam over (w1, b1, w2, b2).
  struct Moments { Matrix m, v; };
  Moments mw1{Matrix::Zero(d, kMlpHidden), Matrix::Zero(d, kMlpHidden)};
  Moments mb1{Matrix::Zero(kMlpHidden, 1), Matrix::Zero(kMlpHidden, 1)};
  Moments mw2{Matrix::Zero(kMlpHidden, classes), Matrix::Zero(kMlpHidden, classes)};
  Moments mb2{Matrix::Zero(classes, 1), Matrix::Zero(classes, 1)};
  auto adam = [](auto& param, const Matrix& g, Moments& mo, int t) {
    mo.m = 0.9 * mo.m + 0.1 * g;
    mo.v = 0.999 * mo.v + 0.001 * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(0.9, t), c2 = 1.0 - std::pow(0.999, t);
    param.array() -= kMlpLearningRate * (mo.m.array() / c1) /
                     ((mo.v.array() / c2).sqrt() + 1e-8);
  };
  for (int epoch = 1; epoch <= kMaxEpochs; ++epoch) {
    const Matrix h = ((x * w1).rowwise() + b1.transpose()).array().tanh().matrix();
    const Matrix p = Softmax((h * w2).rowwise() + b2.transpose());
    const Matrix go = (p - y) / static_cast<double>(n);
    const Matrix gw2 = h.transpose() * go + kL2 * w2;
    const Matrix gb2 = go.colwise().sum().transpose();
    const Matrix gh = (go * w2.transpose()).array() * (1.0 - h.array().square());
    const Matrix gw1 = x.transpose() * gh + kL2 * w1;
    const Matrix gb1 = gh.colwise().sum().transpose();
    const double gnorm = std::sqrt(gw1.squaredNorm() + gb1.squaredNorm() +
                                   gw2.squaredNorm() + gb2.squaredNorm());
    if (gnorm < kGradientTolerance) break;
    adam(w1, gw1, mw1, epoch);
    adam(b1, gb1, mb1, epoch);
    adam(w2, gw2, mw2, epoch);
    adam(b2, gb2, mb2, epoch);
  }
  return std::make_unique<Mlp>(standardizer, w1, b1, w2, b2);
}

}  // namespace

SyntheticDataset SynthesizeDataset(const ConditionalGenerator& generator,
                                   const PromptBank& bank,
                                   const LabelMapping& mapping,
                                   const FeatureExtractor& extractor,
                                   int n_per_class, uint64_t seed) {
  if (n_per_class < 1) Fail(ErrorCode::kInvalidArgument, "n_per_class must be >= 1");
  SyntheticDataset out;
  out.kind = bank.space == PromptSpace::kFeature ? PayloadKind::kFeature : PayloadKind::kImage;
  Rng rng(seed, "synthesis");
  for (int y : BalancedLabelPlan(bank.num_classes(), n_per_class)) {
    const Vector z = DrawLatent(rng, generator.latent_dim());
    SyntheticSample s = MakeSyntheticSample(generator, extractor, bank, mapping, z, y);
    out.payloads.push_back(std::move(s.prompted));
    out.labels.push_back(y);
  }
  return out;
}

SyntheticDataset SynthesizeImages(const ConditionalGenerator& generator,
                                  int num_classes, int n_per_class, uint64_t seed) {
  if (n_per_class < 1) Fail(ErrorCode::kInvalidArgument, "n_per_class must be >= 1");
  SyntheticDataset out;
  out.kind = PayloadKind::kImage;
  Rng rng(seed, "synthesis");
  for (int y : BalancedLabelPlan(num_classes, n_per_class)) {
    const Vector z = DrawLatent(rng, generator.latent_dim());
    out.payloads.push_back(generator.Generate(z, y));
    out.labels.push_back(y);
  }
  return out;
}

ClassifierKind ParseClassifierKind(const std::string& name) {
  if (name == "logreg") return ClassifierKind::kLogistic;
  if (name == "mlp") return ClassifierKind::kMlp;
  Fail(ErrorCode::kInvalidArgument, "unknown classifier '" + name + "'");
}

std::string ClassifierKindName(ClassifierKind kind) {
  return kind == ClassifierKind::kLogistic ? "logreg" : "mlp";
}

std::unique_ptr<Classifier> TrainDownstream(const SyntheticDataset& data,
                                            uint64_t seed, ClassifierKind kind) {
  RequireTrainable(data);
  const int classes = *std::max_element(data.labels.begin(), data.labels.end()) + 1;
  const Matrix x = StackRows(data.payloads);
  if (kind == ClassifierKind::kMlp) return TrainMlp(x, data.labels, classes, seed);
  return TrainLogistic(x, data.labels, classes, seed);
}

int ArgMax(const Vector& scores) {
  int best = 0;
  for (int i = 1; i < scores.size(); ++i) {
    if (scores(i) > scores(best)) best = i;
  }
  return best;
}

double EvaluateAccuracy(const Classifier& classifier,
                        std::span<const Vector> payloads,
                        std::span<const int> labels) {
  if (payloads.empty()) Fail(ErrorCode::kInvalidArgument, "test set is empty");
  Require(payloads.size() == labels.size(), "payloads and labels differ in length");
  size_t correct = 0;
  for (size_t i = 0; i < payloads.size(); ++i) {
    if (ArgMax(classifier.Scores(payloads[i])) == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(payloads.size());
}

AblationResult AggregateSweep(const std::string& parameter,
                              const std::vector<std::string>& grid, int k,
                              const CellRunner& run) {
  Require(!grid.empty(), "sweep grid is empty");
  Require(k >= 3, "sweeps need at least 3 seed repeats");
  AblationResult result;
  result.parameter = parameter;
  for (const std::string& value : grid) {
    AblationCell cell;
    cell.value = value;
    for (int r = 0; r < k; ++r) {
      try {
        cell.accuracies.push_back(run(value, r));
      } catch (const std::exception& e) {
        cell.errors.push_back("repeat " + std::to_string(r) + ": " + e.what());
      }
    }
    const auto count = static_cast<double>(cell.accuracies.size());
    if (count > 0) {
      for (double a : cell.accuracies) cell.mean += a / count;
      if (count > 1) {
        double ss = 0.0;
        for (double a : cell.accuracies) ss += (a - cell.mean) * (a - cell.mean);
        cell.std = std::sqrt(ss / (count - 1.0));
      }
    } else {
      cell.mean = std::nan("");
      cell.std = std::nan("");
    }
    result.cells.push_back(std::move(cell));
  }
  return result;
}

}  // namespace vpntk
