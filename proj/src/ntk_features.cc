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

#include "vpntk/ntk_features.h"

#include <cmath>
#include <sstream>

#include "vpntk/error.h"
#include "vpntk/rng.h"

namespace vpntk {
namespace {

constexpr double kDegenerateNorm = 1e-12;
constexpr double kBiasStd = 0.1;

Vector Act(Activation a, const Vector& h) {
  if (a == Activation::kTanh) return h.array().tanh().matrix();
  return h.cwiseMax(0.0);
}

Vector ActPrime(Activation a, const Vector& h) {
  if (a == Activation::kTanh) {
    return (1.0 - h.array().tanh().square()).matrix();
  }
  return (h.array() > 0.0).cast<double>().matrix();
}

Vector ActSecond(Activation a, const Vector& h) {
  if (a == Activation::kTanh) {
    const Eigen::ArrayXd t = h.array().tanh();
    return (-2.0 * t * (1.0 - t.square())).matrix();
  }
  return Vector::Zero(h.size());
}

}  // namespace

Activation ParseActivation(const std::string& name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  Fail(ErrorCode::kInvalidArgument, "unknown activation '" + name + "'");
}

std::string ActivationName(Activation activation) {
  return activation == Activation::kTanh ? "tanh" : "relu";
}

struct NtkFeatureMap::Trace {
  std::vector<Vector> inputs;  // a_l: input to layer l
  std::vector<Vector> pre;     // h_l for hidden layers
};

NtkFeatureMap::NtkFeatureMap(const NtkConfig& config) : config_(config) {
  if (config.input_dim <= 0 || config.output_dim <= 0) {
    Fail(ErrorCode::kInvalidArgument, "NTK input/output dims must be positive");
  }
  std::vector<int> widths = {config.input_dim};
  for (int w : config.hidden_widths) {
    if (w <= 0) Fail(ErrorCode::kInvalidArgument, "NTK hidden width must be positive");
    widths.push_back(w);
  }
  widths.push_back(config.output_dim);

  Rng rng(config.init_seed, "ntk/init");
  for (size_t l = 0; l + 1 < widths.size(); ++l) {
    const int fan_in = widths[l];
    const int fan_out = widths[l + 1];
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    RowMatrix w(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c) w(r, c) = scale * rng.Normal();
    Vector b(fan_out);
    for (int r = 0; r < fan_out; ++r) b(r) = kBiasStd * rng.Normal();
    feature_dim_ += fan_out * fan_in + fan_out;
    weights_.push_back(std::move(w));
    biases_.push_back(std::move(b));
  }
}

void NtkFeatureMap::Forward(const Vector& x, Trace* trace) const {
  if (x.size() != config_.input_dim) {
    std::ostringstream oss;
    oss << "NTK input has " << x.size() << " entries, expected "
        << config_.input_dim;
    Fail(ErrorCode::kInvalidArgument, oss.str());
  }
  if (!x.allFinite()) Fail(ErrorCode::kInvalidArgument, "NTK input is not finite");
  const size_t hidden = weights_.size() - 1;
  trace->inputs.assign(1, x);
  trace->pre.clear();
  for (size_t l = 0; l < hidden; ++l) {
    Vector h = weights_[l] * trace->inputs.back() + biases_[l];
    trace->inputs.push_back(Act(config_.activation, h));
    trace->pre.push_back(std::move(h));
  }
}

double NtkFeatureMap::Output(const Vector& x) const {
  Trace t;
  Forward(x, &t);
  return (weights_.back() * t.inputs.back() + biases_.back()).sum();
}

Vector NtkFeatureMap::RawGradient(const Vector& x) const {
  Trace t;
  Forward(x, &t);
  Vector grad(feature_dim_);
  const size_t layers = weights_.size();

  // Offsets of each layer's block in the flat layout.
  std::vector<int> offset(layers);
  int pos = 0;
  for (size_t l = 0; l < layers; ++l) {
    offset[l] = pos;
    pos += static_cast<int>(weights_[l].size() + biases_[l].size());
  }

  const size_t out = layers - 1;
  const Vector& last = t.inputs.back();
  {
    const int rows = static_cast<int>(weights_[out].rows());
    const int cols = static_cast<int>(weights_[out].cols());
    Eigen::Map<RowMatrix> gw(grad.data() + offset[out], rows, cols);
    gw.rowwise() = last.transpose();
    grad.segment(offset[out] + rows * cols, rows).setOnes();
  }
  Vector abar = weights_[out].transpose() * Vector::Ones(weights_[out].rows());
  for (size_t k = out; k-- > 0;) {
    const Vector hbar =
        abar.cwiseProduct(ActPrime(config_.activation, t.pre[k]));
    const int rows = static_cast<int>(weights_[k].rows());
    const int cols = static_cast<int>(weights_[k].cols());
    Eigen::Map<RowMatrix> gw(grad.data() + offset[k], rows, cols);
    gw.noalias() = hbar * t.inputs[k].transpose();
    grad.segment(offset[k] + rows * cols, rows) = hbar;
    abar = weights_[k].transpose() * hbar;
  }
  return grad;
}

FeatureVector NtkFeatureMap::Feature(const Vector& x) const {
  double norm = 0.0;
  return Feature(x, &norm);
}

FeatureVector NtkFeatureMap::Feature(const Vector& x,
                                     double* gradient_norm) const {
  Vector g = RawGradient(x);
  const double norm = g.norm();
  if (!(norm >= kDegenerateNorm)) {
    std::ostringstream oss;
    oss << "parameter gradient norm " << norm
        << " is degenerate for input with L2 norm " << x.norm();
    Fail(ErrorCode::kDegenerateFeature, oss.str());
  }
  *gradient_norm = norm;
  return FeatureVector{g / norm};
}

Vector NtkFeatureMap::GradientInputVjp(const Vector& x, const Vector& w) const {
  if (w.size() != feature_dim_) {
    Fail(ErrorCode::kInvalidArgument, "cotangent does not match feature_dim");
  }
  Trace t;
  Forward(x, &t);
  const size_t layers = weights_.size();
  const size_t out = layers - 1;

  // Split w into per-layer weight/bias tangents.
  std::vector<Eigen::Map<const RowMatrix>> dw;
  std::vector<Eigen::Map<const Vector>> db;
  int pos = 0;
  for (size_t l = 0; l < layers; ++l) {
    const int rows = static_cast<int>(weights_[l].rows());
    const int cols = static_cast<int>(weights_[l].cols());
    dw.emplace_back(w.data() + pos, rows, cols);
    pos += rows * cols;
    db.emplace_back(w.data() + pos, rows);
    pos += rows;
  }

  // Forward tangent of the hidden activations along parameter direction w.
  std::vector<Vector> hdot(out);
  std::vector<Vector> s1(out), s2(out);
  Vector adot = Vector::Zero(config_.input_dim);
  for (size_t l = 0; l < out; ++l) {
    s1[l] = ActPrime(config_.activation, t.pre[l]);
    s2[l] = ActSecond(config_.activation, t.pre[l]);
    hdot[l] = dw[l] * t.inputs[l] + weights_[l] * adot + db[l];
    adot = s1[l].cwiseProduct(hdot[l]);
  }

  // Reverse sweep of D(x) = sum(dW_out a + W_out adot + db_out).
  const Vector ones = Vector::Ones(weights_[out].rows());
  Vector abar = dw[out].transpose() * ones;
  Vector adotbar = weights_[out].transpose() * ones;
  for (size_t k = out; k-- > 0;) {
    const Vector hdotbar = adotbar.cwiseProduct(s1[k]);
    const Vector hbar = adotbar.cwiseProduct(hdot[k]).cwiseProduct(s2[k]) +
                        abar.cwiseProduct(s1[k]);
    abar = dw[k].transpose() * hdotbar + weights_[k].transpose() * hbar;
    adotbar = weights_[k].transpose() * hdotbar;
  }
  return abar;
}

Vector NtkFeatureMap::FeatureInputVjp(const Vector& x,
                                      const FeatureVector& feature,
                                      double gradient_norm,
                                      const Vector& v) const {
  // d(g/|g|) = (I - phi phi^T) dg / |g|
  const Vector w =
      (v - feature.values * feature.values.dot(v)) / gradient_norm;
  return GradientInputVjp(x, w);
}

Vector NtkFeatureMap::Parameters() const {
  Vector theta(feature_dim_);
  int pos = 0;
  for (size_t l = 0; l < weights_.size(); ++l) {
    const int n = static_cast<int>(weights_[l].size());
    theta.segment(pos, n) = Eigen::Map<const Vector>(weights_[l].data(), n);
    pos += n;
    theta.segment(pos, biases_[l].size()) = biases_[l];
    pos += static_cast<int>(biases_[l].size());
  }
  return theta;
}

NtkFeatureMap NtkFeatureMap::WithParameters(const Vector& theta) const {
  if (theta.size() != feature_dim_) {
    Fail(ErrorCode::kInvalidArgument, "parameter vector has wrong length");
  }
  NtkFeatureMap copy = *this;
  int pos = 0;
  for (size_t l = 0; l < copy.weights_.size(); ++l) {
    const int n = static_cast<int>(copy.weights_[l].size());
    Eigen::Map<Vector>(copy.weights_[l].data(), n) = theta.segment(pos, n);
    pos += n;
    copy.biases_[l] = theta.segment(pos, copy.biases_[l].size());
    pos += static_cast<int>(copy.biases_[l].size());
  }
  return copy;
}

}  // namespace vpntk
