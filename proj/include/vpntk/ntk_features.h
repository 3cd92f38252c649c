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

#ifndef VPNTK_NTK_FEATURES_H_
#define VPNTK_NTK_FEATURES_H_

#include <cstdint>
#include <string>
#include <vector>

#include "vpntk/linalg.h"

namespace vpntk {

enum class Activation { kRelu, kTanh };

Activation ParseActivation(const std::string& name);
std::string ActivationName(Activation activation);

struct NtkConfig {
  int input_dim = 64;
  std::vector<int> hidden_widths = {512};
  int output_dim = 1;
  uint64_t init_seed = 0;
  Activation activation = Activation::kTanh;
};

// A unit-norm empirical-NTK feature.
struct FeatureVector {
  Vector values;
};

// phi(x) = grad_theta f(x; theta) / ||grad_theta f(x; theta)|| for a fully
// connected network whose parameters are drawn once from the seeded
// initializer and never change. With output_dim > 1 the scalar network output
// is the sum of the output units.
//
// Feature layout: for each layer in order, the weight matrix row-major, then
// its bias.
class NtkFeatureMap {
 public:
  explicit NtkFeatureMap(const NtkConfig& config);

  const NtkConfig& config() const { return config_; }
  int input_dim() const { return config_.input_dim; }
  int feature_dim() const { return feature_dim_; }

  // Scalar network output f(x; theta).
  double Output(const Vector& x) const;
  // Un-normalized parameter gradient of Output at x.
  Vector RawGradient(const Vector& x) const;
  // Normalized feature. Throws kDegenerateFeature when the gradient norm is
  // below 1e-12.
  FeatureVector Feature(const Vector& x) const;
  // Like Feature, also returning the pre-normalization gradient norm.
  FeatureVector Feature(const Vector& x, double* gradient_norm) const;

  // grad_x < w, grad_theta f(x) >, a mixed second derivative.
  Vector GradientInputVjp(const Vector& x, const Vector& w) const;
  // grad_x < v, phi(x) >. `feature` and `gradient_norm` must come from
  // Feature(x).
  Vector FeatureInputVjp(const Vector& x, const FeatureVector& feature,
                         double gradient_norm, const Vector& v) const;

  // Flat parameter vector in feature layout; used by finite-difference
  // checks.
  Vector Parameters() const;
  // Copy of this map with replaced parameters (same architecture).
  NtkFeatureMap WithParameters(const Vector& theta) const;

 private:
  struct Trace;
  void Forward(const Vector& x, Trace* trace) const;

  NtkConfig config_;
  std::vector<RowMatrix> weights_;
  std::vector<Vector> biases_;
  int feature_dim_ = 0;
};

}  // namespace vpntk

#endif  // VPNTK_NTK_FEATURES_H_
