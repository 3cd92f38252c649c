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

#ifndef VPNTK_PRIVACY_H_
#define VPNTK_PRIVACY_H_

#include <cstdint>

namespace vpntk {

// Parameters of the single Gaussian-mechanism release of the private mean
// embedding. Neighbouring datasets differ by replacing one record, so m is
// fixed and the release has Frobenius sensitivity 2/m.
struct PrivacyParams {
  double epsilon = 0.0;
  double delta = 0.0;
  // Noise standard deviation per unit of sensitivity. Zero only when
  // `enabled` is false.
  double sigma = 0.0;
  int64_t m = 0;
  double sensitivity = 0.0;
  bool enabled = true;

  // Standard deviation of the per-entry noise actually added: sigma * 2/m.
  double noise_std() const { return sigma * sensitivity; }

  static PrivacyParams Calibrated(double epsilon, double delta, int64_t m);
  static PrivacyParams Disabled(int64_t m);
};

// Replace-one sensitivity of the mean embedding when every feature has unit
// norm and labels are one-hot.
double EmbeddingSensitivity(int64_t m);

// Exact privacy curve of the Gaussian mechanism with noise standard deviation
// `noise_std` applied to a statistic of L2 sensitivity `sensitivity`:
//   delta(eps) = Phi(D/(2s) - eps s/D) - e^eps Phi(-D/(2s) - eps s/D).
double DeltaOfSigma(double epsilon, double noise_std, double sensitivity);

// Smallest unit-sensitivity noise multiplier whose exact curve meets
// `delta` at `epsilon`, found by bisection.
double CalibrateNoiseMultiplier(double epsilon, double delta);

// sqrt(2 ln(1.25/delta)) / epsilon. Kept as a reference point; it is only a
// sufficient bound for epsilon < 1.
double ClassicalGaussianSigma(double epsilon, double delta);

}  // namespace vpntk

#endif  // VPNTK_PRIVACY_H_
