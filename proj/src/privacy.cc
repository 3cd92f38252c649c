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

#include "vpntk/privacy.h"

#include <cmath>
#include <sstream>

#include "vpntk/error.h"

namespace vpntk {
namespace {

// Bisection stops once the bracket is this tight relative to sigma. Much
// finer than the 1e-6 contract, so the delta target is met with slack well
// under 1e-9 for every practical (epsilon, delta).
constexpr double kRelativeBracket = 1e-13;
constexpr int kMaxBisectionSteps = 400;

double StandardNormalCdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

void RequirePositive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    std::ostringstream oss;
    oss << name << " must be finite and positive, got " << value;
    Fail(ErrorCode::kInvalidArgument, oss.str());
  }
}

}  // namespace

double EmbeddingSensitivity(int64_t m) {
  if (m <= 0) Fail(ErrorCode::kInvalidArgument, "record count m must be >= 1");
  return 2.0 / static_cast<double>(m);
}

double DeltaOfSigma(double epsilon, double noise_std, double sensitivity) {
  RequirePositive(epsilon, "epsilon");
  RequirePositive(noise_std, "noise_std");
  RequirePositive(sensitivity, "sensitivity");
  const double a = sensitivity / (2.0 * noise_std);
  const double b = epsilon * noise_std / sensitivity;
  const double lower = StandardNormalCdf(-a - b);
  // e^eps * Phi(.) can overflow/underflow separately; combine in log space.
  const double second =
      lower > 0.0 ? std::exp(epsilon + std::log(lower)) : 0.0;
  const double delta = StandardNormalCdf(a - b) - second;
  return delta < 0.0 ? 0.0 : delta;
}

double ClassicalGaussianSigma(double epsilon, double delta) {
  RequirePositive(epsilon, "epsilon");
  if (!(delta > 0.0 && delta < 1.0)) {
    Fail(ErrorCode::kInvalidArgument, "delta must lie in (0, 1)");
  }
  return std::sqrt(2.0 * std::log(1.25 / delta)) / epsilon;
}

double CalibrateNoiseMultiplier(double epsilon, double delta) {
  RequirePositive(epsilon, "epsilon");
  if (!(delta > 0.0 && delta < 1.0)) {
    Fail(ErrorCode::kInvalidArgument, "delta must lie in (0, 1)");
  }
  // The curve is scale-free in sensitivity, so calibrate at unit sensitivity.
  double lo = 0.0;
  double hi = std::max(ClassicalGaussianSigma(epsilon, delta), 1e-3);
  while (DeltaOfSigma(epsilon, hi, 1.0) > delta) {
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi)) {
      Fail(ErrorCode::kInvalidArgument, "no finite sigma meets the target");
    }
  }
  for (int i = 0; i < kMaxBisectionSteps && hi - lo > kRelativeBracket * hi;
       ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (DeltaOfSigma(epsilon, mid, 1.0) > delta) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

PrivacyParams PrivacyParams::Calibrated(double epsilon, double delta,
                                        int64_t m) {
  PrivacyParams p;
  p.epsilon = epsilon;
  p.delta = delta;
  p.m = m;
  p.sensitivity = EmbeddingSensitivity(m);
  p.sigma = CalibrateNoiseMultiplier(epsilon, delta);
  p.enabled = true;
  return p;
}

PrivacyParams PrivacyParams::Disabled(int64_t m) {
  PrivacyParams p;
  p.m = m;
  p.sensitivity = EmbeddingSensitivity(m);
  p.sigma = 0.0;
  p.enabled = false;
  return p;
}

}  // namespace vpntk
