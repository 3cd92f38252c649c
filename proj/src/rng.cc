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

#include "vpntk/rng.h"

#include "vpntk/error.h"

namespace vpntk {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kInvalidState: return "invalid-state";
    case ErrorCode::kPrivacyViolation: return "privacy-violation";
    case ErrorCode::kDegenerateFeature: return "degenerate-feature";
    case ErrorCode::kDegenerateInput: return "degenerate-input";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kNotFound: return "not-found";
    case ErrorCode::kVersionMismatch: return "version-mismatch";
    case ErrorCode::kParseError: return "parse-error";
    case ErrorCode::kKindMismatch: return "kind-mismatch";
    case ErrorCode::kShapeMismatch: return "shape-mismatch";
    case ErrorCode::kIoError: return "io-error";
  }
  return "unknown";
}

uint64_t Fnv1a64(std::span<const unsigned char> bytes, uint64_t basis) {
  uint64_t h = basis;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t Fnv1a64(std::string_view text) {
  return Fnv1a64(std::span<const unsigned char>(
      reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

namespace {

uint64_t SplitMix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

uint64_t DeriveSeed(uint64_t base_seed, std::string_view stream,
                    uint64_t index) {
  uint64_t h = SplitMix64(base_seed);
  h = SplitMix64(h ^ Fnv1a64(stream));
  return SplitMix64(h ^ SplitMix64(index + 0x632be59bd9b4e019ULL));
}

}  // namespace vpntk
