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

#ifndef VPNTK_RNG_H_
#define VPNTK_RNG_H_

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace vpntk {

// 64-bit FNV-1a over raw bytes. Used for stream labels, parameter checksums
// and the path-hash dataset split.
uint64_t Fnv1a64(std::span<const unsigned char> bytes,
                 uint64_t basis = 0xcbf29ce484222325ULL);
uint64_t Fnv1a64(std::string_view text);

// Mixes a base seed with a stream label and an optional index into an
// independent 64-bit seed (splitmix64 finalizer).
uint64_t DeriveSeed(uint64_t base_seed, std::string_view stream,
                    uint64_t index = 0);

// The only source of randomness in the library. A stream is always named and
// seeded; there is no default-constructed or entropy-seeded variant.
class Rng {
 public:
  Rng(uint64_t base_seed, std::string_view stream, uint64_t index = 0)
      : engine_(DeriveSeed(base_seed, stream, index)) {}

  double Normal() { return normal_(engine_); }
  double Uniform() { return uniform_(engine_); }
  // Uniform integer in [0, bound).
  uint64_t Below(uint64_t bound) {
    return std::uniform_int_distribution<uint64_t>(0, bound - 1)(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace vpntk

#endif  // VPNTK_RNG_H_
