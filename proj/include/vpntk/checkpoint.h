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

#ifndef VPNTK_CHECKPOINT_H_
#define VPNTK_CHECKPOINT_H_

#include <cstdint>
#include <string>
#include <vector>

namespace vpntk {

// Single-file binary model format, little-endian:
//
//   char[8]  magic "VPNTKCKP"
//   u32      version (kCheckpointVersion)
//   u32      kind tag (CheckpointKind)
//   u32      meta count, then i64 meta[count]   (architecture integers)
//   u32      tensor count, then per tensor: u32 rank, i64 dims[rank]
//   f32      tensor data, row-major, tensors in table order
enum class CheckpointKind : uint32_t {
  kGenerator = 1,
  kExtractor = 2,
  kPrompts = 3,
  kBaselineGenerator = 4,
};

inline constexpr uint32_t kCheckpointVersion = 1;

std::string CheckpointKindName(CheckpointKind kind);

struct Tensor {
  std::vector<int64_t> shape;
  std::vector<float> data;

  int64_t numel() const;
};

struct Checkpoint {
  CheckpointKind kind = CheckpointKind::kGenerator;
  std::vector<int64_t> meta;
  std::vector<Tensor> tensors;
};

void WriteCheckpoint(const std::string& path, const Checkpoint& checkpoint);
// Errors: kNotFound (missing file), kParseError (bad magic, truncation,
// tensor data not matching its shape), kVersionMismatch.
Checkpoint ReadCheckpoint(const std::string& path);

// Order-sensitive checksum of every tensor's shape and bytes.
uint64_t TensorChecksum(const std::vector<Tensor>& tensors);

}  // namespace vpntk

#endif  // VPNTK_CHECKPOINT_H_
