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

#include "vpntk/checkpoint.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vpntk/error.h"
#include "vpntk/rng.h"

namespace vpntk {
namespace {

constexpr char kMagic[8] = {'V', 'P', 'N', 'T', 'K', 'C', 'K', 'P'};
// Sanity caps so a corrupt header cannot request absurd allocations.
constexpr uint32_t kMaxCount = 1u << 20;
constexpr uint32_t kMaxRank = 8;

template <typename T>
void Put(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

class Reader {
 public:
  Reader(std::istream& in, const std::string& path) : in_(in), path_(path) {}

  template <typename T>
  T Get(const char* what) {
    T value{};
    in_.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (in_.gcount() != static_cast<std::streamsize>(sizeof(T))) Truncated(what);
    return value;
  }

  void Bytes(char* dst, size_t n, const char* what) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n)) Truncated(what);
  }

  [[noreturn]] void Truncated(const char* what) {
    Fail(ErrorCode::kParseError,
         "checkpoint '" + path_ + "' truncated while reading " + what);
  }

 private:
  std::istream& in_;
  const std::string& path_;
};

}  // namespace

std::string CheckpointKindName(CheckpointKind kind) {
  switch (kind) {
    case CheckpointKind::kGenerator: return "generator";
    case CheckpointKind::kExtractor: return "extractor";
    case CheckpointKind::kPrompts: return "prompts";
    case CheckpointKind::kBaselineGenerator: return "baseline_generator";
  }
  return "unknown";
}

int64_t Tensor::numel() const {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

void WriteCheckpoint(const std::string& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorCode::kIoError, "cannot open '" + path + "' for writing");
  out.write(kMagic, sizeof(kMagic));
  Put<uint32_t>(out, kCheckpointVersion);
  Put<uint32_t>(out, static_cast<uint32_t>(checkpoint.kind));
  Put<uint32_t>(out, static_cast<uint32_t>(checkpoint.meta.size()));
  for (int64_t m : checkpoint.meta) Put<int64_t>(out, m);
  Put<uint32_t>(out, static_cast<uint32_t>(checkpoint.tensors.size()));
  for (const Tensor& t : checkpoint.tensors) {
    if (t.numel() != static_cast<int64_t>(t.data.size())) {
      Fail(ErrorCode::kShapeMismatch, "tensor data does not match its shape");
    }
    Put<uint32_t>(out, static_cast<uint32_t>(t.shape.size()));
    for (int64_t d : t.shape) Put<int64_t>(out, d);
  }
  for (const Tensor& t : checkpoint.tensors) {
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  }
  if (!out) Fail(ErrorCode::kIoError, "write to '" + path + "' failed");
}

Checkpoint ReadCheckpoint(const std::string& path) {
  if (!std::filesystem::exists(path)) {
    Fail(ErrorCode::kNotFound, "checkpoint '" + path + "' does not exist");
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kIoError, "cannot open checkpoint '" + path + "'");
  Reader r(in, path);

  char magic[8];
  r.Bytes(magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    Fail(ErrorCode::kParseError, "'" + path + "' is not a checkpoint (bad magic)");
  }
  const auto version = r.Get<uint32_t>("version");
  if (version != kCheckpointVersion) {
    std::ostringstream oss;
    oss << "checkpoint '" << path << "' has version " << version
        << ", expected " << kCheckpointVersion;
    Fail(ErrorCode::kVersionMismatch, oss.str());
  }
  Checkpoint ckpt;
  const auto kind = r.Get<uint32_t>("kind");
  if (kind < 1 || kind > 4) {
    Fail(ErrorCode::kParseError, "unknown checkpoint kind tag");
  }
  ckpt.kind = static_cast<CheckpointKind>(kind);

  const auto meta_count = r.Get<uint32_t>("meta count");
  if (meta_count > kMaxCount) Fail(ErrorCode::kParseError, "meta count too large");
  ckpt.meta.resize(meta_count);
  for (auto& m : ckpt.meta) m = r.Get<int64_t>("meta");

  const auto tensor_count = r.Get<uint32_t>("tensor count");
  if (tensor_count > kMaxCount) Fail(ErrorCode::kParseError, "tensor count too large");
  ckpt.tensors.resize(tensor_count);
  for (Tensor& t : ckpt.tensors) {
    const auto rank = r.Get<uint32_t>("rank");
    if (rank > kMaxRank) Fail(ErrorCode::kParseError, "tensor rank too large");
    t.shape.resize(rank);
    for (auto& d : t.shape) {
      d = r.Get<int64_t>("dims");
      if (d < 0 || d > (int64_t{1} << 32)) {
        Fail(ErrorCode::kParseError, "tensor dimension out of range");
      }
    }
  }
  for (Tensor& t : ckpt.tensors) {
    t.data.resize(static_cast<size_t>(t.numel()));
    r.Bytes(reinterpret_cast<char*>(t.data.data()), t.data.size() * sizeof(float),
            "tensor data");
  }
  return ckpt;
}

uint64_t TensorChecksum(const std::vector<Tensor>& tensors) {
  uint64_t h = Fnv1a64("tensors");
  for (const Tensor& t : tensors) {
    h = Fnv1a64(std::span<const unsigned char>(
                    reinterpret_cast<const unsigned char*>(t.shape.data()),
                    t.shape.size() * sizeof(int64_t)),
                h);
    h = Fnv1a64(std::span<const unsigned char>(
                    reinterpret_cast<const unsigned char*>(t.data.data()),
                    t.data.size() * sizeof(float)),
                h);
  }
  return h;
}

}  // namespace vpntk
