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

#ifndef VPNTK_BACKBONES_H_
#define VPNTK_BACKBONES_H_

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "vpntk/checkpoint.h"
#include "vpntk/linalg.h"

namespace vpntk {

struct ImageShape {
  int channels = 1;
  int height = 16;
  int width = 16;

  int size() const { return channels * height * width; }
  bool operator==(const ImageShape&) const = default;
};

// Images are flattened channel-major (C, H, W) vectors with values in [0, 1].

// Frozen class-conditional generator G(z, y).
class ConditionalGenerator {
 public:
  virtual ~ConditionalGenerator() = default;

  virtual int latent_dim() const = 0;
  virtual int num_source_classes() const = 0;
  virtual ImageShape image_shape() const = 0;
  // Errors: class out of range or non-finite z -> kInvalidArgument.
  virtual Vector Generate(const Vector& z, int source_class) const = 0;
  virtual uint64_t Checksum() const = 0;
  // Source backbones are never trained; only the DP-NTK baseline generator
  // reports false.
  virtual bool frozen() const { return true; }
};

// Frozen feature extractor FE. Differentiable in the image.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;

  virtual ImageShape image_shape() const = 0;
  virtual int feat_dim() const = 0;
  // Errors: shape mismatch -> kInvalidArgument.
  virtual Vector Extract(const Vector& image) const = 0;
  // Gradient with respect to the image of <cotangent, Extract(image)>.
  virtual Vector Vjp(const Vector& image, const Vector& cotangent) const = 0;
  virtual uint64_t Checksum() const = 0;
  bool frozen() const { return true; }
};

// Small deconvolutional generator with fixed random parameters and a
// deterministic per-class template bias:
//   h  = tanh(W [z; embed(y)] + b)            -> (8, H/4, W/4)
//   t1 = tanh(deconv4x4/2(h))                 -> (4, H/2, W/2)
//   x  = sigmoid(deconv4x4/2(t1) + template_y) -> (C, H, W)
class ToyGenerator final : public ConditionalGenerator {
 public:
  struct Options {
    int latent_dim = 16;
    int num_classes = 10;
    int embed_dim = 8;
    ImageShape shape;
    uint64_t seed = 0;
  };

  explicit ToyGenerator(const Options& options);
  // Rebuilds from checkpoint contents; validates shapes.
  explicit ToyGenerator(const Checkpoint& checkpoint);

  int latent_dim() const override { return options_.latent_dim; }
  int num_source_classes() const override { return options_.num_classes; }
  ImageShape image_shape() const override { return options_.shape; }
  Vector Generate(const Vector& z, int source_class) const override;
  uint64_t Checksum() const override { return TensorChecksum(params_); }

  Checkpoint ToCheckpoint() const;

 private:
  Options options_;
  std::vector<Tensor> params_;
};

// conv3x3/2 -> tanh -> conv3x3/2 -> tanh -> linear -> tanh. The output is the
// penultimate representation of a would-be classifier.
class ToyFeatureExtractor final : public FeatureExtractor {
 public:
  struct Options {
    ImageShape shape;
    int feat_dim = 64;
    uint64_t seed = 0;
  };

  explicit ToyFeatureExtractor(const Options& options);
  explicit ToyFeatureExtractor(const Checkpoint& checkpoint);

  ImageShape image_shape() const override { return options_.shape; }
  int feat_dim() const override { return options_.feat_dim; }
  Vector Extract(const Vector& image) const override;
  Vector Vjp(const Vector& image, const Vector& cotangent) const override;
  uint64_t Checksum() const override { return TensorChecksum(params_); }

  Checkpoint ToCheckpoint() const;

 private:
  Options options_;
  std::vector<Tensor> params_;
};

// Flattened pixels as features; used by the pixel-space DP-NTK baseline.
class IdentityExtractor final : public FeatureExtractor {
 public:
  explicit IdentityExtractor(ImageShape shape) : shape_(shape) {}

  ImageShape image_shape() const override { return shape_; }
  int feat_dim() const override { return shape_.size(); }
  Vector Extract(const Vector& image) const override;
  Vector Vjp(const Vector& image, const Vector& cotangent) const override;
  uint64_t Checksum() const override;

 private:
  ImageShape shape_;
};

enum class ModelKind { kGenerator, kExtractor };

using LoadedModel = std::variant<std::shared_ptr<const ConditionalGenerator>,
                                 std::shared_ptr<const FeatureExtractor>>;

// Loads a backbone checkpoint. Errors: kNotFound, kParseError,
// kVersionMismatch, kKindMismatch (file holds a different kind),
// kShapeMismatch (tensor table inconsistent with the architecture).
LoadedModel LoadCheckpoint(const std::string& path, ModelKind kind);
std::shared_ptr<const ConditionalGenerator> LoadGenerator(const std::string& path);
std::shared_ptr<const FeatureExtractor> LoadExtractor(const std::string& path);

}  // namespace vpntk

#endif  // VPNTK_BACKBONES_H_
