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

#include "vpntk/backbones.h"

#include <cmath>
#include <sstream>

#include "conv.h"
#include "vpntk/error.h"
#include "vpntk/rng.h"

namespace vpntk {
namespace {

using internal::ConvGeometry;

Tensor RandomTensor(std::vector<int64_t> shape, double stddev, Rng& rng) {
  Tensor t{std::move(shape), {}};
  t.data.resize(static_cast<size_t>(t.numel()));
  for (float& v : t.data) v = static_cast<float>(stddev * rng.Normal());
  return t;
}

void ExpectShape(const Tensor& t, const std::vector<int64_t>& shape,
                 const char* name) {
  if (t.shape != shape) {
    std::ostringstream oss;
    oss << "tensor '" << name << "' has shape [";
    for (size_t i = 0; i < t.shape.size(); ++i) oss << (i ? "," : "") << t.shape[i];
    oss << "], architecture requires [";
    for (size_t i = 0; i < shape.size(); ++i) oss << (i ? "," : "") << shape[i];
    oss << "]";
    Fail(ErrorCode::kShapeMismatch, oss.str());
  }
}

void CheckImageShape(const ImageShape& s) {
  if (s.channels <= 0 || s.height <= 0 || s.width <= 0 || s.height % 4 != 0 ||
      s.width % 4 != 0) {
    Fail(ErrorCode::kShapeMismatch,
         "image shape must be positive with height and width divisible by 4");
  }
}

double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

constexpr int kGenHiddenChannels = 8;
constexpr int kGenMidChannels = 4;
constexpr int kFeConv1Channels = 8;
constexpr int kFeConv2Channels = 16;

}  // namespace

// ---------------------------------------------------------------------------
// ToyGenerator

ToyGenerator::ToyGenerator(const Options& options) : options_(options) {
  Require(options.latent_dim > 0 && options.num_classes > 0 &&
              options.embed_dim > 0,
          "generator dimensions must be positive");
  CheckImageShape(options.shape);
  const ImageShape& s = options.shape;
  const int64_t seed_len = kGenHiddenChannels * (s.height / 4) * (s.width / 4);
  const int64_t in_len = options.latent_dim + options.embed_dim;
  Rng rng(options.seed, "toy_generator/init");

  params_.push_back(RandomTensor({options.num_classes, options.embed_dim}, 1.0, rng));
  params_.push_back(RandomTensor({seed_len, in_len}, 1.0 / std::sqrt(double(in_len)), rng));
  params_.push_back(RandomTensor({seed_len}, 0.1, rng));
  params_.push_back(RandomTensor({kGenHiddenChannels, kGenMidChannels, 4, 4},
                                 1.0 / std::sqrt(kGenHiddenChannels * 4.0), rng));
  params_.push_back(RandomTensor({kGenMidChannels}, 0.1, rng));
  params_.push_back(RandomTensor({kGenMidChannels, s.channels, 4, 4},
                                 1.0 / std::sqrt(kGenMidChannels * 4.0), rng));
  params_.push_back(RandomTensor({s.channels}, 0.1, rng));

  // Class templates: a few signed Gaussian blobs per class.
  Tensor templates{{options.num_classes, s.size()}, {}};
  templates.data.assign(static_cast<size_t>(templates.numel()), 0.0f);
  const double blob_sigma = s.width / 6.0;
  for (int c = 0; c < options.num_classes; ++c) {
    std::vector<double> t(s.height * s.width, -0.5);
    for (int b = 0; b < 3; ++b) {
      const double cy = 1.0 + rng.Uniform() * (s.height - 2.0);
      const double cx = 1.0 + rng.Uniform() * (s.width - 2.0);
      const double amp = (rng.Uniform() < 0.5 ? -1.0 : 1.0) * (1.5 + 1.5 * rng.Uniform());
      for (int y = 0; y < s.height; ++y)
        for (int x = 0; x < s.width; ++x) {
          const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
          t[y * s.width + x] += amp * std::exp(-d2 / (2 * blob_sigma * blob_sigma));
        }
    }
    for (int ch = 0; ch < s.channels; ++ch)
      for (int p = 0; p < s.height * s.width; ++p)
        templates.data[c * s.size() + ch * s.height * s.width + p] =
            static_cast<float>(t[p]);
  }
  params_.push_back(std::move(templates));
}

ToyGenerator::ToyGenerator(const Checkpoint& checkpoint) {
  if (checkpoint.kind != CheckpointKind::kGenerator) {
    Fail(ErrorCode::kKindMismatch, "checkpoint does not hold a generator");
  }
  if (checkpoint.meta.size() != 6 || checkpoint.tensors.size() != 8) {
    Fail(ErrorCode::kShapeMismatch, "generator checkpoint has the wrong layout");
  }
  const auto& m = checkpoint.meta;
  options_.latent_dim = static_cast<int>(m[0]);
  options_.num_classes = static_cast<int>(m[1]);
  options_.embed_dim = static_cast<int>(m[2]);
  options_.shape = {static_cast<int>(m[3]), static_cast<int>(m[4]),
                    static_cast<int>(m[5])};
  if (options_.latent_dim <= 0 || options_.num_classes <= 0 ||
      options_.embed_dim <= 0) {
    Fail(ErrorCode::kShapeMismatch, "generator checkpoint has invalid dimensions");
  }
  CheckImageShape(options_.shape);
  const ImageShape& s = options_.shape;
  const int64_t seed_len = kGenHiddenChannels * (s.height / 4) * (s.width / 4);
  const auto& t = checkpoint.tensors;
  ExpectShape(t[0], {options_.num_classes, options_.embed_dim}, "embed");
  ExpectShape(t[1], {seed_len, options_.latent_dim + options_.embed_dim}, "fc_w");
  ExpectShape(t[2], {seed_len}, "fc_b");
  ExpectShape(t[3], {kGenHiddenChannels, kGenMidChannels, 4, 4}, "deconv1_w");
  ExpectShape(t[4], {kGenMidChannels}, "deconv1_b");
  ExpectShape(t[5], {kGenMidChannels, s.channels, 4, 4}, "deconv2_w");
  ExpectShape(t[6], {s.channels}, "deconv2_b");
  ExpectShape(t[7], {options_.num_classes, s.size()}, "templates");
  params_ = checkpoint.tensors;
}

Vector ToyGenerator::Generate(const Vector& z, int source_class) const {
  if (source_class < 0 || source_class >= options_.num_classes) {
    std::ostringstream oss;
    oss << "source class " << source_class << " outside [0, "
        << options_.num_classes << ")";
    Fail(ErrorCode::kInvalidArgument, oss.str());
  }
  if (z.size() != options_.latent_dim) {
    Fail(ErrorCode::kInvalidArgument, "latent vector has the wrong length");
  }
  if (!z.allFinite()) Fail(ErrorCode::kInvalidArgument, "latent vector is not finite");

  const ImageShape& s = options_.shape;
  const int e = options_.embed_dim;
  Vector input(options_.latent_dim + e);
  input.head(options_.latent_dim) = z;
  for (int i = 0; i < e; ++i) input(options_.latent_dim + i) = params_[0].data[source_class * e + i];

  const auto& fc_w = params_[1];
  const int rows = static_cast<int>(fc_w.shape[0]);
  Vector h(rows);
  for (int r = 0; r < rows; ++r) {
    double acc = params_[2].data[r];
    for (int c = 0; c < input.size(); ++c) acc += double(fc_w.data[r * input.size() + c]) * input(c);
    h(r) = std::tanh(acc);
  }

  const ConvGeometry g1{kGenHiddenChannels, s.height / 4, s.width / 4,
                        kGenMidChannels, 4, 2, 1};
  Vector t1 = internal::ConvTranspose2d(h, params_[3].data.data(),
                                        params_[4].data.data(), g1);
  t1 = t1.array().tanh().matrix();
  const ConvGeometry g2{kGenMidChannels, s.height / 2, s.width / 2, s.channels,
                        4, 2, 1};
  Vector out = internal::ConvTranspose2d(t1, params_[5].data.data(),
                                         params_[6].data.data(), g2);
  const float* tmpl = params_[7].data.data() + source_class * s.size();
  for (int i = 0; i < out.size(); ++i) out(i) = Sigmoid(out(i) + tmpl[i]);
  return out;
}

Checkpoint ToyGenerator::ToCheckpoint() const {
  const ImageShape& s = options_.shape;
  return Checkpoint{CheckpointKind::kGenerator,
                    {options_.latent_dim, options_.num_classes,
                     options_.embed_dim, s.channels, s.height, s.width},
                    params_};
}

// ---------------------------------------------------------------------------
// ToyFeatureExtractor

namespace {

struct FeGeometry {
  ConvGeometry conv1;
  ConvGeometry conv2;
  int flat;
};

FeGeometry MakeFeGeometry(const ImageShape& s) {
  FeGeometry g;
  g.conv1 = {s.channels, s.height, s.width, kFeConv1Channels, 3, 2, 1};
  g.conv2 = {kFeConv1Channels, g.conv1.conv_out_height(),
             g.conv1.conv_out_width(), kFeConv2Channels, 3, 2, 1};
  g.flat = kFeConv2Channels * g.conv2.conv_out_height() * g.conv2.conv_out_width();
  return g;
}

}  // namespace

ToyFeatureExtractor::ToyFeatureExtractor(const Options& options)
    : options_(options) {
  Require(options.feat_dim > 0, "feat_dim must be positive");
  CheckImageShape(options.shape);
  const FeGeometry g = MakeFeGeometry(options.shape);
  Rng rng(options.seed, "toy_extractor/init");
  const int c = options.shape.channels;
  params_.push_back(RandomTensor({kFeConv1Channels, c, 3, 3},
                                 1.0 / std::sqrt(9.0 * c), rng));
  params_.push_back(RandomTensor({kFeConv1Channels}, 0.1, rng));
  params_.push_back(RandomTensor({kFeConv2Channels, kFeConv1Channels, 3, 3},
                                 1.0 / std::sqrt(9.0 * kFeConv1Channels), rng));
  params_.push_back(RandomTensor({kFeConv2Channels}, 0.1, rng));
  params_.push_back(RandomTensor({options.feat_dim, g.flat},
                                 1.0 / std::sqrt(double(g.flat)), rng));
  params_.push_back(RandomTensor({options.feat_dim}, 0.1, rng));
}

ToyFeatureExtractor::ToyFeatureExtractor(const Checkpoint& checkpoint) {
  if (checkpoint.kind != CheckpointKind::kExtractor) {
    Fail(ErrorCode::kKindMismatch, "checkpoint does not hold a feature extractor");
  }
  if (checkpoint.meta.size() != 4 || checkpoint.tensors.size() != 6) {
    Fail(ErrorCode::kShapeMismatch, "extractor checkpoint has the wrong layout");
  }
  const auto& m = checkpoint.meta;
  options_.shape = {static_cast<int>(m[0]), static_cast<int>(m[1]),
                    static_cast<int>(m[2])};
  options_.feat_dim = static_cast<int>(m[3]);
  if (options_.feat_dim <= 0) {
    Fail(ErrorCode::kShapeMismatch, "extractor checkpoint has invalid feat_dim");
  }
  CheckImageShape(options_.shape);
  const FeGeometry g = MakeFeGeometry(options_.shape);
  const auto& t = checkpoint.tensors;
  ExpectShape(t[0], {kFeConv1Channels, options_.shape.channels, 3, 3}, "conv1_w");
  ExpectShape(t[1], {kFeConv1Channels}, "conv1_b");
  ExpectShape(t[2], {kFeConv2Channels, kFeConv1Channels, 3, 3}, "conv2_w");
  ExpectShape(t[3], {kFeConv2Channels}, "conv2_b");
  ExpectShape(t[4], {options_.feat_dim, g.flat}, "fc_w");
  ExpectShape(t[5], {options_.feat_dim}, "fc_b");
  params_ = checkpoint.tensors;
}

namespace {

struct FeTrace {
  Vector a1, a2, out;
};

FeTrace FeForward(const std::vector<Tensor>& p, const FeGeometry& g,
                  const Vector& image) {
  FeTrace t;
  t.a1 = internal::Conv2d(image, p[0].data.data(), p[1].data.data(), g.conv1)
             .array().tanh().matrix();
  t.a2 = internal::Conv2d(t.a1, p[2].data.data(), p[3].data.data(), g.conv2)
             .array().tanh().matrix();
  const int feat = static_cast<int>(p[4].shape[0]);
  t.out.resize(feat);
  for (int r = 0; r < feat; ++r) {
    double acc = p[5].data[r];
    const float* row = p[4].data.data() + static_cast<size_t>(r) * g.flat;
    for (int c = 0; c < g.flat; ++c) acc += double(row[c]) * t.a2(c);
    t.out(r) = std::tanh(acc);
  }
  return t;
}

}  // namespace

Vector ToyFeatureExtractor::Extract(const Vector& image) const {
  if (image.size() != options_.shape.size()) {
    Fail(ErrorCode::kInvalidArgument, "image does not match the extractor's shape");
  }
  return FeForward(params_, MakeFeGeometry(options_.shape), image).out;
}

Vector ToyFeatureExtractor::Vjp(const Vector& image, const Vector& cotangent) const {
  if (image.size() != options_.shape.size() ||
      cotangent.size() != options_.feat_dim) {
    Fail(ErrorCode::kInvalidArgument, "VJP argument shapes do not match the extractor");
  }
  const FeGeometry g = MakeFeGeometry(options_.shape);
  const FeTrace t = FeForward(params_, g, image);
  const Vector gz = cotangent.cwiseProduct((1.0 - t.out.array().square()).matrix());
  Vector ga2 = Vector::Zero(g.flat);
  for (int r = 0; r < options_.feat_dim; ++r) {
    const float* row = params_[4].data.data() + static_cast<size_t>(r) * g.flat;
    for (int c = 0; c < g.flat; ++c) ga2(c) += gz(r) * row[c];
  }
  const Vector gh2 = ga2.cwiseProduct((1.0 - t.a2.array().square()).matrix());
  const Vector ga1 = internal::Conv2dInputVjp(gh2, params_[2].data.data(), g.conv2);
  const Vector gh1 = ga1.cwiseProduct((1.0 - t.a1.array().square()).matrix());
  return internal::Conv2dInputVjp(gh1, params_[0].data.data(), g.conv1);
}

Checkpoint ToyFeatureExtractor::ToCheckpoint() const {
  const ImageShape& s = options_.shape;
  return Checkpoint{CheckpointKind::kExtractor,
                    {s.channels, s.height, s.width, options_.feat_dim},
                    params_};
}

// ---------------------------------------------------------------------------
// IdentityExtractor

Vector IdentityExtractor::Extract(const Vector& image) const {
  if (image.size() != shape_.size()) {
    Fail(ErrorCode::kInvalidArgument, "image does not match the extractor's shape");
  }
  return image;
}

Vector IdentityExtractor::Vjp(const Vector& image, const Vector& cotangent) const {
  if (image.size() != shape_.size() || cotangent.size() != shape_.size()) {
    Fail(ErrorCode::kInvalidArgument, "VJP argument shapes do not match the extractor");
  }
  return cotangent;
}

uint64_t IdentityExtractor::Checksum() const {
  std::ostringstream oss;
  oss << "identity:" << shape_.channels << "x" << shape_.height << "x" << shape_.width;
  return Fnv1a64(oss.str());
}

// ---------------------------------------------------------------------------
// Loading

LoadedModel LoadCheckpoint(const std::string& path, ModelKind kind) {
  const Checkpoint ckpt = ReadCheckpoint(path);
  const CheckpointKind want = kind == ModelKind::kGenerator
                                  ? CheckpointKind::kGenerator
                                  : CheckpointKind::kExtractor;
  if (ckpt.kind != want) {
    Fail(ErrorCode::kKindMismatch, "checkpoint '" + path + "' holds a " +
                                       CheckpointKindName(ckpt.kind) +
                                       ", expected a " + CheckpointKindName(want));
  }
  if (kind == ModelKind::kGenerator) {
    return std::shared_ptr<const ConditionalGenerator>(
        std::make_shared<ToyGenerator>(ckpt));
  }
  return std::shared_ptr<const FeatureExtractor>(
      std::make_shared<ToyFeatureExtractor>(ckpt));
}

std::shared_ptr<const ConditionalGenerator> LoadGenerator(const std::string& path) {
  return std::get<std::shared_ptr<const ConditionalGenerator>>(
      LoadCheckpoint(path, ModelKind::kGenerator));
}

std::shared_ptr<const FeatureExtractor> LoadExtractor(const std::string& path) {
  return std::get<std::shared_ptr<const FeatureExtractor>>(
      LoadCheckpoint(path, ModelKind::kExtractor));
}

}  // namespace vpntk
