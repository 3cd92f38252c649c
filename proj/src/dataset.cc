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

#include "vpntk/dataset.h"

#include <png.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "vpntk/error.h"
#include "vpntk/rng.h"

namespace vpntk {
namespace {

constexpr double kMaxFailureFraction = 0.01;

struct RawImage {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<unsigned char> pixels;  // interleaved HWC
};

double Clip01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

LabeledImages Toy3Split(uint64_t seed, const char* stream, int count,
                        ImageShape shape) {
  // Class c is a bright blob centred near one of three anchors (upper left,
  // upper right, bottom centre) over a faint stripe texture of random
  // orientation that carries no label information.
  static constexpr double kAnchors[3][2] = {{0.3, 0.3}, {0.3, 0.7}, {0.72, 0.5}};
  LabeledImages out;
  Rng rng(seed, stream);
  const int h = shape.height;
  const int w = shape.width;
  for (int i = 0; i < count; ++i) {
    const int label = i % 3;
    const double cy = (kAnchors[label][0] + 0.08 * rng.Normal()) * h;
    const double cx = (kAnchors[label][1] + 0.08 * rng.Normal()) * w;
    const double radius = (0.12 + 0.05 * rng.Uniform()) * w;
    const double amplitude = 0.45 + 0.25 * rng.Uniform();
    const double base = 0.15 + 0.1 * rng.Uniform();
    const double angle = std::numbers::pi * rng.Uniform();
    const double period = 3.0 + 3.0 * rng.Uniform();
    const double phase = 2.0 * std::numbers::pi * rng.Uniform();
    Vector image(shape.size());
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
        const double t = y * std::sin(angle) + x * std::cos(angle);
        const double v = base + amplitude * std::exp(-d2 / (2.0 * radius * radius)) +
                         0.08 * std::sin(2.0 * std::numbers::pi * t / period + phase) +
                         0.05 * rng.Normal();
        for (int c = 0; c < shape.channels; ++c) image((c * h + y) * w + x) = Clip01(v);
      }
    }
    out.images.push_back(std::move(image));
    out.labels.push_back(label);
  }
  return out;
}

// Reads one whitespace-delimited header integer of a netpbm file.
int NetpbmInt(std::istream& in) {
  int c = in.peek();
  while (std::isspace(c) || c == '#') {
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else {
      in.get();
    }
    c = in.peek();
  }
  int value = -1;
  in >> value;
  if (!in) throw Error(ErrorCode::kParseError, "bad netpbm header");
  return value;
}

RawImage ReadNetpbm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kNotFound, "cannot open image '" + path + "'");
  char magic[2] = {0, 0};
  in.read(magic, 2);
  RawImage img;
  if (magic[0] == 'P' && magic[1] == '5') {
    img.channels = 1;
  } else if (magic[0] == 'P' && magic[1] == '6') {
    img.channels = 3;
  } else {
    Fail(ErrorCode::kParseError, "'" + path + "' is not a binary PGM/PPM");
  }
  img.width = NetpbmInt(in);
  img.height = NetpbmInt(in);
  const int maxval = NetpbmInt(in);
  if (img.width <= 0 || img.height <= 0 || maxval <= 0 || maxval > 255) {
    Fail(ErrorCode::kParseError, "'" + path + "' is not an 8-bit netpbm image");
  }
  in.get();  // single whitespace before the raster
  img.pixels.resize(static_cast<size_t>(img.width) * img.height * img.channels);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) {
    Fail(ErrorCode::kParseError, "'" + path + "' raster is truncated");
  }
  if (maxval != 255) {
    for (auto& p : img.pixels) p = static_cast<unsigned char>(std::lround(p * 255.0 / maxval));
  }
  return img;
}

RawImage ReadPng(const std::string& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    Fail(ErrorCode::kParseError, "cannot decode PNG '" + path + "': " + image.message);
  }
  const bool gray = (image.format & PNG_FORMAT_FLAG_COLOR) == 0;
  image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  RawImage img;
  img.channels = gray ? 1 : 3;
  img.width = static_cast<int>(image.width);
  img.height = static_cast<int>(image.height);
  img.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, img.pixels.data(), 0, nullptr)) {
    const std::string message = image.message;
    png_image_free(&image);
    Fail(ErrorCode::kParseError, "cannot decode PNG '" + path + "': " + message);
  }
  return img;
}

// Area-average resampling of one channel plane.
Vector Resample(const RawImage& img, ImageShape shape) {
  Vector out(shape.size());
  const double sy = static_cast<double>(img.height) / shape.height;
  const double sx = static_cast<double>(img.width) / shape.width;
  for (int c = 0; c < shape.channels; ++c) {
    for (int oy = 0; oy < shape.height; ++oy) {
      for (int ox = 0; ox < shape.width; ++ox) {
        const double y0 = oy * sy, y1 = (oy + 1) * sy;
        const double x0 = ox * sx, x1 = (ox + 1) * sx;
        double acc = 0.0, area = 0.0;
        for (int iy = static_cast<int>(y0); iy < img.height && iy < y1; ++iy) {
          const double wy = std::min<double>(iy + 1, y1) - std::max<double>(iy, y0);
          for (int ix = static_cast<int>(x0); ix < img.width && ix < x1; ++ix) {
            const double wx = std::min<double>(ix + 1, x1) - std::max<double>(ix, x0);
            const size_t base = (static_cast<size_t>(iy) * img.width + ix) * img.channels;
            double v = 0.0;
            if (shape.channels == img.channels) {
              v = img.pixels[base + c];
            } else if (img.channels == 3) {
              v = (img.pixels[base] + img.pixels[base + 1] + img.pixels[base + 2]) / 3.0;
            } else {
              v = img.pixels[base];
            }
            acc += wy * wx * v;
            area += wy * wx;
          }
        }
        out((c * shape.height + oy) * shape.width + ox) = acc / area / 255.0;
      }
    }
  }
  return out;
}

}  // namespace

IngestedDataset MakeToy3(uint64_t seed, ImageShape shape) {
  IngestedDataset ds;
  ds.shape = shape;
  ds.num_classes = 3;
  ds.train = Toy3Split(seed, "toy3/train", kToy3TrainSize, shape);
  ds.test = Toy3Split(seed, "toy3/test", kToy3TestSize, shape);
  return ds;
}

Vector ReadImage(const std::string& path, ImageShape shape) {
  if (!std::filesystem::exists(path)) {
    Fail(ErrorCode::kNotFound, "image '" + path + "' does not exist");
  }
  std::ifstream probe(path, std::ios::binary);
  unsigned char sig[8] = {0};
  probe.read(reinterpret_cast<char*>(sig), 8);
  const RawImage raw =
      (probe.gcount() == 8 && png_sig_cmp(sig, 0, 8) == 0) ? ReadPng(path) : ReadNetpbm(path);
  if (raw.channels != 1 && raw.channels != 3) {
    Fail(ErrorCode::kParseError, "'" + path + "' must have one or three channels");
  }
  return Resample(raw, shape);
}

void WriteNetpbm(const std::string& path, const Vector& image, ImageShape shape) {
  Require(shape.channels == 1 || shape.channels == 3, "netpbm needs 1 or 3 channels");
  Require(image.size() == shape.size(), "image does not match shape");
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorCode::kIoError, "cannot write '" + path + "'");
  out << (shape.channels == 1 ? "P5" : "P6") << "\n"
      << shape.width << " " << shape.height << "\n255\n";
  for (int y = 0; y < shape.height; ++y)
    for (int x = 0; x < shape.width; ++x)
      for (int c = 0; c < shape.channels; ++c) {
        const double v = Clip01(image((c * shape.height + y) * shape.width + x));
        out.put(static_cast<char>(std::lround(v * 255.0)));
      }
  if (!out) Fail(ErrorCode::kIoError, "write to '" + path + "' failed");
}

bool InTestSplit(const std::string& relative_path, uint64_t seed) {
  return DeriveSeed(seed, "split/" + relative_path) % 10 == 0;
}

IngestedDataset IngestDataset(const std::string& source, ImageShape shape,
                              uint64_t seed) {
  if (source == "toy3") return MakeToy3(seed, shape);

  namespace fs = std::filesystem;
  const fs::path dir(source);
  if (!fs::is_directory(dir)) {
    Fail(ErrorCode::kInvalidArgument,
         "dataset '" + source + "' is neither a builtin name nor a directory");
  }
  const fs::path manifest = dir / "labels";
  std::ifstream in(manifest);
  if (!in) Fail(ErrorCode::kNotFound, "dataset directory has no 'labels' manifest");

  struct Row {
    std::string path;
    int label;
  };
  std::vector<Row> rows;
  IngestedDataset ds;
  ds.shape = shape;
  int declared_classes = -1;
  size_t total = 0, failed = 0;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.rfind("#classes", 0) == 0) {
      declared_classes = std::atoi(line.c_str() + 8);
      if (declared_classes < 1) Fail(ErrorCode::kParseError, "bad #classes line");
      continue;
    }
    if (line[0] == '#') continue;
    ++total;
    const auto tab = line.find('\t');
    int label = -1;
    if (tab != std::string::npos) {
      std::istringstream ls(line.substr(tab + 1));
      ls >> label;
      if (!ls) label = -1;
    }
    if (tab == std::string::npos || label < 0) {
      ++failed;
      ds.diagnostics.push_back("labels:" + std::to_string(line_no) +
                               ": malformed manifest row");
      continue;
    }
    rows.push_back({line.substr(0, tab), label});
  }

  int max_label = -1;
  for (const Row& r : rows) max_label = std::max(max_label, r.label);
  ds.num_classes = declared_classes > 0 ? declared_classes : max_label + 1;

  for (const Row& r : rows) {
    if (r.label >= ds.num_classes) {
      ++failed;
      ds.diagnostics.push_back(r.path + ": label " + std::to_string(r.label) +
                               " out of range");
      continue;
    }
    Vector image;
    try {
      image = ReadImage((dir / r.path).string(), shape);
    } catch (const Error& e) {
      ++failed;
      ds.diagnostics.push_back(r.path + ": " + e.what());
      continue;
    }
    LabeledImages& split = InTestSplit(r.path, seed) ? ds.test : ds.train;
    split.images.push_back(std::move(image));
    split.labels.push_back(r.label);
  }
  if (total == 0) Fail(ErrorCode::kParseError, "manifest lists no images");
  if (static_cast<double>(failed) > kMaxFailureFraction * static_cast<double>(total)) {
    std::ostringstream oss;
    oss << failed << " of " << total << " manifest entries failed to load";
    for (const auto& d : ds.diagnostics) oss << "\n  " << d;
    Fail(ErrorCode::kParseError, oss.str());
  }
  return ds;
}

}  // namespace vpntk
