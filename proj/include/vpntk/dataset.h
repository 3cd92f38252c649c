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

#ifndef VPNTK_DATASET_H_
#define VPNTK_DATASET_H_

#include <cstdint>
#include <string>
#include <vector>

#include "vpntk/backbones.h"
#include "vpntk/linalg.h"

namespace vpntk {

struct LabeledImages {
  std::vector<Vector> images;
  std::vector<int> labels;

  size_t size() const { return labels.size(); }
};

struct IngestedDataset {
  LabeledImages train;
  LabeledImages test;
  int num_classes = 0;
  ImageShape shape;
  // One line per file that failed to load.
  std::vector<std::string> diagnostics;
};

inline constexpr int kToy3TrainSize = 2000;
inline constexpr int kToy3TestSize = 1000;

// Seeded 3-class pattern dataset: a jittered bright blob at a class-specific
// location over an uninformative stripe texture, plus pixel noise.
IngestedDataset MakeToy3(uint64_t seed, ImageShape shape = {});

// 8-bit grayscale or RGB image (binary PGM/PPM or PNG) converted to `shape`:
// RGB is averaged to gray for one-channel targets, gray is replicated for
// three-channel targets, and the image is area-resampled to height x width.
// Values are scaled to [0, 1].
Vector ReadImage(const std::string& path, ImageShape shape);

// Writes an 8-bit binary PGM (one channel) or PPM (three channels).
void WriteNetpbm(const std::string& path, const Vector& image, ImageShape shape);

// `source` is either "toy3" or a directory holding a `labels` manifest with
// one "relative_path<TAB>class_index" line per image; an optional
// "#classes N" line fixes the class count (default: max label + 1).
// Records are split 90/10 train/test by a seeded hash of the relative path.
// Files that fail to load are reported in `diagnostics`; ingestion aborts with
// kParseError when more than 1% fail.
IngestedDataset IngestDataset(const std::string& source, ImageShape shape,
                              uint64_t seed);

// True when the seeded path hash assigns `relative_path` to the test split.
bool InTestSplit(const std::string& relative_path, uint64_t seed);

}  // namespace vpntk

#endif  // VPNTK_DATASET_H_
