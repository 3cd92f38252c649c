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

#ifndef VPNTK_EVALUATION_H_
#define VPNTK_EVALUATION_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vpntk/backbones.h"
#include "vpntk/linalg.h"
#include "vpntk/vprompt.h"

namespace vpntk {

enum class PayloadKind { kFeature, kImage };

struct SyntheticDataset {
  std::vector<Vector> payloads;
  std::vector<int> labels;
  PayloadKind kind = PayloadKind::kFeature;
};

// Feature mode: (FE(G(z, map(c))) + kappa * prompt_c, c).
// Pixel mode: (clip01(G(z, map(c)) + kappa * prompt_c), c).
// n_per_class records per private class, latents from the "synthesis" stream.
SyntheticDataset SynthesizeDataset(const ConditionalGenerator& generator,
                                   const PromptBank& bank,
                                   const LabelMapping& mapping,
                                   const FeatureExtractor& extractor,
                                   int n_per_class, uint64_t seed);

// Images from a generator conditioned directly on the private class (DP-NTK
// baseline).
SyntheticDataset SynthesizeImages(const ConditionalGenerator& generator,
                                  int num_classes, int n_per_class, uint64_t seed);

class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual int num_classes() const = 0;
  virtual Vector Scores(const Vector& payload) const = 0;
};

enum class ClassifierKind { kLogistic, kMlp };

ClassifierKind ParseClassifierKind(const std::string& name);
std::string ClassifierKindName(ClassifierKind kind);

// Multinomial logistic regression on standardized payloads with a small L2
// term, full-batch accelerated gradient descent until the gradient norm drops
// below 1e-5 or 2000 epochs. The MLP variant (one tanh hidden layer) is
// trained full-batch with Adam. Errors: fewer than two classes present ->
// kInvalidArgument.
std::unique_ptr<Classifier> TrainDownstream(const SyntheticDataset& data,
                                            uint64_t seed,
                                            ClassifierKind kind = ClassifierKind::kLogistic);

// Fraction of argmax-correct predictions; ties go to the lowest class index.
// Errors: empty test set -> kInvalidArgument.
double EvaluateAccuracy(const Classifier& classifier,
                        std::span<const Vector> payloads,
                        std::span<const int> labels);

// Index of the largest score, lowest index on ties.
int ArgMax(const Vector& scores);

struct AblationCell {
  std::string value;
  std::vector<double> accuracies;  // one per successful seed repeat
  std::vector<std::string> errors;  // one per failed repeat
  double mean = 0.0;
  double std = 0.0;
};

struct AblationResult {
  std::string parameter;
  std::vector<AblationCell> cells;
};

// Runs `run(value, repeat)` for each grid value and repeat r in [0, k) and
// aggregates mean and sample standard deviation over successful repeats. A
// throwing cell is recorded and the sweep continues. Errors: k < 3 or empty
// grid -> kInvalidArgument.
using CellRunner = std::function<double(const std::string& value, int repeat)>;
AblationResult AggregateSweep(const std::string& parameter,
                              const std::vector<std::string>& grid, int k,
                              const CellRunner& run);

}  // namespace vpntk

#endif  // VPNTK_EVALUATION_H_
