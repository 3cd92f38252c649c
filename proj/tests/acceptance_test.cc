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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails. Progress goes to stderr.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "vpntk/backbones.h"
#include "vpntk/config.h"
#include "vpntk/dataset.h"
#include "vpntk/embeddings.h"
#include "vpntk/error.h"
#include "vpntk/experiment.h"
#include "vpntk/ntk_features.h"
#include "vpntk/privacy.h"
#include "vpntk/rng.h"
#include "vpntk/training.h"
#include "vpntk/vprompt.h"

namespace vpntk {
namespace {

namespace fs = std::filesystem;

struct Verdict {
  bool pass = true;
  std::string detail;
};

class Report {
 public:
  void Print(int id, const std::string& title, const Verdict& v, double seconds) {
    std::printf("%s  %2d  %-34s %7.2f s  %s\n", v.pass ? "PASS" : "FAIL", id, title.c_str(),
                seconds, v.detail.c_str());
    std::fflush(stdout);
    failures_ += v.pass ? 0 : 1;
  }
  int failures() const { return failures_; }

 private:
  int failures_ = 0;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string Fmt(const char* format, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), format, a, b, c, d);
  return buf;
}

Vector Gaussian(Rng& rng, int n) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.Normal();
  return v;
}

Vector UnitVector(Rng& rng, int n) {
  Vector v = Gaussian(rng, n);
  return v / v.norm();
}

// ---- 1: calibration -------------------------------------------------------

// Plain bisection on the exact privacy curve, sharing no code with the library.
double OracleDelta(double eps, double s) {
  auto cdf = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
  return cdf(1.0 / (2.0 * s) - eps * s) - std::exp(eps) * cdf(-1.0 / (2.0 * s) - eps * s);
}

double OracleSigma(double eps, double delta) {
  double lo = 1e-6, hi = 1e4;
  for (int i = 0; i < 300; ++i) {
    const double mid = 0.5 * (lo + hi);
    (OracleDelta(eps, mid) > delta ? lo : hi) = mid;
  }
  return hi;
}

Verdict Calibration(double* seconds) {
  Verdict v;
  std::ostringstream bad;
  double worst_oracle = 0.0;
  const Stopwatch clock;
  for (double eps : {0.1, 1.0, 10.0}) {
    for (double delta : {1e-6, 1e-5, 1e-2}) {
      const double sigma = CalibrateNoiseMultiplier(eps, delta);
      const double achieved = DeltaOfSigma(eps, sigma, 1.0);
      const double bound = std::sqrt(2.0 * std::log(1.25 / delta)) / eps;
      const double oracle_gap = std::abs(sigma - OracleSigma(eps, delta));
      worst_oracle = std::max(worst_oracle, oracle_gap);
      if (achieved > delta + 1e-9) {
        bad << " delta(" << eps << "," << delta << ")=" << achieved;
      }
      if (sigma > bound) {
        bad << " bound(" << eps << "," << delta << "):" << Fmt("%.4f>%.4f", sigma, bound);
      }
      if (oracle_gap > 1e-6) bad << " oracle(" << eps << "," << delta << ")";
    }
  }
  *seconds = clock.seconds();
  if (*seconds >= 1.0) bad << " runtime";
  v.pass = bad.str().empty();
  v.detail = Fmt("max |sigma-oracle|=%.1e", worst_oracle) + (v.pass ? "" : ";" + bad.str());
  return v;
}

// ---- 2: sensitivity -------------------------------------------------------

Verdict Sensitivity(double* seconds) {
  const Stopwatch clock;
  Rng rng(2, "acceptance/sensitivity");
  double worst_ratio = 0.0;
  double weakest_planted = 1e300;
  for (int instance = 0; instance < 200; ++instance) {
    const int m = 1 + static_cast<int>(rng.Below(6));
    const int d = 1 + static_cast<int>(rng.Below(8));
    const int classes = 1 + static_cast<int>(rng.Below(3));
    std::vector<FeatureVector> feats;
    std::vector<int> labels;
    for (int i = 0; i < m; ++i) {
      feats.push_back({UnitVector(rng, d)});
      labels.push_back(static_cast<int>(rng.Below(classes)));
    }
    // Replacement pool: every record's antipode plus fresh random features.
    std::vector<Vector> pool;
    for (const FeatureVector& f : feats) pool.push_back(-f.values);
    for (int i = 0; i < 4; ++i) pool.push_back(UnitVector(rng, d));
    const Matrix base = TrueMeanEmbedding(feats, labels, classes).matrix;
    double largest = 0.0;
    for (int r = 0; r < m; ++r) {
      for (const Vector& candidate : pool) {
        for (int y = 0; y < classes; ++y) {
          auto f2 = feats;
          auto l2 = labels;
          f2[r] = {candidate};
          l2[r] = y;
          largest = std::max(largest, (TrueMeanEmbedding(f2, l2, classes).matrix - base).norm());
        }
      }
    }
    const double bound = 2.0 / m;
    worst_ratio = std::max(worst_ratio, largest / bound);
    weakest_planted = std::min(weakest_planted, largest / bound);
  }
  *seconds = clock.seconds();
  Verdict v;
  v.pass = worst_ratio <= 1.0 + 1e-12 && weakest_planted >= 0.95 && *seconds < 10.0;
  v.detail = Fmt("max change/(2/m)=%.12f, min with antipode planted=%.6f", worst_ratio,
                 weakest_planted);
  return v;
}

// ---- 3: mechanism noise ---------------------------------------------------

Verdict MechanismNoise(double* seconds) {
  const Stopwatch clock;
  Rng rng(3, "acceptance/noise");
  std::vector<FeatureVector> feats;
  std::vector<int> labels;
  for (int i = 0; i < 10; ++i) {
    feats.push_back({UnitVector(rng, 2)});
    labels.push_back(i % 3);
  }
  const MeanEmbedding clean = TrueMeanEmbedding(feats, labels, 3);
  const int draws = 100000;
  const double sigma = 1.0;
  const int64_t m = 10;
  Matrix sum = Matrix::Zero(clean.matrix.rows(), clean.matrix.cols());
  Matrix sum_sq = sum;
  for (int k = 0; k < draws; ++k) {
    const Matrix noise = PerturbEmbedding(clean, sigma, m, k).matrix - clean.matrix;
    sum += noise;
    sum_sq += noise.cwiseProduct(noise);
  }
  const double expected = 4.0 * sigma * sigma / static_cast<double>(m * m);
  const Matrix mean = sum / draws;
  const Matrix var = (sum_sq - sum.cwiseProduct(sum) / draws) / (draws - 1);
  const double se = std::sqrt(expected / draws);
  const double worst_var = (var.array() / expected - 1.0).abs().maxCoeff();
  const double worst_mean = mean.cwiseAbs().maxCoeff() / se;
  *seconds = clock.seconds();
  Verdict v;
  v.pass = worst_var <= 0.03 && worst_mean <= 3.0 && *seconds < 10.0;
  v.detail = Fmt("target var %.3f, max rel var error %.4f, max |mean shift| %.2f SE over %.0f entries",
                 expected, worst_var, worst_mean, static_cast<double>(clean.matrix.size()));
  return v;
}

// ---- 4: NTK features ------------------------------------------------------

Verdict NtkFeatures(double* seconds) {
  const Stopwatch clock;
  const NtkConfig config;  // 64 -> 512 -> 1, tanh
  const NtkFeatureMap map(config);
  Rng rng(4, "acceptance/ntk");
  double worst_norm = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Vector x = Gaussian(rng, config.input_dim);
    worst_norm = std::max(worst_norm, std::abs(map.Feature(x).values.norm() - 1.0));
  }
  // Directional derivatives along random parameter directions.
  const Vector theta = map.Parameters();
  const double h = 1e-5;
  double worst_fd = 0.0;
  const int probes = 50;
  for (int p = 0; p < probes; ++p) {
    const Vector x = Gaussian(rng, config.input_dim);
    const Vector u = UnitVector(rng, static_cast<int>(theta.size()));
    const double analytic = map.RawGradient(x).dot(u);
    const double up = map.WithParameters(theta + h * u).Output(x);
    const double down = map.WithParameters(theta - h * u).Output(x);
    const double numeric = (up - down) / (2.0 * h);
    worst_fd = std::max(worst_fd, std::abs(analytic - numeric) / std::abs(numeric));
  }
  *seconds = clock.seconds();
  Verdict v;
  v.pass = worst_norm <= 1e-6 && worst_fd <= 1e-4;
  v.detail = Fmt("max |norm-1|=%.1e over 1000 inputs, max FD rel error %.1e over %.0f probes",
                 worst_norm, worst_fd, probes);
  return v;
}

// ---- 5: objective gradient ------------------------------------------------

Verdict ObjectiveGradient(double* seconds) {
  const Stopwatch clock;
  const ToyGenerator gen{ToyGenerator::Options{}};
  ToyFeatureExtractor::Options fe_options;
  fe_options.feat_dim = 8;
  const ToyFeatureExtractor fe(fe_options);
  NtkConfig ntk;
  ntk.input_dim = 8;
  ntk.hidden_widths = {12};
  const NtkFeatureMap map(ntk);
  const LabelMapping mapping = RandomLabelMapping(3, gen.num_source_classes(), 0);
  IngestedDataset toy = MakeToy3(0);
  toy.train.images.resize(60);
  toy.train.labels.resize(60);
  const PrivateDataset data(toy.train.images, toy.train.labels, 3, toy.shape);
  AccessGuard guard;
  const MeanEmbedding target =
      ReleasePrivateEmbedding(data, map, fe, PrivacyParams::Calibrated(1.0, 1e-5, 60), 0, guard);

  double worst = 0.0;
  int entries = 0;
  for (LossMode mode : {LossMode::kMixed, LossMode::kMmd, LossMode::kCosine}) {
    TrainOptions options;
    options.n_per_class = 3;
    options.loss.mode = mode;
    PromptBank bank = InitPrompts(3, fe.feat_dim(), PromptSpace::kFeature, 16.0, 1);
    auto objective = [&](const PromptBank& b) {
      return EvaluatePromptObjective(options, target, gen, fe, map, b, mapping, 0);
    };
    const RowMatrix analytic = objective(bank).grad_prompts;
    RowMatrix numeric(analytic.rows(), analytic.cols());
    const double h = 1e-5;
    for (int r = 0; r < bank.num_classes(); ++r) {
      for (int c = 0; c < bank.prompt_dim(); ++c) {
        const double keep = bank.prompts(r, c);
        bank.prompts(r, c) = keep + h;
        const double up = objective(bank).loss.total;
        bank.prompts(r, c) = keep - h;
        const double down = objective(bank).loss.total;
        bank.prompts(r, c) = keep;
        numeric(r, c) = (up - down) / (2.0 * h);
      }
    }
    entries += static_cast<int>(numeric.size());
    worst = std::max(worst, (analytic - numeric).norm() / numeric.norm());
  }
  *seconds = clock.seconds();
  Verdict v;
  v.pass = worst <= 1e-4;
  v.detail = Fmt("max rel error %.1e over %.0f prompt entries (mixed, mmd, cosine)", worst,
                 static_cast<double>(entries));
  return v;
}

// ---- pipeline runs --------------------------------------------------------

class RunCache {
 public:
  const RunRecord& Run(const ExperimentConfig& config) {
    const std::string key = ToConfigText(config);
    auto it = runs_.find(key);
    if (it != runs_.end()) return it->second;
    std::fprintf(stderr, "  run %zu: eps=%s sigma0=%d kappa=%s eta=%s repeat-seed=%llu ... ",
                 runs_.size() + 1, FormatDouble(config.epsilon).c_str(),
                 config.privacy_disabled ? 1 : 0, FormatDouble(config.kappa).c_str(),
                 FormatDouble(config.eta).c_str(),
                 static_cast<unsigned long long>(config.seeds.init));
    const RunRecord record = RunExperiment(config);
    std::fprintf(stderr, "acc %.4f (%.1f s)\n", record.accuracy, record.wall_clock_seconds);
    order_.push_back(key);
    return runs_.emplace(key, record).first->second;
  }

  std::vector<RunRecord> All() const {
    std::vector<RunRecord> out;
    for (const std::string& key : order_) out.push_back(runs_.at(key));
    return out;
  }

 private:
  std::map<std::string, RunRecord> runs_;
  std::vector<std::string> order_;
};

ExperimentConfig NonPrivate() {
  ExperimentConfig c;
  c.privacy_disabled = true;
  return c;
}

ExperimentConfig Private(double epsilon) {
  ExperimentConfig c;
  c.epsilon = epsilon;
  return c;
}

double MeanAccuracy(RunCache& cache, const ExperimentConfig& base, int repeats) {
  double sum = 0.0;
  for (int r = 0; r < repeats; ++r) sum += cache.Run(WithRepeat(base, r)).accuracy;
  return sum / repeats;
}

Verdict Utility(RunCache& cache) {
  const RunRecord& run = cache.Run(NonPrivate());
  ExperimentConfig control_config = NonPrivate();
  control_config.kappa = 0.0;
  const RunRecord& control = cache.Run(control_config);
  Verdict v;
  v.pass = run.accuracy >= 0.90 && run.accuracy >= control.accuracy + 0.05 &&
           run.wall_clock_seconds < 300.0;
  v.detail = Fmt("accuracy %.4f (need >= 0.90), kappa=0 control %.4f, run took %.1f s",
                 run.accuracy, control.accuracy, run.wall_clock_seconds);
  return v;
}

Verdict PrivacyOrdering(RunCache& cache) {
  const double clean = MeanAccuracy(cache, NonPrivate(), 3);
  const double eps10 = MeanAccuracy(cache, Private(10.0), 3);
  const double eps1 = MeanAccuracy(cache, Private(1.0), 3);
  Verdict v;
  v.pass = clean >= eps10 - 0.03 && eps10 >= eps1 - 0.03;
  v.detail = Fmt("mean accuracy over 3 seeds: sigma=0 %.4f, eps=10 %.4f, eps=1 %.4f", clean,
                 eps10, eps1);
  return v;
}

std::vector<std::string> ReadLines(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

Verdict Ablation(RunCache& cache, const fs::path& scratch) {
  auto runner = [&](const ExperimentConfig& c) { return cache.Run(c); };
  const std::vector<std::string> kappa_grid = DefaultGrid("kappa");
  const SweepOutcome kappa = RunSweep(ExperimentConfig{}, "kappa", kappa_grid, 3, runner);
  const std::string stem = (scratch / "kappa_ablation").string();
  ExportAblation(kappa.result, stem);

  std::ostringstream bad;
  const std::vector<std::string> lines = ReadLines(stem + ".txt");
  if (lines.size() != kappa_grid.size() + 1) bad << " table has " << lines.size() << " lines;";
  if (!lines.empty()) {
    std::istringstream header(lines[0]);
    std::vector<std::string> columns;
    for (std::string w; header >> w;) columns.push_back(w);
    if (columns.size() < 3 || columns[0] != "value" || columns[1] != "mean" || columns[2] != "std") {
      bad << " header '" << lines[0] << "';";
    }
  }
  for (size_t i = 0; i + 1 < lines.size() && i < kappa_grid.size(); ++i) {
    std::istringstream row(lines[i + 1]);
    std::string value;
    row >> value;
    if (value != kappa_grid[i]) bad << " row " << i << " value '" << value << "';";
  }
  std::ostringstream cells;
  for (const auto& cell : kappa.result.cells) {
    if (cell.accuracies.size() != 3) bad << " cell " << cell.value << " incomplete;";
    cells << " " << cell.value << ":" << Fmt("%.3f+-%.3f", cell.mean, cell.std);
  }

  const SweepOutcome eta = RunSweep(ExperimentConfig{}, "eta", {"1e-05", "0.01"}, 3, runner);
  const double low = eta.result.cells[0].mean;
  const double high = eta.result.cells[1].mean;
  if (!(low < high)) bad << " eta ordering;";

  Verdict v;
  v.pass = bad.str().empty();
  v.detail = "kappa" + cells.str() + Fmt("; eta 1e-5 %.4f < eta 1e-2 %.4f", low, high) +
             (v.pass ? "" : ";" + bad.str());
  return v;
}

Verdict SingleRead(RunCache& cache) {
  std::ostringstream bad;
  const std::vector<RunRecord> all = cache.All();
  for (size_t i = 0; i < all.size(); ++i) {
    if (all[i].privacy.private_read_count != 1 || !all[i].privacy.sealed) bad << " run " << i;
  }
  // A second read injected after the release must abort the run.
  bool caught = false;
  RunHooks hooks;
  hooks.after_release = [](const PrivateDataset& d, AccessGuard& g) { g.Read(d); };
  try {
    RunExperiment(Private(1.0), hooks);
  } catch (const Error& e) {
    caught = e.code() == ErrorCode::kPrivacyViolation;
  }
  if (!caught) bad << " injected second read was not rejected";
  Verdict v;
  v.pass = bad.str().empty();
  v.detail = Fmt("%.0f runs with one read and a sealed guard; injected read ", all.size()) +
             (caught ? "rejected" : "accepted") + (v.pass ? "" : ";" + bad.str());
  return v;
}

Verdict FrozenBackbones(RunCache& cache) {
  int changed = 0;
  const std::vector<RunRecord> all = cache.All();
  for (const RunRecord& r : all) {
    if (r.generator_checksum_before != r.generator_checksum_after ||
        r.extractor_checksum_before != r.extractor_checksum_after) {
      ++changed;
    }
  }
  Verdict v;
  v.pass = changed == 0;
  v.detail = Fmt("%.0f of %.0f runs changed a backbone checksum", changed, all.size());
  return v;
}

Verdict Replay(RunCache& cache, const fs::path& scratch) {
  const std::string stem = (scratch / "runs").string();
  ExportResults(cache.All(), stem);
  const std::vector<RunRecord> stored = ReadRunRecords(stem + ".jsonl");
  double worst = 0.0;
  int replayed = 0;
  // First non-private run and first private run.
  for (bool want_private : {false, true}) {
    for (const RunRecord& r : stored) {
      if (r.config.privacy_disabled == want_private) continue;
      const RunRecord again = RunExperiment(r.config);
      double gap = std::abs(again.accuracy - r.accuracy);
      if (again.loss_trace.size() != r.loss_trace.size()) gap = 1.0;
      for (size_t i = 0; i < std::min(again.loss_trace.size(), r.loss_trace.size()); ++i) {
        gap = std::max(gap, std::abs(again.loss_trace[i] - r.loss_trace[i]));
      }
      worst = std::max(worst, gap);
      ++replayed;
      break;
    }
  }
  Verdict v;
  v.pass = replayed == 2 && worst <= 1e-12;
  v.detail = Fmt("%.0f runs replayed from %.0f exported records, max deviation %.1e",
                 replayed, stored.size(), worst);
  return v;
}

int Main() {
  Report report;
  const fs::path scratch = fs::temp_directory_path() / "vpntk_acceptance";
  fs::remove_all(scratch);
  fs::create_directories(scratch);

  using Fast = Verdict (*)(double*);
  const std::vector<std::pair<std::string, Fast>> fast = {
      {"privacy calibration", Calibration},  {"replace-one sensitivity", Sensitivity},
      {"mechanism noise", MechanismNoise},   {"NTK features", NtkFeatures},
      {"objective gradient", ObjectiveGradient}};
  for (size_t i = 0; i < fast.size(); ++i) {
    double seconds = 0.0;
    const Verdict v = fast[i].second(&seconds);
    report.Print(static_cast<int>(i) + 1, fast[i].first, v, seconds);
  }

  RunCache cache;
  std::vector<std::pair<std::string, Verdict>> slow(6);
  std::vector<double> seconds(6, 0.0);
  auto timed = [&](int index, const std::string& title, const std::function<Verdict()>& fn) {
    std::fprintf(stderr, "criterion %d: %s\n", index + 6, title.c_str());
    const Stopwatch clock;
    slow[index] = {title, fn()};
    seconds[index] += clock.seconds();
  };
  timed(2, "end-to-end toy utility", [&] { return Utility(cache); });
  timed(3, "privacy-utility ordering", [&] { return PrivacyOrdering(cache); });
  timed(4, "ablation harness", [&] { return Ablation(cache, scratch); });
  timed(0, "single private read", [&] { return SingleRead(cache); });
  timed(1, "frozen backbones", [&] { return FrozenBackbones(cache); });
  timed(5, "determinism", [&] { return Replay(cache, scratch); });
  for (int i = 0; i < 6; ++i) report.Print(i + 6, slow[i].first, slow[i].second, seconds[i]);

  std::printf("%d of 11 criteria failed\n", report.failures());
  return report.failures() == 0 ? 0 : 1;
}

}  // namespace
}  // namespace vpntk

int main() {
  try {
    return vpntk::Main();
  } catch (const std::exception& e) {
    std::printf("FAIL  acceptance suite aborted: %s\n", e.what());
    return 1;
  }
}
