// iflf/tests/test_evalharness.cpp

// Copyright 2026  IFLF Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "doctest.h"

#include "iflf/adapt.hpp"
#include "iflf/common.hpp"
#include "iflf/evalharness.hpp"
#include "iflf/json_util.hpp"
#include "iflf/metatrain.hpp"
#include "iflf/model.hpp"
#include "iflf/sigproc.hpp"
#include "iflf/synthetic.hpp"

namespace iflf {
namespace {

std::filesystem::path temp_dir() {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("iflf_evalharness_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  return dir;
}

std::vector<WindowSet> synth_domains(int domains, int classes, double noise,
                                     std::uint64_t seed, double duration_s) {
  SyntheticSpec spec;
  spec.num_domains = std::max(domains, 2);
  spec.num_classes = classes;
  spec.sampling_rate_hz = 16.0;
  spec.duration_per_class_s = duration_s;
  for (int k = 0; k < spec.num_domains; ++k) {
    DomainPerturbation p;
    p.noise_std = noise;
    p.amplitude_scale = 1.0 + 0.08 * k;
    p.bias = 0.04 * k;
    spec.perturbations.push_back(p);
  }
  std::vector<WindowSet> out;
  for (const Recording &rec : generate_synthetic(spec, seed)) {
    WindowSet ws = make_windows(rec, 1.25, 0.75);
    ws.stats = compute_stats(rec);
    out.push_back(std::move(ws));
    if (out.size() == static_cast<std::size_t>(domains)) break;
  }
  return out;
}

ExtractorSpec tiny_spec(const WindowSet &ws) {
  ExtractorSpec spec;
  spec.variant = "conv-recurrent";
  spec.input_channels = static_cast<int>(ws.num_channels());
  spec.window_len = static_cast<int>(ws.window_len());
  spec.conv_layers = 2;
  spec.conv_channels = 8;
  spec.kernel = 3;
  spec.recurrent_layers = 2;
  spec.hidden = 16;
  spec.dropout = 0.25;
  return spec;
}

ExperimentPlan base_plan(const std::vector<WindowSet> &sets) {
  ExperimentPlan plan;
  plan.dataset = "synthetic";
  plan.domain_axis = "subject";
  plan.targets = {sets.back().domain.key()};
  plan.modes = {"TMTL", "PTM", "STL"};
  plan.shots = {1, 2};
  plan.repeats = 2;
  plan.seed = 404;
  plan.test_fraction = 0.3;
  plan.dump_embeddings = true;
  plan.dump_histograms = true;
  plan.extractor = tiny_spec(sets.front());
  plan.train.mode = "TMTL";
  plan.train.alpha = 3e-3;
  plan.train.beta = 3e-3;
  plan.train.mu = 0.02;
  plan.train.epsilon_margin = 0.4;
  plan.train.m = 6;
  plan.train.n = 2;
  plan.train.batch_size = 30;
  plan.train.max_epochs = 3;
  plan.train.patience = 5;
  plan.baseline.kind = "PTM";
  plan.baseline.lr = 1e-3;
  plan.baseline.max_iters = 10;
  plan.baseline.batch_size = 32;
  plan.adapt.lr = 2e-2;
  plan.adapt.mu = 0.01;
  plan.adapt.epochs = 10;
  plan.adapt.patience = 10;
  plan.adapt.batch_size = 100;
  return plan;
}

std::size_t line_count(const std::filesystem::path &path) {
  std::ifstream in(path);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (!line.empty()) ++n;
  }
  return n;
}

// One full leave-one-domain-out run shared by the inspection cases: three
// domains, the last held out, every mode over shots {1, 2} twice.
struct HarnessRun {
  std::vector<WindowSet> sets;
  ExperimentPlan plan;
  std::filesystem::path out_root;
  std::filesystem::path run_dir;
  EvalReport report;
};

const HarnessRun &harness() {
  static HarnessRun h = [] {
    HarnessRun out;
    out.sets = synth_domains(3, 3, 0.2, 101, 12.0);
    out.plan = base_plan(out.sets);
    out.out_root = temp_dir() / "main";
    std::filesystem::remove_all(out.out_root);
    out.report = run_plan(out.plan, out.sets, out.out_root);
    out.run_dir = out.out_root / ("run-" + plan_hash(out.plan));
    return out;
  }();
  return h;
}

// Expected fixed test-set size for one class under the 30% split.
long long expected_test_count(long long per_class, double fraction) {
  const long long nt = std::llround(fraction * static_cast<double>(per_class));
  return std::clamp(nt, 1LL, per_class);
}

// Windowset with hand-built windows for the similarity construction: three
// channels where s.x/s.y form one sensor and g.z a second.
WindowSet wave_set(const std::string &subject,
                   const std::vector<std::vector<Eigen::MatrixXd>> &per_class) {
  WindowSet ws;
  ws.domain = DomainId{subject, "dev"};
  ws.sampling_rate_hz = 16.0;
  ws.channel_names = {"s.x", "s.y", "g.z"};
  ws.normalized = true;
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    ws.class_names.push_back("act" + std::to_string(c));
    for (const auto &w : per_class[c]) {
      ws.windows.push_back(w);
      ws.labels.push_back(static_cast<int>(c));
    }
  }
  return ws;
}

Eigen::MatrixXd wave_window(double freq, double phase) {
  Eigen::MatrixXd w(3, 20);
  for (int t = 0; t < 20; ++t) {
    w(0, t) = 1.0 + 0.5 * std::sin(freq * t + phase);
    w(1, t) = 0.0;
    w(2, t) = 2.0 + 0.25 * std::cos(freq * t + phase);
  }
  return w;
}

}  // namespace

TEST_CASE("plan validation rejects malformed plans") {
  const auto sets = synth_domains(2, 2, 0.0, 7, 6.0);
  ExperimentPlan good = base_plan(sets);
  good.validate();

  ExperimentPlan p = good;
  p.domain_axis = "session";
  CHECK_THROWS_AS(p.validate(), ConfigError);

  p = good;
  p.targets.clear();
  CHECK_THROWS_AS(p.validate(), ConfigError);

  p = good;
  p.targets = {"a", "a"};
  CHECK_THROWS_AS(p.validate(), ConfigError);

  p = good;
  p.modes = {"TMTL", "TMTL"};
  CHECK_THROWS_AS(p.validate(), ConfigError);

  p = good;
  p.modes = {"MAML"};
  CHECK_THROWS_AS(p.validate(), ConfigError);

  p = good;
  p.shots = {0};
  CHECK_THROWS_AS(p.validate(), ConfigError);

  p = good;
  p.shots = {101};
  CHECK_THROWS_AS(p.validate(), ConfigError);

  p = good;
  p.shots = {5, 5};
  CHECK_THROWS_AS(p.validate(), ConfigError);

  p = good;
  p.shots = {10, 5};
  CHECK_THROWS_AS(p.validate(), ConfigError);

  p = good;
  p.repeats = 0;
  CHECK_THROWS_AS(p.validate(), ConfigError);

  p = good;
  p.test_fraction = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);

  p = good;
  p.test_fraction = 1.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("plan json round trip and hash sensitivity") {
  const auto sets = synth_domains(2, 2, 0.0, 8, 6.0);
  const ExperimentPlan plan = base_plan(sets);

  const nlohmann::json j = plan_to_json(plan);
  const ExperimentPlan back = plan_from_json(j);
  CHECK(plan_to_json(back).dump() == j.dump());
  CHECK(plan_hash(back) == plan_hash(plan));

  nlohmann::json bad = j;
  bad["unknown_knob"] = 1;
  CHECK_THROWS_AS(plan_from_json(bad), ConfigError);

  ExperimentPlan other = plan;
  other.seed += 1;
  CHECK(plan_hash(other) != plan_hash(plan));

  other = plan;
  other.shots = {1};
  CHECK(plan_hash(other) != plan_hash(plan));
}

TEST_CASE("compute_metrics on a perfect predictor") {
  std::vector<int> truths;
  std::vector<int> counts = {3, 2, 4};
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < counts[static_cast<std::size_t>(c)]; ++i) {
      truths.push_back(c);
    }
  }
  const Metrics m = compute_metrics(truths, truths, {0, 1, 2});
  CHECK(m.accuracy == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.classes == std::vector<int>{0, 1, 2});
  for (int c = 0; c < 3; ++c) {
    CHECK(m.recall.at(c) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.confusion(c, c) ==
          doctest::Approx(counts[static_cast<std::size_t>(c)]));
    CHECK(m.confusion.row(c).sum() ==
          doctest::Approx(counts[static_cast<std::size_t>(c)]));
  }
}

TEST_CASE("compute_metrics on a constant predictor") {
  const std::vector<int> truths = {0, 0, 1, 1, 1, 2};
  const std::vector<int> preds(truths.size(), 0);
  const Metrics m = compute_metrics(preds, truths, {0, 1, 2});
  CHECK(m.accuracy == doctest::Approx(2.0 / 6.0).epsilon(1e-12));
  CHECK(m.recall.at(0) == doctest::Approx(1.0));
  CHECK(m.recall.at(1) == doctest::Approx(0.0));
  CHECK(m.recall.at(2) == doctest::Approx(0.0));
  CHECK(m.confusion(1, 0) == doctest::Approx(3.0));
  CHECK(m.confusion.sum() == doctest::Approx(6.0));
}

TEST_CASE("compute_metrics matches an independent tally") {
  // Truths include an out-of-mask class that must be dropped.
  const std::vector<int> mask = {1, 3, 5};
  Rng rng(2024);
  std::vector<int> truths;
  std::vector<int> preds;
  const std::vector<int> truth_values = {1, 3, 5, 7};
  for (int i = 0; i < 300; ++i) {
    truths.push_back(truth_values[rng.index(truth_values.size())]);
    // Predictions stay inside the mask.
    preds.push_back(mask[rng.index(mask.size())]);
  }
  const Metrics m = compute_metrics(preds, truths, mask);

  std::map<int, std::map<int, double>> tally;
  double kept = 0.0;
  double hits = 0.0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (truths[i] == 7) continue;
    tally[truths[i]][preds[i]] += 1.0;
    kept += 1.0;
    if (truths[i] == preds[i]) hits += 1.0;
  }
  CHECK(m.accuracy == doctest::Approx(hits / kept).epsilon(1e-12));
  for (std::size_t a = 0; a < mask.size(); ++a) {
    double row = 0.0;
    for (std::size_t b = 0; b < mask.size(); ++b) {
      const double want = tally[mask[a]][mask[b]];
      CHECK(m.confusion(static_cast<Eigen::Index>(a),
                        static_cast<Eigen::Index>(b)) ==
            doctest::Approx(want).epsilon(1e-12));
      row += want;
    }
    CHECK(m.recall.at(mask[a]) ==
          doctest::Approx(tally[mask[a]][mask[a]] / row).epsilon(1e-12));
  }
}

TEST_CASE("compute_metrics input validation") {
  CHECK_THROWS_AS(compute_metrics({0}, {0, 1}, {0, 1}), ConfigError);
  CHECK_THROWS_AS(compute_metrics({0}, {0}, {}), ConfigError);
  CHECK_THROWS_AS(compute_metrics({0}, {0}, {0, 0}), ConfigError);
  // Prediction outside the mask for a kept truth.
  CHECK_THROWS_AS(compute_metrics({9}, {0}, {0, 1}), DataError);
  // Every truth outside the mask leaves nothing to score.
  CHECK_THROWS_AS(compute_metrics({0, 0}, {7, 7}, {0, 1}), DataError);
  // Out-of-mask truths are dropped even when their prediction is also out.
  const Metrics m = compute_metrics({0, 9}, {0, 9}, {0, 1});
  CHECK(m.confusion.sum() == doctest::Approx(1.0));
}

TEST_CASE("silhouette is exactly one for coincident clusters") {
  Eigen::MatrixXd x(4, 2);
  x << 0.0, 0.0, 0.0, 0.0, 5.0, 5.0, 5.0, 5.0;
  const std::vector<int> labels = {0, 0, 1, 1};
  CHECK(silhouette_score(x, labels) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("silhouette matches a brute-force oracle") {
  Rng rng(77);
  const int n = 42;
  const int d = 4;
  Eigen::MatrixXd x(n, d);
  std::vector<int> labels;
  for (int i = 0; i < n; ++i) {
    const int c = static_cast<int>(rng.index(3));
    labels.push_back(c);
    for (int j = 0; j < d; ++j) {
      x(i, j) = 3.0 * c + rng.normal();
    }
  }

  auto dist = [&](int i, int j) {
    return (x.row(i) - x.row(j)).norm();
  };
  double expected = 0.0;
  for (int i = 0; i < n; ++i) {
    int same = 0;
    for (int j = 0; j < n; ++j) {
      if (j != i && labels[j] == labels[i]) ++same;
    }
    if (same == 0) continue;
    double a = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j != i && labels[j] == labels[i]) a += dist(i, j);
    }
    a /= same;
    double b = std::numeric_limits<double>::infinity();
    for (int other = 0; other < 3; ++other) {
      if (other == labels[i]) continue;
      double sum = 0.0;
      int count = 0;
      for (int j = 0; j < n; ++j) {
        if (labels[j] == other) {
          sum += dist(i, j);
          ++count;
        }
      }
      if (count > 0) b = std::min(b, sum / count);
    }
    expected += (b - a) / std::max(a, b);
  }
  expected /= n;
  CHECK(silhouette_score(x, labels) ==
        doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("silhouette scores singletons as zero") {
  Eigen::MatrixXd x(3, 2);
  x << 0.0, 0.0, 10.0, 0.0, 10.0, 1.0;
  const std::vector<int> labels = {0, 1, 1};
  const double b0 = 10.0;           // singleton, contributes 0
  const double a1 = 1.0;
  const double b1 = 10.0;
  const double a2 = 1.0;
  const double b2 = std::sqrt(101.0);
  const double expected =
      (0.0 + (b1 - a1) / b1 + (b2 - a2) / b2) / 3.0;
  (void)b0;
  CHECK(silhouette_score(x, labels) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("silhouette input validation") {
  Eigen::MatrixXd x(2, 2);
  x << 0.0, 0.0, 1.0, 1.0;
  CHECK_THROWS_AS(silhouette_score(x, {0, 0}), DataError);
  CHECK_THROWS_AS(silhouette_score(x, {0}), ConfigError);
  CHECK_THROWS_AS(silhouette_score(Eigen::MatrixXd(0, 2), {}), DataError);
}

TEST_CASE("similarity_from_windowsets scores identical activities as one") {
  const auto w0 = wave_window(0.7, 0.0);
  const auto w1 = wave_window(1.3, 0.4);
  const WindowSet a = wave_set("s1", {{w0, w0}, {w1}});
  const WindowSet b = wave_set("s2", {{w0, w0}, {w1}});
  const SimilarityReport report =
      similarity_from_windowsets({a, b}, 0.8, 0, 512);
  REQUIRE(report.activities.count("act0") == 1);
  const ActivityScore &s0 = report.activities.at("act0");
  CHECK(s0.domains_present == 2);
  CHECK(s0.sufficient);
  CHECK(s0.mean == doctest::Approx(1.0).epsilon(1e-9));
  REQUIRE(s0.pair_scores.size() == 1);
  CHECK(s0.pair_scores.begin()->first.first == a.domain.key());
  CHECK(std::find(report.substitutable.begin(), report.substitutable.end(),
                  "act0") != report.substitutable.end());
  CHECK(std::find(report.substitutable.begin(), report.substitutable.end(),
                  "act1") != report.substitutable.end());
}

TEST_CASE("similarity_from_windowsets truncates at max_len") {
  // First windows agree, second windows diverge; a cap at one window's
  // length must hide the divergence.
  const auto shared = wave_window(0.7, 0.0);
  const WindowSet a = wave_set("s1", {{shared, wave_window(0.9, 0.0)}});
  const WindowSet b = wave_set("s2", {{shared, wave_window(2.6, 1.1)}});
  const SimilarityReport capped =
      similarity_from_windowsets({a, b}, 0.8, 0, 20);
  CHECK(capped.activities.at("act0").mean ==
        doctest::Approx(1.0).epsilon(1e-9));
  const SimilarityReport full =
      similarity_from_windowsets({a, b}, 0.8, 0, 512);
  CHECK(full.activities.at("act0").mean < 0.999);
}

TEST_CASE("similarity_from_windowsets marks single-domain activities") {
  const auto w0 = wave_window(0.7, 0.0);
  const auto w1 = wave_window(1.3, 0.4);
  const WindowSet a = wave_set("s1", {{w0}, {w1}});
  WindowSet b = wave_set("s2", {{w0}});
  const SimilarityReport report =
      similarity_from_windowsets({a, b}, 0.8, 0, 512);
  const ActivityScore &s1 = report.activities.at("act1");
  CHECK(s1.domains_present == 1);
  CHECK_FALSE(s1.sufficient);
  CHECK(std::find(report.substitutable.begin(), report.substitutable.end(),
                  "act1") == report.substitutable.end());
}

TEST_CASE("similarity_from_windowsets requires channel names") {
  WindowSet a = wave_set("s1", {{wave_window(0.7, 0.0)}});
  WindowSet b = wave_set("s2", {{wave_window(0.7, 0.0)}});
  a.channel_names.clear();
  CHECK_THROWS_AS(similarity_from_windowsets({a, b}, 0.8, 0, 512), DataError);
  CHECK_THROWS_AS(similarity_from_windowsets({}, 0.8, 0, 512), ConfigError);
  CHECK_THROWS_AS(similarity_from_windowsets({b}, 0.8, 0, 0), ConfigError);
}

TEST_CASE("summarize_cells aggregates, dedupes and excludes failures") {
  auto cell = [](const std::string &mode, int shots, int repeat,
                 const std::string &status, double acc) {
    CellResult c;
    c.mode = mode;
    c.target = "t";
    c.shots = shots;
    c.repeat = repeat;
    c.status = status;
    c.accuracy = acc;
    return c;
  };
  std::vector<CellResult> cells;
  cells.push_back(cell("TMTL", 1, 0, "failed", 0.0));
  cells.push_back(cell("TMTL", 1, 0, "ok", 0.6));  // retry wins
  cells.push_back(cell("TMTL", 1, 1, "ok", 0.8));
  cells.push_back(cell("TMTL", 1, 2, "failed", 0.0));
  cells.push_back(cell("STL", 1, 0, "ok", 0.5));

  const auto summary = summarize_cells(cells);
  REQUIRE(summary.size() == 2);
  CHECK(summary[0].mode == "STL");
  CHECK(summary[0].completed == 1);
  CHECK(summary[0].mean_accuracy == doctest::Approx(0.5));
  CHECK(summary[0].stderr_accuracy == doctest::Approx(0.0));

  CHECK(summary[1].mode == "TMTL");
  CHECK(summary[1].completed == 2);
  const double mean = (0.6 + 0.8) / 2.0;
  double ss = (0.6 - mean) * (0.6 - mean) + (0.8 - mean) * (0.8 - mean);
  const double stderr_want = std::sqrt((ss / 1.0) / 2.0);
  CHECK(summary[1].mean_accuracy == doctest::Approx(mean).epsilon(1e-12));
  CHECK(summary[1].stderr_accuracy ==
        doctest::Approx(stderr_want).epsilon(1e-12));
}

TEST_CASE("cell json round trip") {
  CellResult cell;
  cell.mode = "TMTL";
  cell.target = "s3__dev";
  cell.shots = 5;
  cell.repeat = 2;
  cell.status = "ok";
  cell.accuracy = 0.875;
  cell.classes = {0, 2};
  cell.recall[0] = 1.0;
  cell.recall[2] = 0.75;
  cell.confusion = Eigen::MatrixXd(2, 2);
  cell.confusion << 4, 0, 1, 3;
  cell.seconds = 1.5;

  const CellResult back = cell_from_json(cell_to_json(cell));
  CHECK(back.mode == cell.mode);
  CHECK(back.target == cell.target);
  CHECK(back.shots == cell.shots);
  CHECK(back.repeat == cell.repeat);
  CHECK(back.status == cell.status);
  CHECK(back.accuracy == doctest::Approx(cell.accuracy));
  CHECK(back.classes == cell.classes);
  CHECK(back.recall.at(2) == doctest::Approx(0.75));
  CHECK(back.confusion == cell.confusion);
  CHECK(back.seconds == doctest::Approx(1.5));

  nlohmann::json j = cell_to_json(cell);
  j["surprise"] = true;
  CHECK_THROWS_AS(cell_from_json(j), ConfigError);
}

TEST_CASE("run_plan validates its inputs") {
  auto sets = synth_domains(3, 2, 0.1, 55, 6.0);
  ExperimentPlan plan = base_plan(sets);
  const auto out = temp_dir() / "validate";

  ExperimentPlan bad = plan;
  bad.targets = {"nobody__here"};
  CHECK_THROWS_AS(run_plan(bad, sets, out), ConfigError);

  auto dup = sets;
  dup.push_back(sets[0]);
  CHECK_THROWS_AS(run_plan(plan, dup, out), ConfigError);

  auto renamed = sets;
  renamed[0].class_names[0] = "other";
  CHECK_THROWS_AS(run_plan(plan, renamed, out), ConfigError);

  CHECK_THROWS_AS(run_plan(plan, {sets.back()}, out), ConfigError);
}

TEST_CASE("run_plan completes every cell") {
  const HarnessRun &h = harness();
  CHECK(h.report.complete);
  CHECK(h.report.hash == plan_hash(h.plan));
  REQUIRE(h.report.cells.size() == 3 * 2 * 2);  // modes x shots x repeats
  std::set<std::string> keys;
  for (const auto &c : h.report.cells) {
    CHECK(c.status == "ok");
    CHECK(c.error.empty());
    CHECK(c.target == h.plan.targets[0]);
    CHECK(c.classes == std::vector<int>{0, 1, 2});
    CHECK(c.seconds >= 0.0);
    std::ostringstream key;
    key << c.mode << '|' << c.shots << '|' << c.repeat;
    CHECK(keys.insert(key.str()).second);
  }
  for (const auto &mode : h.plan.modes) {
    for (int shots : h.plan.shots) {
      for (int rep = 0; rep < h.plan.repeats; ++rep) {
        std::ostringstream key;
        key << mode << '|' << shots << '|' << rep;
        CHECK(keys.count(key.str()) == 1);
      }
    }
  }
}

TEST_CASE("run_plan scores every cell on the same fixed test set") {
  const HarnessRun &h = harness();
  const WindowSet &target = h.sets.back();
  std::map<int, long long> per_class;
  for (int l : target.labels) per_class[l] += 1;

  for (const auto &c : h.report.cells) {
    REQUIRE(c.status == "ok");
    REQUIRE(c.classes.size() == 3);
    for (std::size_t r = 0; r < c.classes.size(); ++r) {
      const long long want = expected_test_count(
          per_class.at(c.classes[r]), h.plan.test_fraction);
      CHECK(c.confusion.row(static_cast<Eigen::Index>(r)).sum() ==
            doctest::Approx(static_cast<double>(want)));
    }
  }
}

TEST_CASE("run_plan writes the run directory artifacts") {
  const HarnessRun &h = harness();
  const std::string target = h.plan.targets[0];
  CHECK(std::filesystem::exists(h.run_dir / "plan.json"));
  CHECK(std::filesystem::exists(h.run_dir / "ledger.jsonl"));
  CHECK(std::filesystem::exists(h.run_dir / "report.json"));
  CHECK(std::filesystem::exists(h.run_dir / "curves.csv"));
  CHECK(std::filesystem::exists(h.run_dir /
                                ("model-TMTL-" + target + ".json")));
  CHECK(std::filesystem::exists(h.run_dir /
                                ("model-PTM-" + target + ".json")));
  CHECK(std::filesystem::exists(h.run_dir /
                                ("embeddings-TMTL-" + target + ".tsv")));
  CHECK(std::filesystem::exists(h.run_dir /
                                ("embeddings-PTM-" + target + ".tsv")));
  CHECK(std::filesystem::exists(h.run_dir /
                                ("histograms-TMTL-" + target + ".csv")));
  CHECK(std::filesystem::exists(h.run_dir /
                                ("confusion-TMTL-" + target + "-i1.csv")));
  CHECK(line_count(h.run_dir / "ledger.jsonl") == h.report.cells.size());

  // The effective plan echoed into the run dir parses back to the input.
  const nlohmann::json echoed = read_json_file(h.run_dir / "plan.json");
  CHECK(echoed.dump() == plan_to_json(h.plan).dump());

  // curves.csv holds one row per (mode, shots) group plus the header.
  CHECK(line_count(h.run_dir / "curves.csv") == 1 + 3 * 2);
}

TEST_CASE("run_plan summary re-aggregates from the raw cells") {
  const HarnessRun &h = harness();
  const auto again = summarize_cells(h.report.cells);
  REQUIRE(again.size() == h.report.summary.size());
  for (std::size_t i = 0; i < again.size(); ++i) {
    CHECK(again[i].mode == h.report.summary[i].mode);
    CHECK(again[i].target == h.report.summary[i].target);
    CHECK(again[i].shots == h.report.summary[i].shots);
    CHECK(again[i].completed == h.report.summary[i].completed);
    CHECK(again[i].mean_accuracy ==
          doctest::Approx(h.report.summary[i].mean_accuracy).epsilon(1e-12));
    CHECK(again[i].stderr_accuracy ==
          doctest::Approx(h.report.summary[i].stderr_accuracy)
              .epsilon(1e-12));
  }

  // Standard error is the sample standard deviation over sqrt(repeats).
  for (const auto &s : h.report.summary) {
    std::vector<double> accs;
    for (const auto &c : h.report.cells) {
      if (c.mode == s.mode && c.shots == s.shots && c.status == "ok") {
        accs.push_back(c.accuracy);
      }
    }
    REQUIRE(static_cast<int>(accs.size()) == s.completed);
    double mean = 0.0;
    for (double a : accs) mean += a;
    mean /= static_cast<double>(accs.size());
    double want = 0.0;
    if (accs.size() > 1) {
      double ss = 0.0;
      for (double a : accs) ss += (a - mean) * (a - mean);
      want = std::sqrt(ss / static_cast<double>(accs.size() - 1) /
                       static_cast<double>(accs.size()));
    }
    CHECK(s.mean_accuracy == doctest::Approx(mean).epsilon(1e-12));
    CHECK(s.stderr_accuracy == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("run_plan resumes without recomputing finished cells") {
  const HarnessRun &h = harness();
  const std::size_t lines_before = line_count(h.run_dir / "ledger.jsonl");
  const EvalReport again = run_plan(h.plan, h.sets, h.out_root);
  CHECK(line_count(h.run_dir / "ledger.jsonl") == lines_before);
  CHECK(report_to_json(again).dump() == report_to_json(h.report).dump());
}

TEST_CASE("run_plan skips preloaded ok cells and retries failed ones") {
  auto sets = synth_domains(3, 3, 0.2, 102, 8.0);
  ExperimentPlan plan = base_plan(sets);
  plan.modes = {"STL"};
  plan.shots = {1};
  plan.repeats = 2;
  plan.seed = 505;
  plan.dump_embeddings = false;
  plan.dump_histograms = false;
  const std::string target = plan.targets[0];

  const auto out_root = temp_dir() / "preseed";
  std::filesystem::remove_all(out_root);
  const auto run_dir = out_root / ("run-" + plan_hash(plan));
  std::filesystem::create_directories(run_dir);
  {
    CellResult ok;
    ok.mode = "STL";
    ok.target = target;
    ok.shots = 1;
    ok.repeat = 0;
    ok.status = "ok";
    ok.accuracy = 0.123;  // sentinel: must survive untouched
    ok.classes = {0, 1, 2};
    ok.confusion = Eigen::MatrixXd::Zero(3, 3);
    CellResult failed = ok;
    failed.repeat = 1;
    failed.status = "failed";
    failed.error = "poisoned";
    failed.accuracy = 0.0;
    std::ofstream ledger(run_dir / "ledger.jsonl");
    ledger << cell_to_json(ok).dump() << '\n'
           << cell_to_json(failed).dump() << '\n';
  }

  const EvalReport report = run_plan(plan, sets, out_root);
  CHECK(report.complete);
  REQUIRE(report.cells.size() == 2);
  CHECK(report.cells[0].repeat == 0);
  CHECK(report.cells[0].accuracy == doctest::Approx(0.123));
  CHECK(report.cells[1].repeat == 1);
  CHECK(report.cells[1].status == "ok");
  CHECK(report.cells[1].error.empty());
  // Two preloaded lines plus exactly one appended retry.
  CHECK(line_count(run_dir / "ledger.jsonl") == 3);
}

TEST_CASE("run_plan records per-cell failures without aborting") {
  auto sets = synth_domains(2, 2, 0.1, 103, 6.0);
  // A target of two singleton classes: both land in the fixed test set, so
  // no support windows remain and every cell must fail.
  WindowSet target = sets[0];
  target.domain = DomainId{"lonely", "dev"};
  target.windows.clear();
  target.labels.clear();
  for (int cls = 0; cls < 2; ++cls) {
    for (std::size_t i = 0; i < sets[0].labels.size(); ++i) {
      if (sets[0].labels[i] == cls) {
        target.windows.push_back(sets[0].windows[i]);
        target.labels.push_back(cls);
        break;
      }
    }
  }
  REQUIRE(target.labels.size() == 2);
  std::vector<WindowSet> all = {sets[0], sets[1], target};

  ExperimentPlan plan = base_plan(all);
  plan.targets = {target.domain.key()};
  plan.modes = {"STL"};
  plan.shots = {1};
  plan.repeats = 1;
  plan.seed = 606;
  plan.dump_embeddings = false;
  plan.dump_histograms = false;

  const auto out_root = temp_dir() / "failures";
  std::filesystem::remove_all(out_root);
  const EvalReport report = run_plan(plan, all, out_root);
  CHECK_FALSE(report.complete);
  REQUIRE(report.cells.size() == 1);
  CHECK(report.cells[0].status == "failed");
  CHECK_FALSE(report.cells[0].error.empty());
  REQUIRE(report.summary.size() == 1);
  CHECK(report.summary[0].completed == 0);
  const auto run_dir = out_root / ("run-" + plan_hash(plan));
  CHECK(std::filesystem::exists(run_dir / "report.json"));
  CHECK(line_count(run_dir / "ledger.jsonl") == 1);
}

TEST_CASE("export_embeddings writes one row per window") {
  const auto sets = synth_domains(2, 2, 0.1, 66, 6.0);
  const WindowSet &ws = sets[0];
  const ExtractorSpec spec = tiny_spec(ws);
  IflfModel model = IflfModel::build(
      spec, {{ws.domain, {0, 1}}}, ws.class_names, 99);

  const auto path = temp_dir() / "emb" / "e.tsv";
  std::filesystem::remove_all(path.parent_path());
  export_embeddings(&model, ws, path);

  std::ifstream in(path);
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    REQUIRE(fields.size() ==
            static_cast<std::size_t>(spec.feature_dim()) + 2);
    CHECK(std::stoi(fields[fields.size() - 2]) == ws.labels[rows]);
    CHECK(fields.back() == ws.domain.key());
    ++rows;
  }
  CHECK(rows == ws.windows.size());

  // Deterministic: a second export is byte-identical.
  const auto path2 = temp_dir() / "emb" / "e2.tsv";
  export_embeddings(&model, ws, path2);
  std::ifstream f1(path, std::ios::binary);
  std::ifstream f2(path2, std::ios::binary);
  std::stringstream b1, b2;
  b1 << f1.rdbuf();
  b2 << f2.rdbuf();
  CHECK(b1.str() == b2.str());
  CHECK_FALSE(b1.str().empty());
}

TEST_CASE("export_head_histograms mirrors the head weight stats") {
  const auto sets = synth_domains(2, 3, 0.1, 67, 6.0);
  const ExtractorSpec spec = tiny_spec(sets[0]);
  IflfModel model = IflfModel::build(
      spec, {{sets[0].domain, {0, 1, 2}}, {sets[1].domain, {0, 2}}},
      sets[0].class_names, 100);

  const auto path = temp_dir() / "hist" / "h.csv";
  std::filesystem::remove_all(path.parent_path());
  export_head_histograms(model, path);

  std::ifstream in(path);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "head,subject_id,device_id,bin_lo,bin_hi,count,fraction");
  std::map<int, std::vector<std::tuple<double, double, long long, double>>>
      rows;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    REQUIRE(fields.size() == 7);
    rows[std::stoi(fields[0])].emplace_back(
        std::stod(fields[3]), std::stod(fields[4]), std::stoll(fields[5]),
        std::stod(fields[6]));
  }
  REQUIRE(rows.size() == model.heads().size());
  for (std::size_t k = 0; k < model.heads().size(); ++k) {
    const HeadWeightStats stats = model.head_weight_stats(k);
    const auto &got = rows.at(static_cast<int>(k));
    REQUIRE(got.size() == stats.histogram.size());
    double frac_sum = 0.0;
    for (std::size_t b = 0; b < got.size(); ++b) {
      CHECK(std::get<0>(got[b]) ==
            doctest::Approx(stats.bin_edges[b]).epsilon(1e-12));
      CHECK(std::get<1>(got[b]) ==
            doctest::Approx(stats.bin_edges[b + 1]).epsilon(1e-12));
      CHECK(std::get<2>(got[b]) == stats.histogram[b]);
      frac_sum += std::get<3>(got[b]);
    }
    CHECK(frac_sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

}  // namespace iflf
