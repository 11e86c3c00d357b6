// iflf/evalharness.cpp

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

#include "iflf/evalharness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>
#include <tuple>
#include <utility>

#include "iflf/common.hpp"
#include "iflf/json_util.hpp"

namespace iflf {

namespace {

constexpr std::uint64_t kSaltEvalTest = 0x65746573ULL;
constexpr std::uint64_t kSaltEvalShot = 0x6573686fULL;
constexpr std::uint64_t kSaltEvalAdapt = 0x65616461ULL;
constexpr std::uint64_t kSaltEvalReuse = 0x65726575ULL;
constexpr std::uint64_t kSaltEvalModel = 0x656d6f64ULL;
constexpr std::uint64_t kSaltEvalTrain = 0x6574726eULL;
constexpr std::uint64_t kSaltEvalBase = 0x65626173ULL;

std::uint64_t str_salt(const std::string &s) {
  return fnv1a64(s.data(), s.size());
}

const std::set<std::string> &known_modes() {
  static const std::set<std::string> modes = {"STL", "PTM", "BMTL", "TMTL"};
  return modes;
}

void ensure_parent(const std::filesystem::path &path) {
  const auto parent = path.parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

std::string cell_key(const std::string &mode, const std::string &target,
                     int shots, int repeat) {
  std::ostringstream os;
  os << mode << '|' << target << '|' << shots << '|' << repeat;
  return os.str();
}

std::vector<int> present_classes(const WindowSet &ws) {
  std::set<int> seen;
  for (int l : ws.labels) {
    if (l != LabelMap::kUnlabeled) seen.insert(l);
  }
  return std::vector<int>(seen.begin(), seen.end());
}

std::vector<int> support_classes(const SupportSet &support) {
  std::set<int> seen;
  for (const auto &sw : support.windows) seen.insert(sw.label);
  return std::vector<int>(seen.begin(), seen.end());
}

}  // namespace

void ExperimentPlan::validate() const {
  if (dataset.empty()) throw ConfigError("plan: dataset must be named");
  if (domain_axis != "subject" && domain_axis != "device" &&
      domain_axis != "subject-device") {
    throw ConfigError("plan: domain_axis must be subject, device or "
                      "subject-device, got " + domain_axis);
  }
  if (targets.empty()) throw ConfigError("plan: needs at least one target");
  std::set<std::string> tseen(targets.begin(), targets.end());
  if (tseen.size() != targets.size()) {
    throw ConfigError("plan: duplicate target");
  }
  if (modes.empty()) throw ConfigError("plan: needs at least one mode");
  std::set<std::string> mseen;
  for (const auto &m : modes) {
    if (known_modes().count(m) == 0) {
      throw ConfigError("plan: unknown mode " + m);
    }
    if (!mseen.insert(m).second) throw ConfigError("plan: duplicate mode " + m);
  }
  if (shots.empty()) throw ConfigError("plan: needs at least one shot count");
  int prev = 0;
  for (int s : shots) {
    if (s < 1 || s > 100) {
      throw ConfigError("plan: shot counts must lie in [1, 100]");
    }
    if (s <= prev) throw ConfigError("plan: shot grid must increase");
    prev = s;
  }
  if (repeats < 1) throw ConfigError("plan: repeats must be >= 1");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("plan: test_fraction must lie in (0, 1)");
  }
  extractor.validate();
  train.validate();
  baseline.validate();
  adapt.validate();
}

nlohmann::json plan_to_json(const ExperimentPlan &plan) {
  return nlohmann::json{{"format", "iflf-plan"},
                        {"version", 1},
                        {"dataset", plan.dataset},
                        {"domain_axis", plan.domain_axis},
                        {"targets", plan.targets},
                        {"modes", plan.modes},
                        {"shots", plan.shots},
                        {"repeats", plan.repeats},
                        {"seed", plan.seed},
                        {"substitution", plan.substitution},
                        {"test_fraction", plan.test_fraction},
                        {"dump_embeddings", plan.dump_embeddings},
                        {"dump_histograms", plan.dump_histograms},
                        {"extractor", extractor_spec_to_json(plan.extractor)},
                        {"train", train_config_to_json(plan.train)},
                        {"baseline", baseline_config_to_json(plan.baseline)},
                        {"adapt", adapt_config_to_json(plan.adapt)}};
}

ExperimentPlan plan_from_json(const nlohmann::json &j) {
  check_known_keys(j,
                   {"format", "version", "dataset", "domain_axis", "targets",
                    "modes", "shots", "repeats", "seed", "substitution",
                    "test_fraction", "dump_embeddings", "dump_histograms",
                    "extractor", "train", "baseline", "adapt"},
                   "plan");
  ExperimentPlan plan;
  plan.dataset = j.value("dataset", plan.dataset);
  plan.domain_axis = j.value("domain_axis", plan.domain_axis);
  plan.targets = j.value("targets", plan.targets);
  plan.modes = j.value("modes", plan.modes);
  plan.shots = j.value("shots", plan.shots);
  plan.repeats = j.value("repeats", plan.repeats);
  plan.seed = j.value("seed", plan.seed);
  plan.substitution = j.value("substitution", plan.substitution);
  plan.test_fraction = j.value("test_fraction", plan.test_fraction);
  plan.dump_embeddings = j.value("dump_embeddings", plan.dump_embeddings);
  plan.dump_histograms = j.value("dump_histograms", plan.dump_histograms);
  if (j.contains("extractor")) {
    plan.extractor = extractor_spec_from_json(j.at("extractor"));
  }
  if (j.contains("train")) plan.train = train_config_from_json(j.at("train"));
  if (j.contains("baseline")) {
    plan.baseline = baseline_config_from_json(j.at("baseline"));
  }
  if (j.contains("adapt")) plan.adapt = adapt_config_from_json(j.at("adapt"));
  plan.validate();
  return plan;
}

std::string plan_hash(const ExperimentPlan &plan) {
  const std::string dump = plan_to_json(plan).dump();
  const std::uint64_t h = fnv1a64(dump.data(), dump.size());
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

Metrics compute_metrics(const std::vector<int> &predictions,
                        const std::vector<int> &truths,
                        const std::vector<int> &class_mask) {
  if (predictions.size() != truths.size()) {
    throw ConfigError("compute_metrics: prediction/truth length mismatch");
  }
  if (class_mask.empty()) {
    throw ConfigError("compute_metrics: class mask is empty");
  }
  Metrics m;
  m.classes = class_mask;
  std::sort(m.classes.begin(), m.classes.end());
  if (std::adjacent_find(m.classes.begin(), m.classes.end()) !=
      m.classes.end()) {
    throw ConfigError("compute_metrics: duplicate class in mask");
  }
  std::map<int, Eigen::Index> row;
  for (std::size_t c = 0; c < m.classes.size(); ++c) {
    row[m.classes[c]] = static_cast<Eigen::Index>(c);
  }
  const auto c = static_cast<Eigen::Index>(m.classes.size());
  m.confusion = Eigen::MatrixXd::Zero(c, c);
  std::size_t kept = 0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const auto rt = row.find(truths[i]);
    if (rt == row.end()) continue;  // truth outside the mask, dropped
    const auto rp = row.find(predictions[i]);
    if (rp == row.end()) {
      throw DataError("compute_metrics: prediction " +
                      std::to_string(predictions[i]) +
                      " outside the class mask");
    }
    m.confusion(rt->second, rp->second) += 1.0;
    ++kept;
  }
  if (kept == 0) {
    throw DataError("compute_metrics: no test windows in the masked classes");
  }
  m.accuracy = m.confusion.trace() / static_cast<double>(kept);
  for (std::size_t ci = 0; ci < m.classes.size(); ++ci) {
    const auto r = static_cast<Eigen::Index>(ci);
    const double total = m.confusion.row(r).sum();
    m.recall[m.classes[ci]] = total > 0.0 ? m.confusion(r, r) / total : 0.0;
  }
  return m;
}

double silhouette_score(const Eigen::MatrixXd &features,
                        const std::vector<int> &labels) {
  const Eigen::Index n = features.rows();
  if (static_cast<std::size_t>(n) != labels.size()) {
    throw ConfigError("silhouette: feature/label count mismatch");
  }
  if (n == 0) throw DataError("silhouette: no samples");
  std::map<int, std::vector<Eigen::Index>> groups;
  for (Eigen::Index i = 0; i < n; ++i) groups[labels[i]].push_back(i);
  if (groups.size() < 2) {
    throw DataError("silhouette: needs at least two classes");
  }
  const Eigen::MatrixXd gram = features * features.transpose();
  const Eigen::VectorXd sq = gram.diagonal();
  Eigen::MatrixXd dist(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      dist(i, j) = std::sqrt(std::max(0.0, sq(i) + sq(j) - 2.0 * gram(i, j)));
    }
  }
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto &own = groups.at(labels[i]);
    if (own.size() < 2) continue;  // singleton scores 0
    double a = 0.0;
    for (Eigen::Index j : own) {
      if (j != i) a += dist(i, j);
    }
    a /= static_cast<double>(own.size() - 1);
    double b = std::numeric_limits<double>::infinity();
    for (const auto &[label, members] : groups) {
      if (label == labels[i]) continue;
      double d = 0.0;
      for (Eigen::Index j : members) d += dist(i, j);
      b = std::min(b, d / static_cast<double>(members.size()));
    }
    const double denom = std::max(a, b);
    sum += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return sum / static_cast<double>(n);
}

void export_embeddings(IflfModel *model, const WindowSet &ws,
                       const std::filesystem::path &path) {
  if (model == nullptr) throw ConfigError("export_embeddings: null model");
  const WindowSet norm = ensure_normalized(ws);
  if (norm.num_windows() == 0) throw DataError("export_embeddings: no windows");
  ensure_parent(path);
  std::ofstream out(path);
  if (!out) {
    throw DataError("export_embeddings: cannot open " + path.string());
  }
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  const std::string domain_key = norm.domain.key();
  const std::size_t total = norm.windows.size();
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < total; start += kChunk) {
    const std::size_t stop = std::min(total, start + kChunk);
    Batch batch(norm.windows.begin() + static_cast<std::ptrdiff_t>(start),
                norm.windows.begin() + static_cast<std::ptrdiff_t>(stop));
    const Eigen::MatrixXd feats = model->extract(batch);
    for (Eigen::Index r = 0; r < feats.rows(); ++r) {
      for (Eigen::Index c = 0; c < feats.cols(); ++c) {
        out << feats(r, c) << '\t';
      }
      out << norm.labels[start + static_cast<std::size_t>(r)] << '\t'
          << domain_key << '\n';
    }
  }
}

void export_head_histograms(const IflfModel &model,
                            const std::filesystem::path &path) {
  if (model.heads().empty()) {
    throw DataError("export_head_histograms: model has no heads");
  }
  ensure_parent(path);
  std::ofstream out(path);
  if (!out) {
    throw DataError("export_head_histograms: cannot open " + path.string());
  }
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "head,subject_id,device_id,bin_lo,bin_hi,count,fraction\n";
  for (std::size_t k = 0; k < model.heads().size(); ++k) {
    const HeadWeightStats stats = model.head_weight_stats(k);
    double total = 0.0;
    for (std::int64_t c : stats.histogram) total += static_cast<double>(c);
    const DomainId &dom = model.heads()[k].domain;
    for (std::size_t b = 0; b < stats.histogram.size(); ++b) {
      const double frac =
          total > 0.0 ? static_cast<double>(stats.histogram[b]) / total : 0.0;
      out << k << ',' << dom.subject_id << ',' << dom.device_id << ','
          << stats.bin_edges[b] << ',' << stats.bin_edges[b + 1] << ','
          << stats.histogram[b] << ',' << frac << '\n';
    }
  }
}

SimilarityReport similarity_from_windowsets(
    const std::vector<WindowSet> &sources, double threshold,
    std::size_t top_k, std::size_t max_len, std::size_t band) {
  if (sources.empty()) {
    throw ConfigError("similarity_from_windowsets: no sources");
  }
  if (max_len == 0) {
    throw ConfigError("similarity_from_windowsets: max_len must be >= 1");
  }
  // activity name -> domain key -> per-sensor magnitude sequences
  std::map<std::string, std::map<std::string, std::vector<std::vector<double>>>>
      acc;
  for (const auto &raw : sources) {
    const WindowSet ws = ensure_normalized(raw);
    if (ws.channel_names.size() !=
        static_cast<std::size_t>(ws.num_channels())) {
      throw DataError("similarity_from_windowsets: channel names required");
    }
    // Sensors group channels by name prefix before the last '.'.
    std::vector<std::vector<Eigen::Index>> groups;
    std::map<std::string, std::size_t> group_of;
    for (std::size_t c = 0; c < ws.channel_names.size(); ++c) {
      const std::string &name = ws.channel_names[c];
      const auto dot = name.rfind('.');
      const std::string sensor = dot == std::string::npos
                                     ? name
                                     : name.substr(0, dot);
      auto it = group_of.find(sensor);
      if (it == group_of.end()) {
        it = group_of.emplace(sensor, groups.size()).first;
        groups.emplace_back();
      }
      groups[it->second].push_back(static_cast<Eigen::Index>(c));
    }
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < ws.labels.size(); ++i) {
      if (ws.labels[i] != LabelMap::kUnlabeled) by_class[ws.labels[i]].push_back(i);
    }
    const std::string dom = ws.domain.key();
    for (const auto &[cls, idx] : by_class) {
      if (cls < 0 || static_cast<std::size_t>(cls) >= ws.class_names.size()) {
        throw DataError("similarity_from_windowsets: label " +
                        std::to_string(cls) + " has no class name");
      }
      std::vector<std::vector<double>> seqs(groups.size());
      bool full = false;
      for (std::size_t w : idx) {
        const Eigen::MatrixXd &x = ws.windows[w];
        for (Eigen::Index t = 0; t < x.cols() && !full; ++t) {
          for (std::size_t g = 0; g < groups.size(); ++g) {
            double s2 = 0.0;
            for (Eigen::Index ch : groups[g]) s2 += x(ch, t) * x(ch, t);
            seqs[g].push_back(std::sqrt(s2));
          }
          full = seqs[0].size() >= max_len;
        }
        if (full) break;
      }
      acc[ws.class_names[static_cast<std::size_t>(cls)]][dom] =
          std::move(seqs);
    }
  }
  SimilarityReport report;
  report.threshold = threshold;
  report.top_k = top_k;
  for (const auto &[name, domains] : acc) {
    report.activities[name] = activity_similarity(domains, band);
  }
  report.substitutable = select_substitutable(report, threshold, top_k);
  return report;
}

nlohmann::json cell_to_json(const CellResult &cell) {
  nlohmann::json recall = nlohmann::json::object();
  for (const auto &[cls, r] : cell.recall) recall[std::to_string(cls)] = r;
  return nlohmann::json{{"mode", cell.mode},
                        {"target", cell.target},
                        {"shots", cell.shots},
                        {"repeat", cell.repeat},
                        {"status", cell.status},
                        {"error", cell.error},
                        {"accuracy", cell.accuracy},
                        {"classes", cell.classes},
                        {"recall", recall},
                        {"confusion", json_from_matrix(cell.confusion)},
                        {"seconds", cell.seconds}};
}

CellResult cell_from_json(const nlohmann::json &j) {
  check_known_keys(j,
                   {"mode", "target", "shots", "repeat", "status", "error",
                    "accuracy", "classes", "recall", "confusion", "seconds"},
                   "cell");
  CellResult cell;
  cell.mode = j.value("mode", cell.mode);
  cell.target = j.value("target", cell.target);
  cell.shots = j.value("shots", cell.shots);
  cell.repeat = j.value("repeat", cell.repeat);
  cell.status = j.value("status", cell.status);
  cell.error = j.value("error", cell.error);
  cell.accuracy = j.value("accuracy", cell.accuracy);
  cell.classes = j.value("classes", cell.classes);
  if (j.contains("recall")) {
    for (const auto &[key, val] : j.at("recall").items()) {
      cell.recall[std::stoi(key)] = val.get<double>();
    }
  }
  if (j.contains("confusion")) {
    cell.confusion = matrix_from_json(j.at("confusion"), "cell confusion");
  }
  cell.seconds = j.value("seconds", cell.seconds);
  return cell;
}

std::vector<CellSummary> summarize_cells(const std::vector<CellResult> &cells) {
  // The ledger is append-only; the last record per cell wins.
  std::map<std::tuple<std::string, std::string, int, int>, const CellResult *>
      last;
  for (const auto &c : cells) {
    last[std::make_tuple(c.mode, c.target, c.shots, c.repeat)] = &c;
  }
  std::map<std::tuple<std::string, std::string, int>, std::vector<double>>
      groups;
  for (const auto &[key, cell] : last) {
    auto gkey = std::make_tuple(std::get<0>(key), std::get<1>(key),
                                std::get<2>(key));
    auto &acc = groups[gkey];
    if (cell->status == "ok") acc.push_back(cell->accuracy);
  }
  std::vector<CellSummary> out;
  for (const auto &[key, accs] : groups) {
    CellSummary s;
    s.mode = std::get<0>(key);
    s.target = std::get<1>(key);
    s.shots = std::get<2>(key);
    s.completed = static_cast<int>(accs.size());
    if (!accs.empty()) {
      double mean = 0.0;
      for (double a : accs) mean += a;
      mean /= static_cast<double>(accs.size());
      s.mean_accuracy = mean;
      if (accs.size() > 1) {
        double ss = 0.0;
        for (double a : accs) ss += (a - mean) * (a - mean);
        const double var = ss / static_cast<double>(accs.size() - 1);
        s.stderr_accuracy =
            std::sqrt(var / static_cast<double>(accs.size()));
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

nlohmann::json summary_to_json(const CellSummary &s) {
  return nlohmann::json{{"mode", s.mode},
                        {"target", s.target},
                        {"shots", s.shots},
                        {"completed", s.completed},
                        {"mean_accuracy", s.mean_accuracy},
                        {"stderr_accuracy", s.stderr_accuracy}};
}

}  // namespace

nlohmann::json report_to_json(const EvalReport &report) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto &c : report.cells) cells.push_back(cell_to_json(c));
  nlohmann::json summary = nlohmann::json::array();
  for (const auto &s : report.summary) summary.push_back(summary_to_json(s));
  return nlohmann::json{{"format", "iflf-eval"},
                        {"version", 1},
                        {"plan", report.plan},
                        {"hash", report.hash},
                        {"complete", report.complete},
                        {"cells", cells},
                        {"summary", summary}};
}

void write_eval_report(const EvalReport &report,
                       const std::filesystem::path &dir) {
  std::filesystem::create_directories(dir);
  write_json_file(dir / "report.json", report_to_json(report));
  {
    std::ofstream out(dir / "curves.csv");
    if (!out) throw DataError("write_eval_report: cannot open curves.csv");
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    out << "mode,target,shots,completed,mean_accuracy,stderr_accuracy\n";
    for (const auto &s : report.summary) {
      out << s.mode << ',' << s.target << ',' << s.shots << ','
          << s.completed << ',' << s.mean_accuracy << ','
          << s.stderr_accuracy << '\n';
    }
  }
  // Per-curve confusion counts summed over completed repeats, on the union
  // of the repeats' class masks.
  std::map<std::tuple<std::string, std::string, int>,
           std::vector<const CellResult *>>
      groups;
  for (const auto &c : report.cells) {
    if (c.status != "ok") continue;
    groups[std::make_tuple(c.mode, c.target, c.shots)].push_back(&c);
  }
  for (const auto &[key, cells] : groups) {
    std::set<int> all;
    for (const auto *c : cells) all.insert(c->classes.begin(), c->classes.end());
    const std::vector<int> classes(all.begin(), all.end());
    std::map<int, Eigen::Index> row;
    for (std::size_t i = 0; i < classes.size(); ++i) {
      row[classes[i]] = static_cast<Eigen::Index>(i);
    }
    const auto n = static_cast<Eigen::Index>(classes.size());
    Eigen::MatrixXd total = Eigen::MatrixXd::Zero(n, n);
    for (const auto *c : cells) {
      for (std::size_t a = 0; a < c->classes.size(); ++a) {
        for (std::size_t b = 0; b < c->classes.size(); ++b) {
          total(row.at(c->classes[a]), row.at(c->classes[b])) +=
              c->confusion(static_cast<Eigen::Index>(a),
                           static_cast<Eigen::Index>(b));
        }
      }
    }
    std::ostringstream name;
    name << "confusion-" << std::get<0>(key) << '-' << std::get<1>(key)
         << "-i" << std::get<2>(key) << ".csv";
    std::ofstream out(dir / name.str());
    if (!out) {
      throw DataError("write_eval_report: cannot open " + name.str());
    }
    out << "truth";
    for (int c : classes) out << ",pred_" << c;
    out << '\n';
    for (Eigen::Index r = 0; r < n; ++r) {
      out << classes[static_cast<std::size_t>(r)];
      for (Eigen::Index cc = 0; cc < n; ++cc) out << ',' << total(r, cc);
      out << '\n';
    }
  }
}

EvalReport run_plan(const ExperimentPlan &plan,
                    const std::vector<WindowSet> &sets,
                    const std::filesystem::path &out_root) {
  plan.validate();
  if (sets.size() < 2) {
    throw ConfigError("run_plan: needs at least two window sets");
  }
  std::map<std::string, std::size_t> by_key;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const std::string key = sets[i].domain.key();
    if (!by_key.emplace(key, i).second) {
      throw ConfigError("run_plan: duplicate domain " + key);
    }
    if (sets[i].class_names != sets[0].class_names) {
      throw ConfigError("run_plan: window sets disagree on class names");
    }
  }
  for (const auto &t : plan.targets) {
    if (by_key.count(t) == 0) {
      throw ConfigError("run_plan: target " + t + " not among the data");
    }
  }

  std::vector<WindowSet> norm;
  norm.reserve(sets.size());
  for (const auto &s : sets) norm.push_back(ensure_normalized(s));

  const std::string hash = plan_hash(plan);
  const std::filesystem::path run_dir = out_root / ("run-" + hash);
  std::filesystem::create_directories(run_dir);
  write_json_file(run_dir / "plan.json", plan_to_json(plan));

  const std::filesystem::path ledger_path = run_dir / "ledger.jsonl";
  std::map<std::string, CellResult> done;
  if (std::filesystem::exists(ledger_path)) {
    std::ifstream in(ledger_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const CellResult cell = cell_from_json(nlohmann::json::parse(line));
      done[cell_key(cell.mode, cell.target, cell.shots, cell.repeat)] = cell;
    }
  }
  std::ofstream ledger(ledger_path, std::ios::app);
  if (!ledger) {
    throw DataError("run_plan: cannot open " + ledger_path.string());
  }

  for (const auto &target : plan.targets) {
    const WindowSet &target_ws = norm[by_key.at(target)];
    std::vector<WindowSet> sources;
    for (std::size_t i = 0; i < norm.size(); ++i) {
      if (i != by_key.at(target)) sources.push_back(norm[i]);
    }
    if (sources.empty()) {
      throw ConfigError("run_plan: target " + target + " leaves no sources");
    }
    // The test set is fixed per target: every mode and every shot count is
    // scored on the same windows.
    const std::vector<std::size_t> test_idx = select_test_indices(
        target_ws, plan.test_fraction,
        derive_seed(plan.seed, {kSaltEvalTest, str_salt(target)}));
    std::vector<int> truths;
    truths.reserve(test_idx.size());
    for (std::size_t i : test_idx) truths.push_back(target_ws.labels[i]);

    SimilarityReport sim;
    if (plan.substitution) {
      sim = similarity_from_windowsets(sources,
                                       plan.adapt.similarity_threshold,
                                       plan.adapt.top_k);
      write_similarity_report(sim, run_dir / ("similarity-" + target));
    }

    for (const auto &mode : plan.modes) {
      IflfModel model;
      if (mode == "BMTL" || mode == "TMTL") {
        const auto ck = run_dir / ("model-" + mode + "-" + target + ".json");
        if (std::filesystem::exists(ck)) {
          model = IflfModel::load(ck);
        } else {
          std::vector<std::pair<DomainId, std::vector<int>>> domains;
          for (const auto &src : sources) {
            domains.emplace_back(src.domain, present_classes(src));
          }
          model = IflfModel::build(
              plan.extractor, domains, target_ws.class_names,
              derive_seed(plan.seed,
                          {kSaltEvalModel, str_salt(mode), str_salt(target)}));
          TrainConfig tc = plan.train;
          tc.mode = mode;
          tc.seed = derive_seed(
              plan.seed, {kSaltEvalTrain, str_salt(mode), str_salt(target)});
          train_iflf(&model, sources, tc);
          model.save(ck);
        }
      } else if (mode == "PTM") {
        const auto ck = run_dir / ("model-PTM-" + target + ".json");
        if (std::filesystem::exists(ck)) {
          model = IflfModel::load(ck);
        } else {
          BaselineConfig bc = plan.baseline;
          bc.kind = "PTM";
          bc.seed = derive_seed(plan.seed, {kSaltEvalBase, str_salt("PTM"),
                                            str_salt(target)});
          model = train_baseline(plan.extractor, sources, bc);
          model.save(ck);
        }
      }
      if (mode != "STL") {
        if (plan.dump_embeddings) {
          export_embeddings(&model, target_ws,
                            run_dir /
                                ("embeddings-" + mode + "-" + target + ".tsv"));
        }
        if (plan.dump_histograms) {
          export_head_histograms(model,
                                 run_dir / ("histograms-" + mode + "-" +
                                            target + ".csv"));
        }
      }

      for (int shots : plan.shots) {
        for (int rep = 0; rep < plan.repeats; ++rep) {
          const std::string key = cell_key(mode, target, shots, rep);
          const auto prev = done.find(key);
          if (prev != done.end() && prev->second.status == "ok") continue;

          CellResult cell;
          cell.mode = mode;
          cell.target = target;
          cell.shots = shots;
          cell.repeat = rep;
          const auto t0 = std::chrono::steady_clock::now();
          try {
            // Shot draws depend on (target, shots, repeat) only, so every
            // mode trains on the same support windows.
            const std::uint64_t shot_seed = derive_seed(
                plan.seed, {kSaltEvalShot, str_salt(target),
                            static_cast<std::uint64_t>(shots),
                            static_cast<std::uint64_t>(rep)});
            SupportSet support =
                select_shots(target_ws, shots, shot_seed, test_idx);
            if (support.windows.empty()) {
              throw DataError("no support windows outside the test set");
            }
            AdaptConfig ac = plan.adapt;
            ac.shots = shots;
            ac.substitution = plan.substitution;
            ac.seed = derive_seed(
                plan.seed, {kSaltEvalAdapt, str_salt(target),
                            static_cast<std::uint64_t>(shots),
                            static_cast<std::uint64_t>(rep)});
            ac.reuse_seed = derive_seed(
                plan.seed, {kSaltEvalReuse, str_salt(target),
                            static_cast<std::uint64_t>(shots),
                            static_cast<std::uint64_t>(rep)});
            // Substitution belongs to the adaptation step; STL keeps its
            // pure target support.
            if (plan.substitution && mode != "STL") {
              support = substitute_support(support, sim, sources, ac);
            }
            const std::vector<int> mask = support_classes(support);
            std::vector<int> preds;
            if (mode == "STL") {
              WindowSet sws = target_ws;
              sws.windows.clear();
              sws.labels.clear();
              for (const auto &sw : support.windows) {
                sws.windows.push_back(sw.window);
                sws.labels.push_back(sw.label);
              }
              BaselineConfig bc = plan.baseline;
              bc.kind = "STL";
              bc.seed = derive_seed(
                  plan.seed, {kSaltEvalBase, str_salt("STL"),
                              str_salt(target),
                              static_cast<std::uint64_t>(shots),
                              static_cast<std::uint64_t>(rep)});
              IflfModel stl = train_baseline(plan.extractor, {sws}, bc);
              preds =
                  head_predictions(&stl, stl.heads()[0], target_ws, test_idx);
            } else {
              const AdaptResult ar = fast_adapt(&model, support, ac);
              preds = head_predictions(&model, ar.head, target_ws, test_idx);
            }
            const Metrics metrics = compute_metrics(preds, truths, mask);
            cell.status = "ok";
            cell.accuracy = metrics.accuracy;
            cell.classes = metrics.classes;
            cell.recall = metrics.recall;
            cell.confusion = metrics.confusion;
          } catch (const std::exception &e) {
            cell.status = "failed";
            cell.error = e.what();
          }
          cell.seconds =
              std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                            t0)
                  .count();
          ledger << cell_to_json(cell).dump() << '\n';
          ledger.flush();
          done[key] = cell;
        }
      }
    }
  }

  EvalReport report;
  report.plan = plan_to_json(plan);
  report.hash = hash;
  report.complete = true;
  for (const auto &target : plan.targets) {
    for (const auto &mode : plan.modes) {
      for (int shots : plan.shots) {
        for (int rep = 0; rep < plan.repeats; ++rep) {
          const auto it = done.find(cell_key(mode, target, shots, rep));
          if (it == done.end()) {
            report.complete = false;
            continue;
          }
          report.cells.push_back(it->second);
          if (it->second.status != "ok") report.complete = false;
        }
      }
    }
  }
  report.summary = summarize_cells(report.cells);
  write_eval_report(report, run_dir);
  return report;
}

}  // namespace iflf
