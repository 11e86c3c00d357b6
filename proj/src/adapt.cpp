// iflf/adapt.cpp

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

#include "iflf/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <utility>

#include "iflf/common.hpp"
#include "iflf/json_util.hpp"
#include "iflf/losses.hpp"
#include "iflf/nn.hpp"
#include "iflf/optim.hpp"

namespace iflf {
namespace {

constexpr std::uint64_t kSaltTest = 0x54455354;   // test split
constexpr std::uint64_t kSaltShot = 0x53484f54;   // shot selection
constexpr std::uint64_t kSaltSubst = 0x53554253;  // substitution draws
constexpr std::uint64_t kSaltFresh = 0x46525348;  // fresh head init
constexpr std::uint64_t kSaltReuse = 0x52555345;  // source head choice
constexpr std::uint64_t kSaltBatch = 0x41424154;  // adaptation batches

// Chunked eval-mode features for the given windows, as [d x n].
Eigen::MatrixXd features_for(IflfModel *model,
                             const std::vector<Eigen::MatrixXd> &windows) {
  const Eigen::Index d = model->spec().feature_dim();
  Eigen::MatrixXd z(d, static_cast<Eigen::Index>(windows.size()));
  const std::size_t chunk = 256;
  for (std::size_t at = 0; at < windows.size(); at += chunk) {
    const std::size_t hi = std::min(windows.size(), at + chunk);
    Batch xb(windows.begin() + static_cast<std::ptrdiff_t>(at),
             windows.begin() + static_cast<std::ptrdiff_t>(hi));
    z.middleCols(static_cast<Eigen::Index>(at),
                 static_cast<Eigen::Index>(hi - at)) =
        model->extractor().forward(xb, false, nullptr);
  }
  return z;
}

std::map<int, std::vector<std::size_t>> class_pools(
    const WindowSet &ws, const std::set<std::size_t> &exclude) {
  std::map<int, std::vector<std::size_t>> pools;
  for (std::size_t i = 0; i < ws.windows.size(); ++i) {
    if (ws.labels[i] == LabelMap::kUnlabeled) continue;
    if (exclude.count(i) != 0) continue;
    pools[ws.labels[i]].push_back(i);
  }
  return pools;
}

}  // namespace

void AdaptConfig::validate() const {
  if (shots < 1 || shots > 100) {
    throw ConfigError("AdaptConfig: shots must be in [1, 100]");
  }
  if (head_init != "reuse-random-source-head" && head_init != "fresh") {
    throw ConfigError(
        "AdaptConfig: head_init must be reuse-random-source-head or fresh");
  }
  if (similarity_threshold < -1.0 || similarity_threshold > 1.0) {
    throw ConfigError("AdaptConfig: similarity_threshold must be in [-1, 1]");
  }
  if (lr <= 0.0) throw ConfigError("AdaptConfig: lr must be positive");
  if (beta1 <= 0.0 || beta1 >= 1.0 || beta2 <= 0.0 || beta2 >= 1.0) {
    throw ConfigError("AdaptConfig: betas must be in (0, 1)");
  }
  if (mu < 0.0) throw ConfigError("AdaptConfig: mu must be >= 0");
  if (epochs < 1) throw ConfigError("AdaptConfig: epochs must be >= 1");
  if (patience < 1) throw ConfigError("AdaptConfig: patience must be >= 1");
  if (batch_size < 1) throw ConfigError("AdaptConfig: batch_size must be >= 1");
}

std::vector<std::size_t> select_test_indices(const WindowSet &ws,
                                             double fraction,
                                             std::uint64_t seed) {
  if (fraction <= 0.0 || fraction >= 1.0) {
    throw ConfigError("select_test_indices: fraction must be in (0, 1)");
  }
  auto pools = class_pools(ws, {});
  std::vector<std::size_t> test;
  for (auto &[cls, pool] : pools) {
    Rng rng(derive_seed(seed, {kSaltTest, static_cast<std::uint64_t>(cls)}));
    rng.shuffle(pool);
    const std::size_t n = pool.size();
    std::size_t nt = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(n)));
    nt = std::max<std::size_t>(1, std::min(nt, n));
    test.insert(test.end(), pool.begin(),
                pool.begin() + static_cast<std::ptrdiff_t>(nt));
  }
  std::sort(test.begin(), test.end());
  return test;
}

SupportSet select_shots(const WindowSet &target, int i, std::uint64_t seed,
                        const std::vector<std::size_t> &exclude) {
  if (i < 1) throw ConfigError("select_shots: i must be >= 1");
  for (const std::size_t e : exclude) {
    if (e >= target.windows.size()) {
      throw ConfigError("select_shots: exclude index out of range");
    }
  }
  const WindowSet ws = ensure_normalized(target);
  const std::set<std::size_t> excluded(exclude.begin(), exclude.end());

  SupportSet support;
  support.target = ws.domain;
  support.class_names = ws.class_names;
  support.shots_requested = i;

  // All labeled classes, including ones fully inside the test set.
  std::set<int> all_classes;
  for (const int y : ws.labels) {
    if (y != LabelMap::kUnlabeled) all_classes.insert(y);
  }
  auto pools = class_pools(ws, excluded);
  for (const int cls : all_classes) {
    auto it = pools.find(cls);
    if (it == pools.end()) {
      support.excluded_classes.push_back(cls);
      log_warn("select_shots: class " + std::to_string(cls) +
               " has no windows outside the test set; excluded");
      continue;
    }
    std::vector<std::size_t> &pool = it->second;
    Rng rng(derive_seed(seed, {kSaltShot, static_cast<std::uint64_t>(cls)}));
    rng.shuffle(pool);
    const std::size_t take =
        std::min(pool.size(), static_cast<std::size_t>(i));
    if (take < static_cast<std::size_t>(i)) {
      support.short_classes.push_back(cls);
      log_warn("select_shots: class " + std::to_string(cls) + " has only " +
               std::to_string(take) + " of " + std::to_string(i) +
               " requested windows");
    }
    std::vector<std::size_t> chosen(pool.begin(),
                                    pool.begin() +
                                        static_cast<std::ptrdiff_t>(take));
    std::sort(chosen.begin(), chosen.end());
    for (const std::size_t idx : chosen) {
      SupportWindow sw;
      sw.window = ws.windows[idx];
      sw.label = cls;
      sw.domain = ws.domain;
      sw.source_index = idx;
      sw.substituted = false;
      support.windows.push_back(std::move(sw));
    }
    support.shots_used[cls] = static_cast<int>(take);
  }
  return support;
}

SupportSet substitute_support(const SupportSet &support,
                              const SimilarityReport &report,
                              const std::vector<WindowSet> &sources,
                              const AdaptConfig &config) {
  config.validate();
  const std::vector<std::string> selected_names = select_substitutable(
      report, config.similarity_threshold, config.top_k);
  if (selected_names.empty()) return support;

  // Class-name to global-id mapping comes from the support set itself.
  std::set<int> selected;
  for (const std::string &name : selected_names) {
    const auto it = std::find(support.class_names.begin(),
                              support.class_names.end(), name);
    if (it == support.class_names.end()) {
      log_warn("substitute_support: activity \"" + name +
               "\" unknown to the target domain; skipped");
      continue;
    }
    selected.insert(
        static_cast<int>(it - support.class_names.begin()));
  }

  // Normalize each source once, lazily.
  std::vector<WindowSet> norm(sources.size());
  std::vector<bool> ready(sources.size(), false);

  SupportSet out = support;
  for (const int cls : selected) {
    const auto used_it = out.shots_used.find(cls);
    if (used_it == out.shots_used.end()) continue;  // excluded class
    const std::size_t want = static_cast<std::size_t>(used_it->second);

    // Pool of (source, window) pairs carrying this activity, matched by
    // class name so differing label tables cannot mix activities.
    const std::string &name = support.class_names[static_cast<std::size_t>(
        cls)];
    std::vector<std::pair<std::size_t, std::size_t>> pool;
    for (std::size_t s = 0; s < sources.size(); ++s) {
      const auto nit = std::find(sources[s].class_names.begin(),
                                 sources[s].class_names.end(), name);
      if (nit == sources[s].class_names.end()) continue;
      const int local =
          static_cast<int>(nit - sources[s].class_names.begin());
      for (std::size_t w = 0; w < sources[s].windows.size(); ++w) {
        if (sources[s].labels[w] == local) pool.emplace_back(s, w);
      }
    }
    if (pool.empty()) {
      log_warn("substitute_support: activity \"" + name +
               "\" absent from all sources; substitution skipped");
      continue;
    }
    Rng rng(derive_seed(config.seed,
                        {kSaltSubst, static_cast<std::uint64_t>(cls)}));
    rng.shuffle(pool);
    const std::size_t take = std::min(want, pool.size());
    if (take < want) {
      log_warn("substitute_support: only " + std::to_string(take) + " of " +
               std::to_string(want) + " source windows for \"" + name + "\"");
    }

    std::vector<SupportWindow> replacements;
    for (std::size_t t = 0; t < take; ++t) {
      const auto [s, w] = pool[t];
      if (!ready[s]) {
        norm[s] = ensure_normalized(sources[s]);
        ready[s] = true;
      }
      SupportWindow sw;
      sw.window = norm[s].windows[w];
      sw.label = cls;
      sw.domain = sources[s].domain;
      sw.source_index = w;
      sw.substituted = true;
      replacements.push_back(std::move(sw));
    }
    std::vector<SupportWindow> kept;
    kept.reserve(out.windows.size());
    for (SupportWindow &sw : out.windows) {
      if (sw.label != cls) kept.push_back(std::move(sw));
    }
    // Replacements take the class's position in label order.
    const auto at = std::find_if(
        kept.begin(), kept.end(),
        [cls](const SupportWindow &sw) { return sw.label > cls; });
    kept.insert(at, std::make_move_iterator(replacements.begin()),
                std::make_move_iterator(replacements.end()));
    out.windows = std::move(kept);
    out.shots_used[cls] = static_cast<int>(take);
  }
  return out;
}

AdaptResult fast_adapt(IflfModel *model, const SupportSet &support,
                       const AdaptConfig &config) {
  config.validate();
  if (support.windows.empty()) {
    throw DataError("fast_adapt: empty support set");
  }
  const Eigen::Index d = model->spec().feature_dim();
  for (const SupportWindow &sw : support.windows) {
    if (sw.label == LabelMap::kUnlabeled) {
      throw DataError("fast_adapt: unlabeled support window");
    }
  }

  std::set<int> class_set;
  for (const SupportWindow &sw : support.windows) class_set.insert(sw.label);
  const std::vector<int> classes(class_set.begin(), class_set.end());
  const Eigen::Index C = static_cast<Eigen::Index>(classes.size());

  AdaptResult result;
  Head &head = result.head;
  head.domain = support.target;
  head.classes = classes;
  head.W = Tensor("adapted.W", C, d);
  head.b = Tensor("adapted.b", C, 1);
  Rng fresh_rng(derive_seed(config.seed, {kSaltFresh}));
  glorot_init(&head.W, &fresh_rng);
  if (config.head_init == "reuse-random-source-head") {
    if (model->heads().empty()) {
      throw ConfigError("fast_adapt: model has no source heads to reuse");
    }
    Rng pick(derive_seed(config.reuse_seed, {kSaltReuse}));
    const std::size_t k = pick.index(model->heads().size());
    const Head &src = model->heads()[k];
    if (src.W.value.cols() != d) {
      throw ConfigError("fast_adapt: source head feature width mismatch");
    }
    // Rows for classes the source head knows are copied; the rest keep
    // their fresh initialization.
    for (Eigen::Index r = 0; r < C; ++r) {
      const int j = src.local_index(classes[static_cast<std::size_t>(r)]);
      if (j < 0) continue;
      head.W.value.row(r) = src.W.value.row(j);
      head.b.value(r, 0) = src.b.value(j, 0);
    }
  }

  // The extractor stays frozen and in eval mode, so features are computed
  // once up front.
  std::vector<Eigen::MatrixXd> wins;
  std::vector<int> labels;
  wins.reserve(support.windows.size());
  for (const SupportWindow &sw : support.windows) {
    if (sw.window.cols() != model->spec().window_len ||
        sw.window.rows() != model->spec().input_channels) {
      throw DataError("fast_adapt: support window shape mismatch");
    }
    wins.push_back(sw.window);
    labels.push_back(sw.label);
  }
  const Eigen::MatrixXd z = features_for(model, wins);
  std::vector<int> ylocal(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ylocal[i] = head.local_index(labels[i]);
  }

  std::vector<std::size_t> pool(labels.size());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;

  Adam opt(config.lr, config.beta1, config.beta2);
  const std::vector<Tensor *> params = head.params();

  Eigen::MatrixXd best_W = head.W.value;
  Eigen::MatrixXd best_b = head.b.value;
  double best_loss = std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto batches = stratified_batches(
        labels, pool, config.batch_size,
        derive_seed(config.seed,
                    {kSaltBatch, static_cast<std::uint64_t>(epoch)}));
    double epoch_loss = 0.0;
    for (const auto &batch : batches) {
      const Eigen::Index nb = static_cast<Eigen::Index>(batch.size());
      Eigen::MatrixXd zb(d, nb);
      std::vector<int> yb(batch.size());
      for (Eigen::Index c = 0; c < nb; ++c) {
        zb.col(c) = z.col(static_cast<Eigen::Index>(
            batch[static_cast<std::size_t>(c)]));
        yb[static_cast<std::size_t>(c)] =
            ylocal[batch[static_cast<std::size_t>(c)]];
      }
      const Eigen::MatrixXd probs = softmax_cols(head.logits(zb));
      const double loss =
          cross_entropy(probs, yb) + config.mu * l1_norm(head.W.value);
      if (!std::isfinite(loss)) {
        throw TrainingDivergence(
            "fast_adapt: non-finite support loss",
            nlohmann::json({{"epoch", epoch},
                            {"quantity", "support_loss"},
                            {"value", std::to_string(loss)}})
                .dump());
      }
      const Eigen::MatrixXd dlogits = softmax_ce_grad(probs, yb);
      head.W.grad =
          dlogits * zb.transpose() + config.mu * l1_subgrad(head.W.value);
      head.b.grad = dlogits.rowwise().sum();
      opt.step(params);
      epoch_loss += loss;
    }
    epoch_loss /= static_cast<double>(batches.size());
    result.trace.push_back(epoch_loss);
    if (epoch_loss < best_loss) {
      best_loss = epoch_loss;
      best_W = head.W.value;
      best_b = head.b.value;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      result.early_stopped = true;
      break;
    }
  }
  head.W.value = best_W;
  head.b.value = best_b;

  result.shots_used = support.shots_used;
  result.short_classes = support.short_classes;
  result.excluded_classes = support.excluded_classes;
  std::map<int, std::set<std::string>> subst_sources;
  for (const SupportWindow &sw : support.windows) {
    WindowProvenance p;
    p.label = sw.label;
    p.domain = sw.domain;
    p.source_index = sw.source_index;
    p.substituted = sw.substituted;
    result.provenance.push_back(p);
    if (sw.substituted) subst_sources[sw.label].insert(sw.domain.key());
  }
  for (const auto &[cls, keys] : subst_sources) {
    result.substituted_classes.push_back(cls);
    result.substitution_sources[cls] =
        std::vector<std::string>(keys.begin(), keys.end());
  }
  return result;
}

std::vector<int> head_predictions(IflfModel *model, const Head &head,
                                  const WindowSet &ws,
                                  const std::vector<std::size_t> &idx) {
  const WindowSet norm = ensure_normalized(ws);
  std::vector<Eigen::MatrixXd> wins;
  wins.reserve(idx.size());
  for (const std::size_t i : idx) {
    if (i >= norm.windows.size()) {
      throw ConfigError("head_predictions: index out of range");
    }
    wins.push_back(norm.windows[i]);
  }
  if (wins.empty()) return {};
  const Eigen::MatrixXd z = features_for(model, wins);
  const Eigen::MatrixXd logits = head.logits(z);
  std::vector<int> preds(idx.size());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    Eigen::Index best = 0;
    logits.col(c).maxCoeff(&best);
    preds[static_cast<std::size_t>(c)] =
        head.classes[static_cast<std::size_t>(best)];
  }
  return preds;
}

double head_accuracy(IflfModel *model, const Head &head, const WindowSet &ws,
                     const std::vector<std::size_t> &idx) {
  std::vector<std::size_t> known;
  for (const std::size_t i : idx) {
    if (i >= ws.windows.size()) {
      throw ConfigError("head_accuracy: index out of range");
    }
    if (head.local_index(ws.labels[i]) >= 0) known.push_back(i);
  }
  if (known.empty()) throw DataError("head_accuracy: no scorable windows");
  const std::vector<int> preds = head_predictions(model, head, ws, known);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < known.size(); ++i) {
    if (preds[i] == ws.labels[known[i]]) hits += 1;
  }
  return static_cast<double>(hits) / static_cast<double>(known.size());
}

nlohmann::json adapt_result_to_json(const AdaptResult &result) {
  nlohmann::json head = {
      {"subject_id", result.head.domain.subject_id},
      {"device_id", result.head.domain.device_id},
      {"classes", result.head.classes},
      {"W", json_from_matrix(result.head.W.value)},
      {"b", json_from_matrix(result.head.b.value)},
  };
  nlohmann::json shots = nlohmann::json::object();
  for (const auto &[cls, n] : result.shots_used) {
    shots[std::to_string(cls)] = n;
  }
  nlohmann::json subst = nlohmann::json::object();
  for (const auto &[cls, keys] : result.substitution_sources) {
    subst[std::to_string(cls)] = keys;
  }
  nlohmann::json prov = nlohmann::json::array();
  for (const WindowProvenance &p : result.provenance) {
    prov.push_back({{"label", p.label},
                    {"subject_id", p.domain.subject_id},
                    {"device_id", p.domain.device_id},
                    {"source_index", p.source_index},
                    {"substituted", p.substituted}});
  }
  return nlohmann::json{{"format", "iflf-adapt"},
                        {"version", 1},
                        {"head", head},
                        {"shots_used", shots},
                        {"short_classes", result.short_classes},
                        {"excluded_classes", result.excluded_classes},
                        {"substituted_classes", result.substituted_classes},
                        {"substitution_sources", subst},
                        {"provenance", prov},
                        {"trace", result.trace},
                        {"best_epoch", result.best_epoch},
                        {"early_stopped", result.early_stopped}};
}

void save_adapt_result(const AdaptResult &result,
                       const std::filesystem::path &path) {
  write_json_file(path, adapt_result_to_json(result));
}

nlohmann::json adapt_config_to_json(const AdaptConfig &config) {
  return nlohmann::json{{"shots", config.shots},
                        {"head_init", config.head_init},
                        {"reuse_seed", config.reuse_seed},
                        {"substitution", config.substitution},
                        {"similarity_threshold", config.similarity_threshold},
                        {"top_k", config.top_k},
                        {"lr", config.lr},
                        {"beta1", config.beta1},
                        {"beta2", config.beta2},
                        {"mu", config.mu},
                        {"epochs", config.epochs},
                        {"patience", config.patience},
                        {"batch_size", config.batch_size},
                        {"seed", config.seed}};
}

AdaptConfig adapt_config_from_json(const nlohmann::json &j) {
  check_known_keys(j,
                   {"shots", "head_init", "reuse_seed", "substitution",
                    "similarity_threshold", "top_k", "lr", "beta1", "beta2",
                    "mu", "epochs", "patience", "batch_size", "seed"},
                   "adapt config");
  AdaptConfig config;
  config.shots = j.value("shots", config.shots);
  config.head_init = j.value("head_init", config.head_init);
  config.reuse_seed = j.value("reuse_seed", config.reuse_seed);
  config.substitution = j.value("substitution", config.substitution);
  config.similarity_threshold =
      j.value("similarity_threshold", config.similarity_threshold);
  config.top_k = j.value("top_k", config.top_k);
  config.lr = j.value("lr", config.lr);
  config.beta1 = j.value("beta1", config.beta1);
  config.beta2 = j.value("beta2", config.beta2);
  config.mu = j.value("mu", config.mu);
  config.epochs = j.value("epochs", config.epochs);
  config.patience = j.value("patience", config.patience);
  config.batch_size = j.value("batch_size", config.batch_size);
  config.seed = j.value("seed", config.seed);
  config.validate();
  return config;
}

}  // namespace iflf
