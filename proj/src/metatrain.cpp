// iflf/metatrain.cpp

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

#include "iflf/metatrain.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "iflf/json_util.hpp"
#include "iflf/losses.hpp"
#include "iflf/optim.hpp"

namespace iflf {
namespace {

constexpr std::uint64_t kSaltSplit = 0x53504c49ULL;   // train/val split
constexpr std::uint64_t kSaltValTri = 0x56545249ULL;  // validation triplets
constexpr std::uint64_t kSaltHead = 0x48454144ULL;    // phase (a) batches
constexpr std::uint64_t kSaltExt = 0x45585452ULL;     // phase (b) batches
constexpr std::uint64_t kSaltTrip = 0x54524950ULL;    // phase (b) triplets
constexpr std::uint64_t kSaltDrop = 0x44524f50ULL;    // dropout stream
constexpr std::uint64_t kSaltTask = 0x5441534bULL;    // sample_tasks

Batch gather(const WindowSet &ws, const std::vector<std::size_t> &idx) {
  Batch b;
  b.reserve(idx.size());
  for (const std::size_t i : idx) b.push_back(ws.windows[i]);
  return b;
}

std::vector<int> local_labels(const Head &head, const WindowSet &ws,
                              const std::vector<std::size_t> &idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (const std::size_t i : idx) {
    const int l = head.local_index(ws.labels[i]);
    if (l < 0) {
      throw DataError("metatrain: window class " +
                      std::to_string(ws.labels[i]) + " missing from head " +
                      head.domain.key());
    }
    out.push_back(l);
  }
  return out;
}

std::map<int, std::vector<std::size_t>> group_by_class(
    const std::vector<int> &labels, const std::vector<std::size_t> &pool) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (const std::size_t i : pool) {
    if (i >= labels.size()) {
      throw DataError("metatrain: window index out of range");
    }
    if (labels[i] < 0) throw DataError("metatrain: unlabeled window in pool");
    by_class[labels[i]].push_back(i);
  }
  return by_class;
}

// Stratified split; classes with fewer than two windows stay in train.
void split_train_val(const std::vector<int> &labels, std::size_t count,
                     double val_fraction, std::uint64_t seed,
                     std::vector<std::size_t> *train,
                     std::vector<std::size_t> *val) {
  std::vector<std::size_t> all(count);
  for (std::size_t i = 0; i < count; ++i) all[i] = i;
  auto by_class = group_by_class(labels, all);
  Rng rng(seed);
  for (auto &[cls, members] : by_class) {
    (void)cls;
    rng.shuffle(members);
    std::size_t nv = 0;
    if (members.size() >= 2) {
      nv = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::llround(
                 val_fraction * static_cast<double>(members.size()))));
      if (nv >= members.size()) nv = members.size() - 1;
    }
    for (std::size_t i = 0; i < members.size(); ++i) {
      (i < nv ? val : train)->push_back(members[i]);
    }
  }
  std::sort(train->begin(), train->end());
  std::sort(val->begin(), val->end());
}

std::uint64_t params_checksum(const std::vector<Tensor *> &params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const Tensor *t : params) h = checksum(t->value, h);
  return h;
}

std::vector<Tensor *> all_params(IflfModel *model) {
  std::vector<Tensor *> out = model->extractor().params();
  for (Head &head : model->heads()) {
    for (Tensor *t : head.params()) out.push_back(t);
  }
  return out;
}

[[noreturn]] void diverge(IflfModel *model, const std::string &what, int epoch,
                          const std::string &phase, const std::string &domain,
                          double value) {
  nlohmann::json snap;
  snap["epoch"] = epoch;
  snap["phase"] = phase;
  snap["domain"] = domain;
  snap["quantity"] = what;
  snap["value"] = std::to_string(value);
  nlohmann::json params = nlohmann::json::array();
  for (const Tensor *t : all_params(model)) {
    nlohmann::json p;
    p["name"] = t->name;
    const double l2 = t->value.norm();
    const double mx = t->value.cwiseAbs().maxCoeff();
    p["l2"] = std::isfinite(l2) ? nlohmann::json(l2)
                                : nlohmann::json(std::to_string(l2));
    p["max_abs"] = std::isfinite(mx) ? nlohmann::json(mx)
                                     : nlohmann::json(std::to_string(mx));
    params.push_back(std::move(p));
  }
  snap["param_norms"] = std::move(params);
  throw TrainingDivergence("training diverged: non-finite " + what +
                               " at epoch " + std::to_string(epoch),
                           snap.dump());
}

// Per-domain training state.
struct DomainState {
  WindowSet data;  // normalized
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> val_idx;
  std::vector<Triplet> val_triplets;  // TMTL only
};

double accuracy_on(IflfModel *model, std::size_t k, const WindowSet &ws,
                   const std::vector<std::size_t> &idx) {
  if (idx.empty()) return 0.0;
  const Head &head = model->heads()[k];
  std::size_t correct = 0;
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < idx.size(); start += kChunk) {
    const std::size_t stop = std::min(idx.size(), start + kChunk);
    std::vector<std::size_t> part(idx.begin() + static_cast<std::ptrdiff_t>(start),
                                  idx.begin() + static_cast<std::ptrdiff_t>(stop));
    const Eigen::MatrixXd p = model->predict(k, gather(ws, part));
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      Eigen::Index best = 0;
      p.row(r).maxCoeff(&best);
      const int global = head.classes[static_cast<std::size_t>(best)];
      if (global == ws.labels[part[static_cast<std::size_t>(r)]]) correct += 1;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(idx.size());
}

// Summed triplet loss over fixed triplets, eval-mode features, batched.
double triplet_loss_on(IflfModel *model, const WindowSet &ws,
                       const std::vector<Triplet> &triplets, double margin) {
  double total = 0.0;
  constexpr std::size_t kChunk = 128;
  for (std::size_t start = 0; start < triplets.size(); start += kChunk) {
    const std::size_t stop = std::min(triplets.size(), start + kChunk);
    const std::size_t nt = stop - start;
    std::vector<std::size_t> idx;
    idx.reserve(3 * nt);
    for (std::size_t t = start; t < stop; ++t) idx.push_back(triplets[t].anchor);
    for (std::size_t t = start; t < stop; ++t)
      idx.push_back(triplets[t].positive);
    for (std::size_t t = start; t < stop; ++t)
      idx.push_back(triplets[t].negative);
    const Eigen::MatrixXd z =
        model->extractor().forward(gather(ws, idx), false, nullptr);
    const Eigen::Index n = static_cast<Eigen::Index>(nt);
    total += triplet_loss_value(z.leftCols(n), z.middleCols(n, n),
                                z.rightCols(n), margin);
  }
  return total;
}

}  // namespace

void TrainConfig::validate() const {
  if (mode != "BMTL" && mode != "TMTL") {
    throw ConfigError("TrainConfig: mode must be BMTL or TMTL");
  }
  if (alpha <= 0.0 || beta <= 0.0) {
    throw ConfigError("TrainConfig: learning rates must be positive");
  }
  if (mu < 0.0) throw ConfigError("TrainConfig: mu must be >= 0");
  if (epsilon_margin <= 0.0) {
    throw ConfigError("TrainConfig: epsilon_margin must be positive");
  }
  if (m <= 0 || n <= 0) throw ConfigError("TrainConfig: m and n must be > 0");
  if (m <= n) throw ConfigError("TrainConfig: m must exceed n");
  if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
  if (max_epochs < 1) throw ConfigError("TrainConfig: max_epochs must be >= 1");
  if (patience < 1) throw ConfigError("TrainConfig: patience must be >= 1");
  if (val_fraction <= 0.0 || val_fraction > 0.5) {
    throw ConfigError("TrainConfig: val_fraction must be in (0, 0.5]");
  }
}

void BaselineConfig::validate() const {
  if (kind != "STL" && kind != "PTM") {
    throw ConfigError("BaselineConfig: kind must be STL or PTM");
  }
  if (lr <= 0.0) throw ConfigError("BaselineConfig: lr must be positive");
  if (rho <= 0.0 || rho >= 1.0) {
    throw ConfigError("BaselineConfig: rho must be in (0, 1)");
  }
  if (max_iters < 1) throw ConfigError("BaselineConfig: max_iters must be >= 1");
  if (batch_size < 1) {
    throw ConfigError("BaselineConfig: batch_size must be >= 1");
  }
}

std::vector<std::vector<std::size_t>> stratified_batches(
    const std::vector<int> &labels, const std::vector<std::size_t> &pool,
    int batch_size, std::uint64_t seed) {
  if (batch_size < 1) {
    throw ConfigError("stratified_batches: batch_size must be >= 1");
  }
  if (pool.empty()) return {};
  auto by_class = group_by_class(labels, pool);
  Rng rng(seed);
  struct ClassState {
    int cls;
    std::vector<std::size_t> members;
    std::size_t cursor = 0;
  };
  std::vector<ClassState> cs;
  for (auto &[cls, members] : by_class) {
    rng.shuffle(members);
    cs.push_back({cls, std::move(members), 0});
  }
  // Largest-remainder fill against the remaining pool: each batch takes
  // floor(nb * rem_c / rem_total) of class c plus at most one extra, which
  // keeps every batch's class counts within one of proportional.
  std::size_t rem_total = pool.size();
  std::vector<std::vector<std::size_t>> batches;
  while (rem_total > 0) {
    const std::size_t nb =
        std::min(rem_total, static_cast<std::size_t>(batch_size));
    std::vector<std::size_t> take(cs.size(), 0);
    std::vector<std::pair<double, std::size_t>> frac;  // (-remainder, class)
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < cs.size(); ++c) {
      const std::size_t rem_c = cs[c].members.size() - cs[c].cursor;
      const double want = static_cast<double>(nb) *
                          static_cast<double>(rem_c) /
                          static_cast<double>(rem_total);
      take[c] = static_cast<std::size_t>(std::floor(want));
      assigned += take[c];
      frac.emplace_back(-(want - std::floor(want)), c);
    }
    std::sort(frac.begin(), frac.end());
    for (std::size_t i = 0; i < frac.size() && assigned < nb; ++i) {
      const std::size_t c = frac[i].second;
      if (take[c] < cs[c].members.size() - cs[c].cursor) {
        take[c] += 1;
        assigned += 1;
      }
    }
    std::vector<std::size_t> batch;
    batch.reserve(nb);
    for (std::size_t c = 0; c < cs.size(); ++c) {
      for (std::size_t i = 0; i < take[c]; ++i) {
        batch.push_back(cs[c].members[cs[c].cursor]);
        cs[c].cursor += 1;
      }
    }
    rng.shuffle(batch);
    rem_total -= nb;
    batches.push_back(std::move(batch));
  }
  return batches;
}

std::vector<Task> sample_tasks(const std::vector<WindowSet> &sources,
                               const TrainConfig &config,
                               std::uint64_t epoch_seed) {
  config.validate();
  if (sources.size() < 2) {
    throw ConfigError("sample_tasks: need at least 2 source domains");
  }
  std::vector<Task> tasks;
  for (std::size_t k = 0; k < sources.size(); ++k) {
    const WindowSet &ws = sources[k];
    std::vector<std::size_t> pool(ws.windows.size());
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
    Task task;
    task.domain_index = k;
    task.batches = stratified_batches(
        ws.labels, pool, config.batch_size,
        derive_seed(config.seed,
                    {kSaltTask, epoch_seed, static_cast<std::uint64_t>(k)}));
    tasks.push_back(std::move(task));
  }
  return tasks;
}

std::vector<Triplet> sample_triplets(const std::vector<int> &labels,
                                     const std::vector<std::size_t> &pool,
                                     int m, std::uint64_t seed) {
  if (m < 1) throw ConfigError("sample_triplets: m must be >= 1");
  auto by_class = group_by_class(labels, pool);
  if (by_class.size() < 2) {
    throw DataError(
        "sample_triplets: need at least 2 classes; no negative exists");
  }
  std::vector<int> classes;
  for (const auto &[cls, members] : by_class) {
    (void)members;
    classes.push_back(cls);
  }
  Rng rng(seed);
  const auto draw_from = [&](int cls) {
    const auto &members = by_class.at(cls);
    return members[rng.index(members.size())];
  };
  const auto draw_other_class = [&](int avoid) {
    // Uniform over the remaining classes.
    const std::size_t pick = rng.index(classes.size() - 1);
    std::size_t seen = 0;
    for (const int cls : classes) {
      if (cls == avoid) continue;
      if (seen == pick) return cls;
      seen += 1;
    }
    return classes.back();
  };
  struct Pair {
    std::size_t a;
    std::size_t other;
    int a_class;
  };
  std::vector<Pair> ap, an;
  for (int i = 0; i < m; ++i) {
    // Anchors class-uniform, then uniform within the class.
    const int cls = classes[rng.index(classes.size())];
    ap.push_back({draw_from(cls), draw_from(cls), cls});
  }
  for (int i = 0; i < m; ++i) {
    const int cls = classes[rng.index(classes.size())];
    an.push_back({draw_from(cls), draw_from(draw_other_class(cls)), cls});
  }
  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<std::size_t>(m) * static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      Triplet t;
      t.anchor = ap[static_cast<std::size_t>(i)].a;
      t.positive = ap[static_cast<std::size_t>(i)].other;
      t.negative = an[static_cast<std::size_t>(j)].other;
      // The crossed negative may share the anchor's class; redraw it from
      // the remaining classes to keep the label constraint.
      if (labels[t.negative] == ap[static_cast<std::size_t>(i)].a_class) {
        t.negative = draw_from(
            draw_other_class(ap[static_cast<std::size_t>(i)].a_class));
      }
      triplets.push_back(t);
    }
  }
  return triplets;
}

double task_loss(IflfModel *model, const WindowSet &source, std::size_t k,
                 const TrainConfig &config, std::uint64_t seed) {
  config.validate();
  if (k >= model->heads().size()) throw ConfigError("task_loss: bad head");
  const WindowSet ws = ensure_normalized(source);
  std::vector<std::size_t> pool(ws.windows.size());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  if (config.mode == "BMTL") {
    const Head &head = model->heads()[k];
    const std::vector<int> yloc = local_labels(head, ws, pool);
    double total = 0.0;
    constexpr std::size_t kChunk = 256;
    for (std::size_t start = 0; start < pool.size(); start += kChunk) {
      const std::size_t stop = std::min(pool.size(), start + kChunk);
      std::vector<std::size_t> part(
          pool.begin() + static_cast<std::ptrdiff_t>(start),
          pool.begin() + static_cast<std::ptrdiff_t>(stop));
      const Eigen::MatrixXd z =
          model->extractor().forward(gather(ws, part), false, nullptr);
      const Eigen::MatrixXd probs = softmax_cols(head.logits(z));
      std::vector<int> part_labels(
          yloc.begin() + static_cast<std::ptrdiff_t>(start),
          yloc.begin() + static_cast<std::ptrdiff_t>(stop));
      total += cross_entropy(probs, part_labels) *
               static_cast<double>(part.size());
    }
    return total / static_cast<double>(pool.size());
  }
  const std::vector<Triplet> triplets =
      sample_triplets(ws.labels, pool, config.m, seed);
  return triplet_loss_on(model, ws, triplets, config.epsilon_margin);
}

double eq1_loss(IflfModel *model, const std::vector<WindowSet> &sources,
                const TrainConfig &config, std::uint64_t seed) {
  double total = 0.0;
  for (std::size_t k = 0; k < sources.size(); ++k) {
    total += task_loss(model, sources[k], k, config,
                       derive_seed(seed, {static_cast<std::uint64_t>(k)}));
  }
  return total;
}

WindowSet ensure_normalized(const WindowSet &ws) {
  if (ws.normalized) return ws;
  if (ws.stats.empty()) {
    throw DataError("ensure_normalized: window set has no recorded stats");
  }
  return apply_stats(ws, ws.stats);
}

double evaluate_accuracy(IflfModel *model, std::size_t k,
                         const WindowSet &windows) {
  if (k >= model->heads().size()) {
    throw ConfigError("evaluate_accuracy: bad head");
  }
  const WindowSet ws = ensure_normalized(windows);
  std::vector<std::size_t> idx(ws.windows.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return accuracy_on(model, k, ws, idx);
}

TrainResult train_iflf(IflfModel *model, const std::vector<WindowSet> &sources,
                       const TrainConfig &config) {
  config.validate();
  if (sources.empty()) throw ConfigError("train_iflf: no source domains");
  if (model->heads().size() != sources.size()) {
    throw ConfigError("train_iflf: heads and source domains misaligned");
  }
  const std::size_t K = sources.size();
  std::vector<DomainState> ds(K);
  for (std::size_t k = 0; k < K; ++k) {
    ds[k].data = ensure_normalized(sources[k]);
    if (!(ds[k].data.domain == model->heads()[k].domain)) {
      throw ConfigError("train_iflf: head " + std::to_string(k) +
                        " does not match domain " + ds[k].data.domain.key());
    }
    split_train_val(ds[k].data.labels, ds[k].data.windows.size(),
                    config.val_fraction,
                    derive_seed(config.seed,
                                {kSaltSplit, static_cast<std::uint64_t>(k)}),
                    &ds[k].train_idx, &ds[k].val_idx);
    if (ds[k].train_idx.empty() || ds[k].val_idx.empty()) {
      throw DataError("train_iflf: domain " + ds[k].data.domain.key() +
                      " too small to split");
    }
    if (config.mode == "TMTL") {
      // Fixed validation triplets: n^2, independent of epoch.
      ds[k].val_triplets = sample_triplets(
          ds[k].data.labels, ds[k].val_idx, config.n,
          derive_seed(config.seed,
                      {kSaltValTri, static_cast<std::uint64_t>(k)}));
    }
  }

  Adam ext_opt(config.alpha, config.beta1, config.beta2);
  std::vector<Adam> head_opts;
  head_opts.reserve(K);
  for (std::size_t k = 0; k < K; ++k) {
    head_opts.emplace_back(config.beta, config.beta1, config.beta2);
  }

  const std::vector<Tensor *> ext_params = model->extractor().params();
  const auto snapshot_params = [&]() {
    std::vector<Eigen::MatrixXd> out;
    for (const Tensor *t : all_params(model)) out.push_back(t->value);
    return out;
  };
  const auto restore_params = [&](const std::vector<Eigen::MatrixXd> &vals) {
    const std::vector<Tensor *> params = all_params(model);
    for (std::size_t i = 0; i < params.size(); ++i) {
      params[i]->value = vals[i];
    }
  };

  TrainResult result;
  double best = std::numeric_limits<double>::infinity();
  std::vector<Eigen::MatrixXd> best_params;
  int since_best = 0;

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();

    // Phase (a): per-domain head updates, extractor frozen.
    const std::uint64_t theta_before =
        config.check_freeze ? params_checksum(ext_params) : 0;
    double head_loss_total = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      Head &head = model->heads()[k];
      const auto batches = stratified_batches(
          ds[k].data.labels, ds[k].train_idx, config.batch_size,
          derive_seed(config.seed,
                      {kSaltHead, static_cast<std::uint64_t>(epoch),
                       static_cast<std::uint64_t>(k)}));
      double dom_loss = 0.0;
      for (const auto &batch : batches) {
        const Eigen::MatrixXd z =
            model->extractor().forward(gather(ds[k].data, batch), false,
                                       nullptr);
        const std::vector<int> yloc = local_labels(head, ds[k].data, batch);
        const Eigen::MatrixXd probs = softmax_cols(head.logits(z));
        const double ce = cross_entropy(probs, yloc);
        const double loss = ce + config.mu * l1_norm(head.W.value);
        if (!std::isfinite(loss)) {
          diverge(model, "head loss", epoch, "a", head.domain.key(), loss);
        }
        const Eigen::MatrixXd dlogits = softmax_ce_grad(probs, yloc);
        head.W.grad =
            dlogits * z.transpose() + config.mu * l1_subgrad(head.W.value);
        head.b.grad = dlogits.rowwise().sum();
        head_opts[k].step(head.params());
        dom_loss += loss;
      }
      head_loss_total += dom_loss / static_cast<double>(batches.size());
    }
    head_loss_total /= static_cast<double>(K);
    if (config.check_freeze && params_checksum(ext_params) != theta_before) {
      throw std::logic_error("train_iflf: extractor changed in phase (a)");
    }

    // Phase (b): extractor update, heads frozen.
    std::uint64_t phi_before = 0;
    if (config.check_freeze) {
      std::vector<Tensor *> phis;
      for (Head &head : model->heads()) {
        for (Tensor *t : head.params()) phis.push_back(t);
      }
      phi_before = params_checksum(phis);
    }
    Rng drop_rng(derive_seed(config.seed,
                             {kSaltDrop, static_cast<std::uint64_t>(epoch)}));
    double ext_loss = 0.0;
    if (config.mode == "BMTL") {
      std::vector<std::vector<std::vector<std::size_t>>> dom_batches(K);
      std::size_t max_batches = 0;
      for (std::size_t k = 0; k < K; ++k) {
        dom_batches[k] = stratified_batches(
            ds[k].data.labels, ds[k].train_idx, config.batch_size,
            derive_seed(config.seed,
                        {kSaltExt, static_cast<std::uint64_t>(epoch),
                         static_cast<std::uint64_t>(k)}));
        max_batches = std::max(max_batches, dom_batches[k].size());
      }
      std::vector<double> dom_loss(K, 0.0);
      // Round-robin over domains so no domain dominates late updates.
      for (std::size_t b = 0; b < max_batches; ++b) {
        for (std::size_t k = 0; k < K; ++k) {
          if (b >= dom_batches[k].size()) continue;
          const auto &batch = dom_batches[k][b];
          const Head &head = model->heads()[k];
          const Eigen::MatrixXd z = model->extractor().forward(
              gather(ds[k].data, batch), true, &drop_rng);
          const std::vector<int> yloc = local_labels(head, ds[k].data, batch);
          const Eigen::MatrixXd probs = softmax_cols(head.logits(z));
          const double ce = cross_entropy(probs, yloc);
          if (!std::isfinite(ce)) {
            diverge(model, "extractor CE", epoch, "b",
                    head.domain.key(), ce);
          }
          const Eigen::MatrixXd dz =
              head.W.value.transpose() * softmax_ce_grad(probs, yloc);
          model->extractor().zero_grad();
          model->extractor().backward(dz);
          ext_opt.step(ext_params);
          dom_loss[k] += ce;
        }
      }
      for (std::size_t k = 0; k < K; ++k) {
        ext_loss += dom_loss[k] / static_cast<double>(dom_batches[k].size());
      }
    } else {
      const std::size_t per_step =
          std::max<std::size_t>(1, static_cast<std::size_t>(config.batch_size) / 3);
      for (std::size_t k = 0; k < K; ++k) {
        const std::vector<Triplet> triplets = sample_triplets(
            ds[k].data.labels, ds[k].train_idx, config.m,
            derive_seed(config.seed,
                        {kSaltTrip, static_cast<std::uint64_t>(epoch),
                         static_cast<std::uint64_t>(k)}));
        for (std::size_t start = 0; start < triplets.size();
             start += per_step) {
          const std::size_t stop = std::min(triplets.size(), start + per_step);
          const std::size_t nt = stop - start;
          std::vector<std::size_t> idx;
          idx.reserve(3 * nt);
          for (std::size_t t = start; t < stop; ++t)
            idx.push_back(triplets[t].anchor);
          for (std::size_t t = start; t < stop; ++t)
            idx.push_back(triplets[t].positive);
          for (std::size_t t = start; t < stop; ++t)
            idx.push_back(triplets[t].negative);
          const Eigen::MatrixXd z = model->extractor().forward(
              gather(ds[k].data, idx), true, &drop_rng);
          const Eigen::Index n = static_cast<Eigen::Index>(nt);
          const TripletLossResult r =
              triplet_loss(z.leftCols(n), z.middleCols(n, n), z.rightCols(n),
                           config.epsilon_margin);
          if (!std::isfinite(r.loss)) {
            diverge(model, "triplet loss", epoch, "b",
                    ds[k].data.domain.key(), r.loss);
          }
          Eigen::MatrixXd dz(z.rows(), z.cols());
          dz << r.d_anchor, r.d_positive, r.d_negative;
          model->extractor().zero_grad();
          model->extractor().backward(dz);
          ext_opt.step(ext_params);
          ext_loss += r.loss;
        }
      }
    }
    if (config.check_freeze) {
      std::vector<Tensor *> phis;
      for (Head &head : model->heads()) {
        for (Tensor *t : head.params()) phis.push_back(t);
      }
      if (params_checksum(phis) != phi_before) {
        throw std::logic_error("train_iflf: heads changed in phase (b)");
      }
    }

    // Validation metric and per-domain accuracy.
    double val_metric = 0.0;
    EpochRecord record;
    for (std::size_t k = 0; k < K; ++k) {
      record.val_accuracy.push_back(
          accuracy_on(model, k, ds[k].data, ds[k].val_idx));
      if (config.mode == "TMTL") {
        val_metric += triplet_loss_on(model, ds[k].data, ds[k].val_triplets,
                                      config.epsilon_margin);
      } else {
        const Head &head = model->heads()[k];
        const Eigen::MatrixXd p =
            model->predict(k, gather(ds[k].data, ds[k].val_idx));
        val_metric += cross_entropy(
            p.transpose(), local_labels(head, ds[k].data, ds[k].val_idx));
      }
    }
    if (config.mode == "BMTL") val_metric /= static_cast<double>(K);
    if (!std::isfinite(val_metric)) {
      diverge(model, "validation metric", epoch, "val", "all", val_metric);
    }

    record.epoch = epoch;
    record.head_loss = head_loss_total;
    record.extractor_loss = ext_loss;
    record.val_metric = val_metric;
    record.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    result.history.push_back(record);

    if (val_metric < best) {
      best = val_metric;
      result.best_epoch = epoch;
      best_params = snapshot_params();
      since_best = 0;
    } else {
      since_best += 1;
      if (since_best >= config.patience) {
        result.early_stopped = true;
        break;
      }
    }
  }

  if (!best_params.empty()) restore_params(best_params);
  result.best_metric = best;
  return result;
}

IflfModel train_baseline(const ExtractorSpec &spec,
                         const std::vector<WindowSet> &sources,
                         const BaselineConfig &config, TrainResult *result) {
  config.validate();
  spec.validate();
  if (sources.empty()) throw ConfigError("train_baseline: no data");
  if (config.kind == "STL" && sources.size() != 1) {
    throw ConfigError("train_baseline: STL takes exactly one domain");
  }
  std::vector<WindowSet> data;
  data.reserve(sources.size());
  for (const WindowSet &ws : sources) data.push_back(ensure_normalized(ws));

  // Single shared head over the union of present classes.
  std::vector<int> classes;
  std::size_t total_windows = 0;
  std::vector<std::string> class_names = data.front().class_names;
  for (const WindowSet &ws : data) {
    if (ws.class_names != class_names) {
      throw DataError("train_baseline: class name tables differ");
    }
    total_windows += ws.windows.size();
    for (const int y : ws.labels) {
      if (std::find(classes.begin(), classes.end(), y) == classes.end()) {
        classes.push_back(y);
      }
    }
  }
  std::sort(classes.begin(), classes.end());
  const DomainId head_domain = config.kind == "STL"
                                   ? data.front().domain
                                   : DomainId{"pooled", "mixed"};
  IflfModel model = IflfModel::build(spec, {{head_domain, classes}},
                                     class_names, config.seed);
  Head &head = model.heads()[0];

  // Pooled index space: (domain, window).
  std::vector<std::pair<std::size_t, std::size_t>> pooled;
  std::vector<int> pooled_labels;
  for (std::size_t d = 0; d < data.size(); ++d) {
    for (std::size_t i = 0; i < data[d].windows.size(); ++i) {
      pooled.emplace_back(d, i);
      pooled_labels.push_back(data[d].labels[i]);
    }
  }
  std::vector<std::size_t> pool(total_windows);
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;

  RmsProp opt(config.lr, config.rho);
  std::vector<Tensor *> params = model.extractor().params();
  for (Tensor *t : head.params()) params.push_back(t);

  TrainResult local;
  Rng drop_rng(derive_seed(config.seed, {kSaltDrop}));
  for (int epoch = 0; epoch < config.max_iters; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto batches = stratified_batches(
        pooled_labels, pool, config.batch_size,
        derive_seed(config.seed,
                    {kSaltExt, static_cast<std::uint64_t>(epoch)}));
    double epoch_loss = 0.0;
    for (const auto &batch : batches) {
      Batch xb;
      std::vector<int> yloc;
      xb.reserve(batch.size());
      for (const std::size_t p : batch) {
        const auto &[d, i] = pooled[p];
        xb.push_back(data[d].windows[i]);
        const int l = head.local_index(data[d].labels[i]);
        if (l < 0) throw DataError("train_baseline: class missing from head");
        yloc.push_back(l);
      }
      const Eigen::MatrixXd z =
          model.extractor().forward(xb, true, &drop_rng);
      const Eigen::MatrixXd probs = softmax_cols(head.logits(z));
      const double ce = cross_entropy(probs, yloc);
      if (!std::isfinite(ce)) {
        diverge(&model, "baseline CE", epoch, "supervised",
                head_domain.key(), ce);
      }
      const Eigen::MatrixXd dlogits = softmax_ce_grad(probs, yloc);
      model.extractor().zero_grad();
      head.W.grad = dlogits * z.transpose();
      head.b.grad = dlogits.rowwise().sum();
      model.extractor().backward(head.W.value.transpose() * dlogits);
      opt.step(params);
      epoch_loss += ce;
    }
    EpochRecord record;
    record.epoch = epoch;
    record.head_loss = epoch_loss / static_cast<double>(batches.size());
    record.extractor_loss = record.head_loss;
    record.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    local.history.push_back(record);
  }
  if (result != nullptr) *result = std::move(local);
  return model;
}

nlohmann::json train_result_to_json(const TrainResult &result) {
  nlohmann::json j;
  j["best_epoch"] = result.best_epoch;
  j["best_metric"] = result.best_metric;
  j["early_stopped"] = result.early_stopped;
  nlohmann::json hist = nlohmann::json::array();
  for (const EpochRecord &r : result.history) {
    nlohmann::json e;
    e["epoch"] = r.epoch;
    e["head_loss"] = r.head_loss;
    e["extractor_loss"] = r.extractor_loss;
    e["val_metric"] = r.val_metric;
    e["val_accuracy"] = r.val_accuracy;
    e["seconds"] = r.seconds;
    hist.push_back(std::move(e));
  }
  j["history"] = std::move(hist);
  return j;
}

nlohmann::json train_config_to_json(const TrainConfig &config) {
  return nlohmann::json{{"mode", config.mode},
                        {"alpha", config.alpha},
                        {"beta", config.beta},
                        {"beta1", config.beta1},
                        {"beta2", config.beta2},
                        {"mu", config.mu},
                        {"epsilon_margin", config.epsilon_margin},
                        {"m", config.m},
                        {"n", config.n},
                        {"batch_size", config.batch_size},
                        {"max_epochs", config.max_epochs},
                        {"patience", config.patience},
                        {"val_fraction", config.val_fraction},
                        {"seed", config.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json &j) {
  check_known_keys(j, {"mode", "alpha", "beta", "beta1", "beta2", "mu",
                       "epsilon_margin", "m", "n", "batch_size", "max_epochs",
                       "patience", "val_fraction", "seed"},
                   "train config");
  TrainConfig config;
  config.mode = j.value("mode", config.mode);
  config.alpha = j.value("alpha", config.alpha);
  config.beta = j.value("beta", config.beta);
  config.beta1 = j.value("beta1", config.beta1);
  config.beta2 = j.value("beta2", config.beta2);
  config.mu = j.value("mu", config.mu);
  config.epsilon_margin = j.value("epsilon_margin", config.epsilon_margin);
  config.m = j.value("m", config.m);
  config.n = j.value("n", config.n);
  config.batch_size = j.value("batch_size", config.batch_size);
  config.max_epochs = j.value("max_epochs", config.max_epochs);
  config.patience = j.value("patience", config.patience);
  config.val_fraction = j.value("val_fraction", config.val_fraction);
  config.seed = j.value("seed", config.seed);
  config.validate();
  return config;
}

nlohmann::json baseline_config_to_json(const BaselineConfig &config) {
  return nlohmann::json{{"kind", config.kind},
                        {"lr", config.lr},
                        {"rho", config.rho},
                        {"max_iters", config.max_iters},
                        {"batch_size", config.batch_size},
                        {"seed", config.seed}};
}

BaselineConfig baseline_config_from_json(const nlohmann::json &j) {
  check_known_keys(j, {"kind", "lr", "rho", "max_iters", "batch_size", "seed"},
                   "baseline config");
  BaselineConfig config;
  config.kind = j.value("kind", config.kind);
  config.lr = j.value("lr", config.lr);
  config.rho = j.value("rho", config.rho);
  config.max_iters = j.value("max_iters", config.max_iters);
  config.batch_size = j.value("batch_size", config.batch_size);
  config.seed = j.value("seed", config.seed);
  config.validate();
  return config;
}

}  // namespace iflf
