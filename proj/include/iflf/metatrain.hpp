// iflf/metatrain.hpp

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

#ifndef IFLF_METATRAIN_HPP_
#define IFLF_METATRAIN_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "iflf/model.hpp"
#include "iflf/sigproc.hpp"

namespace iflf {

// Alternating meta-training configuration.  alpha drives the extractor,
// beta the heads; both use adaptive-moment updates.
struct TrainConfig {
  std::string mode = "TMTL";  // or "BMTL"
  double alpha = 1e-4;
  double beta = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double mu = 0.8;
  double epsilon_margin = 0.4;
  int m = 100;  // triplet pairs per task per epoch
  int n = 10;   // validation pairs (n^2 fixed validation triplets)
  int batch_size = 100;
  int max_epochs = 30;
  int patience = 5;
  double val_fraction = 0.2;
  std::uint64_t seed = 0;
  // Asserts the alternating-freeze contract every epoch (test mode).
  bool check_freeze = false;

  void validate() const;
};

// Baseline trainers: STL on a single domain, PTM on the pooled sources,
// both with one shared head and RMS-prop-style updates.
struct BaselineConfig {
  std::string kind = "PTM";  // or "STL"
  double lr = 1e-3;
  double rho = 0.9;  // squared-gradient smoothing
  int max_iters = 100;  // epochs over the data, no early stopping
  int batch_size = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

// Class-stratified minibatch plan for one source domain.
struct Task {
  std::size_t domain_index = 0;
  std::vector<std::vector<std::size_t>> batches;  // window indices
};

// Window indices into one domain's window set.
struct Triplet {
  std::size_t anchor = 0;
  std::size_t positive = 0;
  std::size_t negative = 0;
};

struct EpochRecord {
  int epoch = 0;
  double head_loss = 0.0;       // mean over domains of the per-head objective
  double extractor_loss = 0.0;  // summed per-task extractor objective
  double val_metric = 0.0;
  std::vector<double> val_accuracy;  // per domain
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  double best_metric = 0.0;
  bool early_stopped = false;
};

// Splits pool into class-stratified batches: per batch, each class count
// stays within one of exact proportionality.  Deterministic per seed.
std::vector<std::vector<std::size_t>> stratified_batches(
    const std::vector<int> &labels, const std::vector<std::size_t> &pool,
    int batch_size, std::uint64_t seed);

// One task per source domain, deterministic per (config.seed, epoch_seed).
std::vector<Task> sample_tasks(const std::vector<WindowSet> &sources,
                               const TrainConfig &config,
                               std::uint64_t epoch_seed);

// m anchor-positive and m anchor-negative pairs crossed into m^2 triplets;
// the anchor comes from the AP pair.  Anchors are drawn class-uniform.  A
// cross-product negative that collides with the anchor's class is redrawn
// from the remaining classes so every triplet satisfies the label
// constraint.
std::vector<Triplet> sample_triplets(const std::vector<int> &labels,
                                     const std::vector<std::size_t> &pool,
                                     int m, std::uint64_t seed);

// Per-task extractor objective in eval mode: mean CE through the frozen
// head (BMTL) or the summed m^2-triplet loss (TMTL, head-independent).
double task_loss(IflfModel *model, const WindowSet &source, std::size_t k,
                 const TrainConfig &config, std::uint64_t seed);

// Total extractor objective: sum of task_loss over all source domains with
// per-task seeds derived from seed.
double eq1_loss(IflfModel *model, const std::vector<WindowSet> &sources,
                const TrainConfig &config, std::uint64_t seed);

// Alternating optimization: per-epoch head passes with the extractor
// frozen, then an extractor pass with all heads frozen; early stopping on
// the validation metric with best-epoch restore.  Throws
// TrainingDivergence with a JSON snapshot when a loss goes non-finite.
TrainResult train_iflf(IflfModel *model, const std::vector<WindowSet> &sources,
                       const TrainConfig &config);

// Supervised baseline with the same extractor family.  STL expects exactly
// one window set; PTM pools all given sets under a single shared head.
IflfModel train_baseline(const ExtractorSpec &spec,
                         const std::vector<WindowSet> &sources,
                         const BaselineConfig &config,
                         TrainResult *result = nullptr);

// Mean argmax accuracy of head k over the window set (global labels).
double evaluate_accuracy(IflfModel *model, std::size_t k,
                         const WindowSet &windows);

// Copy with the set's own stats applied; pass-through when already
// normalized.
WindowSet ensure_normalized(const WindowSet &ws);

nlohmann::json train_result_to_json(const TrainResult &result);

nlohmann::json train_config_to_json(const TrainConfig &config);
TrainConfig train_config_from_json(const nlohmann::json &j);
nlohmann::json baseline_config_to_json(const BaselineConfig &config);
BaselineConfig baseline_config_from_json(const nlohmann::json &j);

}  // namespace iflf

#endif  // IFLF_METATRAIN_HPP_
