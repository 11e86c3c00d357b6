// iflf/adapt.hpp

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

#ifndef IFLF_ADAPT_HPP_
#define IFLF_ADAPT_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "iflf/metatrain.hpp"
#include "iflf/model.hpp"
#include "iflf/recording.hpp"
#include "iflf/sigproc.hpp"
#include "iflf/similarity.hpp"

namespace iflf {

// Few-shot adaptation of a single task head with the extractor frozen.
struct AdaptConfig {
  int shots = 10;  // i, windows per class
  std::string head_init = "reuse-random-source-head";  // or "fresh"
  std::uint64_t reuse_seed = 0;  // picks which source head to copy
  bool substitution = false;
  double similarity_threshold = 0.8;
  std::size_t top_k = 3;
  // Same optimizer family as the task heads during meta-training.
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double mu = 0.8;
  int epochs = 50;
  int patience = 5;  // early stop on support-loss plateau
  int batch_size = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

// One labeled window with its provenance.
struct SupportWindow {
  Eigen::MatrixXd window;  // [channels x window_len], normalized
  int label = LabelMap::kUnlabeled;
  DomainId domain;                // originating domain
  std::size_t source_index = 0;   // window index within that domain's set
  bool substituted = false;
};

struct SupportSet {
  DomainId target;
  std::vector<std::string> class_names;
  int shots_requested = 0;
  std::vector<SupportWindow> windows;
  std::map<int, int> shots_used;      // class -> windows present
  std::vector<int> short_classes;     // fewer than requested were available
  std::vector<int> excluded_classes;  // nothing available outside the test set
};

struct WindowProvenance {
  int label = LabelMap::kUnlabeled;
  DomainId domain;
  std::size_t source_index = 0;
  bool substituted = false;
};

struct AdaptResult {
  Head head;  // adapted head, domain = target
  std::map<int, int> shots_used;
  std::vector<int> short_classes;
  std::vector<int> excluded_classes;
  std::vector<int> substituted_classes;
  // class -> source domain keys the replacement windows came from
  std::map<int, std::vector<std::string>> substitution_sources;
  std::vector<WindowProvenance> provenance;
  std::vector<double> trace;  // per-epoch mean support loss (Eq. 3)
  int best_epoch = -1;
  bool early_stopped = false;
};

// Fixed per-class test indices: round(fraction * n_c) windows, at least 1,
// drawn once per seed.  A singleton class goes entirely to the test set.
// Returned sorted ascending.  Unlabeled windows are never selected.
std::vector<std::size_t> select_test_indices(const WindowSet &ws,
                                             double fraction,
                                             std::uint64_t seed);

// Class-balanced support: i windows per class outside `exclude`.  Classes
// with fewer than i available contribute all they have (recorded in
// short_classes); classes with none are excluded entirely.
SupportSet select_shots(const WindowSet &target, int i, std::uint64_t seed,
                        const std::vector<std::size_t> &exclude);

// Replace the support windows of substitutable activities with windows drawn
// uniformly from the same activity across the source domains.  Activities
// absent from every source are skipped with a warning.  Never adds
// target-domain windows.
SupportSet substitute_support(const SupportSet &support,
                              const SimilarityReport &report,
                              const std::vector<WindowSet> &sources,
                              const AdaptConfig &config);

// Train one head on the support set, extractor frozen and in eval mode.
// Loss per batch is CE + mu * |W|_1.  Non-finite loss aborts with
// TrainingDivergence.
AdaptResult fast_adapt(IflfModel *model, const SupportSet &support,
                       const AdaptConfig &config);

// Window-level predictions of a detached head over ws[idx], as global class
// ids.  ws is normalized on the fly when needed.
std::vector<int> head_predictions(IflfModel *model, const Head &head,
                                  const WindowSet &ws,
                                  const std::vector<std::size_t> &idx);

// Accuracy over the idx windows whose labels the head can express.
double head_accuracy(IflfModel *model, const Head &head, const WindowSet &ws,
                     const std::vector<std::size_t> &idx);

nlohmann::json adapt_result_to_json(const AdaptResult &result);
void save_adapt_result(const AdaptResult &result,
                       const std::filesystem::path &path);

nlohmann::json adapt_config_to_json(const AdaptConfig &config);
AdaptConfig adapt_config_from_json(const nlohmann::json &j);

}  // namespace iflf

#endif  // IFLF_ADAPT_HPP_
