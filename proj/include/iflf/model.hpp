// iflf/model.hpp

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

#ifndef IFLF_MODEL_HPP_
#define IFLF_MODEL_HPP_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "iflf/nn.hpp"
#include "iflf/recording.hpp"

namespace iflf {

// Architecture of the shared extractor.  Two variants share one contract:
// input [channels x window_len], output a d-vector per window.
struct ExtractorSpec {
  std::string variant = "conv-recurrent";  // or "conv-only"
  int input_channels = 0;
  int window_len = 0;
  int conv_layers = 4;  // conv-only default is 5
  int conv_channels = 64;
  int kernel = 5;
  int recurrent_layers = 2;
  int hidden = 128;
  double dropout = 0.25;  // between recurrent layers only
  int fc1 = 128;
  int fc2 = 64;
  std::string recurrent_reduce = "last";  // or "mean"

  // Paper-default layer counts for a variant; input shape still required.
  static ExtractorSpec defaults_for(const std::string &variant);

  int feature_dim() const;   // hidden (conv-recurrent) or fc2 (conv-only)
  int conv_out_len() const;  // window_len - conv_layers * (kernel - 1)
  void validate() const;
};

nlohmann::json extractor_spec_to_json(const ExtractorSpec &spec);
ExtractorSpec extractor_spec_from_json(const nlohmann::json &j);

// Shared extractor L: window batch -> features [d x B].
class Extractor {
 public:
  Extractor(const ExtractorSpec &spec, std::uint64_t seed);

  // Columns are per-window features.  rng is consumed only when train adds
  // dropout noise; eval mode ignores it.
  Eigen::MatrixXd forward(const Batch &x, bool train = false,
                          Rng *rng = nullptr);
  // dz is [d x B] for the batch of the preceding forward.  Accumulates
  // parameter gradients and returns nothing; call zero_grad() between steps.
  void backward(const Eigen::MatrixXd &dz);

  std::vector<Tensor *> params();
  std::vector<const Tensor *> params() const;
  void zero_grad();
  const ExtractorSpec &spec() const { return spec_; }

 private:
  ExtractorSpec spec_;
  std::vector<std::unique_ptr<Layer>> layers_;
  std::size_t last_batch_ = 0;
};

// Task head S: affine map over the domain's present classes.
struct Head {
  DomainId domain;
  std::vector<int> classes;  // sorted global class ids (label mask)
  Tensor W;                  // [C_k x d]
  Tensor b;                  // [C_k x 1]

  int num_classes() const { return static_cast<int>(classes.size()); }
  // Row in W for a global class id, -1 if this domain lacks the class.
  int local_index(int global_class) const;
  Eigen::MatrixXd logits(const Eigen::MatrixXd &z) const;  // [C_k x B]
  std::vector<Tensor *> params();
};

struct HeadWeightStats {
  double l1 = 0.0;
  double variance = 0.0;  // population variance over weight entries
  std::vector<std::int64_t> histogram;
  std::vector<double> bin_edges;  // histogram.size() + 1 edges
};

// Shared extractor plus one head per source domain.
class IflfModel {
 public:
  IflfModel() = default;

  // domains lists (id, present global class ids) per head, in head order.
  static IflfModel build(
      const ExtractorSpec &spec,
      const std::vector<std::pair<DomainId, std::vector<int>>> &domains,
      const std::vector<std::string> &class_names, std::uint64_t seed);

  // [num_windows x d], one row per window.  Dropout fires only when train
  // is set and rng provided.
  Eigen::MatrixXd extract(const Batch &windows, bool train = false,
                          Rng *rng = nullptr);
  // [num_windows x C_k] probabilities over head k's class mask; rows sum
  // to 1.  Eval mode.
  Eigen::MatrixXd predict(std::size_t k, const Batch &windows);

  // Statistics over head k's weight matrix, bias excluded.  Empty edges
  // select 20 uniform bins spanning the observed range.
  HeadWeightStats head_weight_stats(
      std::size_t k, const std::vector<double> &bin_edges = {}) const;

  void save(const std::filesystem::path &path) const;
  static IflfModel load(const std::filesystem::path &path);

  nlohmann::json to_json() const;
  static IflfModel from_json(const nlohmann::json &j);

  Extractor &extractor() { return *extractor_; }
  const Extractor &extractor() const { return *extractor_; }
  std::vector<Head> &heads() { return heads_; }
  const std::vector<Head> &heads() const { return heads_; }
  const ExtractorSpec &spec() const { return spec_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<std::string> &class_names() const { return class_names_; }

  // Head whose domain matches, or -1.
  int head_for(const DomainId &domain) const;

 private:
  ExtractorSpec spec_;
  std::uint64_t seed_ = 0;
  std::unique_ptr<Extractor> extractor_;
  std::vector<Head> heads_;
  std::vector<std::string> class_names_;
};

}  // namespace iflf

#endif  // IFLF_MODEL_HPP_
