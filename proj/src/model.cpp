// iflf/model.cpp

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

#include "iflf/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "iflf/json_util.hpp"
#include "iflf/losses.hpp"

namespace iflf {

ExtractorSpec ExtractorSpec::defaults_for(const std::string &variant) {
  ExtractorSpec s;
  s.variant = variant;
  if (variant == "conv-only") s.conv_layers = 5;
  return s;
}

int ExtractorSpec::feature_dim() const {
  return variant == "conv-only" ? fc2 : hidden;
}

int ExtractorSpec::conv_out_len() const {
  return window_len - conv_layers * (kernel - 1);
}

void ExtractorSpec::validate() const {
  if (variant != "conv-recurrent" && variant != "conv-only") {
    throw ConfigError("ExtractorSpec: unknown variant '" + variant + "'");
  }
  if (input_channels < 1) {
    throw ConfigError("ExtractorSpec: input_channels must be >= 1");
  }
  if (window_len < 1) throw ConfigError("ExtractorSpec: window_len must be >= 1");
  if (conv_layers < 1) throw ConfigError("ExtractorSpec: conv_layers must be >= 1");
  if (conv_channels < 1) {
    throw ConfigError("ExtractorSpec: conv_channels must be >= 1");
  }
  if (kernel < 1) throw ConfigError("ExtractorSpec: kernel must be >= 1");
  if (conv_out_len() < 1) {
    throw ConfigError(
        "ExtractorSpec: window too short; conv stack leaves no time steps");
  }
  if (variant == "conv-recurrent") {
    if (recurrent_layers < 1) {
      throw ConfigError("ExtractorSpec: recurrent_layers must be >= 1");
    }
    if (hidden < 1) throw ConfigError("ExtractorSpec: hidden must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0) {
      throw ConfigError("ExtractorSpec: dropout must be in [0, 1)");
    }
    if (recurrent_reduce != "last" && recurrent_reduce != "mean") {
      throw ConfigError("ExtractorSpec: recurrent_reduce must be last|mean");
    }
  } else {
    if (fc1 < 1 || fc2 < 1) {
      throw ConfigError("ExtractorSpec: fc widths must be >= 1");
    }
  }
}

nlohmann::json extractor_spec_to_json(const ExtractorSpec &spec) {
  nlohmann::json j;
  j["variant"] = spec.variant;
  j["input_channels"] = spec.input_channels;
  j["window_len"] = spec.window_len;
  j["conv_layers"] = spec.conv_layers;
  j["conv_channels"] = spec.conv_channels;
  j["kernel"] = spec.kernel;
  j["recurrent_layers"] = spec.recurrent_layers;
  j["hidden"] = spec.hidden;
  j["dropout"] = spec.dropout;
  j["fc1"] = spec.fc1;
  j["fc2"] = spec.fc2;
  j["recurrent_reduce"] = spec.recurrent_reduce;
  return j;
}

ExtractorSpec extractor_spec_from_json(const nlohmann::json &j) {
  check_known_keys(j,
                   {"variant", "input_channels", "window_len", "conv_layers",
                    "conv_channels", "kernel", "recurrent_layers", "hidden",
                    "dropout", "fc1", "fc2", "recurrent_reduce"},
                   "ExtractorSpec");
  ExtractorSpec spec = ExtractorSpec::defaults_for(
      j.value("variant", std::string("conv-recurrent")));
  spec.input_channels = j.value("input_channels", spec.input_channels);
  spec.window_len = j.value("window_len", spec.window_len);
  spec.conv_layers = j.value("conv_layers", spec.conv_layers);
  spec.conv_channels = j.value("conv_channels", spec.conv_channels);
  spec.kernel = j.value("kernel", spec.kernel);
  spec.recurrent_layers = j.value("recurrent_layers", spec.recurrent_layers);
  spec.hidden = j.value("hidden", spec.hidden);
  spec.dropout = j.value("dropout", spec.dropout);
  spec.fc1 = j.value("fc1", spec.fc1);
  spec.fc2 = j.value("fc2", spec.fc2);
  spec.recurrent_reduce = j.value("recurrent_reduce", spec.recurrent_reduce);
  spec.validate();
  return spec;
}

Extractor::Extractor(const ExtractorSpec &spec, std::uint64_t seed)
    : spec_(spec) {
  spec_.validate();
  Rng rng(seed);
  int ch = spec_.input_channels;
  for (int i = 0; i < spec_.conv_layers; ++i) {
    layers_.push_back(std::make_unique<Conv1d>(ch, spec_.conv_channels,
                                               spec_.kernel, &rng,
                                               "conv" + std::to_string(i)));
    layers_.push_back(std::make_unique<ReLU>());
    ch = spec_.conv_channels;
  }
  if (spec_.variant == "conv-recurrent") {
    layers_.push_back(std::make_unique<Lstm>(ch, spec_.hidden, &rng, "lstm0"));
    for (int r = 1; r < spec_.recurrent_layers; ++r) {
      if (spec_.dropout > 0.0) {
        layers_.push_back(std::make_unique<Dropout>(spec_.dropout));
      }
      layers_.push_back(std::make_unique<Lstm>(spec_.hidden, spec_.hidden, &rng,
                                               "lstm" + std::to_string(r)));
    }
    layers_.push_back(
        std::make_unique<Reduce>(spec_.recurrent_reduce == "mean"));
  } else {
    layers_.push_back(std::make_unique<Flatten>());
    layers_.push_back(std::make_unique<Dense>(ch * spec_.conv_out_len(),
                                              spec_.fc1, &rng, "fc1"));
    layers_.push_back(std::make_unique<ReLU>());
    layers_.push_back(
        std::make_unique<Dense>(spec_.fc1, spec_.fc2, &rng, "fc2"));
  }
}

Eigen::MatrixXd Extractor::forward(const Batch &x, bool train, Rng *rng) {
  if (x.empty()) throw DataError("Extractor: empty batch");
  for (const Eigen::MatrixXd &w : x) {
    if (w.rows() != spec_.input_channels || w.cols() != spec_.window_len) {
      throw DataError("Extractor: window shape mismatch");
    }
  }
  Batch cur = x;
  for (auto &layer : layers_) cur = layer->forward(cur, train, rng);
  last_batch_ = cur.size();
  Eigen::MatrixXd z(spec_.feature_dim(), static_cast<Eigen::Index>(cur.size()));
  for (std::size_t i = 0; i < cur.size(); ++i) {
    z.col(static_cast<Eigen::Index>(i)) = cur[i];
  }
  return z;
}

void Extractor::backward(const Eigen::MatrixXd &dz) {
  if (static_cast<std::size_t>(dz.cols()) != last_batch_) {
    throw DataError("Extractor: backward batch mismatch");
  }
  Batch dy(last_batch_);
  for (std::size_t i = 0; i < last_batch_; ++i) {
    dy[i] = dz.col(static_cast<Eigen::Index>(i));
  }
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    dy = (*it)->backward(dy);
  }
}

std::vector<Tensor *> Extractor::params() {
  std::vector<Tensor *> out;
  for (auto &layer : layers_) {
    for (Tensor *t : layer->params()) out.push_back(t);
  }
  return out;
}

std::vector<const Tensor *> Extractor::params() const {
  std::vector<const Tensor *> out;
  for (Tensor *t : const_cast<Extractor *>(this)->params()) out.push_back(t);
  return out;
}

void Extractor::zero_grad() {
  for (Tensor *t : params()) t->zero_grad();
}

int Head::local_index(int global_class) const {
  const auto it = std::lower_bound(classes.begin(), classes.end(), global_class);
  if (it == classes.end() || *it != global_class) return -1;
  return static_cast<int>(it - classes.begin());
}

Eigen::MatrixXd Head::logits(const Eigen::MatrixXd &z) const {
  return (W.value * z).colwise() + Eigen::VectorXd(b.value.col(0));
}

std::vector<Tensor *> Head::params() { return {&W, &b}; }

IflfModel IflfModel::build(
    const ExtractorSpec &spec,
    const std::vector<std::pair<DomainId, std::vector<int>>> &domains,
    const std::vector<std::string> &class_names, std::uint64_t seed) {
  spec.validate();
  if (domains.empty()) throw ConfigError("IflfModel: no source domains");
  IflfModel model;
  model.spec_ = spec;
  model.seed_ = seed;
  model.class_names_ = class_names;
  model.extractor_ =
      std::make_unique<Extractor>(spec, derive_seed(seed, {0x657874ULL}));
  const int d = spec.feature_dim();
  for (std::size_t k = 0; k < domains.size(); ++k) {
    const auto &[id, classes] = domains[k];
    if (!id.valid()) throw ConfigError("IflfModel: invalid domain id");
    if (classes.empty()) {
      throw ConfigError("IflfModel: head " + id.key() + " has no classes");
    }
    for (std::size_t i = 0; i < classes.size(); ++i) {
      if (classes[i] < 0 ||
          classes[i] >= static_cast<int>(class_names.size())) {
        throw ConfigError("IflfModel: class id out of range for " + id.key());
      }
      if (i > 0 && classes[i] <= classes[i - 1]) {
        throw ConfigError("IflfModel: classes must be sorted unique for " +
                          id.key());
      }
    }
    Head head;
    head.domain = id;
    head.classes = classes;
    head.W = Tensor("head" + std::to_string(k) + ".W",
                    static_cast<Eigen::Index>(classes.size()), d);
    head.b = Tensor("head" + std::to_string(k) + ".b",
                    static_cast<Eigen::Index>(classes.size()), 1);
    Rng hrng(derive_seed(seed, {0x686561ULL, static_cast<std::uint64_t>(k)}));
    glorot_init(&head.W, &hrng);
    model.heads_.push_back(std::move(head));
  }
  return model;
}

Eigen::MatrixXd IflfModel::extract(const Batch &windows, bool train,
                                   Rng *rng) {
  return extractor_->forward(windows, train, rng).transpose();
}

Eigen::MatrixXd IflfModel::predict(std::size_t k, const Batch &windows) {
  if (k >= heads_.size()) throw ConfigError("IflfModel: invalid head index");
  const Eigen::MatrixXd z = extractor_->forward(windows, false, nullptr);
  return softmax_cols(heads_[k].logits(z)).transpose();
}

HeadWeightStats IflfModel::head_weight_stats(
    std::size_t k, const std::vector<double> &bin_edges) const {
  if (k >= heads_.size()) throw ConfigError("IflfModel: invalid head index");
  const Eigen::MatrixXd &w = heads_[k].W.value;
  HeadWeightStats stats;
  stats.l1 = w.array().abs().sum();
  const double mean = w.mean();
  stats.variance =
      (w.array() - mean).square().sum() / static_cast<double>(w.size());
  std::vector<double> edges = bin_edges;
  if (edges.empty()) {
    double lo = w.minCoeff();
    double hi = w.maxCoeff();
    if (lo == hi) {
      lo -= 0.5;
      hi += 0.5;
    }
    const int bins = 20;
    for (int i = 0; i <= bins; ++i) {
      edges.push_back(lo + (hi - lo) * static_cast<double>(i) / bins);
    }
  }
  if (edges.size() < 2) {
    throw ConfigError("head_weight_stats: need at least 2 bin edges");
  }
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1])) {
      throw ConfigError("head_weight_stats: bin edges must increase");
    }
  }
  stats.bin_edges = edges;
  stats.histogram.assign(edges.size() - 1, 0);
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double v = w.data()[i];
    if (v < edges.front() || v > edges.back()) continue;
    // Last bin is closed on the right.
    auto it = std::upper_bound(edges.begin(), edges.end(), v);
    std::size_t bin = static_cast<std::size_t>(it - edges.begin());
    bin = bin == 0 ? 0 : bin - 1;
    if (bin >= stats.histogram.size()) bin = stats.histogram.size() - 1;
    stats.histogram[bin] += 1;
  }
  return stats;
}

nlohmann::json IflfModel::to_json() const {
  nlohmann::json j;
  j["format"] = "iflf-model";
  j["version"] = 1;
  j["spec"] = extractor_spec_to_json(spec_);
  j["seed"] = seed_;
  j["class_names"] = class_names_;
  nlohmann::json params = nlohmann::json::array();
  for (const Tensor *t : extractor_->params()) {
    nlohmann::json p;
    p["name"] = t->name;
    p["matrix"] = json_from_matrix(t->value);
    params.push_back(std::move(p));
  }
  j["extractor"] = std::move(params);
  nlohmann::json heads = nlohmann::json::array();
  for (const Head &h : heads_) {
    nlohmann::json hj;
    hj["subject_id"] = h.domain.subject_id;
    hj["device_id"] = h.domain.device_id;
    hj["classes"] = h.classes;
    hj["W"] = json_from_matrix(h.W.value);
    hj["b"] = json_from_matrix(h.b.value);
    heads.push_back(std::move(hj));
  }
  j["heads"] = std::move(heads);
  return j;
}

IflfModel IflfModel::from_json(const nlohmann::json &j) {
  check_known_keys(j,
                   {"format", "version", "spec", "seed", "class_names",
                    "extractor", "heads"},
                   "model checkpoint");
  if (j.value("format", std::string()) != "iflf-model") {
    throw DataError("model checkpoint: bad format tag");
  }
  if (!j.contains("version")) {
    throw DataError("model checkpoint: missing version");
  }
  if (j.at("version").get<int>() != 1) {
    throw DataError("model checkpoint: unsupported version");
  }
  const ExtractorSpec spec = extractor_spec_from_json(j.at("spec"));
  const auto seed = j.at("seed").get<std::uint64_t>();
  const auto class_names = j.at("class_names").get<std::vector<std::string>>();
  std::vector<std::pair<DomainId, std::vector<int>>> domains;
  for (const auto &hj : j.at("heads")) {
    check_known_keys(hj, {"subject_id", "device_id", "classes", "W", "b"},
                     "model head");
    DomainId id;
    id.subject_id = hj.value("subject_id", std::string());
    id.device_id = hj.value("device_id", std::string());
    domains.emplace_back(id, hj.at("classes").get<std::vector<int>>());
  }
  IflfModel model = build(spec, domains, class_names, seed);
  const auto &pj = j.at("extractor");
  std::vector<Tensor *> params = model.extractor_->params();
  if (pj.size() != params.size()) {
    throw DataError("model checkpoint: extractor parameter count mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    check_known_keys(pj[i], {"name", "matrix"}, "extractor parameter");
    if (pj[i].value("name", std::string()) != params[i]->name) {
      throw DataError("model checkpoint: parameter order mismatch at " +
                      params[i]->name);
    }
    Eigen::MatrixXd m = matrix_from_json(pj[i].at("matrix"), params[i]->name);
    if (m.rows() != params[i]->value.rows() ||
        m.cols() != params[i]->value.cols()) {
      throw DataError("model checkpoint: shape mismatch at " +
                      params[i]->name);
    }
    params[i]->value = std::move(m);
  }
  for (std::size_t k = 0; k < model.heads_.size(); ++k) {
    const auto &hj = j.at("heads")[k];
    Head &h = model.heads_[k];
    Eigen::MatrixXd w = matrix_from_json(hj.at("W"), h.W.name);
    Eigen::MatrixXd b = matrix_from_json(hj.at("b"), h.b.name);
    if (w.rows() != h.W.value.rows() || w.cols() != h.W.value.cols() ||
        b.rows() != h.b.value.rows() || b.cols() != 1) {
      throw DataError("model checkpoint: head shape mismatch");
    }
    h.W.value = std::move(w);
    h.b.value = std::move(b);
  }
  return model;
}

void IflfModel::save(const std::filesystem::path &path) const {
  write_json_file(path, to_json());
}

IflfModel IflfModel::load(const std::filesystem::path &path) {
  return from_json(read_json_file(path));
}

int IflfModel::head_for(const DomainId &domain) const {
  for (std::size_t k = 0; k < heads_.size(); ++k) {
    if (heads_[k].domain == domain) return static_cast<int>(k);
  }
  return -1;
}

}  // namespace iflf
