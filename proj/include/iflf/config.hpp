// iflf/config.hpp

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

#ifndef IFLF_CONFIG_HPP_
#define IFLF_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "iflf/adapt.hpp"
#include "iflf/evalharness.hpp"
#include "iflf/metatrain.hpp"
#include "iflf/model.hpp"
#include "iflf/synthetic.hpp"

namespace iflf {

struct PreprocessConfig {
  double resample_hz = 0.0;  // 0 keeps each recording's nominal rate
  double max_gap_s = 0.5;
  double lowpass_hz = 10.0;  // 0 disables filtering
  int filter_order = 4;
  double window_seconds = 2.0;
  double overlap_fraction = 0.8;

  void validate() const;
};

struct SimilarityConfig {
  double threshold = 0.8;
  std::size_t top_k = 0;    // 0 keeps every activity over the threshold
  std::size_t max_len = 512;
  std::size_t band = 0;     // 0 leaves the warping unconstrained

  void validate() const;
};

// The sweep shape of an experiment; the remaining plan fields come from the
// top-level RunConfig sections.
struct EvalConfig {
  std::vector<std::string> targets;  // empty: every domain in turn
  std::vector<std::string> modes = {"TMTL"};
  std::vector<int> shots = {1, 2, 5, 10, 20, 50, 100};
  int repeats = 5;
  bool substitution = false;
  double test_fraction = 0.3;
  bool dump_embeddings = false;
  bool dump_histograms = false;

  void validate() const;
};

// Whole-pipeline configuration.  Sections default to the published
// hyperparameters; a section that does not pin its own seed inherits the
// top-level one.  Unknown keys anywhere are rejected.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string dataset = "synthetic";  // synthetic | pamap2 | uschad | wisdm
  std::string domain_axis = "subject";
  PreprocessConfig preprocess;
  ExtractorSpec extractor;  // zero input shape is filled from data later
  TrainConfig train;
  BaselineConfig baseline;
  AdaptConfig adapt;
  SimilarityConfig similarity;
  EvalConfig eval;
  SyntheticSpec synth;

  void validate() const;
};

nlohmann::json preprocess_config_to_json(const PreprocessConfig &config);
PreprocessConfig preprocess_config_from_json(const nlohmann::json &j);
nlohmann::json similarity_config_to_json(const SimilarityConfig &config);
SimilarityConfig similarity_config_from_json(const nlohmann::json &j);
nlohmann::json eval_config_to_json(const EvalConfig &config);
EvalConfig eval_config_from_json(const nlohmann::json &j);

nlohmann::json run_config_to_json(const RunConfig &config);
RunConfig run_config_from_json(const nlohmann::json &j);
RunConfig load_run_config(const std::filesystem::path &path);

// Assembles the experiment plan from the config sections; targets are
// passed through as given (an empty list is filled from data by the
// caller).
ExperimentPlan plan_from_run_config(const RunConfig &config);

}  // namespace iflf

#endif  // IFLF_CONFIG_HPP_
