// iflf/config.cpp

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

#include "iflf/config.hpp"

#include <set>

#include "iflf/common.hpp"
#include "iflf/json_util.hpp"

namespace iflf {

void PreprocessConfig::validate() const {
  if (resample_hz < 0.0) {
    throw ConfigError("preprocess: resample_hz must be >= 0");
  }
  if (max_gap_s <= 0.0) {
    throw ConfigError("preprocess: max_gap_s must be positive");
  }
  if (lowpass_hz < 0.0) {
    throw ConfigError("preprocess: lowpass_hz must be >= 0");
  }
  if (filter_order < 1) {
    throw ConfigError("preprocess: filter_order must be >= 1");
  }
  if (window_seconds <= 0.0) {
    throw ConfigError("preprocess: window_seconds must be positive");
  }
  if (overlap_fraction < 0.0 || overlap_fraction >= 1.0) {
    throw ConfigError("preprocess: overlap_fraction must lie in [0, 1)");
  }
}

void SimilarityConfig::validate() const {
  if (threshold < 0.0 || threshold > 1.0) {
    throw ConfigError("similarity: threshold must lie in [0, 1]");
  }
  if (max_len < 1) {
    throw ConfigError("similarity: max_len must be >= 1");
  }
}

void EvalConfig::validate() const {
  static const std::set<std::string> known_modes = {"STL", "PTM", "BMTL",
                                                    "TMTL"};
  if (modes.empty()) throw ConfigError("eval: modes must not be empty");
  std::set<std::string> seen_modes;
  for (const auto &mode : modes) {
    if (known_modes.count(mode) == 0) {
      throw ConfigError("eval: unknown mode " + mode);
    }
    if (!seen_modes.insert(mode).second) {
      throw ConfigError("eval: duplicate mode " + mode);
    }
  }
  std::set<std::string> seen_targets;
  for (const auto &target : targets) {
    if (!seen_targets.insert(target).second) {
      throw ConfigError("eval: duplicate target " + target);
    }
  }
  if (shots.empty()) throw ConfigError("eval: shots must not be empty");
  int prev = 0;
  for (const int i : shots) {
    if (i < 1 || i > 100) {
      throw ConfigError("eval: shot counts must lie in [1, 100]");
    }
    if (i <= prev) {
      throw ConfigError("eval: shot counts must increase strictly");
    }
    prev = i;
  }
  if (repeats < 1) throw ConfigError("eval: repeats must be >= 1");
  if (test_fraction <= 0.0 || test_fraction >= 1.0) {
    throw ConfigError("eval: test_fraction must lie in (0, 1)");
  }
}

void RunConfig::validate() const {
  static const std::set<std::string> datasets = {"synthetic", "pamap2",
                                                 "uschad", "wisdm"};
  if (datasets.count(dataset) == 0) {
    throw ConfigError("config: unknown dataset " + dataset);
  }
  if (domain_axis != "subject" && domain_axis != "device" &&
      domain_axis != "subject-device") {
    throw ConfigError("config: unknown domain_axis " + domain_axis);
  }
  preprocess.validate();
  similarity.validate();
  train.validate();
  baseline.validate();
  adapt.validate();
  eval.validate();
  if (extractor.input_channels != 0 || extractor.window_len != 0) {
    extractor.validate();
  } else {
    // Shape comes from data later; check the architecture fields now with
    // a probe shape wide enough for the convolution stack.
    ExtractorSpec probe = extractor;
    probe.input_channels = 6;
    probe.window_len = probe.conv_layers * (probe.kernel - 1) + 8;
    probe.validate();
  }
}

nlohmann::json preprocess_config_to_json(const PreprocessConfig &config) {
  return nlohmann::json{{"resample_hz", config.resample_hz},
                        {"max_gap_s", config.max_gap_s},
                        {"lowpass_hz", config.lowpass_hz},
                        {"filter_order", config.filter_order},
                        {"window_seconds", config.window_seconds},
                        {"overlap_fraction", config.overlap_fraction}};
}

PreprocessConfig preprocess_config_from_json(const nlohmann::json &j) {
  check_known_keys(j,
                   {"resample_hz", "max_gap_s", "lowpass_hz", "filter_order",
                    "window_seconds", "overlap_fraction"},
                   "preprocess config");
  PreprocessConfig c;
  c.resample_hz = j.value("resample_hz", c.resample_hz);
  c.max_gap_s = j.value("max_gap_s", c.max_gap_s);
  c.lowpass_hz = j.value("lowpass_hz", c.lowpass_hz);
  c.filter_order = j.value("filter_order", c.filter_order);
  c.window_seconds = j.value("window_seconds", c.window_seconds);
  c.overlap_fraction = j.value("overlap_fraction", c.overlap_fraction);
  return c;
}

nlohmann::json similarity_config_to_json(const SimilarityConfig &config) {
  return nlohmann::json{{"threshold", config.threshold},
                        {"top_k", config.top_k},
                        {"max_len", config.max_len},
                        {"band", config.band}};
}

SimilarityConfig similarity_config_from_json(const nlohmann::json &j) {
  check_known_keys(j, {"threshold", "top_k", "max_len", "band"},
                   "similarity config");
  SimilarityConfig c;
  c.threshold = j.value("threshold", c.threshold);
  c.top_k = j.value("top_k", c.top_k);
  c.max_len = j.value("max_len", c.max_len);
  c.band = j.value("band", c.band);
  return c;
}

nlohmann::json eval_config_to_json(const EvalConfig &config) {
  return nlohmann::json{{"targets", config.targets},
                        {"modes", config.modes},
                        {"shots", config.shots},
                        {"repeats", config.repeats},
                        {"substitution", config.substitution},
                        {"test_fraction", config.test_fraction},
                        {"dump_embeddings", config.dump_embeddings},
                        {"dump_histograms", config.dump_histograms}};
}

EvalConfig eval_config_from_json(const nlohmann::json &j) {
  check_known_keys(j,
                   {"targets", "modes", "shots", "repeats", "substitution",
                    "test_fraction", "dump_embeddings", "dump_histograms"},
                   "eval config");
  EvalConfig c;
  c.targets = j.value("targets", c.targets);
  c.modes = j.value("modes", c.modes);
  c.shots = j.value("shots", c.shots);
  c.repeats = j.value("repeats", c.repeats);
  c.substitution = j.value("substitution", c.substitution);
  c.test_fraction = j.value("test_fraction", c.test_fraction);
  c.dump_embeddings = j.value("dump_embeddings", c.dump_embeddings);
  c.dump_histograms = j.value("dump_histograms", c.dump_histograms);
  return c;
}

nlohmann::json run_config_to_json(const RunConfig &config) {
  return nlohmann::json{
      {"seed", config.seed},
      {"dataset", config.dataset},
      {"domain_axis", config.domain_axis},
      {"preprocess", preprocess_config_to_json(config.preprocess)},
      {"extractor", extractor_spec_to_json(config.extractor)},
      {"train", train_config_to_json(config.train)},
      {"baseline", baseline_config_to_json(config.baseline)},
      {"adapt", adapt_config_to_json(config.adapt)},
      {"similarity", similarity_config_to_json(config.similarity)},
      {"eval", eval_config_to_json(config.eval)},
      {"synth", synthetic_spec_to_json(config.synth)}};
}

RunConfig run_config_from_json(const nlohmann::json &j) {
  check_known_keys(j,
                   {"seed", "dataset", "domain_axis", "preprocess",
                    "extractor", "train", "baseline", "adapt", "similarity",
                    "eval", "synth"},
                   "run config");
  RunConfig c;
  c.seed = j.value("seed", c.seed);
  c.dataset = j.value("dataset", c.dataset);
  c.domain_axis = j.value("domain_axis", c.domain_axis);
  if (j.contains("preprocess")) {
    c.preprocess = preprocess_config_from_json(j.at("preprocess"));
  }
  if (j.contains("extractor")) {
    c.extractor = extractor_spec_from_json(j.at("extractor"));
  }
  if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
  if (j.contains("baseline")) {
    c.baseline = baseline_config_from_json(j.at("baseline"));
  }
  if (j.contains("adapt")) c.adapt = adapt_config_from_json(j.at("adapt"));
  if (j.contains("similarity")) {
    c.similarity = similarity_config_from_json(j.at("similarity"));
  }
  if (j.contains("eval")) c.eval = eval_config_from_json(j.at("eval"));
  if (j.contains("synth")) c.synth = synthetic_spec_from_json(j.at("synth"));

  // Sections that did not pin a seed follow the top-level one.
  const auto inherits = [&j](const char *section) {
    return !(j.contains(section) && j.at(section).contains("seed"));
  };
  if (inherits("train")) c.train.seed = c.seed;
  if (inherits("baseline")) c.baseline.seed = c.seed;
  if (inherits("adapt")) c.adapt.seed = c.seed;
  return c;
}

RunConfig load_run_config(const std::filesystem::path &path) {
  return run_config_from_json(read_json_file(path));
}

ExperimentPlan plan_from_run_config(const RunConfig &config) {
  ExperimentPlan plan;
  plan.dataset = config.dataset;
  plan.domain_axis = config.domain_axis;
  plan.targets = config.eval.targets;
  plan.modes = config.eval.modes;
  plan.shots = config.eval.shots;
  plan.repeats = config.eval.repeats;
  plan.seed = config.seed;
  plan.substitution = config.eval.substitution;
  plan.test_fraction = config.eval.test_fraction;
  plan.dump_embeddings = config.eval.dump_embeddings;
  plan.dump_histograms = config.eval.dump_histograms;
  plan.extractor = config.extractor;
  plan.train = config.train;
  plan.baseline = config.baseline;
  plan.adapt = config.adapt;
  return plan;
}

}  // namespace iflf
