// iflf/similarity.hpp

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

#ifndef IFLF_SIMILARITY_HPP_
#define IFLF_SIMILARITY_HPP_

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace iflf {

struct WarpedPair {
  std::vector<double> p_i;  // x expanded along the path
  std::vector<double> p_j;  // y expanded along the path
  std::vector<std::pair<std::size_t, std::size_t>> path;
  double dtw_cost = 0.0;
};

// Dynamic programming over |x_a - y_b| local cost with steps
// {(1,0),(0,1),(1,1)}.  Backtracking prefers the diagonal so equal inputs
// yield the diagonal path and cost exactly 0.  Optional Sakoe-Chiba band
// (band = max |a-b| allowed; 0 disables).
WarpedPair dtw_align(const std::vector<double> &x,
                     const std::vector<double> &y, std::size_t band = 0);

// Pearson correlation of the warped sequences, clamped to [-1,1].  Returns
// nullopt when either warped sequence is (numerically) constant.
std::optional<double> warped_correlation(const WarpedPair &pair);

struct ActivityScore {
  // keyed by (domain_key_i, domain_key_j), i < j lexicographically
  std::map<std::pair<std::string, std::string>, double> pair_scores;
  std::size_t undefined_pairs = 0;  // zero-variance pairs, excluded above
  std::size_t domains_present = 0;
  double mean = 0.0;
  double stddev = 0.0;
  bool sufficient = false;  // >= 2 domains and >= 1 defined pair
};

struct SimilarityReport {
  std::map<std::string, ActivityScore> activities;  // keyed by class name
  double threshold = 0.8;
  std::size_t top_k = 0;  // 0 = uncapped
  std::vector<std::string> substitutable;
};

// One score set for activity c.  sequences: per domain key, one magnitude
// sequence per sensor (all domains must agree on sensor count).  Scores are
// the mean over sensors of the per-sensor warped correlations; pairs where
// every sensor correlation is undefined are counted and excluded.
ActivityScore activity_similarity(
    const std::map<std::string, std::vector<std::vector<double>>> &sequences,
    std::size_t band = 0);

// Mean >= threshold filter, then optional top-k cap by descending mean
// (ties broken by class name for determinism).
std::vector<std::string> select_substitutable(const SimilarityReport &report,
                                              double threshold,
                                              std::size_t top_k = 0);

nlohmann::json similarity_report_to_json(const SimilarityReport &report);
SimilarityReport similarity_report_from_json(const nlohmann::json &j);

// report.json plus one CSV score matrix per activity (domains x domains).
void write_similarity_report(const SimilarityReport &report,
                             const std::filesystem::path &dir);
SimilarityReport read_similarity_report(const std::filesystem::path &dir);

}  // namespace iflf

#endif  // IFLF_SIMILARITY_HPP_
