// iflf/evalharness.hpp

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

#ifndef IFLF_EVALHARNESS_HPP_
#define IFLF_EVALHARNESS_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "iflf/adapt.hpp"
#include "iflf/metatrain.hpp"
#include "iflf/model.hpp"
#include "iflf/sigproc.hpp"
#include "iflf/similarity.hpp"

namespace iflf {

// Leave-one-domain-out sweep: for each target and model mode, meta-train or
// pool-train on the remaining domains, then adapt and score over a shot
// grid with repeated draws.
struct ExperimentPlan {
  std::string dataset = "synthetic";
  std::string domain_axis = "subject";  // subject | device | subject-device
  std::vector<std::string> targets;     // domain keys
  std::vector<std::string> modes = {"TMTL"};  // of STL/PTM/BMTL/TMTL
  std::vector<int> shots = {1, 2, 5, 10, 20, 50, 100};
  int repeats = 5;
  std::uint64_t seed = 0;
  bool substitution = false;
  double test_fraction = 0.3;
  bool dump_embeddings = false;
  bool dump_histograms = false;
  ExtractorSpec extractor;
  TrainConfig train;        // BMTL/TMTL cells; mode is set per cell
  BaselineConfig baseline;  // STL/PTM cells; kind is set per cell
  AdaptConfig adapt;        // shot count is set per cell

  // Structural checks only; domain coverage is checked against data in
  // run_plan.
  void validate() const;
};

nlohmann::json plan_to_json(const ExperimentPlan &plan);
ExperimentPlan plan_from_json(const nlohmann::json &j);
// Stable content hash of the canonical plan JSON, names the run directory.
std::string plan_hash(const ExperimentPlan &plan);

// Masked classification metrics.  Windows whose truth lies outside the mask
// are dropped; predictions for kept windows must lie inside the mask.
struct Metrics {
  double accuracy = 0.0;
  std::vector<int> classes;      // the mask, ascending
  std::map<int, double> recall;  // tp / (tp + fn) per class
  // Counts, rows = truth, cols = prediction, both ordered as `classes`.
  Eigen::MatrixXd confusion;
};

Metrics compute_metrics(const std::vector<int> &predictions,
                        const std::vector<int> &truths,
                        const std::vector<int> &class_mask);

// Mean silhouette over samples (Euclidean): s = (b - a) / max(a, b) with a
// the mean intra-class distance and b the best other-class mean distance.
// Samples in singleton classes score 0.  Requires >= 2 classes.
double silhouette_score(const Eigen::MatrixXd &features,
                        const std::vector<int> &labels);

// One row per window: d feature values, the label id, the domain key,
// tab-separated, no header.
void export_embeddings(IflfModel *model, const WindowSet &ws,
                       const std::filesystem::path &path);

// CSV: head,subject_id,device_id,bin_lo,bin_hi,count,fraction over the
// default head_weight_stats bins.
void export_head_histograms(const IflfModel &model,
                            const std::filesystem::path &path);

// Eq. 4 inputs rebuilt from windowed data: per activity and domain, the
// per-sensor magnitude signals of that activity's windows concatenated in
// index order, truncated to max_len samples.  Sensors are channel-name
// prefixes before the last '.'.
SimilarityReport similarity_from_windowsets(
    const std::vector<WindowSet> &sources, double threshold,
    std::size_t top_k, std::size_t max_len = 512, std::size_t band = 0);

struct CellResult {
  std::string mode;
  std::string target;
  int shots = 0;
  int repeat = 0;
  std::string status = "ok";  // or "failed"
  std::string error;
  double accuracy = 0.0;
  std::vector<int> classes;
  std::map<int, double> recall;
  Eigen::MatrixXd confusion;
  double seconds = 0.0;
};

struct CellSummary {
  std::string mode;
  std::string target;
  int shots = 0;
  int completed = 0;  // repeats that succeeded
  double mean_accuracy = 0.0;
  double stderr_accuracy = 0.0;  // sample std / sqrt(completed)
};

struct EvalReport {
  nlohmann::json plan;
  std::string hash;
  std::vector<CellResult> cells;
  std::vector<CellSummary> summary;
  bool complete = true;  // no failed cells
};

nlohmann::json cell_to_json(const CellResult &cell);
CellResult cell_from_json(const nlohmann::json &j);

// Pure re-aggregation of raw cells into per-(mode, target, shots) summaries,
// ordered by mode, target, shots.  Failed cells are excluded from the mean
// and mark the report incomplete.
std::vector<CellSummary> summarize_cells(const std::vector<CellResult> &cells);

// Executes the plan sequentially under out_root/run-<hash>/.  Every finished
// cell is appended to ledger.jsonl before the next starts; a rerun skips
// cells already recorded as ok and retries failed ones.  Trained models are
// checkpointed per (mode, target) and reloaded on resume.  Cell failures are
// recorded, not fatal.
EvalReport run_plan(const ExperimentPlan &plan,
                    const std::vector<WindowSet> &sets,
                    const std::filesystem::path &out_root);

nlohmann::json report_to_json(const EvalReport &report);
// report.json, curves.csv and per-(mode,target,shots) confusion CSVs.
void write_eval_report(const EvalReport &report,
                       const std::filesystem::path &dir);

}  // namespace iflf

#endif  // IFLF_EVALHARNESS_HPP_
