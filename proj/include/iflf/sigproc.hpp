// iflf/sigproc.hpp

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

#ifndef IFLF_SIGPROC_HPP_
#define IFLF_SIGPROC_HPP_

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "iflf/recording.hpp"

namespace iflf {

// Per-channel z-score statistics.  stddev entries are clamped to kStdFloor
// when computed from data so constant channels stay finite.
struct NormStats {
  static constexpr double kStdFloor = 1e-8;
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;
  bool empty() const { return mean.size() == 0; }
};

struct FilterSpec {
  double cutoff_hz = 10.0;
  int order = 4;
  bool zero_phase = true;
};

struct WindowSet {
  std::vector<Eigen::MatrixXd> windows;  // each [num_channels x window_len]
  std::vector<int> labels;
  DomainId domain;
  double window_seconds = 2.0;
  double overlap_fraction = 0.8;
  double sampling_rate_hz = 0.0;
  std::vector<std::string> channel_names;
  std::vector<std::string> class_names;
  NormStats stats;  // full-stream stats of the originating domain
  bool normalized = false;

  std::size_t num_windows() const { return windows.size(); }
  Eigen::Index num_channels() const {
    return windows.empty() ? 0 : windows.front().rows();
  }
  Eigen::Index window_len() const {
    return windows.empty() ? 0 : windows.front().cols();
  }
};

void validate(const WindowSet &ws);

// Resamples onto an exactly uniform grid at target_rate_hz by linear
// interpolation; labels come from the nearest original sample.  Gaps longer
// than max_gap_s split the recording (never interpolated across); trial
// boundaries are re-timed onto the output grid but stay inside one Recording
// as trial_starts entries.  Pieces with fewer than 2 samples are dropped with
// a warning.
std::vector<Recording> interpolate_uniform(const Recording &rec,
                                           double target_rate_hz,
                                           double max_gap_s = 0.5);

// Butterworth low-pass design via bilinear transform; DC gain exactly 1.
void butter_lowpass(int order, double cutoff_hz, double fs,
                    std::vector<double> *b, std::vector<double> *a);

// Direct-form II transposed filter.  zi, when given, holds the initial
// conditions (length max(|a|,|b|)-1) and receives the final conditions.
std::vector<double> lfilter(const std::vector<double> &b,
                            const std::vector<double> &a,
                            const std::vector<double> &x,
                            std::vector<double> *zi = nullptr);

// Initial conditions for step-response steady state (Gustafsson/odd-padding
// zero-phase scheme).
std::vector<double> lfilter_zi(const std::vector<double> &b,
                               const std::vector<double> &a);

// Forward-backward filtering with odd reflection padding of length
// min(3*(order+1), n-1).
std::vector<double> filtfilt(const std::vector<double> &b,
                             const std::vector<double> &a,
                             const std::vector<double> &x);

// Filters each channel of each trial segment independently.  Requires
// uniform sampling and cutoff below Nyquist.
Recording lowpass(const Recording &rec, const FilterSpec &spec);

NormStats compute_stats(const Recording &rec);
Recording apply_stats(const Recording &rec, const NormStats &stats);
WindowSet apply_stats(const WindowSet &ws, const NormStats &stats);

// Computes stats from rec when none are given, otherwise applies the given
// ones; either way the returned stats are the ones applied.
std::pair<Recording, NormStats> normalize(
    const Recording &rec, const std::optional<NormStats> &stats = {});

// One sqrt(x^2+y^2+z^2) channel per triaxial sensor group ("acc.x" etc. ->
// "acc.mag").  Groups are taken from channel-name prefixes in order of first
// appearance and must have exactly three axes.
Recording magnitude_channels(const Recording &rec);

// Applies one orthonormal 3x3 per sensor group (a single matrix broadcasts
// to all groups).  Per-sample sensor magnitudes are preserved.
Recording rotate_axes(const Recording &rec,
                      const std::vector<Eigen::Matrix3d> &rotations);

// Sliding windows per contiguous trial segment; stride = round(window_len *
// (1 - overlap)).  Window label is the majority sample label; windows whose
// majority share is below 0.5 or whose majority is unlabeled are dropped.
WindowSet make_windows(const Recording &rec, double window_seconds = 2.0,
                       double overlap_fraction = 0.8);

// Merges windows from several same-domain recordings (e.g. gap splits).
WindowSet make_windows(const std::vector<Recording> &recs,
                       double window_seconds = 2.0,
                       double overlap_fraction = 0.8);

// stem.json (shape, stats, labels, provenance) + stem.bin (raw doubles,
// window-major then channel-major).  Returns the JSON path.
std::filesystem::path save_windowset(const WindowSet &ws,
                                     const std::filesystem::path &dir,
                                     const std::string &stem);
WindowSet load_windowset(const std::filesystem::path &json_path);
std::vector<WindowSet> load_windowset_dir(const std::filesystem::path &dir);

}  // namespace iflf

#endif  // IFLF_SIGPROC_HPP_
