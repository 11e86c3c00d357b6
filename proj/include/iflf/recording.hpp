// iflf/recording.hpp

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

#ifndef IFLF_RECORDING_HPP_
#define IFLF_RECORDING_HPP_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "iflf/common.hpp"

namespace iflf {

// A domain is one source of variation: a subject, a device, or both.
// The composite (subject_id, device_id) is the key; at least one part
// must be non-empty.
struct DomainId {
  std::string subject_id;
  std::string device_id;

  bool operator==(const DomainId &o) const {
    return subject_id == o.subject_id && device_id == o.device_id;
  }
  bool operator<(const DomainId &o) const {
    if (subject_id != o.subject_id) return subject_id < o.subject_id;
    return device_id < o.device_id;
  }

  bool valid() const { return !subject_id.empty() || !device_id.empty(); }

  // Filesystem-safe identifier, e.g. "subject101__" or "p3__mmr".
  std::string key() const;
};

// Dense class-name <-> id table shared by all domains of a dataset.
class LabelMap {
 public:
  static constexpr int kUnlabeled = -1;

  LabelMap() = default;
  explicit LabelMap(std::vector<std::string> names);

  int id_of(const std::string &name) const;        // -1 if unknown
  const std::string &name_of(int id) const;        // "unlabeled" for -1
  int num_classes() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string> &names() const { return names_; }

  // Adds a name if absent, returns its id.
  int intern(const std::string &name);

 private:
  std::vector<std::string> names_;
  std::map<std::string, int> ids_;
};

// One continuous multi-channel capture with per-sample labels.
// trial_starts marks segment boundaries (USCHAD trials, WISDM activity
// runs); windowing never crosses them. Always contains 0.
struct Recording {
  Eigen::MatrixXd samples;              // [num_samples x num_channels]
  std::vector<double> timestamps;       // seconds, strictly increasing
  std::vector<int> labels;              // class id or LabelMap::kUnlabeled
  std::vector<std::string> channel_names;  // "sensor.axis"
  double sampling_rate_hz = 0.0;        // nominal
  DomainId domain;
  std::vector<std::size_t> trial_starts{0};
  std::string dataset;                  // provenance tag
  std::vector<std::string> class_names; // dense label vocabulary

  Eigen::Index num_samples() const { return samples.rows(); }
  Eigen::Index num_channels() const { return samples.cols(); }

  LabelMap label_map() const { return LabelMap(class_names); }

  // Segment boundaries as [start, end) index pairs.
  std::vector<std::pair<std::size_t, std::size_t>> segments() const;
};

// Shared validator: throws DataError naming the violated invariant.
// Every adapter output and every sigproc result must pass.
void validate(const Recording &rec);

// Distinct non-unlabeled class ids occurring in the recording, ascending.
std::vector<int> present_classes(const Recording &rec);

}  // namespace iflf

#endif  // IFLF_RECORDING_HPP_
