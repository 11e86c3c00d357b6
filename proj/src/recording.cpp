// iflf/recording.cpp

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

#include "iflf/recording.hpp"

#include <algorithm>
#include <set>

namespace iflf {

namespace {
std::string sanitize(const std::string &s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '-' || c == '_' || c == '.';
    out.push_back(ok ? c : '_');
  }
  return out;
}
}  // namespace

std::string DomainId::key() const {
  return sanitize(subject_id) + "__" + sanitize(device_id);
}

LabelMap::LabelMap(std::vector<std::string> names) : names_(std::move(names)) {
  for (int i = 0; i < static_cast<int>(names_.size()); ++i) {
    auto [it, inserted] = ids_.emplace(names_[i], i);
    if (!inserted)
      throw DataError("LabelMap: duplicate class name '" + names_[i] + "'");
  }
}

int LabelMap::id_of(const std::string &name) const {
  auto it = ids_.find(name);
  return it == ids_.end() ? kUnlabeled : it->second;
}

const std::string &LabelMap::name_of(int id) const {
  static const std::string kUnlabeledName = "unlabeled";
  if (id < 0 || id >= static_cast<int>(names_.size())) return kUnlabeledName;
  return names_[static_cast<std::size_t>(id)];
}

int LabelMap::intern(const std::string &name) {
  auto it = ids_.find(name);
  if (it != ids_.end()) return it->second;
  names_.push_back(name);
  ids_.emplace(name, static_cast<int>(names_.size()) - 1);
  return static_cast<int>(names_.size()) - 1;
}

std::vector<std::pair<std::size_t, std::size_t>> Recording::segments() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  const auto n = static_cast<std::size_t>(num_samples());
  for (std::size_t i = 0; i < trial_starts.size(); ++i) {
    const std::size_t start = trial_starts[i];
    const std::size_t end =
        (i + 1 < trial_starts.size()) ? trial_starts[i + 1] : n;
    out.emplace_back(start, end);
  }
  return out;
}

void validate(const Recording &rec) {
  const auto n = static_cast<std::size_t>(rec.num_samples());
  if (!rec.domain.valid())
    throw DataError("Recording: domain id has empty subject and device");
  if (rec.labels.size() != n)
    throw DataError("Recording: labels length " +
                    std::to_string(rec.labels.size()) +
                    " != sample count " + std::to_string(n));
  if (rec.timestamps.size() != n)
    throw DataError("Recording: timestamps length " +
                    std::to_string(rec.timestamps.size()) +
                    " != sample count " + std::to_string(n));
  if (rec.channel_names.size() != static_cast<std::size_t>(rec.num_channels()))
    throw DataError("Recording: channel_names length " +
                    std::to_string(rec.channel_names.size()) +
                    " != channel count " + std::to_string(rec.num_channels()));
  for (std::size_t i = 1; i < n; ++i) {
    if (!(rec.timestamps[i] > rec.timestamps[i - 1]))
      throw DataError("Recording: timestamps not strictly increasing at index " +
                      std::to_string(i));
  }
  if (rec.sampling_rate_hz <= 0.0)
    throw DataError("Recording: sampling_rate_hz must be positive");
  if (rec.trial_starts.empty() || rec.trial_starts.front() != 0)
    throw DataError("Recording: trial_starts must begin with 0");
  for (std::size_t i = 1; i < rec.trial_starts.size(); ++i) {
    if (rec.trial_starts[i] <= rec.trial_starts[i - 1] ||
        rec.trial_starts[i] >= n)
      throw DataError("Recording: trial_starts not strictly increasing within range");
  }
  for (int lbl : rec.labels) {
    if (lbl != LabelMap::kUnlabeled &&
        (lbl < 0 || lbl >= static_cast<int>(rec.class_names.size())))
      throw DataError("Recording: label id " + std::to_string(lbl) +
                      " outside class vocabulary");
  }
}

std::vector<int> present_classes(const Recording &rec) {
  std::set<int> s;
  for (int lbl : rec.labels)
    if (lbl != LabelMap::kUnlabeled) s.insert(lbl);
  return {s.begin(), s.end()};
}

}  // namespace iflf
