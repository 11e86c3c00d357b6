// iflf/datasets.hpp

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

#ifndef IFLF_DATASETS_HPP_
#define IFLF_DATASETS_HPP_

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "iflf/recording.hpp"

namespace iflf {

// Anomaly counters collected while loading a dataset root.
struct IngestStats {
  std::size_t files_read = 0;
  std::size_t nan_rows = 0;         // rows dropped for non-finite channels
  std::size_t unknown_codes = 0;    // rows with codes outside the vocabulary
  std::size_t malformed_lines = 0;  // unparseable text lines
  std::size_t trials_skipped = 0;   // unreadable trial files
  std::size_t segments_skipped = 0; // activity runs without a sensor match
};

// Fixed activity vocabularies: retained raw code and canonical name, in
// class-id order.  Codes outside the published vocabulary count as unknown;
// published codes outside this table are silently dropped.
const std::vector<std::pair<int, std::string>> &pamap2_activities();
const std::vector<std::pair<int, std::string>> &uschad_activities();
const std::vector<std::pair<std::string, std::string>> &wisdm_activities();

// One recording per subject from the protocol files: ankle accelerometer
// (wide range) and gyroscope at 100 Hz, the eight locomotion classes only.
// Rows with a non-finite kept channel are dropped; runs of kept rows are
// separated as trials wherever rows were discarded in between or the
// activity changes.
std::vector<Recording> load_pamap2(const std::filesystem::path &root,
                                   IngestStats *stats = nullptr);

// One recording per SubjectN directory: hip accelerometer and gyroscope at
// 100 Hz, activities 1..10, the five trials per activity concatenated in
// order with trial boundaries kept.  Unreadable trial files are skipped
// with a warning.  Units are converted to m/s^2 and rad/s.
std::vector<Recording> load_uschad(const std::filesystem::path &root,
                                   IngestStats *stats = nullptr);

// One recording per subject from the phone files: pocket accelerometer with
// the gyroscope interpolated onto the accelerometer timestamps per activity
// run, 20 Hz, the seven locomotion codes only.  Runs without a matching
// gyroscope segment are skipped.
std::vector<Recording> load_wisdm(const std::filesystem::path &root,
                                  IngestStats *stats = nullptr);

}  // namespace iflf

#endif  // IFLF_DATASETS_HPP_
