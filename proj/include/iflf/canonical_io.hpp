// iflf/canonical_io.hpp

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

#ifndef IFLF_CANONICAL_IO_HPP_
#define IFLF_CANONICAL_IO_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "iflf/recording.hpp"

namespace iflf {

// Canonical on-disk format: one CSV per recording (timestamp_s, channel
// columns, label name last; UTF-8, '.' decimal separator) plus a sidecar
// JSON (<stem>.json) with domain, rate, channel names, vocabulary,
// trial boundaries and provenance. Doubles are printed with 17 significant
// digits so a round-trip reproduces them exactly.

// Writes <dir>/<stem>.csv and <dir>/<stem>.json. Returns the CSV path.
std::filesystem::path write_canonical(const Recording &rec,
                                      const std::filesystem::path &dir,
                                      const std::string &stem);

// Writes each recording under its domain key (appending __partN when a
// domain produces several recordings).
std::vector<std::filesystem::path> write_canonical_all(
    const std::vector<Recording> &recs, const std::filesystem::path &dir);

Recording read_canonical(const std::filesystem::path &csv_path);

// Loads every *.csv with a sidecar in the directory, sorted by filename.
std::vector<Recording> read_canonical_dir(const std::filesystem::path &dir);

}  // namespace iflf

#endif  // IFLF_CANONICAL_IO_HPP_
