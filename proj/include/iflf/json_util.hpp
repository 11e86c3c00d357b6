// iflf/json_util.hpp

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

#ifndef IFLF_JSON_UTIL_HPP_
#define IFLF_JSON_UTIL_HPP_

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "iflf/common.hpp"

namespace iflf {

// Rejects keys outside the documented schema so typos fail loudly.
inline void check_known_keys(const nlohmann::json &j,
                             std::initializer_list<const char *> allowed,
                             const std::string &context) {
  if (!j.is_object()) return;
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char *k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok)
      throw ConfigError("unknown key '" + it.key() + "' in " + context);
  }
}

inline nlohmann::json read_json_file(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error &e) {
    throw DataError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

inline void write_json_file(const std::filesystem::path &path,
                            const nlohmann::json &j) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  out << j.dump(2) << "\n";
  if (!out) throw DataError("write failed for " + path.string());
}

// Matrices serialize as {rows, cols, data} with column-major flat data.
// JSON doubles round-trip exactly (shortest-decimal emission).
inline nlohmann::json json_from_matrix(const Eigen::MatrixXd &m) {
  nlohmann::json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> flat(m.data(), m.data() + m.size());
  j["data"] = flat;
  return j;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json &j,
                                        const std::string &context) {
  check_known_keys(j, {"rows", "cols", "data"}, context);
  if (!j.contains("rows") || !j.contains("cols") || !j.contains("data")) {
    throw DataError("matrix " + context + ": missing rows/cols/data");
  }
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto flat = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 ||
      flat.size() != static_cast<std::size_t>(rows * cols)) {
    throw DataError("matrix " + context + ": data length mismatch");
  }
  Eigen::MatrixXd m(rows, cols);
  std::copy(flat.begin(), flat.end(), m.data());
  return m;
}

}  // namespace iflf

#endif  // IFLF_JSON_UTIL_HPP_
