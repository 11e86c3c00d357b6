// iflf/mat5.hpp

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

#ifndef IFLF_MAT5_HPP_
#define IFLF_MAT5_HPP_

#include <filesystem>
#include <map>
#include <string>

#include <Eigen/Dense>

namespace iflf {

// One variable from a Level 5 MAT-file.  Numeric arrays are coerced to
// double; char arrays land in text.
struct MatVariable {
  std::string name;
  Eigen::MatrixXd values;
  std::string text;
  bool is_text = false;
};

// Minimal Level 5 MAT-file reader: little-endian files, 2-D numeric and
// char arrays, zlib-compressed elements.  Cell/struct/sparse/complex
// variables are skipped.  Malformed input raises DataError naming the file.
std::map<std::string, MatVariable> read_mat5(
    const std::filesystem::path &path);

}  // namespace iflf

#endif  // IFLF_MAT5_HPP_
