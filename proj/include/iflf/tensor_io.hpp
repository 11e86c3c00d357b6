// iflf/tensor_io.hpp

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

#ifndef IFLF_TENSOR_IO_HPP_
#define IFLF_TENSOR_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <vector>

namespace iflf {

// Raw little-endian IEEE-754 doubles, no header; shape lives in the JSON
// sidecar next to the file.  Byte-swaps on big-endian hosts.
void write_doubles(const std::filesystem::path &path,
                   const std::vector<double> &values);
std::vector<double> read_doubles(const std::filesystem::path &path,
                                 std::size_t expected_count);

}  // namespace iflf

#endif  // IFLF_TENSOR_IO_HPP_
