// iflf/tensor_io.cpp

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

#include "iflf/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "iflf/common.hpp"

namespace iflf {

namespace {

void swap_if_big_endian(std::vector<double> *values) {
  if constexpr (std::endian::native == std::endian::big) {
    for (double &v : *values) {
      std::uint64_t u;
      std::memcpy(&u, &v, 8);
      u = __builtin_bswap64(u);
      std::memcpy(&v, &u, 8);
    }
  }
}

}  // namespace

void write_doubles(const std::filesystem::path &path,
                   const std::vector<double> &values) {
  std::vector<double> buf = values;
  swap_if_big_endian(&buf);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char *>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(double)));
  if (!out) throw DataError("write failed for " + path.string());
}

std::vector<double> read_doubles(const std::filesystem::path &path,
                                 std::size_t expected_count) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw DataError("cannot read " + path.string());
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != expected_count * sizeof(double))
    throw DataError(path.string() + ": expected " +
                    std::to_string(expected_count * sizeof(double)) +
                    " bytes, found " + std::to_string(bytes));
  in.seekg(0);
  std::vector<double> values(expected_count);
  in.read(reinterpret_cast<char *>(values.data()),
          static_cast<std::streamsize>(bytes));
  if (!in) throw DataError("short read from " + path.string());
  swap_if_big_endian(&values);
  return values;
}

}  // namespace iflf
