// iflf/mat5.cpp

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

#include "iflf/mat5.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include <zlib.h>

#include "iflf/common.hpp"

namespace iflf {

namespace {

// MAT-file data types.
constexpr std::uint32_t kMiInt8 = 1;
constexpr std::uint32_t kMiUInt8 = 2;
constexpr std::uint32_t kMiInt16 = 3;
constexpr std::uint32_t kMiUInt16 = 4;
constexpr std::uint32_t kMiInt32 = 5;
constexpr std::uint32_t kMiUInt32 = 6;
constexpr std::uint32_t kMiSingle = 7;
constexpr std::uint32_t kMiDouble = 9;
constexpr std::uint32_t kMiInt64 = 12;
constexpr std::uint32_t kMiUInt64 = 13;
constexpr std::uint32_t kMiMatrix = 14;
constexpr std::uint32_t kMiCompressed = 15;
constexpr std::uint32_t kMiUtf8 = 16;
constexpr std::uint32_t kMiUtf16 = 17;

// Array classes.
constexpr std::uint32_t kMxChar = 4;
constexpr std::uint32_t kMxDouble = 6;
constexpr std::uint32_t kMxSingle = 7;
constexpr std::uint32_t kMxInt8 = 8;
constexpr std::uint32_t kMxUInt8 = 9;
constexpr std::uint32_t kMxInt16 = 10;
constexpr std::uint32_t kMxUInt16 = 11;
constexpr std::uint32_t kMxInt32 = 12;
constexpr std::uint32_t kMxUInt32 = 13;
constexpr std::uint32_t kMxInt64 = 14;
constexpr std::uint32_t kMxUInt64 = 15;

struct Cursor {
  const unsigned char *data = nullptr;
  std::size_t size = 0;
  std::size_t off = 0;
  const std::string *file = nullptr;

  void require(std::size_t n, const char *what) const {
    if (off + n > size) {
      throw DataError("mat5 " + *file + ": truncated " + what);
    }
  }
};

std::uint32_t rd_u32(const unsigned char *p) {
  std::uint32_t v;
  std::memcpy(&v, p, 4);
  return v;
}

struct Element {
  std::uint32_t type = 0;
  std::uint32_t bytes = 0;
  const unsigned char *data = nullptr;
  std::size_t advance = 0;  // total consumed from the tag start, padded
};

Element read_element(Cursor &cur) {
  cur.require(8, "element tag");
  Element e;
  const std::uint32_t word = rd_u32(cur.data + cur.off);
  if ((word >> 16) != 0) {
    // Small data element: size and payload share the 8-byte tag.
    e.type = word & 0xFFFFu;
    e.bytes = word >> 16;
    if (e.bytes > 4) {
      throw DataError("mat5 " + *cur.file + ": small element over 4 bytes");
    }
    e.data = cur.data + cur.off + 4;
    e.advance = 8;
  } else {
    e.type = word;
    e.bytes = rd_u32(cur.data + cur.off + 4);
    cur.require(8 + e.bytes, "element payload");
    e.data = cur.data + cur.off + 8;
    const std::size_t pad = (8 - (e.bytes % 8)) % 8;
    e.advance = 8 + e.bytes + pad;
  }
  return e;
}

double convert_at(const unsigned char *p, std::uint32_t type) {
  switch (type) {
    case kMiInt8: {
      std::int8_t v;
      std::memcpy(&v, p, 1);
      return static_cast<double>(v);
    }
    case kMiUInt8:
    case kMiUtf8:
      return static_cast<double>(*p);
    case kMiInt16: {
      std::int16_t v;
      std::memcpy(&v, p, 2);
      return static_cast<double>(v);
    }
    case kMiUInt16:
    case kMiUtf16: {
      std::uint16_t v;
      std::memcpy(&v, p, 2);
      return static_cast<double>(v);
    }
    case kMiInt32: {
      std::int32_t v;
      std::memcpy(&v, p, 4);
      return static_cast<double>(v);
    }
    case kMiUInt32: {
      std::uint32_t v;
      std::memcpy(&v, p, 4);
      return static_cast<double>(v);
    }
    case kMiSingle: {
      float v;
      std::memcpy(&v, p, 4);
      return static_cast<double>(v);
    }
    case kMiDouble: {
      double v;
      std::memcpy(&v, p, 8);
      return v;
    }
    case kMiInt64: {
      std::int64_t v;
      std::memcpy(&v, p, 8);
      return static_cast<double>(v);
    }
    case kMiUInt64: {
      std::uint64_t v;
      std::memcpy(&v, p, 8);
      return static_cast<double>(v);
    }
    default:
      return 0.0;
  }
}

std::size_t type_width(std::uint32_t type) {
  switch (type) {
    case kMiInt8:
    case kMiUInt8:
    case kMiUtf8:
      return 1;
    case kMiInt16:
    case kMiUInt16:
    case kMiUtf16:
      return 2;
    case kMiInt32:
    case kMiUInt32:
    case kMiSingle:
      return 4;
    case kMiDouble:
    case kMiInt64:
    case kMiUInt64:
      return 8;
    default:
      return 0;
  }
}

std::vector<double> numeric_payload(const Element &e, const std::string &file) {
  const std::size_t width = type_width(e.type);
  if (width == 0) {
    throw DataError("mat5 " + file + ": unsupported numeric storage type " +
                    std::to_string(e.type));
  }
  if (e.bytes % width != 0) {
    throw DataError("mat5 " + file + ": ragged numeric payload");
  }
  std::vector<double> out(e.bytes / width);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = convert_at(e.data + i * width, e.type);
  }
  return out;
}

bool numeric_class(std::uint32_t cls) {
  return cls == kMxDouble || cls == kMxSingle ||
         (cls >= kMxInt8 && cls <= kMxUInt64);
}

// Parses one miMATRIX payload.  Returns false for variable kinds the
// reader does not handle (cell, struct, sparse, complex, N-D).
bool parse_matrix(const unsigned char *data, std::size_t size,
                  const std::string &file, MatVariable *out) {
  Cursor cur{data, size, 0, &file};

  const Element flags = read_element(cur);
  if (flags.type != kMiUInt32 || flags.bytes < 8) {
    throw DataError("mat5 " + file + ": malformed array flags");
  }
  const std::uint32_t flag_word = rd_u32(flags.data);
  const std::uint32_t cls = flag_word & 0xFFu;
  const bool complex = ((flag_word >> 8) & 0x08u) != 0;
  cur.off += flags.advance;

  const Element dims = read_element(cur);
  if (dims.type != kMiInt32) {
    throw DataError("mat5 " + file + ": malformed dimensions");
  }
  const std::vector<double> dim_vals = numeric_payload(dims, file);
  cur.off += dims.advance;

  const Element name = read_element(cur);
  if (name.type != kMiInt8) {
    throw DataError("mat5 " + file + ": malformed array name");
  }
  out->name.assign(reinterpret_cast<const char *>(name.data), name.bytes);
  cur.off += name.advance;

  if (complex || dim_vals.size() != 2) return false;
  const auto rows = static_cast<Eigen::Index>(dim_vals[0]);
  const auto cols = static_cast<Eigen::Index>(dim_vals[1]);
  if (rows < 0 || cols < 0) {
    throw DataError("mat5 " + file + ": negative dimension");
  }

  if (numeric_class(cls)) {
    const Element body = read_element(cur);
    const std::vector<double> vals = numeric_payload(body, file);
    if (vals.size() != static_cast<std::size_t>(rows * cols)) {
      throw DataError("mat5 " + file + ": data size does not match " +
                      out->name + " dimensions");
    }
    out->values.resize(rows, cols);
    // MAT-files store column-major.
    for (Eigen::Index c = 0; c < cols; ++c) {
      for (Eigen::Index r = 0; r < rows; ++r) {
        out->values(r, c) =
            vals[static_cast<std::size_t>(c * rows + r)];
      }
    }
    return true;
  }
  if (cls == kMxChar) {
    const Element body = read_element(cur);
    const std::size_t width = type_width(body.type);
    if (width == 0) {
      throw DataError("mat5 " + file + ": unsupported char storage");
    }
    out->is_text = true;
    out->text.clear();
    for (std::size_t i = 0; i * width < body.bytes; ++i) {
      const double code = convert_at(body.data + i * width, body.type);
      if (code > 0.0 && code < 256.0) {
        out->text.push_back(static_cast<char>(code));
      }
    }
    return true;
  }
  return false;
}

std::vector<unsigned char> inflate_payload(const unsigned char *data,
                                           std::size_t size,
                                           const std::string &file) {
  z_stream zs;
  std::memset(&zs, 0, sizeof(zs));
  if (inflateInit(&zs) != Z_OK) {
    throw DataError("mat5 " + file + ": zlib init failed");
  }
  zs.next_in = const_cast<unsigned char *>(data);
  zs.avail_in = static_cast<uInt>(size);
  std::vector<unsigned char> out;
  std::vector<unsigned char> chunk(1 << 16);
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk.data();
    zs.avail_out = static_cast<uInt>(chunk.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw DataError("mat5 " + file + ": corrupt compressed element");
    }
    out.insert(out.end(), chunk.data(),
               chunk.data() + (chunk.size() - zs.avail_out));
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw DataError("mat5 " + file + ": truncated compressed element");
    }
  }
  inflateEnd(&zs);
  return out;
}

}  // namespace

std::map<std::string, MatVariable> read_mat5(
    const std::filesystem::path &path) {
  const std::string file = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("mat5 " + file + ": cannot open");
  std::vector<unsigned char> bytes(
      (std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 128) {
    throw DataError("mat5 " + file + ": shorter than the 128-byte header");
  }
  if (bytes[126] == 'M' && bytes[127] == 'I') {
    throw DataError("mat5 " + file + ": big-endian files are not supported");
  }
  if (bytes[126] != 'I' || bytes[127] != 'M') {
    throw DataError("mat5 " + file + ": missing endian indicator");
  }

  std::map<std::string, MatVariable> out;
  Cursor cur{bytes.data(), bytes.size(), 128, &file};
  while (cur.off + 8 <= cur.size) {
    const Element e = read_element(cur);
    if (e.type == kMiMatrix) {
      MatVariable var;
      if (parse_matrix(e.data, e.bytes, file, &var) && !var.name.empty()) {
        out[var.name] = std::move(var);
      }
    } else if (e.type == kMiCompressed) {
      const std::vector<unsigned char> plain =
          inflate_payload(e.data, e.bytes, file);
      Cursor inner{plain.data(), plain.size(), 0, &file};
      const Element ie = read_element(inner);
      if (ie.type == kMiMatrix) {
        MatVariable var;
        if (parse_matrix(ie.data, ie.bytes, file, &var) &&
            !var.name.empty()) {
          out[var.name] = std::move(var);
        }
      }
    }
    // Other top-level element kinds are valid but irrelevant; skip.
    cur.off += e.advance;
  }
  return out;
}

}  // namespace iflf
