// iflf/common.hpp

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

#ifndef IFLF_COMMON_HPP_
#define IFLF_COMMON_HPP_

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace iflf {

// Bad configuration (unknown keys, invalid values). CLI maps this to exit 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string &msg) : std::runtime_error(msg) {}
};

// Missing or malformed input data. CLI maps this to exit 3.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string &msg) : std::runtime_error(msg) {}
};

// Training diverged (non-finite loss). Carries a snapshot description.
class TrainingDivergence : public std::runtime_error {
 public:
  TrainingDivergence(const std::string &msg, std::string snapshot)
      : std::runtime_error(msg), snapshot_(std::move(snapshot)) {}
  const std::string &snapshot() const { return snapshot_; }

 private:
  std::string snapshot_;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a base seed and a list of salts.
inline std::uint64_t derive_seed(std::uint64_t base,
                                 std::initializer_list<std::uint64_t> salts) {
  std::uint64_t s = splitmix64(base);
  for (std::uint64_t v : salts) s = splitmix64(s ^ v);
  return s;
}

// Deterministic RNG with a fixed update rule so results are reproducible
// across standard-library implementations. xoshiro256** seeded via splitmix64.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t s = seed;
    for (auto &w : state_) {
      s = splitmix64(s);
      w = s;
    }
    has_spare_ = false;
  }

  std::uint64_t next() {
    auto rotl = [](std::uint64_t x, int k) {
      return (x << k) | (x >> (64 - k));
    };
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform double in [0, 1).
  double uniform() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform index in [0, n). n must be > 0.
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) %
           n;
  }

  // Standard normal via Box-Muller.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double two_pi = 6.283185307179586476925286766559;
    spare_ = r * std::sin(two_pi * u2);
    has_spare_ = true;
    return r * std::cos(two_pi * u2);
  }

  template <typename T>
  void shuffle(std::vector<T> &v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

 private:
  std::uint64_t state_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// FNV-1a over raw bytes; used for parameter checksums and plan hashes.
inline std::uint64_t fnv1a64(const void *data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto *p = static_cast<const unsigned char *>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t checksum(const Eigen::MatrixXd &m,
                              std::uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a64(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()),
                 h);
}

inline std::uint64_t checksum(const std::vector<const Eigen::MatrixXd *> &ms) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto *m : ms) h = checksum(*m, h);
  return h;
}

void log_set_json(bool enabled);
void log_info(const std::string &msg);
void log_warn(const std::string &msg);
void log_error(const std::string &msg);

}  // namespace iflf

#endif  // IFLF_COMMON_HPP_
