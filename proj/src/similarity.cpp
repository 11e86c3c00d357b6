// iflf/similarity.cpp

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

#include "iflf/similarity.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "iflf/common.hpp"
#include "iflf/json_util.hpp"

namespace iflf {

WarpedPair dtw_align(const std::vector<double> &x,
                     const std::vector<double> &y, std::size_t band) {
  if (x.empty() || y.empty())
    throw DataError("dtw_align: empty input sequence");
  const std::size_t n = x.size(), m = y.size();
  const double inf = std::numeric_limits<double>::infinity();
  // A band narrower than |n - m| admits no path; widen it to the minimum.
  std::size_t eff_band = band;
  if (band > 0) {
    const std::size_t diff = n > m ? n - m : m - n;
    eff_band = std::max(band, diff);
  }
  auto in_band = [&](std::size_t i, std::size_t j) {
    if (eff_band == 0) return true;
    const std::size_t diff = i > j ? i - j : j - i;
    return diff <= eff_band;
  };

  std::vector<double> D(n * m, inf);
  auto at = [&](std::size_t i, std::size_t j) -> double & {
    return D[i * m + j];
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (!in_band(i, j)) continue;
      const double c = std::abs(x[i] - y[j]);
      if (i == 0 && j == 0) {
        at(i, j) = c;
        continue;
      }
      double best = inf;
      if (i > 0 && j > 0) best = std::min(best, at(i - 1, j - 1));
      if (i > 0) best = std::min(best, at(i - 1, j));
      if (j > 0) best = std::min(best, at(i, j - 1));
      at(i, j) = c + best;
    }
  }

  WarpedPair out;
  out.dtw_cost = at(n - 1, m - 1);
  std::size_t i = n - 1, j = m - 1;
  std::vector<std::pair<std::size_t, std::size_t>> rev{{i, j}};
  while (i > 0 || j > 0) {
    // Diagonal preferred on ties so identical inputs walk the diagonal.
    double best = inf;
    int move = -1;
    if (i > 0 && j > 0 && at(i - 1, j - 1) <= best) {
      best = at(i - 1, j - 1);
      move = 0;
    }
    if (i > 0 && at(i - 1, j) < best) {
      best = at(i - 1, j);
      move = 1;
    }
    if (j > 0 && at(i, j - 1) < best) {
      best = at(i, j - 1);
      move = 2;
    }
    if (move == 0) {
      --i;
      --j;
    } else if (move == 1) {
      --i;
    } else {
      --j;
    }
    rev.push_back({i, j});
  }
  out.path.assign(rev.rbegin(), rev.rend());
  out.p_i.reserve(out.path.size());
  out.p_j.reserve(out.path.size());
  for (const auto &[a, b] : out.path) {
    out.p_i.push_back(x[a]);
    out.p_j.push_back(y[b]);
  }
  return out;
}

std::optional<double> warped_correlation(const WarpedPair &pair) {
  const std::size_t n = pair.p_i.size();
  if (n == 0 || pair.p_j.size() != n)
    throw DataError("warped_correlation: malformed pair");
  double mi = 0.0, mj = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    mi += pair.p_i[k];
    mj += pair.p_j[k];
  }
  mi /= static_cast<double>(n);
  mj /= static_cast<double>(n);
  double cov = 0.0, vi = 0.0, vj = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double a = pair.p_i[k] - mi;
    const double b = pair.p_j[k] - mj;
    cov += a * b;
    vi += a * a;
    vj += b * b;
  }
  const double si = std::sqrt(vi / static_cast<double>(n));
  const double sj = std::sqrt(vj / static_cast<double>(n));
  if (si < 1e-12 || sj < 1e-12) return std::nullopt;
  // sqrt(vi*vj) instead of si*sj keeps the self-correlation exactly 1.
  const double r = cov / std::sqrt(vi * vj);
  return std::clamp(r, -1.0, 1.0);
}

ActivityScore activity_similarity(
    const std::map<std::string, std::vector<std::vector<double>>> &sequences,
    std::size_t band) {
  ActivityScore score;
  std::vector<std::string> keys;
  std::size_t sensors = 0;
  for (const auto &[key, per_sensor] : sequences) {
    if (per_sensor.empty()) continue;
    bool complete = true;
    for (const auto &seq : per_sensor)
      if (seq.empty()) complete = false;
    if (!complete) {
      log_warn("activity_similarity: domain " + key +
               " has an empty sensor sequence, skipped");
      continue;
    }
    if (sensors == 0)
      sensors = per_sensor.size();
    else if (per_sensor.size() != sensors)
      throw DataError("activity_similarity: domain " + key + " has " +
                      std::to_string(per_sensor.size()) + " sensors, others " +
                      std::to_string(sensors));
    keys.push_back(key);
  }
  score.domains_present = keys.size();
  if (keys.size() < 2) return score;  // insufficient evidence

  std::vector<double> pair_values;
  for (std::size_t a = 0; a < keys.size(); ++a) {
    for (std::size_t b = a + 1; b < keys.size(); ++b) {
      const auto &si = sequences.at(keys[a]);
      const auto &sj = sequences.at(keys[b]);
      double sum = 0.0;
      std::size_t defined = 0;
      for (std::size_t s = 0; s < sensors; ++s) {
        const auto pair = dtw_align(si[s], sj[s], band);
        if (const auto r = warped_correlation(pair)) {
          sum += *r;
          ++defined;
        }
      }
      if (defined == 0) {
        ++score.undefined_pairs;
        continue;
      }
      const double v = sum / static_cast<double>(defined);
      score.pair_scores[{keys[a], keys[b]}] = v;
      pair_values.push_back(v);
    }
  }
  if (pair_values.empty()) return score;

  double mean = 0.0;
  for (double v : pair_values) mean += v;
  mean /= static_cast<double>(pair_values.size());
  double var = 0.0;
  for (double v : pair_values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(pair_values.size());
  score.mean = mean;
  score.stddev = std::sqrt(var);
  score.sufficient = true;
  return score;
}

std::vector<std::string> select_substitutable(const SimilarityReport &report,
                                              double threshold,
                                              std::size_t top_k) {
  std::vector<std::pair<std::string, double>> kept;
  for (const auto &[name, score] : report.activities)
    if (score.sufficient && score.mean >= threshold)
      kept.push_back({name, score.mean});
  std::sort(kept.begin(), kept.end(), [](const auto &l, const auto &r) {
    if (l.second != r.second) return l.second > r.second;
    return l.first < r.first;
  });
  if (top_k > 0 && kept.size() > top_k) kept.resize(top_k);
  std::vector<std::string> out;
  for (const auto &[name, _] : kept) out.push_back(name);
  return out;
}

nlohmann::json similarity_report_to_json(const SimilarityReport &report) {
  nlohmann::json j;
  j["version"] = 1;
  j["threshold"] = report.threshold;
  j["top_k"] = report.top_k;
  j["activities"] = nlohmann::json::object();
  for (const auto &[name, score] : report.activities) {
    nlohmann::json a;
    a["domains_present"] = score.domains_present;
    a["undefined_pairs"] = score.undefined_pairs;
    a["mean"] = score.mean;
    a["stddev"] = score.stddev;
    a["sufficient"] = score.sufficient;
    a["pairs"] = nlohmann::json::array();
    for (const auto &[pair, value] : score.pair_scores)
      a["pairs"].push_back(
          {{"i", pair.first}, {"j", pair.second}, {"score", value}});
    j["activities"][name] = a;
  }
  j["substitutable"] = report.substitutable;
  return j;
}

SimilarityReport similarity_report_from_json(const nlohmann::json &j) {
  if (j.value("version", 0) != 1)
    throw DataError("similarity report: unsupported version");
  SimilarityReport report;
  report.threshold = j.at("threshold").get<double>();
  report.top_k = j.value("top_k", std::size_t{0});
  for (const auto &[name, a] : j.at("activities").items()) {
    ActivityScore score;
    score.domains_present = a.at("domains_present").get<std::size_t>();
    score.undefined_pairs = a.at("undefined_pairs").get<std::size_t>();
    score.mean = a.at("mean").get<double>();
    score.stddev = a.at("stddev").get<double>();
    score.sufficient = a.at("sufficient").get<bool>();
    for (const auto &p : a.at("pairs"))
      score.pair_scores[{p.at("i").get<std::string>(),
                         p.at("j").get<std::string>()}] =
          p.at("score").get<double>();
    report.activities[name] = std::move(score);
  }
  report.substitutable =
      j.at("substitutable").get<std::vector<std::string>>();
  return report;
}

namespace {

std::string csv_safe(const std::string &s) {
  std::string out;
  for (char c : s)
    out += (std::isalnum(static_cast<unsigned char>(c)) != 0) ? c : '_';
  return out;
}

}  // namespace

void write_similarity_report(const SimilarityReport &report,
                             const std::filesystem::path &dir) {
  std::filesystem::create_directories(dir);
  write_json_file(dir / "report.json", similarity_report_to_json(report));

  for (const auto &[name, score] : report.activities) {
    std::vector<std::string> keys;
    for (const auto &[pair, _] : score.pair_scores) {
      keys.push_back(pair.first);
      keys.push_back(pair.second);
    }
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    std::ofstream out(dir / ("similarity_" + csv_safe(name) + ".csv"));
    out << "domain";
    for (const auto &k : keys) out << "," << k;
    out << "\n";
    for (const auto &ki : keys) {
      out << ki;
      for (const auto &kj : keys) {
        out << ",";
        if (ki == kj) {
          out << "1";
          continue;
        }
        const auto key = ki < kj ? std::make_pair(ki, kj)
                                 : std::make_pair(kj, ki);
        const auto it = score.pair_scores.find(key);
        if (it != score.pair_scores.end()) {
          char buf[32];
          std::snprintf(buf, sizeof(buf), "%.6f", it->second);
          out << buf;
        }
      }
      out << "\n";
    }
    if (!out)
      throw DataError("write_similarity_report: write failed in " +
                      dir.string());
  }
}

SimilarityReport read_similarity_report(const std::filesystem::path &dir) {
  return similarity_report_from_json(read_json_file(dir / "report.json"));
}

}  // namespace iflf
