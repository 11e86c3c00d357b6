// iflf/sigproc.cpp

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

#include "iflf/sigproc.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>

#include "json.hpp"

#include "iflf/common.hpp"
#include "iflf/json_util.hpp"
#include "iflf/tensor_io.hpp"

namespace iflf {

namespace {

Recording header_like(const Recording &rec, double rate_hz) {
  Recording out;
  out.domain = rec.domain;
  out.dataset = rec.dataset;
  out.channel_names = rec.channel_names;
  out.class_names = rec.class_names;
  out.sampling_rate_hz = rate_hz;
  out.trial_starts.clear();
  return out;
}

}  // namespace

std::vector<Recording> interpolate_uniform(const Recording &rec,
                                           double target_rate_hz,
                                           double max_gap_s) {
  validate(rec);
  if (target_rate_hz <= 0.0)
    throw ConfigError("interpolate_uniform: target rate must be positive");
  if (max_gap_s <= 0.0)
    throw ConfigError("interpolate_uniform: max_gap_s must be positive");
  if (rec.num_samples() < 2)
    throw DataError("interpolate_uniform: need at least 2 samples, have " +
                    std::to_string(rec.num_samples()));

  const auto channels = static_cast<Eigen::Index>(rec.num_channels());
  std::vector<Recording> outputs;
  Recording cur = header_like(rec, target_rate_hz);
  double cur_anchor = 0.0;
  std::size_t dropped_pieces = 0;

  auto flush_cur = [&]() {
    if (cur.num_samples() > 0) {
      validate(cur);
      outputs.push_back(std::move(cur));
    }
    cur = header_like(rec, target_rate_hz);
  };

  // One piece = gap-free run inside one trial.  Each piece becomes a trial
  // of the recording under construction; timestamps continue its uniform
  // grid so downstream stages see a single exact grid per Recording.
  auto append_piece = [&](std::size_t ps, std::size_t pe) {
    if (pe - ps < 2) {
      ++dropped_pieces;
      return;
    }
    const double t0 = rec.timestamps[ps];
    const double t1 = rec.timestamps[pe - 1];
    const auto n_out = static_cast<std::size_t>(std::floor(
                           (t1 - t0) * target_rate_hz + 1e-9)) +
                       1;
    const std::size_t base = cur.num_samples();
    if (base == 0) cur_anchor = t0;
    cur.trial_starts.push_back(base);
    cur.samples.conservativeResize(
        static_cast<Eigen::Index>(base + n_out), channels);
    std::size_t k = ps;
    for (std::size_t j = 0; j < n_out; ++j) {
      const double tq = t0 + static_cast<double>(j) / target_rate_hz;
      while (k + 2 < pe && rec.timestamps[k + 1] <= tq) ++k;
      const double ta = rec.timestamps[k];
      const double tb = rec.timestamps[k + 1];
      double u = (tq - ta) / (tb - ta);
      u = std::clamp(u, 0.0, 1.0);
      cur.samples.row(static_cast<Eigen::Index>(base + j)) =
          rec.samples.row(static_cast<Eigen::Index>(k)) +
          u * (rec.samples.row(static_cast<Eigen::Index>(k + 1)) -
               rec.samples.row(static_cast<Eigen::Index>(k)));
      cur.timestamps.push_back(cur_anchor +
                               static_cast<double>(base + j) / target_rate_hz);
      cur.labels.push_back(tq - ta <= tb - tq ? rec.labels[k]
                                              : rec.labels[k + 1]);
    }
  };

  for (auto [s, e] : rec.segments()) {
    std::size_t piece_start = s;
    for (std::size_t i = s + 1; i < e; ++i) {
      if (rec.timestamps[i] - rec.timestamps[i - 1] > max_gap_s) {
        append_piece(piece_start, i);
        flush_cur();
        piece_start = i;
      }
    }
    append_piece(piece_start, e);
  }
  flush_cur();

  if (dropped_pieces > 0)
    log_warn("interpolate_uniform: dropped " + std::to_string(dropped_pieces) +
             " single-sample piece(s) in " + rec.domain.key());
  if (outputs.empty())
    throw DataError("interpolate_uniform: no piece of " + rec.domain.key() +
                    " had >= 2 samples");
  return outputs;
}

void butter_lowpass(int order, double cutoff_hz, double fs,
                    std::vector<double> *b, std::vector<double> *a) {
  if (order < 1) throw ConfigError("butter_lowpass: order must be >= 1");
  if (fs <= 0.0) throw ConfigError("butter_lowpass: fs must be positive");
  if (cutoff_hz <= 0.0 || cutoff_hz >= fs / 2.0)
    throw ConfigError("butter_lowpass: cutoff " + std::to_string(cutoff_hz) +
                      " Hz outside (0, Nyquist) for fs " + std::to_string(fs));
  using cd = std::complex<double>;
  const double warped = 2.0 * fs * std::tan(std::numbers::pi * cutoff_hz / fs);

  std::vector<cd> zpoles;
  for (int k = 0; k < order; ++k) {
    const double theta = std::numbers::pi / 2.0 +
                         std::numbers::pi * (2.0 * k + 1.0) / (2.0 * order);
    const cd p = warped * cd(std::cos(theta), std::sin(theta));
    zpoles.push_back((2.0 * fs + p) / (2.0 * fs - p));
  }

  auto poly_from_roots = [](const std::vector<cd> &roots) {
    std::vector<cd> c{cd(1.0, 0.0)};
    for (const cd &r : roots) {
      std::vector<cd> nc(c.size() + 1, cd(0.0, 0.0));
      for (std::size_t i = 0; i < c.size(); ++i) {
        nc[i] += c[i];
        nc[i + 1] -= c[i] * r;
      }
      c = std::move(nc);
    }
    return c;
  };

  const auto denom = poly_from_roots(zpoles);
  const auto numer = poly_from_roots(std::vector<cd>(order, cd(-1.0, 0.0)));
  cd dsum(0.0, 0.0), nsum(0.0, 0.0);
  for (const cd &c : denom) dsum += c;
  for (const cd &c : numer) nsum += c;
  const double gain = (dsum / nsum).real();  // H(z=1) = 1

  a->resize(order + 1);
  b->resize(order + 1);
  for (int i = 0; i <= order; ++i) {
    (*a)[i] = denom[i].real();
    (*b)[i] = gain * numer[i].real();
  }
}

std::vector<double> lfilter(const std::vector<double> &b,
                            const std::vector<double> &a,
                            const std::vector<double> &x,
                            std::vector<double> *zi) {
  if (a.empty() || a[0] == 0.0)
    throw ConfigError("lfilter: a[0] must be nonzero");
  const std::size_t n = std::max(a.size(), b.size());
  std::vector<double> bn(n, 0.0), an(n, 0.0);
  for (std::size_t i = 0; i < b.size(); ++i) bn[i] = b[i] / a[0];
  for (std::size_t i = 0; i < a.size(); ++i) an[i] = a[i] / a[0];

  std::vector<double> z(n > 0 ? n - 1 : 0, 0.0);
  if (zi != nullptr) {
    if (zi->size() != z.size())
      throw ConfigError("lfilter: zi has wrong length");
    z = *zi;
  }
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    const double yi = z.empty() ? bn[0] * xi : bn[0] * xi + z[0];
    for (std::size_t j = 1; j + 1 < n; ++j)
      z[j - 1] = bn[j] * xi + z[j] - an[j] * yi;
    if (!z.empty()) z[n - 2] = bn[n - 1] * xi - an[n - 1] * yi;
    y[i] = yi;
  }
  if (zi != nullptr) *zi = z;
  return y;
}

std::vector<double> lfilter_zi(const std::vector<double> &b,
                               const std::vector<double> &a) {
  if (a.empty() || a[0] == 0.0)
    throw ConfigError("lfilter_zi: a[0] must be nonzero");
  const std::size_t n = std::max(a.size(), b.size());
  if (n < 2) return {};
  std::vector<double> bn(n, 0.0), an(n, 0.0);
  for (std::size_t i = 0; i < b.size(); ++i) bn[i] = b[i] / a[0];
  for (std::size_t i = 0; i < a.size(); ++i) an[i] = a[i] / a[0];
  const auto m = static_cast<Eigen::Index>(n - 1);

  // Steady state of the transposed direct form II state under unit input.
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) A(i, 0) = -an[i + 1];
  for (Eigen::Index i = 0; i + 1 < m; ++i) A(i, i + 1) = 1.0;
  Eigen::VectorXd B(m);
  for (Eigen::Index i = 0; i < m; ++i) B(i) = bn[i + 1] - an[i + 1] * bn[0];
  const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(m, m) - A;
  const Eigen::VectorXd zi = M.colPivHouseholderQr().solve(B);
  return std::vector<double>(zi.data(), zi.data() + m);
}

std::vector<double> filtfilt(const std::vector<double> &b,
                             const std::vector<double> &a,
                             const std::vector<double> &x) {
  const std::size_t n = x.size();
  if (n < 2) return x;
  const std::size_t ntaps = std::max(a.size(), b.size());
  const std::size_t padlen = std::min(3 * ntaps, n - 1);

  std::vector<double> ext;
  ext.reserve(n + 2 * padlen);
  for (std::size_t i = padlen; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= padlen; ++i)
    ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  const auto zi0 = lfilter_zi(b, a);
  std::vector<double> zi = zi0;
  for (double &z : zi) z *= ext.front();
  auto y = lfilter(b, a, ext, &zi);
  std::reverse(y.begin(), y.end());
  zi = zi0;
  for (double &z : zi) z *= y.front();
  y = lfilter(b, a, y, &zi);
  std::reverse(y.begin(), y.end());
  return std::vector<double>(y.begin() + static_cast<std::ptrdiff_t>(padlen),
                             y.begin() +
                                 static_cast<std::ptrdiff_t>(padlen + n));
}

Recording lowpass(const Recording &rec, const FilterSpec &spec) {
  validate(rec);
  if (rec.sampling_rate_hz <= 0.0)
    throw DataError("lowpass: recording has no sampling rate");
  const double dt = 1.0 / rec.sampling_rate_hz;
  for (auto [s, e] : rec.segments())
    for (std::size_t i = s + 1; i < e; ++i)
      if (std::abs(rec.timestamps[i] - rec.timestamps[i - 1] - dt) >
          1e-6 * dt)
        throw DataError("lowpass: non-uniform sampling at index " +
                        std::to_string(i) + " of " + rec.domain.key());

  std::vector<double> b, a;
  butter_lowpass(spec.order, spec.cutoff_hz, rec.sampling_rate_hz, &b, &a);

  Recording out = rec;
  std::vector<double> col;
  for (auto [s, e] : rec.segments()) {
    const auto len = static_cast<Eigen::Index>(e - s);
    for (Eigen::Index c = 0; c < rec.samples.cols(); ++c) {
      col.assign(rec.samples.col(c).data() + s,
                 rec.samples.col(c).data() + s + len);
      const auto filtered =
          spec.zero_phase ? filtfilt(b, a, col) : lfilter(b, a, col);
      for (Eigen::Index i = 0; i < len; ++i)
        out.samples(static_cast<Eigen::Index>(s) + i, c) = filtered[i];
    }
  }
  return out;
}

NormStats compute_stats(const Recording &rec) {
  if (rec.num_samples() == 0)
    throw DataError("compute_stats: empty recording " + rec.domain.key());
  NormStats s;
  s.mean = rec.samples.colwise().mean();
  const Eigen::ArrayXd var =
      (rec.samples.rowwise() - s.mean.transpose())
          .array()
          .square()
          .colwise()
          .mean();
  s.stddev = var.sqrt().matrix();
  std::string clamped;
  for (Eigen::Index c = 0; c < s.stddev.size(); ++c) {
    if (s.stddev(c) < NormStats::kStdFloor) {
      s.stddev(c) = NormStats::kStdFloor;
      if (!clamped.empty()) clamped += ", ";
      clamped += rec.channel_names[static_cast<std::size_t>(c)];
    }
  }
  if (!clamped.empty())
    log_warn("compute_stats: near-constant channel(s) clamped to std 1e-8 in " +
             rec.domain.key() + ": " + clamped);
  return s;
}

Recording apply_stats(const Recording &rec, const NormStats &stats) {
  if (stats.mean.size() != rec.samples.cols() ||
      stats.stddev.size() != rec.samples.cols())
    throw ConfigError("apply_stats: stats cover " +
                      std::to_string(stats.mean.size()) + " channels, data " +
                      std::to_string(rec.samples.cols()));
  Recording out = rec;
  for (Eigen::Index c = 0; c < rec.samples.cols(); ++c)
    out.samples.col(c) =
        (rec.samples.col(c).array() - stats.mean(c)) / stats.stddev(c);
  return out;
}

std::pair<Recording, NormStats> normalize(
    const Recording &rec, const std::optional<NormStats> &stats) {
  const NormStats s = stats.has_value() ? *stats : compute_stats(rec);
  return {apply_stats(rec, s), s};
}

namespace {

// Channel groups by name prefix before the last '.', in order of first
// appearance.  Each group must hold exactly three axes.
std::vector<std::pair<std::string, std::vector<Eigen::Index>>>
triaxial_groups(const Recording &rec) {
  std::vector<std::pair<std::string, std::vector<Eigen::Index>>> groups;
  for (std::size_t c = 0; c < rec.channel_names.size(); ++c) {
    const std::string &name = rec.channel_names[c];
    const auto dot = name.rfind('.');
    const std::string prefix = dot == std::string::npos ? name
                                                        : name.substr(0, dot);
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const auto &g) { return g.first == prefix; });
    if (it == groups.end())
      groups.push_back({prefix, {static_cast<Eigen::Index>(c)}});
    else
      it->second.push_back(static_cast<Eigen::Index>(c));
  }
  for (const auto &[prefix, idx] : groups)
    if (idx.size() != 3)
      throw DataError("sensor group '" + prefix + "' has " +
                      std::to_string(idx.size()) + " axes, expected 3");
  return groups;
}

}  // namespace

Recording magnitude_channels(const Recording &rec) {
  validate(rec);
  const auto groups = triaxial_groups(rec);
  Recording out = header_like(rec, rec.sampling_rate_hz);
  out.trial_starts = rec.trial_starts;
  out.timestamps = rec.timestamps;
  out.labels = rec.labels;
  out.channel_names.clear();
  out.samples.resize(rec.samples.rows(),
                     static_cast<Eigen::Index>(groups.size()));
  Eigen::Index g = 0;
  for (const auto &[prefix, idx] : groups) {
    out.channel_names.push_back(prefix + ".mag");
    out.samples.col(g) = (rec.samples.col(idx[0]).array().square() +
                          rec.samples.col(idx[1]).array().square() +
                          rec.samples.col(idx[2]).array().square())
                             .sqrt();
    ++g;
  }
  validate(out);
  return out;
}

Recording rotate_axes(const Recording &rec,
                      const std::vector<Eigen::Matrix3d> &rotations) {
  validate(rec);
  const auto groups = triaxial_groups(rec);
  if (rotations.size() != 1 && rotations.size() != groups.size())
    throw ConfigError("rotate_axes: got " + std::to_string(rotations.size()) +
                      " matrices for " + std::to_string(groups.size()) +
                      " sensor groups");
  for (const auto &R : rotations) {
    const double err =
        (R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (err > 1e-6)
      throw ConfigError("rotate_axes: matrix not orthonormal (|R'R - I| = " +
                        std::to_string(err) + ")");
  }
  Recording out = rec;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto &idx = groups[g].second;
    const Eigen::Matrix3d &R =
        rotations.size() == 1 ? rotations[0] : rotations[g];
    Eigen::Matrix<double, 3, Eigen::Dynamic> block(3, rec.samples.rows());
    for (int ax = 0; ax < 3; ++ax)
      block.row(ax) = rec.samples.col(idx[ax]).transpose();
    block = R * block;
    for (int ax = 0; ax < 3; ++ax)
      out.samples.col(idx[ax]) = block.row(ax).transpose();
  }
  return out;
}

WindowSet make_windows(const Recording &rec, double window_seconds,
                       double overlap_fraction) {
  return make_windows(std::vector<Recording>{rec}, window_seconds,
                      overlap_fraction);
}

WindowSet make_windows(const std::vector<Recording> &recs,
                       double window_seconds, double overlap_fraction) {
  if (recs.empty()) throw ConfigError("make_windows: no recordings");
  if (window_seconds <= 0.0)
    throw ConfigError("make_windows: window_seconds must be positive");
  if (overlap_fraction < 0.0 || overlap_fraction >= 1.0)
    throw ConfigError("make_windows: overlap_fraction must lie in [0, 1)");
  const Recording &head = recs.front();
  for (const Recording &rec : recs) {
    validate(rec);
    if (!(rec.domain == head.domain) ||
        rec.channel_names != head.channel_names ||
        rec.class_names != head.class_names ||
        rec.sampling_rate_hz != head.sampling_rate_hz)
      throw DataError("make_windows: recordings disagree on domain, "
                      "channels, classes, or rate");
  }

  const auto W = static_cast<std::size_t>(
      std::llround(window_seconds * head.sampling_rate_hz));
  if (W < 1) throw ConfigError("make_windows: window shorter than 1 sample");
  const auto S = std::max<std::size_t>(
      1, static_cast<std::size_t>(
             std::llround(static_cast<double>(W) * (1.0 - overlap_fraction))));

  WindowSet ws;
  ws.domain = head.domain;
  ws.window_seconds = window_seconds;
  ws.overlap_fraction = overlap_fraction;
  ws.sampling_rate_hz = head.sampling_rate_hz;
  ws.channel_names = head.channel_names;
  ws.class_names = head.class_names;

  std::size_t dropped = 0;
  for (const Recording &rec : recs) {
    for (auto [s, e] : rec.segments()) {
      const std::size_t N = e - s;
      if (N < W) continue;
      const std::size_t count = (N - W) / S + 1;
      for (std::size_t w = 0; w < count; ++w) {
        const std::size_t start = s + w * S;
        std::map<int, std::size_t> votes;
        for (std::size_t i = start; i < start + W; ++i)
          ++votes[rec.labels[i]];
        int best = LabelMap::kUnlabeled;
        std::size_t best_count = 0;
        for (const auto &[label, count2] : votes)
          if (count2 > best_count) {  // ties keep the smaller id
            best = label;
            best_count = count2;
          }
        if (best == LabelMap::kUnlabeled ||
            best_count * 2 < W) {
          ++dropped;
          continue;
        }
        ws.windows.push_back(
            rec.samples
                .middleRows(static_cast<Eigen::Index>(start),
                            static_cast<Eigen::Index>(W))
                .transpose());
        ws.labels.push_back(best);
      }
    }
  }
  if (dropped > 0)
    log_warn("make_windows: dropped " + std::to_string(dropped) +
             " mixed/unlabeled window(s) in " + head.domain.key());
  if (ws.windows.empty())
    log_warn("make_windows: no windows produced for " + head.domain.key());
  return ws;
}

WindowSet apply_stats(const WindowSet &ws, const NormStats &stats) {
  if (ws.normalized)
    throw ConfigError("apply_stats: window set already normalized");
  if (!ws.windows.empty() && (stats.mean.size() != ws.num_channels() ||
                              stats.stddev.size() != ws.num_channels()))
    throw ConfigError("apply_stats: stats cover " +
                      std::to_string(stats.mean.size()) + " channels, data " +
                      std::to_string(ws.num_channels()));
  WindowSet out = ws;
  for (Eigen::MatrixXd &w : out.windows)
    for (Eigen::Index ch = 0; ch < w.rows(); ++ch)
      w.row(ch) = (w.row(ch).array() - stats.mean(ch)) / stats.stddev(ch);
  out.stats = stats;
  out.normalized = true;
  return out;
}

void validate(const WindowSet &ws) {
  if (!ws.domain.valid())
    throw DataError("window set has empty domain id");
  if (ws.labels.size() != ws.windows.size())
    throw DataError("window set: " + std::to_string(ws.labels.size()) +
                    " labels for " + std::to_string(ws.windows.size()) +
                    " windows");
  if (ws.overlap_fraction < 0.0 || ws.overlap_fraction >= 1.0)
    throw DataError("window set: overlap_fraction out of [0, 1)");
  if (ws.sampling_rate_hz <= 0.0)
    throw DataError("window set: sampling rate must be positive");
  for (const auto &w : ws.windows)
    if (w.rows() != ws.num_channels() || w.cols() != ws.window_len())
      throw DataError("window set: ragged window shapes");
  if (static_cast<std::size_t>(ws.num_channels()) != ws.channel_names.size())
    throw DataError("window set: channel name count mismatch");
  for (int label : ws.labels)
    if (label < 0 || label >= static_cast<int>(ws.class_names.size()))
      throw DataError("window set: label " + std::to_string(label) +
                      " outside class vocabulary");
  if (!ws.stats.empty() && ws.stats.mean.size() != ws.num_channels())
    throw DataError("window set: normalization stats channel mismatch");
}

std::filesystem::path save_windowset(const WindowSet &ws,
                                     const std::filesystem::path &dir,
                                     const std::string &stem) {
  validate(ws);
  std::filesystem::create_directories(dir);
  const auto n = ws.num_windows();
  const auto c = static_cast<std::size_t>(ws.num_channels());
  const auto w = static_cast<std::size_t>(ws.window_len());

  std::vector<double> flat;
  flat.reserve(n * c * w);
  for (const Eigen::MatrixXd &win : ws.windows)
    for (Eigen::Index ch = 0; ch < win.rows(); ++ch)
      for (Eigen::Index t = 0; t < win.cols(); ++t)
        flat.push_back(win(ch, t));
  write_doubles(dir / (stem + ".bin"), flat);

  nlohmann::json j;
  j["version"] = 1;
  j["data_file"] = stem + ".bin";
  j["shape"] = {n, c, w};
  j["window_seconds"] = ws.window_seconds;
  j["overlap_fraction"] = ws.overlap_fraction;
  j["sampling_rate_hz"] = ws.sampling_rate_hz;
  j["normalized"] = ws.normalized;
  j["domain"] = {{"subject_id", ws.domain.subject_id},
                 {"device_id", ws.domain.device_id}};
  j["channel_names"] = ws.channel_names;
  j["class_names"] = ws.class_names;
  j["labels"] = ws.labels;
  if (ws.stats.empty()) {
    j["normalization"] = nullptr;
  } else {
    j["normalization"] = {
        {"mean", std::vector<double>(ws.stats.mean.data(),
                                     ws.stats.mean.data() + c)},
        {"std", std::vector<double>(ws.stats.stddev.data(),
                                    ws.stats.stddev.data() + c)}};
  }
  const auto json_path = dir / (stem + ".json");
  write_json_file(json_path, j);
  return json_path;
}

WindowSet load_windowset(const std::filesystem::path &json_path) {
  const auto j = read_json_file(json_path);
  check_known_keys(j,
                   {"version", "data_file", "shape", "window_seconds",
                    "overlap_fraction", "sampling_rate_hz", "normalized",
                    "domain", "channel_names", "class_names", "labels",
                    "normalization"},
                   json_path.string());
  if (j.value("version", 0) != 1)
    throw DataError(json_path.string() + ": unsupported version");

  WindowSet ws;
  const auto shape = j.at("shape").get<std::vector<std::size_t>>();
  if (shape.size() != 3)
    throw DataError(json_path.string() + ": shape must have 3 entries");
  ws.window_seconds = j.at("window_seconds").get<double>();
  ws.overlap_fraction = j.at("overlap_fraction").get<double>();
  ws.sampling_rate_hz = j.at("sampling_rate_hz").get<double>();
  ws.normalized = j.value("normalized", false);
  ws.domain = {j.at("domain").at("subject_id").get<std::string>(),
               j.at("domain").at("device_id").get<std::string>()};
  ws.channel_names = j.at("channel_names").get<std::vector<std::string>>();
  ws.class_names = j.at("class_names").get<std::vector<std::string>>();
  ws.labels = j.at("labels").get<std::vector<int>>();
  if (!j.at("normalization").is_null()) {
    const auto mean = j.at("normalization").at("mean").get<std::vector<double>>();
    const auto sd = j.at("normalization").at("std").get<std::vector<double>>();
    if (mean.size() != shape[1] || sd.size() != shape[1])
      throw DataError(json_path.string() + ": normalization stats mismatch");
    ws.stats.mean = Eigen::Map<const Eigen::VectorXd>(
        mean.data(), static_cast<Eigen::Index>(mean.size()));
    ws.stats.stddev = Eigen::Map<const Eigen::VectorXd>(
        sd.data(), static_cast<Eigen::Index>(sd.size()));
  }

  const auto flat = read_doubles(json_path.parent_path() /
                                     j.at("data_file").get<std::string>(),
                                 shape[0] * shape[1] * shape[2]);
  ws.windows.reserve(shape[0]);
  std::size_t off = 0;
  for (std::size_t i = 0; i < shape[0]; ++i) {
    Eigen::MatrixXd win(static_cast<Eigen::Index>(shape[1]),
                        static_cast<Eigen::Index>(shape[2]));
    for (Eigen::Index ch = 0; ch < win.rows(); ++ch)
      for (Eigen::Index t = 0; t < win.cols(); ++t) win(ch, t) = flat[off++];
    ws.windows.push_back(std::move(win));
  }
  validate(ws);
  return ws;
}

std::vector<WindowSet> load_windowset_dir(const std::filesystem::path &dir) {
  if (!std::filesystem::is_directory(dir))
    throw DataError("load_windowset_dir: " + dir.string() +
                    " is not a directory");
  std::vector<std::filesystem::path> paths;
  for (const auto &entry : std::filesystem::directory_iterator(dir))
    if (entry.path().extension() == ".json") paths.push_back(entry.path());
  std::sort(paths.begin(), paths.end());
  std::vector<WindowSet> out;
  for (const auto &p : paths) out.push_back(load_windowset(p));
  if (out.empty())
    throw DataError("load_windowset_dir: no window sets in " + dir.string());
  return out;
}

}  // namespace iflf
