// iflf/datasets.cpp

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

#include "iflf/datasets.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <tuple>
#include <utility>

#include "iflf/common.hpp"
#include "iflf/mat5.hpp"

namespace iflf {

namespace {

constexpr double kGravity = 9.80665;         // g -> m/s^2
constexpr double kDegToRad = 0.017453292519943295;  // deg/s -> rad/s

const std::vector<std::string> kImuChannels = {
    "acc.x", "acc.y", "acc.z", "gyro.x", "gyro.y", "gyro.z"};

std::vector<std::string> names_of(
    const std::vector<std::pair<int, std::string>> &table) {
  std::vector<std::string> out;
  for (const auto &[code, name] : table) out.push_back(name);
  return out;
}

struct RawRow {
  double ts = 0.0;
  double v[6] = {0, 0, 0, 0, 0, 0};
  int label = 0;
  std::size_t line = 0;  // position in the source file
};

// Assembles kept rows into a Recording, starting a new trial wherever the
// source rows were non-adjacent, the label changed, or time failed to
// advance.
Recording assemble_rows(const std::vector<RawRow> &rows,
                        const DomainId &domain, const std::string &dataset,
                        double rate, const std::vector<std::string> &classes) {
  Recording rec;
  rec.domain = domain;
  rec.dataset = dataset;
  rec.sampling_rate_hz = rate;
  rec.channel_names = kImuChannels;
  rec.class_names = classes;
  rec.samples.resize(static_cast<Eigen::Index>(rows.size()), 6);
  rec.trial_starts.clear();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const RawRow &r = rows[i];
    if (i == 0 || rows[i - 1].line + 1 != r.line ||
        rows[i - 1].label != r.label || rows[i - 1].ts >= r.ts) {
      rec.trial_starts.push_back(i);
    }
    rec.timestamps.push_back(r.ts);
    rec.labels.push_back(r.label);
    for (int c = 0; c < 6; ++c) {
      rec.samples(static_cast<Eigen::Index>(i), c) = r.v[c];
    }
  }
  return rec;
}

}  // namespace

const std::vector<std::pair<int, std::string>> &pamap2_activities() {
  static const std::vector<std::pair<int, std::string>> table = {
      {1, "lying"},           {2, "sitting"},
      {4, "walking"},         {5, "running"},
      {6, "cycling"},         {7, "nordic_walking"},
      {12, "ascending_stairs"}, {13, "descending_stairs"}};
  return table;
}

const std::vector<std::pair<int, std::string>> &uschad_activities() {
  static const std::vector<std::pair<int, std::string>> table = {
      {1, "walking_forward"},   {2, "walking_left"},
      {3, "walking_right"},     {4, "walking_upstairs"},
      {5, "walking_downstairs"}, {6, "running_forward"},
      {7, "jumping_up"},        {8, "sitting"},
      {9, "standing"},          {10, "sleeping"}};
  return table;
}

const std::vector<std::pair<std::string, std::string>> &wisdm_activities() {
  static const std::vector<std::pair<std::string, std::string>> table = {
      {"A", "walking"}, {"B", "jogging"}, {"C", "stairs"},
      {"D", "sitting"}, {"E", "standing"}, {"M", "kicking"},
      {"O", "catch"}};
  return table;
}

std::vector<Recording> load_pamap2(const std::filesystem::path &root,
                                   IngestStats *stats) {
  IngestStats local;
  IngestStats &st = stats != nullptr ? *stats : local;

  std::filesystem::path dir = root;
  if (std::filesystem::is_directory(root / "Protocol")) {
    dir = root / "Protocol";
  }
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(dir)) {
    for (const auto &entry : std::filesystem::directory_iterator(dir)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("subject", 0) == 0 &&
          entry.path().extension() == ".dat") {
        files.push_back(entry.path());
      }
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    throw DataError("pamap2: no subject*.dat files under " + dir.string());
  }

  // Full published code set; codes outside it count as unknown.
  static const std::set<int> vocabulary = {0,  1,  2,  3,  4,  5,  6,
                                           7,  9,  10, 11, 12, 13, 16,
                                           17, 18, 19, 20, 24};
  std::map<int, int> class_of;
  for (std::size_t i = 0; i < pamap2_activities().size(); ++i) {
    class_of[pamap2_activities()[i].first] = static_cast<int>(i);
  }
  const std::vector<std::string> class_names = names_of(pamap2_activities());

  std::vector<Recording> out;
  for (const auto &file : files) {
    std::ifstream in(file);
    if (!in) throw DataError("pamap2: cannot open " + file.string());
    st.files_read += 1;

    std::vector<RawRow> rows;
    std::string line;
    std::size_t line_no = 0;
    double prev_ts = -std::numeric_limits<double>::infinity();
    while (std::getline(in, line)) {
      const std::size_t this_line = line_no++;
      // Columns: timestamp, activity id, heart rate, then three 17-column
      // IMU blocks (hand, chest, ankle).  The ankle block starts at column
      // 38 (1-based): temperature, wide-range accelerometer, low-range
      // accelerometer, gyroscope, magnetometer, orientation.
      const char *p = line.c_str();
      char *end = nullptr;
      double cols[47];
      bool short_line = false;
      for (int c = 0; c < 47; ++c) {
        cols[c] = std::strtod(p, &end);
        if (end == p) {
          short_line = true;
          break;
        }
        p = end;
      }
      if (short_line) {
        if (!line.empty()) st.malformed_lines += 1;
        continue;
      }
      const double act = cols[1];
      const int code = static_cast<int>(act);
      if (static_cast<double>(code) != act || vocabulary.count(code) == 0) {
        st.unknown_codes += 1;
        continue;
      }
      const auto cls = class_of.find(code);
      if (cls == class_of.end()) continue;  // published, not retained
      RawRow row;
      row.ts = cols[0];
      row.label = cls->second;
      row.line = this_line;
      // Wide-range accelerometer (columns 39-41) and gyroscope (45-47).
      const int src[6] = {38, 39, 40, 44, 45, 46};
      bool bad = false;
      for (int c = 0; c < 6; ++c) {
        row.v[c] = cols[src[c]];
        bad = bad || !std::isfinite(row.v[c]);
      }
      if (bad) {
        st.nan_rows += 1;
        continue;
      }
      if (!std::isfinite(row.ts) || row.ts <= prev_ts) {
        st.malformed_lines += 1;
        continue;
      }
      prev_ts = row.ts;
      rows.push_back(row);
    }
    if (rows.empty()) {
      log_warn("pamap2: " + file.filename().string() +
               " has no retained samples; subject skipped");
      continue;
    }
    const DomainId domain{file.stem().string(), ""};
    Recording rec =
        assemble_rows(rows, domain, "pamap2", 100.0, class_names);
    validate(rec);
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<Recording> load_uschad(const std::filesystem::path &root,
                                   IngestStats *stats) {
  IngestStats local;
  IngestStats &st = stats != nullptr ? *stats : local;

  std::vector<std::pair<int, std::filesystem::path>> subjects;
  if (std::filesystem::is_directory(root)) {
    for (const auto &entry : std::filesystem::directory_iterator(root)) {
      if (!entry.is_directory()) continue;
      const std::string name = entry.path().filename().string();
      if (name.rfind("Subject", 0) != 0) continue;
      const std::string digits = name.substr(7);
      if (digits.empty() ||
          digits.find_first_not_of("0123456789") != std::string::npos) {
        continue;
      }
      subjects.emplace_back(std::stoi(digits), entry.path());
    }
  }
  std::sort(subjects.begin(), subjects.end());
  if (subjects.empty()) {
    throw DataError("uschad: no Subject directories under " + root.string());
  }
  const std::vector<std::string> class_names = names_of(uschad_activities());

  std::vector<Recording> out;
  for (const auto &[num, dir] : subjects) {
    Recording rec;
    rec.domain = DomainId{dir.filename().string(), ""};
    rec.dataset = "uschad";
    rec.sampling_rate_hz = 100.0;
    rec.channel_names = kImuChannels;
    rec.class_names = class_names;
    rec.trial_starts.clear();

    // Trial files are named a<activity>t<trial>.mat.
    std::vector<std::tuple<int, int, std::filesystem::path>> trials;
    for (const auto &entry : std::filesystem::directory_iterator(dir)) {
      const std::string name = entry.path().filename().string();
      if (entry.path().extension() != ".mat" || name.size() < 7 ||
          name[0] != 'a') {
        continue;
      }
      const auto t_at = name.find('t', 1);
      if (t_at == std::string::npos) continue;
      const std::string a_digits = name.substr(1, t_at - 1);
      const std::string t_digits =
          name.substr(t_at + 1, name.size() - 4 - (t_at + 1));
      if (a_digits.empty() || t_digits.empty() ||
          a_digits.find_first_not_of("0123456789") != std::string::npos ||
          t_digits.find_first_not_of("0123456789") != std::string::npos) {
        continue;
      }
      const int activity = std::stoi(a_digits);
      if (activity < 1 ||
          activity > static_cast<int>(uschad_activities().size())) {
        st.unknown_codes += 1;
        log_warn("uschad: unknown activity in " + name + "; file skipped");
        continue;
      }
      trials.emplace_back(activity, std::stoi(t_digits), entry.path());
    }
    std::sort(trials.begin(), trials.end());

    std::vector<Eigen::MatrixXd> blocks;
    std::vector<int> block_labels;
    Eigen::Index total = 0;
    for (const auto &[activity, trial, file] : trials) {
      Eigen::MatrixXd readings;
      try {
        const auto vars = read_mat5(file);
        const auto it = vars.find("sensor_readings");
        if (it == vars.end() || it->second.is_text ||
            it->second.values.cols() != 6) {
          throw DataError("uschad: " + file.filename().string() +
                          " lacks a [N x 6] sensor_readings variable");
        }
        readings = it->second.values;
      } catch (const DataError &e) {
        st.trials_skipped += 1;
        log_warn(std::string("uschad: skipping trial: ") + e.what());
        continue;
      }
      st.files_read += 1;
      // Accelerometer arrives in g, gyroscope in degrees per second.
      readings.leftCols(3) *= kGravity;
      readings.rightCols(3) *= kDegToRad;
      blocks.push_back(std::move(readings));
      block_labels.push_back(activity - 1);
      total += blocks.back().rows();
    }
    if (total == 0) {
      log_warn("uschad: " + rec.domain.subject_id +
               " has no readable trials; subject skipped");
      continue;
    }
    rec.samples.resize(total, 6);
    Eigen::Index at = 0;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      rec.trial_starts.push_back(static_cast<std::size_t>(at));
      for (Eigen::Index r = 0; r < blocks[b].rows(); ++r) {
        bool bad = false;
        for (int c = 0; c < 6; ++c) bad = bad || !std::isfinite(blocks[b](r, c));
        if (bad) {
          st.nan_rows += 1;
          continue;
        }
        rec.samples.row(at) = blocks[b].row(r);
        rec.timestamps.push_back(static_cast<double>(at) / 100.0);
        rec.labels.push_back(block_labels[b]);
        ++at;
      }
      // An all-bad block leaves an empty trial; drop its boundary.
      if (!rec.trial_starts.empty() &&
          rec.trial_starts.back() == static_cast<std::size_t>(at)) {
        rec.trial_starts.pop_back();
      }
    }
    rec.samples.conservativeResize(at, 6);
    if (at == 0) {
      log_warn("uschad: " + rec.domain.subject_id +
               " has no finite samples; subject skipped");
      continue;
    }
    validate(rec);
    out.push_back(std::move(rec));
  }
  return out;
}

namespace {

struct WisdmSample {
  long long ts = 0;
  double v[3] = {0, 0, 0};
};

struct WisdmRun {
  std::string code;
  std::vector<WisdmSample> samples;
};

// Parses one phone sensor file into activity runs.  Runs break where the
// activity code changes in the raw stream, including through dropped codes.
std::vector<WisdmRun> wisdm_runs(const std::filesystem::path &file,
                                 const std::set<std::string> &vocabulary,
                                 const std::set<std::string> &retained,
                                 IngestStats &st) {
  std::ifstream in(file);
  if (!in) throw DataError("wisdm: cannot open " + file.string());
  st.files_read += 1;

  std::vector<WisdmRun> runs;
  std::string last_code;
  bool last_retained = false;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == ';' || line.back() == '\r' ||
                             line.back() == ' ')) {
      line.pop_back();
    }
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 6) {
      st.malformed_lines += 1;
      continue;
    }
    WisdmSample sample;
    try {
      std::size_t used = 0;
      sample.ts = std::stoll(fields[2], &used);
      if (used != fields[2].size()) throw std::invalid_argument("ts");
      for (int c = 0; c < 3; ++c) {
        sample.v[c] = std::stod(fields[3 + static_cast<std::size_t>(c)]);
      }
    } catch (const std::exception &) {
      st.malformed_lines += 1;
      continue;
    }
    if (!std::isfinite(sample.v[0]) || !std::isfinite(sample.v[1]) ||
        !std::isfinite(sample.v[2])) {
      st.nan_rows += 1;
      continue;
    }
    const std::string &code = fields[1];
    if (vocabulary.count(code) == 0) {
      st.unknown_codes += 1;
      last_code.clear();
      continue;
    }
    if (code != last_code) {
      last_code = code;
      last_retained = retained.count(code) != 0;
      if (last_retained) {
        runs.push_back(WisdmRun{code, {}});
      }
    }
    if (!last_retained) continue;
    auto &samples = runs.back().samples;
    if (!samples.empty() && sample.ts <= samples.back().ts) {
      st.malformed_lines += 1;  // time must advance within a run
      continue;
    }
    samples.push_back(sample);
  }
  return runs;
}

// Linear interpolation of a gyroscope run onto accelerometer timestamps,
// clamped at the ends.
void interpolate_gyro(const std::vector<WisdmSample> &gyro,
                      const std::vector<WisdmSample> &accel,
                      std::vector<std::array<double, 3>> *out) {
  out->clear();
  std::size_t j = 0;
  for (const auto &a : accel) {
    while (j + 1 < gyro.size() && gyro[j + 1].ts < a.ts) ++j;
    std::array<double, 3> g{};
    if (a.ts <= gyro.front().ts) {
      for (int c = 0; c < 3; ++c) g[static_cast<std::size_t>(c)] = gyro.front().v[c];
    } else if (a.ts >= gyro.back().ts) {
      for (int c = 0; c < 3; ++c) g[static_cast<std::size_t>(c)] = gyro.back().v[c];
    } else {
      const auto &lo = gyro[j];
      const auto &hi = gyro[j + 1];
      const double w =
          static_cast<double>(a.ts - lo.ts) / static_cast<double>(hi.ts - lo.ts);
      for (int c = 0; c < 3; ++c) {
        g[static_cast<std::size_t>(c)] = lo.v[c] + w * (hi.v[c] - lo.v[c]);
      }
    }
    out->push_back(g);
  }
}

}  // namespace

std::vector<Recording> load_wisdm(const std::filesystem::path &root,
                                  IngestStats *stats) {
  IngestStats local;
  IngestStats &st = stats != nullptr ? *stats : local;

  std::filesystem::path phone;
  for (const auto &candidate :
       {root / "raw" / "phone", root / "phone", root}) {
    if (std::filesystem::is_directory(candidate / "accel")) {
      phone = candidate;
      break;
    }
  }
  if (phone.empty()) {
    throw DataError("wisdm: no phone accel directory under " + root.string());
  }

  std::vector<std::pair<std::string, std::filesystem::path>> accel_files;
  for (const auto &entry :
       std::filesystem::directory_iterator(phone / "accel")) {
    const std::string name = entry.path().filename().string();
    const std::string prefix = "data_";
    const auto mark = name.find("_accel");
    if (name.rfind(prefix, 0) != 0 || mark == std::string::npos ||
        mark <= prefix.size()) {
      continue;
    }
    accel_files.emplace_back(name.substr(prefix.size(), mark - prefix.size()),
                             entry.path());
  }
  std::sort(accel_files.begin(), accel_files.end());
  if (accel_files.empty()) {
    throw DataError("wisdm: no accel data files under " +
                    (phone / "accel").string());
  }

  // Full published code set (18 activities); retained locomotion subset.
  static const std::set<std::string> vocabulary = {
      "A", "B", "C", "D", "E", "F", "G", "H", "I",
      "J", "K", "L", "M", "O", "P", "Q", "R", "S"};
  std::set<std::string> retained;
  std::map<std::string, int> class_of;
  std::vector<std::string> class_names;
  for (const auto &[code, name] : wisdm_activities()) {
    retained.insert(code);
    class_of[code] = static_cast<int>(class_names.size());
    class_names.push_back(name);
  }

  const double rate = 20.0;
  std::vector<Recording> out;
  for (const auto &[subject, accel_path] : accel_files) {
    const auto gyro_path =
        phone / "gyro" / ("data_" + subject + "_gyro_phone.txt");
    const std::vector<WisdmRun> accel_runs =
        wisdm_runs(accel_path, vocabulary, retained, st);
    std::vector<WisdmRun> gyro_runs;
    if (std::filesystem::exists(gyro_path)) {
      gyro_runs = wisdm_runs(gyro_path, vocabulary, retained, st);
    } else {
      log_warn("wisdm: no gyroscope file for subject " + subject);
    }

    Recording rec;
    rec.domain = DomainId{subject, ""};
    rec.dataset = "wisdm";
    rec.sampling_rate_hz = rate;
    rec.channel_names = kImuChannels;
    rec.class_names = class_names;
    rec.trial_starts.clear();

    std::vector<std::array<double, 6>> rows;
    std::vector<int> labels;
    std::vector<std::size_t> starts;
    std::map<std::string, std::size_t> gyro_cursor;
    double offset = 0.0;
    for (const auto &run : accel_runs) {
      if (run.samples.size() < 2) {
        st.segments_skipped += 1;
        continue;
      }
      // Pair with the next unused gyroscope run of the same activity.
      const WisdmRun *gyro = nullptr;
      std::size_t &cursor = gyro_cursor[run.code];
      std::size_t seen = 0;
      for (const auto &g : gyro_runs) {
        if (g.code != run.code) continue;
        if (seen++ < cursor) continue;
        if (g.samples.size() >= 2) gyro = &g;
        break;
      }
      cursor = seen;
      if (gyro == nullptr) {
        st.segments_skipped += 1;
        log_warn("wisdm: subject " + subject + " activity " + run.code +
                 " has no usable gyroscope segment; run skipped");
        continue;
      }
      std::vector<std::array<double, 3>> gi;
      interpolate_gyro(gyro->samples, run.samples, &gi);
      starts.push_back(rows.size());
      const long long t0 = run.samples.front().ts;
      double last = offset;
      for (std::size_t i = 0; i < run.samples.size(); ++i) {
        const auto &a = run.samples[i];
        last = offset + static_cast<double>(a.ts - t0) / 1e9;
        rows.push_back({a.v[0], a.v[1], a.v[2], gi[i][0], gi[i][1], gi[i][2]});
        labels.push_back(class_of.at(run.code));
        rec.timestamps.push_back(last);
      }
      offset = last + 1.0 / rate;
    }
    if (rows.empty()) {
      log_warn("wisdm: subject " + subject + " yielded no samples");
      continue;
    }
    rec.samples.resize(static_cast<Eigen::Index>(rows.size()), 6);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (int c = 0; c < 6; ++c) {
        rec.samples(static_cast<Eigen::Index>(i), c) =
            rows[i][static_cast<std::size_t>(c)];
      }
    }
    rec.labels = labels;
    rec.trial_starts = starts;
    validate(rec);
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace iflf
