// iflf/canonical_io.cpp

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

#include "iflf/canonical_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace iflf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string &line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

fs::path write_canonical(const Recording &rec, const fs::path &dir,
                         const std::string &stem) {
  validate(rec);
  fs::create_directories(dir);
  const fs::path csv_path = dir / (stem + ".csv");
  const fs::path json_path = dir / (stem + ".json");

  std::ofstream csv(csv_path);
  if (!csv) throw DataError("cannot write " + csv_path.string());
  csv << "timestamp_s";
  for (const auto &c : rec.channel_names) csv << "," << c;
  csv << ",label\n";
  const LabelMap lm = rec.label_map();
  for (Eigen::Index i = 0; i < rec.num_samples(); ++i) {
    csv << fmt_double(rec.timestamps[static_cast<std::size_t>(i)]);
    for (Eigen::Index c = 0; c < rec.num_channels(); ++c)
      csv << "," << fmt_double(rec.samples(i, c));
    csv << "," << lm.name_of(rec.labels[static_cast<std::size_t>(i)]) << "\n";
  }
  csv.close();
  if (!csv) throw DataError("write failed for " + csv_path.string());

  json meta{{"version", 1},
            {"domain",
             {{"subject_id", rec.domain.subject_id},
              {"device_id", rec.domain.device_id}}},
            {"sampling_rate_hz", rec.sampling_rate_hz},
            {"channel_names", rec.channel_names},
            {"class_names", rec.class_names},
            {"trial_starts", rec.trial_starts},
            {"dataset", rec.dataset}};
  std::ofstream js(json_path);
  js << meta.dump(2) << "\n";
  if (!js) throw DataError("write failed for " + json_path.string());
  return csv_path;
}

std::vector<fs::path> write_canonical_all(const std::vector<Recording> &recs,
                                          const fs::path &dir) {
  std::map<std::string, int> counts;
  std::vector<fs::path> out;
  for (const auto &rec : recs) {
    std::string stem = rec.domain.key();
    const int n = counts[stem]++;
    if (n > 0) stem += "__part" + std::to_string(n);
    out.push_back(write_canonical(rec, dir, stem));
  }
  return out;
}

Recording read_canonical(const fs::path &csv_path) {
  fs::path json_path = csv_path;
  json_path.replace_extension(".json");
  std::ifstream js(json_path);
  if (!js)
    throw DataError("missing sidecar metadata: " + json_path.string());
  json meta = json::parse(js, nullptr, true);

  Recording rec;
  rec.domain.subject_id = meta.at("domain").at("subject_id").get<std::string>();
  rec.domain.device_id = meta.at("domain").at("device_id").get<std::string>();
  rec.sampling_rate_hz = meta.at("sampling_rate_hz").get<double>();
  rec.channel_names = meta.at("channel_names").get<std::vector<std::string>>();
  rec.class_names = meta.at("class_names").get<std::vector<std::string>>();
  rec.trial_starts = meta.at("trial_starts").get<std::vector<std::size_t>>();
  rec.dataset = meta.value("dataset", std::string());

  std::ifstream csv(csv_path);
  if (!csv) throw DataError("cannot read " + csv_path.string());
  std::string line;
  if (!std::getline(csv, line))
    throw DataError("empty canonical file: " + csv_path.string());
  const auto header = split_csv_line(line);
  const std::size_t ncols = header.size();
  if (ncols != rec.channel_names.size() + 2)
    throw DataError("canonical header/metadata channel mismatch in " +
                    csv_path.string());

  const LabelMap lm(rec.class_names);
  std::vector<double> ts;
  std::vector<double> values;
  std::vector<int> labels;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != ncols)
      throw DataError("bad column count in " + csv_path.string() + ": " + line);
    ts.push_back(std::stod(fields[0]));
    for (std::size_t c = 1; c + 1 < ncols; ++c)
      values.push_back(std::stod(fields[c]));
    const std::string &name = fields[ncols - 1];
    labels.push_back(name == "unlabeled" ? LabelMap::kUnlabeled
                                         : lm.id_of(name));
  }
  const auto n = ts.size();
  const auto nch = rec.channel_names.size();
  rec.samples.resize(static_cast<Eigen::Index>(n),
                     static_cast<Eigen::Index>(nch));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < nch; ++c)
      rec.samples(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          values[i * nch + c];
  rec.timestamps = std::move(ts);
  rec.labels = std::move(labels);
  validate(rec);
  return rec;
}

std::vector<Recording> read_canonical_dir(const fs::path &dir) {
  if (!fs::is_directory(dir))
    throw DataError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto &e : fs::directory_iterator(dir))
    if (e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<Recording> out;
  out.reserve(files.size());
  for (const auto &f : files) out.push_back(read_canonical(f));
  return out;
}

}  // namespace iflf
