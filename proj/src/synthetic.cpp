// iflf/synthetic.cpp

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

#include "iflf/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "iflf/common.hpp"
#include "iflf/json_util.hpp"

namespace iflf {

double Waveform::eval(double t) const {
  double v = 0.0;
  for (const auto &s : sins)
    v += s.amp * std::sin(2.0 * std::numbers::pi * s.freq_hz * t + s.phase);
  for (const auto &p : pulses) {
    double frac = std::fmod(t, p.period_s) / p.period_s;
    if (frac < 0.0) frac += 1.0;
    if (frac < p.duty) v += p.amp;
  }
  return v;
}

std::vector<std::vector<Waveform>> default_class_waveforms(int num_classes) {
  const int channels = 6;
  std::vector<std::vector<Waveform>> bank(num_classes);
  for (int c = 0; c < num_classes; ++c) {
    const double f = 0.8 + 0.55 * c;  // fundamentals stay below Nyquist/2 @20Hz
    bank[c].resize(channels);
    for (int j = 0; j < channels; ++j) {
      Waveform &w = bank[c][j];
      w.sins.push_back({f, 1.0 + 0.1 * j, 0.3 * j});
      w.sins.push_back({2.0 * f, 0.35 + 0.05 * ((j + c) % 3),
                        0.15 * j + 0.2 * c});
      if (j >= 3)  // gyro channels carry a slower drift component
        w.sins.push_back({0.5 * f, 0.5, 0.7 + 0.1 * c});
      if (c % 2 == 1) w.pulses.push_back({1.0 / f, 0.3, 0.8});
    }
  }
  return bank;
}

namespace {

void validate_spec(const SyntheticSpec &spec) {
  if (spec.num_domains < 2)
    throw ConfigError("synthetic: num_domains must be >= 2");
  if (spec.num_classes < 2)
    throw ConfigError("synthetic: num_classes must be >= 2");
  if (spec.duration_per_class_s <= 0.0)
    throw ConfigError("synthetic: duration_per_class_s must be positive");
  if (spec.sampling_rate_hz <= 0.0)
    throw ConfigError("synthetic: sampling_rate_hz must be positive");
  if (spec.domain_axis != "subject" && spec.domain_axis != "device")
    throw ConfigError("synthetic: domain_axis must be 'subject' or 'device'");
  if (!spec.perturbations.empty() &&
      static_cast<int>(spec.perturbations.size()) != spec.num_domains)
    throw ConfigError("synthetic: perturbations must have one entry per "
                      "domain or be empty");
  for (const auto &p : spec.perturbations) {
    if (p.noise_std < 0.0)
      throw ConfigError("synthetic: noise_std must be >= 0");
    if (p.time_warp <= 0.0)
      throw ConfigError("synthetic: time_warp must be positive");
  }
  if (!spec.class_waveforms.empty()) {
    if (static_cast<int>(spec.class_waveforms.size()) != spec.num_classes)
      throw ConfigError("synthetic: class_waveforms must cover every class");
    const std::size_t channels = spec.class_waveforms.front().size();
    if (channels == 0 || channels % 3 != 0)
      throw ConfigError("synthetic: channel count must be a positive "
                        "multiple of 3");
    for (const auto &cw : spec.class_waveforms)
      if (cw.size() != channels)
        throw ConfigError("synthetic: ragged class_waveforms");
  }
  for (int c : spec.exempt_classes)
    if (c < 0 || c >= spec.num_classes)
      throw ConfigError("synthetic: exempt class " + std::to_string(c) +
                        " out of range");
  for (const auto &[d, c] : spec.missing) {
    if (d < 0 || d >= spec.num_domains || c < 0 || c >= spec.num_classes)
      throw ConfigError("synthetic: missing pair (" + std::to_string(d) +
                        ", " + std::to_string(c) + ") out of range");
  }
}

bool is_missing(const SyntheticSpec &spec, int domain, int cls) {
  for (const auto &[d, c] : spec.missing)
    if (d == domain && c == cls) return true;
  return false;
}

bool is_exempt(const SyntheticSpec &spec, int cls) {
  return std::find(spec.exempt_classes.begin(), spec.exempt_classes.end(),
                   cls) != spec.exempt_classes.end();
}

std::vector<std::string> default_channel_names(std::size_t channels) {
  static const char *kAxes[3] = {"x", "y", "z"};
  std::vector<std::string> names;
  for (std::size_t j = 0; j < channels; ++j) {
    std::string sensor = (j / 3 == 0)   ? "acc"
                         : (j / 3 == 1) ? "gyro"
                                        : "sensor" + std::to_string(j / 3);
    names.push_back(sensor + "." + kAxes[j % 3]);
  }
  return names;
}

}  // namespace

std::vector<Recording> generate_synthetic(const SyntheticSpec &spec,
                                          std::uint64_t seed) {
  validate_spec(spec);
  const auto bank = spec.class_waveforms.empty()
                        ? default_class_waveforms(spec.num_classes)
                        : spec.class_waveforms;
  const auto channels = bank.front().size();
  const auto samples_per_class = static_cast<std::size_t>(
      std::llround(spec.duration_per_class_s * spec.sampling_rate_hz));
  if (samples_per_class == 0)
    throw ConfigError("synthetic: duration too short for sampling rate");

  std::vector<std::string> class_names;
  for (int c = 0; c < spec.num_classes; ++c)
    class_names.push_back("activity_" + std::to_string(c));

  std::vector<Recording> out;
  for (int k = 0; k < spec.num_domains; ++k) {
    DomainPerturbation pert;
    if (!spec.perturbations.empty()) pert = spec.perturbations[k];
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(k)}));
    const double rot = pert.rotation_deg * std::numbers::pi / 180.0;
    const double cr = std::cos(rot), sr = std::sin(rot);

    Recording rec;
    rec.dataset = "synthetic";
    rec.sampling_rate_hz = spec.sampling_rate_hz;
    rec.channel_names = default_channel_names(channels);
    rec.class_names = class_names;
    if (spec.domain_axis == "subject")
      rec.domain = {"synth" + std::to_string(k), "body"};
    else
      rec.domain = {"wearer", "dev" + std::to_string(k)};

    std::vector<double> row(channels);
    rec.trial_starts.clear();
    std::size_t pos = 0;
    for (int c = 0; c < spec.num_classes; ++c) {
      if (is_missing(spec, k, c)) continue;
      const bool plain = is_exempt(spec, c);
      const double warp = plain ? 1.0 : pert.time_warp;
      const double scale = plain ? 1.0 : pert.amplitude_scale;
      const double bias = plain ? 0.0 : pert.bias;
      const double noise = plain ? 0.0 : pert.noise_std;
      rec.trial_starts.push_back(pos);
      const auto base = rec.samples.rows();
      rec.samples.conservativeResize(
          base + static_cast<Eigen::Index>(samples_per_class),
          static_cast<Eigen::Index>(channels));
      for (std::size_t i = 0; i < samples_per_class; ++i) {
        const double t = static_cast<double>(i) / spec.sampling_rate_hz;
        for (std::size_t j = 0; j < channels; ++j)
          row[j] = scale * bank[c][j].eval(warp * t) + bias;
        if (!plain && pert.rotation_deg != 0.0) {
          for (std::size_t g = 0; g + 2 < channels; g += 3) {
            const double x = row[g], y = row[g + 1];
            row[g] = cr * x - sr * y;
            row[g + 1] = sr * x + cr * y;
          }
        }
        if (noise > 0.0)
          for (std::size_t j = 0; j < channels; ++j)
            row[j] += noise * rng.normal();
        for (std::size_t j = 0; j < channels; ++j)
          rec.samples(base + static_cast<Eigen::Index>(i),
                      static_cast<Eigen::Index>(j)) = row[j];
        rec.timestamps.push_back(static_cast<double>(pos) /
                                 spec.sampling_rate_hz);
        rec.labels.push_back(c);
        ++pos;
      }
    }
    if (pos == 0)
      throw ConfigError("synthetic: domain " + std::to_string(k) +
                        " has every class marked missing");
    validate(rec);
    out.push_back(std::move(rec));
  }
  return out;
}

namespace {

Waveform waveform_from_json(const nlohmann::json &j) {
  check_known_keys(j, {"sins", "pulses"}, "waveform");
  Waveform w;
  for (const auto &s : j.value("sins", nlohmann::json::array())) {
    check_known_keys(s, {"freq_hz", "amp", "phase"}, "sinusoid");
    w.sins.push_back({s.at("freq_hz").get<double>(),
                      s.value("amp", 1.0), s.value("phase", 0.0)});
  }
  for (const auto &p : j.value("pulses", nlohmann::json::array())) {
    check_known_keys(p, {"period_s", "duty", "amp"}, "pulse");
    w.pulses.push_back({p.at("period_s").get<double>(),
                        p.value("duty", 0.3), p.value("amp", 1.0)});
  }
  return w;
}

nlohmann::json waveform_to_json(const Waveform &w) {
  nlohmann::json j;
  j["sins"] = nlohmann::json::array();
  for (const auto &s : w.sins)
    j["sins"].push_back(
        {{"freq_hz", s.freq_hz}, {"amp", s.amp}, {"phase", s.phase}});
  j["pulses"] = nlohmann::json::array();
  for (const auto &p : w.pulses)
    j["pulses"].push_back(
        {{"period_s", p.period_s}, {"duty", p.duty}, {"amp", p.amp}});
  return j;
}

}  // namespace

SyntheticSpec synthetic_spec_from_json(const nlohmann::json &j) {
  check_known_keys(j,
                   {"num_domains", "num_classes", "duration_per_class_s",
                    "sampling_rate_hz", "domain_axis", "class_waveforms",
                    "perturbations", "exempt_classes", "missing"},
                   "synthetic spec");
  SyntheticSpec spec;
  spec.num_domains = j.value("num_domains", spec.num_domains);
  spec.num_classes = j.value("num_classes", spec.num_classes);
  spec.duration_per_class_s =
      j.value("duration_per_class_s", spec.duration_per_class_s);
  spec.sampling_rate_hz = j.value("sampling_rate_hz", spec.sampling_rate_hz);
  spec.domain_axis = j.value("domain_axis", spec.domain_axis);
  if (j.contains("class_waveforms"))
    for (const auto &cw : j.at("class_waveforms")) {
      std::vector<Waveform> per_channel;
      for (const auto &w : cw) per_channel.push_back(waveform_from_json(w));
      spec.class_waveforms.push_back(std::move(per_channel));
    }
  if (j.contains("perturbations"))
    for (const auto &p : j.at("perturbations")) {
      check_known_keys(p,
                       {"amplitude_scale", "bias", "noise_std", "time_warp",
                        "rotation_deg"},
                       "perturbation");
      DomainPerturbation d;
      d.amplitude_scale = p.value("amplitude_scale", d.amplitude_scale);
      d.bias = p.value("bias", d.bias);
      d.noise_std = p.value("noise_std", d.noise_std);
      d.time_warp = p.value("time_warp", d.time_warp);
      d.rotation_deg = p.value("rotation_deg", d.rotation_deg);
      spec.perturbations.push_back(d);
    }
  if (j.contains("exempt_classes"))
    spec.exempt_classes = j.at("exempt_classes").get<std::vector<int>>();
  if (j.contains("missing"))
    for (const auto &m : j.at("missing")) {
      if (!m.is_array() || m.size() != 2)
        throw ConfigError("synthetic: missing entries must be [domain, "
                          "class] pairs");
      spec.missing.emplace_back(m[0].get<int>(), m[1].get<int>());
    }
  validate_spec(spec);
  return spec;
}

nlohmann::json synthetic_spec_to_json(const SyntheticSpec &spec) {
  nlohmann::json j;
  j["num_domains"] = spec.num_domains;
  j["num_classes"] = spec.num_classes;
  j["duration_per_class_s"] = spec.duration_per_class_s;
  j["sampling_rate_hz"] = spec.sampling_rate_hz;
  j["domain_axis"] = spec.domain_axis;
  if (!spec.class_waveforms.empty()) {
    j["class_waveforms"] = nlohmann::json::array();
    for (const auto &cw : spec.class_waveforms) {
      nlohmann::json per_channel = nlohmann::json::array();
      for (const auto &w : cw) per_channel.push_back(waveform_to_json(w));
      j["class_waveforms"].push_back(per_channel);
    }
  }
  if (!spec.perturbations.empty()) {
    j["perturbations"] = nlohmann::json::array();
    for (const auto &p : spec.perturbations)
      j["perturbations"].push_back({{"amplitude_scale", p.amplitude_scale},
                                    {"bias", p.bias},
                                    {"noise_std", p.noise_std},
                                    {"time_warp", p.time_warp},
                                    {"rotation_deg", p.rotation_deg}});
  }
  if (!spec.exempt_classes.empty()) j["exempt_classes"] = spec.exempt_classes;
  if (!spec.missing.empty()) {
    j["missing"] = nlohmann::json::array();
    for (const auto &[d, c] : spec.missing)
      j["missing"].push_back({d, c});
  }
  return j;
}

}  // namespace iflf
