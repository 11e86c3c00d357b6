// iflf/synthetic.hpp

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

#ifndef IFLF_SYNTHETIC_HPP_
#define IFLF_SYNTHETIC_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "iflf/recording.hpp"

namespace iflf {

// A class signature is a per-channel mixture of sinusoids and square pulse
// trains evaluated on a continuous time axis.
struct Sinusoid {
  double freq_hz = 1.0;
  double amp = 1.0;
  double phase = 0.0;
};

struct PulseTrain {
  double period_s = 1.0;
  double duty = 0.3;  // fraction of the period spent high, in (0, 1)
  double amp = 1.0;
};

struct Waveform {
  std::vector<Sinusoid> sins;
  std::vector<PulseTrain> pulses;
  double eval(double t) const;
};

// Domain shift knobs.  Identity is {1, 0, 0, 1, 0}.
struct DomainPerturbation {
  double amplitude_scale = 1.0;
  double bias = 0.0;
  double noise_std = 0.0;
  double time_warp = 1.0;     // class waveforms are evaluated at warp * t
  double rotation_deg = 0.0;  // in-plane rotation of each triaxial group
};

struct SyntheticSpec {
  int num_domains = 5;
  int num_classes = 4;
  double duration_per_class_s = 16.0;
  double sampling_rate_hz = 20.0;
  std::string domain_axis = "subject";  // "subject" or "device"
  // [class][channel]; empty selects the built-in bank for 6 channels.
  std::vector<std::vector<Waveform>> class_waveforms;
  std::vector<DomainPerturbation> perturbations;  // size num_domains or empty
  std::vector<int> exempt_classes;   // rendered identically in every domain
  std::vector<std::pair<int, int>> missing;  // (domain, class) pairs to omit
};

SyntheticSpec synthetic_spec_from_json(const nlohmann::json &j);
nlohmann::json synthetic_spec_to_json(const SyntheticSpec &spec);

// Deterministic default signature bank covering num_classes classes over six
// channels (acc.x..gyro.z).  Frequencies are spread so classes stay separable
// after a 10 Hz low-pass at 20 Hz sampling.
std::vector<std::vector<Waveform>> default_class_waveforms(int num_classes);

// One recording per domain, classes concatenated as trials in id order.
// Bitwise deterministic in (spec, seed); each domain owns an independent
// RNG stream so omitting one domain never shifts another's samples.
std::vector<Recording> generate_synthetic(const SyntheticSpec &spec,
                                          std::uint64_t seed);

}  // namespace iflf

#endif  // IFLF_SYNTHETIC_HPP_
