// iflf/tests/test_core.cpp

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

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"

#include "iflf/canonical_io.hpp"
#include "iflf/common.hpp"
#include "iflf/recording.hpp"
#include "iflf/synthetic.hpp"
#include "iflf/tensor_io.hpp"

using namespace iflf;

namespace {

std::filesystem::path temp_dir(const std::string &tag) {
  auto dir = std::filesystem::temp_directory_path() /
             ("iflf_test_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

Recording small_recording() {
  Recording rec;
  rec.domain = {"subj1", "wrist"};
  rec.dataset = "unit";
  rec.channel_names = {"acc.x", "acc.y", "acc.z"};
  rec.class_names = {"walk", "run"};
  rec.sampling_rate_hz = 10.0;
  rec.samples.resize(6, 3);
  for (int i = 0; i < 6; ++i)
    for (int c = 0; c < 3; ++c) rec.samples(i, c) = 0.1 * i + 0.01 * c;
  rec.samples(3, 1) = 1.0 / 3.0;  // awkward doubles must round-trip
  rec.samples(4, 2) = 1e-17;
  rec.samples(5, 0) = -2.5e8;
  rec.timestamps = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  rec.labels = {0, 0, 1, 1, LabelMap::kUnlabeled, 1};
  rec.trial_starts = {0, 3};
  return rec;
}

}  // namespace

TEST_CASE("splitmix64 is deterministic and seed-sensitive") {
  CHECK(splitmix64(42) == splitmix64(42));
  CHECK(splitmix64(42) != splitmix64(43));
}

TEST_CASE("derive_seed separates salt streams") {
  const auto a = derive_seed(7, {1, 2});
  const auto b = derive_seed(7, {2, 1});
  const auto c = derive_seed(8, {1, 2});
  CHECK(a != b);  // salt order matters
  CHECK(a != c);
  CHECK(derive_seed(7, {1, 2}) == a);
}

TEST_CASE("rng streams are reproducible") {
  Rng r1(123), r2(123), r3(124);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 1000; ++i) {
    const auto x = r1.next();
    if (x != r2.next()) all_equal = false;
    if (x != r3.next()) any_diff = true;
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("rng uniform stays in [0,1) and index in range") {
  Rng rng(5);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  for (int i = 0; i < 1000; ++i) CHECK(rng.index(7) < 7);
  for (int i = 0; i < 100; ++i) {
    const double v = rng.uniform(-2.0, 3.0);
    CHECK(v >= -2.0);
    CHECK(v < 3.0);
  }
}

TEST_CASE("rng normal is approximately standard") {
  Rng rng(99);
  const int n = 20000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  CHECK(std::abs(mean) < 0.05);
  CHECK(sd > 0.9);
  CHECK(sd < 1.1);
}

TEST_CASE("rng shuffle permutes deterministically") {
  std::vector<int> v1{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<int> v2 = v1;
  Rng r1(11), r2(11);
  r1.shuffle(v1);
  r2.shuffle(v2);
  CHECK(v1 == v2);
  std::vector<int> sorted = v1;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
}

TEST_CASE("fnv1a64 matches published vectors") {
  CHECK(fnv1a64(nullptr, 0) == 0xcbf29ce484222325ULL);
  const char a = 'a';
  CHECK(fnv1a64(&a, 1) == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("matrix checksum distinguishes contents") {
  Eigen::MatrixXd m1 = Eigen::MatrixXd::Zero(3, 3);
  Eigen::MatrixXd m2 = m1;
  m2(1, 1) = 1e-300;
  CHECK(checksum(m1) == checksum(m1));
  CHECK(checksum(m1) != checksum(m2));
}

TEST_CASE("label map round trip and unknowns") {
  LabelMap map({"walk", "run", "sit"});
  CHECK(map.num_classes() == 3);
  CHECK(map.id_of("run") == 1);
  CHECK(map.id_of("fly") == -1);
  CHECK(map.name_of(2) == "sit");
  CHECK(map.name_of(LabelMap::kUnlabeled) == "unlabeled");
  CHECK_THROWS_AS(LabelMap({"walk", "walk"}), DataError);
  LabelMap grow({"walk"});
  CHECK(grow.intern("run") == 1);
  CHECK(grow.intern("walk") == 0);
}

TEST_CASE("recording validation accepts the good and rejects the bad") {
  Recording rec = small_recording();
  CHECK_NOTHROW(validate(rec));

  SUBCASE("non-monotone timestamps") {
    rec.timestamps[2] = rec.timestamps[1];
    CHECK_THROWS_AS(validate(rec), DataError);
  }
  SUBCASE("label outside vocabulary") {
    rec.labels[0] = 7;
    CHECK_THROWS_AS(validate(rec), DataError);
  }
  SUBCASE("trial_starts must begin at zero") {
    rec.trial_starts = {1, 3};
    CHECK_THROWS_AS(validate(rec), DataError);
  }
  SUBCASE("trial_starts must be strictly increasing") {
    rec.trial_starts = {0, 3, 3};
    CHECK_THROWS_AS(validate(rec), DataError);
  }
  SUBCASE("empty domain") {
    rec.domain.subject_id.clear();
    rec.domain.device_id.clear();
    CHECK_THROWS_AS(validate(rec), DataError);
  }
  SUBCASE("length mismatch") {
    rec.labels.pop_back();
    CHECK_THROWS_AS(validate(rec), DataError);
  }
}

TEST_CASE("segments follow trial starts") {
  const Recording rec = small_recording();
  const auto segs = rec.segments();
  REQUIRE(segs.size() == 2);
  CHECK(segs[0] == std::pair<std::size_t, std::size_t>{0, 3});
  CHECK(segs[1] == std::pair<std::size_t, std::size_t>{3, 6});
}

TEST_CASE("present_classes lists labeled ids only") {
  const auto present = present_classes(small_recording());
  CHECK(present == std::vector<int>{0, 1});
}

TEST_CASE("canonical io round trips exactly") {
  const auto dir = temp_dir("canon");
  const Recording rec = small_recording();
  const auto path = write_canonical(rec, dir, "subj1__wrist");
  const Recording back = read_canonical(path);

  CHECK(back.domain == rec.domain);
  CHECK(back.dataset == rec.dataset);
  CHECK(back.channel_names == rec.channel_names);
  CHECK(back.class_names == rec.class_names);
  CHECK(back.sampling_rate_hz == rec.sampling_rate_hz);
  CHECK(back.trial_starts == rec.trial_starts);
  CHECK(back.labels == rec.labels);
  REQUIRE(back.samples.rows() == rec.samples.rows());
  CHECK((back.samples - rec.samples).cwiseAbs().maxCoeff() == 0.0);
  for (std::size_t i = 0; i < rec.timestamps.size(); ++i)
    CHECK(back.timestamps[i] == rec.timestamps[i]);
  std::filesystem::remove_all(dir);
}

TEST_CASE("write_canonical_all disambiguates same-domain parts") {
  const auto dir = temp_dir("canon_all");
  Recording a = small_recording();
  Recording b = small_recording();
  b.samples.array() += 1.0;
  const auto paths = write_canonical_all({a, b}, dir);
  REQUIRE(paths.size() == 2);
  CHECK(paths[0] != paths[1]);
  const auto loaded = read_canonical_dir(dir);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].domain == loaded[1].domain);
  std::filesystem::remove_all(dir);
}

TEST_CASE("tensor io round trips and checks sizes") {
  const auto dir = temp_dir("tensor");
  const std::vector<double> values{0.0, -1.5, 1.0 / 3.0, 1e-308, 2.5e17};
  write_doubles(dir / "t.bin", values);
  const auto back = read_doubles(dir / "t.bin", values.size());
  CHECK(back == values);
  CHECK_THROWS_AS(read_doubles(dir / "t.bin", 4), DataError);
  CHECK_THROWS_AS(read_doubles(dir / "missing.bin", 4), DataError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("synthetic generation is bitwise deterministic") {
  SyntheticSpec spec;
  spec.num_domains = 3;
  spec.num_classes = 3;
  spec.duration_per_class_s = 4.0;
  spec.perturbations = {{1.0, 0.0, 0.2, 1.0, 0.0},
                        {1.2, 0.1, 0.2, 1.1, 10.0},
                        {0.8, -0.1, 0.2, 0.9, -10.0}};
  const auto a = generate_synthetic(spec, 77);
  const auto b = generate_synthetic(spec, 77);
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK((a[k].samples - b[k].samples).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a[k].labels == b[k].labels);
  }
  const auto c = generate_synthetic(spec, 78);
  CHECK((a[0].samples - c[0].samples).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("identical noiseless perturbations give bitwise equal domains") {
  SyntheticSpec spec;
  spec.num_domains = 2;
  spec.num_classes = 2;
  spec.duration_per_class_s = 3.0;
  spec.perturbations = {{1.1, 0.1, 0.0, 1.05, 5.0}, {1.1, 0.1, 0.0, 1.05, 5.0}};
  const auto recs = generate_synthetic(spec, 5);
  REQUIRE(recs.size() == 2);
  CHECK((recs[0].samples - recs[1].samples).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("exempt classes ignore domain perturbations") {
  SyntheticSpec spec;
  spec.num_domains = 2;
  spec.num_classes = 2;
  spec.duration_per_class_s = 3.0;
  spec.perturbations = {{1.5, 0.4, 0.0, 1.2, 20.0}, {0.7, -0.3, 0.0, 0.8, -15.0}};
  spec.exempt_classes = {0};
  const auto recs = generate_synthetic(spec, 5);
  const auto n = static_cast<Eigen::Index>(3.0 * spec.sampling_rate_hz);
  // class 0 occupies the first trial in both domains
  CHECK((recs[0].samples.topRows(n) - recs[1].samples.topRows(n))
            .cwiseAbs()
            .maxCoeff() == 0.0);
  // class 1 differs
  CHECK((recs[0].samples.bottomRows(n) - recs[1].samples.bottomRows(n))
            .cwiseAbs()
            .maxCoeff() > 0.1);
}

TEST_CASE("missing pairs drop classes without disturbing other domains") {
  SyntheticSpec spec;
  spec.num_domains = 3;
  spec.num_classes = 3;
  spec.duration_per_class_s = 2.0;
  spec.perturbations = {{1.0, 0.0, 0.3, 1.0, 0.0},
                        {1.1, 0.0, 0.3, 1.0, 0.0},
                        {0.9, 0.0, 0.3, 1.0, 0.0}};
  const auto full = generate_synthetic(spec, 9);
  spec.missing = {{1, 2}};
  const auto partial = generate_synthetic(spec, 9);

  std::set<int> d1_classes(partial[1].labels.begin(), partial[1].labels.end());
  CHECK(d1_classes == std::set<int>{0, 1});
  CHECK((full[0].samples - partial[0].samples).cwiseAbs().maxCoeff() == 0.0);
  CHECK((full[2].samples - partial[2].samples).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("synthetic spec validation rejects bad input") {
  SyntheticSpec spec;
  SUBCASE("too few domains") {
    spec.num_domains = 1;
    CHECK_THROWS_AS(generate_synthetic(spec, 1), ConfigError);
  }
  SUBCASE("bad axis") {
    spec.domain_axis = "planet";
    CHECK_THROWS_AS(generate_synthetic(spec, 1), ConfigError);
  }
  SUBCASE("negative noise") {
    spec.perturbations.assign(static_cast<std::size_t>(spec.num_domains),
                              DomainPerturbation{});
    spec.perturbations[0].noise_std = -1.0;
    CHECK_THROWS_AS(generate_synthetic(spec, 1), ConfigError);
  }
  SUBCASE("missing pair out of range") {
    spec.missing = {{0, 99}};
    CHECK_THROWS_AS(generate_synthetic(spec, 1), ConfigError);
  }
  SUBCASE("every class missing in one domain") {
    spec.num_classes = 2;
    spec.missing = {{0, 0}, {0, 1}};
    CHECK_THROWS_AS(generate_synthetic(spec, 1), ConfigError);
  }
}

TEST_CASE("synthetic spec json round trips and rejects unknown keys") {
  SyntheticSpec spec;
  spec.num_domains = 4;
  spec.num_classes = 3;
  spec.exempt_classes = {1};
  spec.missing = {{2, 0}};
  spec.perturbations.assign(4, DomainPerturbation{});
  spec.perturbations[1].time_warp = 1.2;
  const auto j = synthetic_spec_to_json(spec);
  const SyntheticSpec back = synthetic_spec_from_json(j);
  CHECK(back.num_domains == spec.num_domains);
  CHECK(back.num_classes == spec.num_classes);
  CHECK(back.exempt_classes == spec.exempt_classes);
  CHECK(back.missing == spec.missing);
  CHECK(back.perturbations[1].time_warp == 1.2);

  auto bad = j;
  bad["num_domians"] = 3;
  CHECK_THROWS_AS(synthetic_spec_from_json(bad), ConfigError);
}

TEST_CASE("synthetic domain axis controls the domain id") {
  SyntheticSpec spec;
  spec.num_domains = 2;
  spec.num_classes = 2;
  spec.duration_per_class_s = 2.0;
  auto recs = generate_synthetic(spec, 3);
  CHECK(recs[0].domain.subject_id == "synth0");
  CHECK(recs[1].domain.subject_id == "synth1");
  spec.domain_axis = "device";
  recs = generate_synthetic(spec, 3);
  CHECK(recs[0].domain.device_id == "dev0");
  CHECK(recs[1].domain.device_id == "dev1");
}
