// Copyright 2026 The har-audit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "haraudit/csv.hpp"
#include "haraudit/dataset_io.hpp"
#include "haraudit/rng.hpp"
#include "haraudit/types.hpp"
#include "oracles.hpp"
#include "util.hpp"

using namespace haraudit;
using haraudit_test::TempDir;

namespace {

// Small two-subject dataset exercising every canonical field, including the
// optional handedness and multiple recordings per subject.
LabeledDataset make_dataset() {
  LabeledDataset ds;
  ds.name = "toy";
  ds.sampling_rate_hz = 50.0;
  ds.channels = {"acc_x", "acc_y"};
  ds.class_names = {"sit", "walk", "run"};
  SubjectProfile a{"alpha", 23, Gender::female, 161.5, 55.25, Handedness::left};
  SubjectProfile b{"beta", 40, Gender::male, 183.0, 92.0, std::nullopt};
  ds.subjects = {a, b};

  Rng rng(7);
  for (int r = 0; r < 3; ++r) {
    Recording rec;
    rec.subject_id = r < 2 ? "alpha" : "beta";
    rec.frames = 5 + r;
    rec.channels = 2;
    for (std::size_t f = 0; f < rec.frames; ++f) {
      for (std::size_t c = 0; c < 2; ++c)
        rec.samples.push_back(static_cast<float>(rng.normal()));
      rec.labels.push_back(static_cast<int>(rng.uniform_index(3)));
    }
    ds.recordings.push_back(rec);
  }
  ds.validate();
  return ds;
}

}  // namespace

TEST_SUITE("types_io") {

TEST_CASE("enum parsing round-trips and rejects junk") {
  CHECK(parse_gender("female") == Gender::female);
  CHECK(parse_gender("M") == Gender::male);
  CHECK(parse_handedness("left") == Handedness::left);
  CHECK(std::string(to_string(Gender::male)) == "male");
  CHECK(std::string(to_string(HeightClass::short_)) == "short");
  CHECK_THROWS_AS(parse_gender("yes"), ArgumentError);
  CHECK_THROWS_AS(parse_handedness(""), ArgumentError);
}

TEST_CASE("validate rejects structural defects") {
  auto ds = make_dataset();
  CHECK_NOTHROW(ds.validate());

  SUBCASE("duplicate subject id") {
    ds.subjects.push_back(ds.subjects[0]);
    CHECK_THROWS_AS(ds.validate(), ArgumentError);
  }
  SUBCASE("recording channel mismatch") {
    ds.recordings[0].channels = 3;
    CHECK_THROWS_AS(ds.validate(), ArgumentError);
  }
  SUBCASE("label out of range") {
    ds.recordings[1].labels[0] = 3;
    CHECK_THROWS_AS(ds.validate(), ArgumentError);
  }
  SUBCASE("unknown recording subject") {
    ds.recordings[2].subject_id = "gamma";
    CHECK_THROWS_AS(ds.validate(), ArgumentError);
  }
  SUBCASE("nonpositive age") {
    ds.subjects[0].age = 0;
    CHECK_THROWS_AS(ds.validate(), ArgumentError);
  }
}

TEST_CASE("downsample keeps frames 0, k, 2k, ...") {
  Recording rec;
  rec.subject_id = "s";
  rec.channels = 2;
  rec.frames = 11;
  for (std::size_t f = 0; f < rec.frames; ++f) {
    rec.samples.push_back(static_cast<float>(f));
    rec.samples.push_back(static_cast<float>(f) + 0.5f);
    rec.labels.push_back(static_cast<int>(f % 3));
  }

  const Recording out = downsample(rec, 4);
  REQUIRE(out.frames == 3);  // frames 0, 4, 8
  CHECK(out.at(0, 0) == 0.0f);
  CHECK(out.at(1, 0) == 4.0f);
  CHECK(out.at(2, 1) == 8.5f);
  CHECK(out.labels == std::vector<int>{0, 1, 2});

  // ceil(frames / k) for every (frames, k) in a grid.
  for (std::size_t frames = 1; frames <= 20; ++frames) {
    Recording r2;
    r2.subject_id = "s";
    r2.channels = 1;
    r2.frames = frames;
    r2.samples.assign(frames, 0.0f);
    r2.labels.assign(frames, 0);
    for (std::size_t k = 1; k <= 6; ++k)
      CHECK(downsample(r2, k).frames == (frames + k - 1) / k);
  }
  CHECK_THROWS_AS(downsample(rec, 0), ArgumentError);
}

TEST_CASE("format_float round-trips binary32 exactly") {
  Rng rng(99);
  for (int i = 0; i < 2000; ++i) {
    float v;
    if (i % 3 == 0)
      v = static_cast<float>(rng.normal(0.0, 1e4));
    else if (i % 3 == 1)
      v = static_cast<float>(rng.uniform(-1e-6, 1e-6));
    else
      v = static_cast<float>(rng.uniform(-1e30, 1e30));
    const std::string s = csv::format_float(v);
    const double back = csv::parse_double(s, "test");
    CHECK(static_cast<float>(back) == v);
  }
}

TEST_CASE("split_line handles empty fields and trimming") {
  CHECK(csv::split_line("a,b,c") == std::vector<std::string>{"a", "b", "c"});
  CHECK(csv::split_line(",x,") == std::vector<std::string>{"", "x", ""});
  CHECK(csv::trim("  pad \t") == "pad");
  CHECK_THROWS_AS(csv::parse_double("12.e.3", "test"), IngestError);
  CHECK_THROWS_AS(csv::parse_long("9x", "test"), IngestError);
}

TEST_CASE("stable_hash is order-sensitive and reproducible") {
  const auto h1 = stable_hash(std::uint64_t{1}, "alpha", 3);
  const auto h2 = stable_hash(std::uint64_t{1}, "alpha", 3);
  CHECK(h1 == h2);
  CHECK(h1 != stable_hash(std::uint64_t{1}, "alpha", 4));
  CHECK(h1 != stable_hash(std::uint64_t{1}, 3, "alpha"));
  CHECK(stable_hash("ab") != stable_hash("a", "b"));
}

TEST_CASE("rng uniform and normal match their distributions") {
  Rng rng(1234);
  const int n = 200000;
  double sum = 0.0, sq = 0.0, lo = 1.0, hi = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    sum += u;
    sq += u * u;
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo >= 0.0);
  CHECK(hi < 1.0);
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(sq / n == doctest::Approx(1.0 / 3.0).epsilon(0.01));

  double nsum = 0.0, nsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    nsum += z;
    nsq += z * z;
  }
  CHECK(nsum / n == doctest::Approx(0.0).epsilon(0.02));
  CHECK(nsq / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("uniform_index is unbiased across a non-power-of-two range") {
  Rng rng(5);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) ++counts[rng.uniform_index(7)];
  for (int c : counts) CHECK(c == doctest::Approx(n / 7.0).epsilon(0.05));
}

TEST_CASE("shuffle is a permutation and seed-stable") {
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  auto a = v, b = v;
  Rng r1(42), r2(42), r3(43);
  r1.shuffle(a);
  r2.shuffle(b);
  CHECK(a == b);
  auto c = v;
  r3.shuffle(c);
  CHECK(a != c);
  std::sort(a.begin(), a.end());
  CHECK(a == v);
}

TEST_CASE("dataset save/load round-trips field for field") {
  const auto ds = make_dataset();
  TempDir tmp("roundtrip");
  save_dataset(ds, tmp.path());
  const LabeledDataset back = load_dataset(tmp.path());

  CHECK(back.name == ds.name);
  CHECK(back.sampling_rate_hz == ds.sampling_rate_hz);
  CHECK(back.channels == ds.channels);
  CHECK(back.class_names == ds.class_names);
  REQUIRE(back.subjects.size() == ds.subjects.size());
  for (std::size_t i = 0; i < ds.subjects.size(); ++i) {
    CHECK(back.subjects[i].id == ds.subjects[i].id);
    CHECK(back.subjects[i].age == ds.subjects[i].age);
    CHECK(back.subjects[i].gender == ds.subjects[i].gender);
    CHECK(back.subjects[i].height_cm == ds.subjects[i].height_cm);
    CHECK(back.subjects[i].weight_kg == ds.subjects[i].weight_kg);
    CHECK(back.subjects[i].handedness == ds.subjects[i].handedness);
  }
  REQUIRE(back.recordings.size() == ds.recordings.size());
  for (std::size_t i = 0; i < ds.recordings.size(); ++i) {
    CHECK(back.recordings[i].subject_id == ds.recordings[i].subject_id);
    CHECK(back.recordings[i].frames == ds.recordings[i].frames);
    CHECK(back.recordings[i].labels == ds.recordings[i].labels);
    CHECK(back.recordings[i].samples == ds.recordings[i].samples);
  }
}

TEST_CASE("load_dataset rejects malformed roots") {
  TempDir tmp("badroot");

  SUBCASE("missing meta.json") {
    CHECK_THROWS_WITH_AS(load_dataset(tmp.path()),
                         doctest::Contains("meta.json"), IngestError);
    try {
      load_dataset(tmp.path());
    } catch (const IngestError& e) {
      CHECK(e.code() == IngestError::Code::missing_meta);
    }
  }

  SUBCASE("meta without recordings") {
    save_dataset(make_dataset(), tmp.path());
    std::filesystem::remove_all(tmp.path() / "recordings");
    try {
      load_dataset(tmp.path());
      FAIL("expected IngestError");
    } catch (const IngestError& e) {
      CHECK(e.code() == IngestError::Code::empty_dataset);
    }
  }

  SUBCASE("header disagrees with channels") {
    save_dataset(make_dataset(), tmp.path());
    const auto file = tmp.path() / "recordings" / "alpha_0.csv";
    std::ifstream in(file);
    std::string header, body, line;
    std::getline(in, header);
    while (std::getline(in, line)) body += line + "\n";
    in.close();
    std::ofstream out(file);
    out << "acc_x,acc_z,label\n" << body;
    out.close();
    try {
      load_dataset(tmp.path());
      FAIL("expected IngestError");
    } catch (const IngestError& e) {
      CHECK(e.code() == IngestError::Code::channel_mismatch);
    }
  }

  SUBCASE("recording for a subject missing from meta") {
    save_dataset(make_dataset(), tmp.path());
    std::ofstream out(tmp.path() / "recordings" / "gamma_0.csv");
    out << "acc_x,acc_y,label\n0,0,0\n";
    out.close();
    try {
      load_dataset(tmp.path());
      FAIL("expected IngestError");
    } catch (const IngestError& e) {
      CHECK(e.code() == IngestError::Code::unknown_subject);
    }
  }

  SUBCASE("label outside the class range") {
    save_dataset(make_dataset(), tmp.path());
    std::ofstream out(tmp.path() / "recordings" / "beta_1.csv",
                      std::ios::trunc);
    out << "acc_x,acc_y,label\n0,0,17\n";
    out.close();
    try {
      load_dataset(tmp.path());
      FAIL("expected IngestError");
    } catch (const IngestError& e) {
      CHECK(e.code() == IngestError::Code::unknown_label);
    }
  }
}

TEST_CASE("recording names split on the last underscore") {
  const auto [sub, k] = detail::parse_recording_name("sub_14_3");
  CHECK(sub == "sub_14");
  CHECK(k == 3);
}

TEST_CASE("fixture pools load as metadata-only roots") {
  const auto lara = load_meta(haraudit_test::data_dir() / "fixtures" / "lara");
  CHECK(lara.subjects.size() == 14);
  CHECK(lara.channels.size() == 18);
  CHECK(lara.class_names.size() == 8);
  CHECK(lara.sampling_rate_hz == 200.0);

  const auto ms =
      load_meta(haraudit_test::data_dir() / "fixtures" / "motionsense");
  CHECK(ms.subjects.size() == 24);
  CHECK(ms.channels.size() == 9);
  CHECK(ms.class_names.size() == 6);
  CHECK(ms.sampling_rate_hz == 50.0);

  const auto both =
      load_meta(haraudit_test::data_dir() / "fixtures" / "combined");
  CHECK(both.subjects.size() == 38);
}

}  // TEST_SUITE
