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

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "haraudit/dataset_io.hpp"
#include "haraudit/ingest.hpp"
#include "util.hpp"

using namespace haraudit;
using haraudit_test::TempDir;

namespace {

void write_file(const std::filesystem::path& path, const std::string& body) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  out << body;
}

// Two-subject raw capture tree in the optical-marker layout.
void make_lara_root(const std::filesystem::path& root) {
  write_file(root / "subjects.csv",
             "subject_id,age,gender,height_cm,weight_kg,handedness\n"
             "S01,25,male,174,52,right\n"
             "S02,45,female,151,75,\n");
  write_file(root / "classes.txt", "standing\nwalking\ncart\n");
  write_file(root / "recordings" / "S01_0.csv",
             "head_x,head_y,class\n"
             "0.1,0.2,standing\n"
             "0.3,0.4,standing\n"
             "0.5,0.6,walking\n"
             "0.7,0.8,cart\n");
  write_file(root / "recordings" / "S01_1.csv",
             "head_x,head_y,class\n"
             "1.1,1.2,walking\n"
             "1.3,1.4,walking\n");
  write_file(root / "recordings" / "S02_0.csv",
             "head_x,head_y,class\n"
             "2.1,2.2,cart\n"
             "2.3,2.4,standing\n"
             "2.5,2.6,standing\n");
}

std::string ms_row(int index, double base, int n_channels, bool indexed) {
  std::string row = indexed ? std::to_string(index) : std::string();
  for (int c = 0; c < n_channels; ++c) {
    if (!row.empty() || indexed || c > 0) row += ",";
    row += std::to_string(base + 0.01 * c);
  }
  return row + "\n";
}

// Device-motion tree: 12 raw channels including the gravity triplet, with
// the exporter's unnamed leading index column.
void make_motionsense_root(const std::filesystem::path& root) {
  write_file(root / "data_subjects_info.csv",
             "code,weight,height,age,gender\n"
             "1,84,180,41,1\n"
             "2,60,161,30,0\n");
  const std::string header =
      ",attitude.roll,attitude.pitch,attitude.yaw,"
      "gravity.x,gravity.y,gravity.z,"
      "rotationRate.x,rotationRate.y,rotationRate.z,"
      "userAcceleration.x,userAcceleration.y,userAcceleration.z\n";
  auto body = [&](double base, int frames) {
    std::string s = header;
    for (int f = 0; f < frames; ++f) s += ms_row(f, base + f, 12, true);
    return s;
  };
  write_file(root / "A_DeviceMotion_data" / "dws_1" / "sub_1.csv",
             body(0.0, 4));
  write_file(root / "A_DeviceMotion_data" / "dws_1" / "sub_2.csv",
             body(10.0, 3));
  write_file(root / "A_DeviceMotion_data" / "wlk_7" / "sub_1.csv",
             body(20.0, 5));
}

}  // namespace

TEST_SUITE("ingest") {

TEST_CASE("raw optical-marker trees parse into canonical form") {
  TempDir tmp("lara");
  make_lara_root(tmp.path());
  const auto ds = ingest_lara_omocap(tmp.path());

  CHECK(ds.sampling_rate_hz == 200.0);
  CHECK(ds.channels == std::vector<std::string>{"head_x", "head_y"});
  CHECK(ds.class_names ==
        std::vector<std::string>{"standing", "walking", "cart"});
  REQUIRE(ds.subjects.size() == 2);
  CHECK(ds.subjects[0].id == "S01");
  CHECK(ds.subjects[0].age == 25);
  CHECK(ds.subjects[0].gender == Gender::male);
  CHECK(ds.subjects[0].height_cm == 174.0);
  CHECK(ds.subjects[0].weight_kg == 52.0);
  REQUIRE(ds.subjects[0].handedness.has_value());
  CHECK(*ds.subjects[0].handedness == Handedness::right);
  CHECK_FALSE(ds.subjects[1].handedness.has_value());  // blank cell

  REQUIRE(ds.recordings.size() == 3);
  CHECK(ds.recordings[0].subject_id == "S01");
  CHECK(ds.recordings[0].frames == 4);
  CHECK(ds.recordings[0].labels == std::vector<int>{0, 0, 1, 2});
  CHECK(ds.recordings[1].frames == 2);
  CHECK(ds.recordings[1].labels == std::vector<int>{1, 1});
  CHECK(ds.recordings[2].subject_id == "S02");
  CHECK(ds.recordings[2].labels == std::vector<int>{2, 0, 0});
  CHECK(ds.recordings[2].at(0, 0) == doctest::Approx(2.1));
  CHECK(ds.recordings[2].at(1, 1) == doctest::Approx(2.4));
}

TEST_CASE("optical-marker parsing failures carry precise codes") {
  TempDir tmp("larabad");

  SUBCASE("missing subjects.csv") {
    write_file(tmp / "classes.txt", "standing\n");
    try {
      ingest_lara_omocap(tmp.path());
      FAIL("expected IngestError");
    } catch (const IngestError& e) {
      CHECK(e.code() == IngestError::Code::missing_meta);
    }
  }
  SUBCASE("missing classes.txt") {
    make_lara_root(tmp.path());
    std::filesystem::remove(tmp / "classes.txt");
    try {
      ingest_lara_omocap(tmp.path());
      FAIL("expected IngestError");
    } catch (const IngestError& e) {
      CHECK(e.code() == IngestError::Code::missing_meta);
    }
  }
  SUBCASE("unknown activity name") {
    make_lara_root(tmp.path());
    write_file(tmp / "recordings" / "S02_1.csv",
               "head_x,head_y,class\n1,2,flying\n");
    try {
      ingest_lara_omocap(tmp.path());
      FAIL("expected IngestError");
    } catch (const IngestError& e) {
      CHECK(e.code() == IngestError::Code::unknown_label);
    }
  }
  SUBCASE("recording for an unlisted subject") {
    make_lara_root(tmp.path());
    write_file(tmp / "recordings" / "S09_0.csv",
               "head_x,head_y,class\n1,2,standing\n");
    try {
      ingest_lara_omocap(tmp.path());
      FAIL("expected IngestError");
    } catch (const IngestError& e) {
      CHECK(e.code() == IngestError::Code::unknown_subject);
    }
  }
  SUBCASE("channel drift between recordings") {
    make_lara_root(tmp.path());
    write_file(tmp / "recordings" / "S02_1.csv",
               "head_x,head_z,class\n1,2,standing\n");
    try {
      ingest_lara_omocap(tmp.path());
      FAIL("expected IngestError");
    } catch (const IngestError& e) {
      CHECK(e.code() == IngestError::Code::channel_mismatch);
    }
  }
  SUBCASE("no recordings at all") {
    make_lara_root(tmp.path());
    std::filesystem::remove_all(tmp / "recordings");
    try {
      ingest_lara_omocap(tmp.path());
      FAIL("expected IngestError");
    } catch (const IngestError& e) {
      CHECK(e.code() == IngestError::Code::empty_dataset);
    }
  }
  SUBCASE("subjects.csv missing a required column") {
    make_lara_root(tmp.path());
    write_file(tmp / "subjects.csv",
               "subject_id,age,gender,height_cm\nS01,25,male,174\n");
    try {
      ingest_lara_omocap(tmp.path());
      FAIL("expected IngestError");
    } catch (const IngestError& e) {
      CHECK(e.code() == IngestError::Code::bad_format);
    }
  }
}

TEST_CASE("device-motion trees parse with fixed class order") {
  TempDir tmp("ms");
  make_motionsense_root(tmp.path());
  const auto ds = ingest_motionsense(tmp.path());

  CHECK(ds.sampling_rate_hz == 50.0);
  CHECK(ds.class_names ==
        std::vector<std::string>{"dws", "ups", "sit", "std", "wlk", "jog"});
  REQUIRE(ds.subjects.size() == 2);
  CHECK(ds.subjects[0].id == "sub_1");
  CHECK(ds.subjects[0].gender == Gender::male);
  CHECK(ds.subjects[0].age == 41);
  CHECK(ds.subjects[1].gender == Gender::female);

  // Gravity dropped: the nine standard channels remain, in canonical order.
  CHECK(ds.channels == motionsense_default_channels());

  REQUIRE(ds.recordings.size() == 3);
  // sub_1 first (info order), its folders in name order: dws_1 then wlk_7.
  CHECK(ds.recordings[0].subject_id == "sub_1");
  CHECK(ds.recordings[0].frames == 4);
  CHECK(ds.recordings[0].labels == std::vector<int>{0, 0, 0, 0});
  CHECK(ds.recordings[1].subject_id == "sub_1");
  CHECK(ds.recordings[1].labels == std::vector<int>{4, 4, 4, 4, 4});
  CHECK(ds.recordings[2].subject_id == "sub_2");
  CHECK(ds.recordings[2].frames == 3);

  // Channel selection really skipped the gravity columns: attitude.roll is
  // raw column 0 and rotationRate.x raw column 6 of the 12.
  CHECK(ds.recordings[0].at(0, 0) == doctest::Approx(0.0));
  CHECK(ds.recordings[0].at(0, 3) == doctest::Approx(0.06));
  CHECK(ds.recordings[0].at(1, 0) == doctest::Approx(1.0));
}

TEST_CASE("device-motion parsing failures carry precise codes") {
  TempDir tmp("msbad");

  SUBCASE("gender outside {0, 1}") {
    make_motionsense_root(tmp.path());
    write_file(tmp / "data_subjects_info.csv",
               "code,weight,height,age,gender\n1,84,180,41,2\n");
    try {
      ingest_motionsense(tmp.path());
      FAIL("expected IngestError");
    } catch (const IngestError& e) {
      CHECK(e.code() == IngestError::Code::bad_format);
    }
  }
  SUBCASE("unknown activity folder") {
    make_motionsense_root(tmp.path());
    write_file(tmp / "A_DeviceMotion_data" / "fly_1" / "sub_1.csv",
               ",attitude.roll\n0,1\n");
    try {
      ingest_motionsense(tmp.path());
      FAIL("expected IngestError");
    } catch (const IngestError& e) {
      CHECK(e.code() == IngestError::Code::unknown_label);
    }
  }
  SUBCASE("file for an unlisted subject") {
    make_motionsense_root(tmp.path());
    write_file(tmp / "A_DeviceMotion_data" / "dws_1" / "sub_9.csv",
               ",attitude.roll\n0,1\n");
    try {
      ingest_motionsense(tmp.path());
      FAIL("expected IngestError");
    } catch (const IngestError& e) {
      CHECK(e.code() == IngestError::Code::unknown_subject);
    }
  }
  SUBCASE("missing info file") {
    try {
      ingest_motionsense(tmp.path());
      FAIL("expected IngestError");
    } catch (const IngestError& e) {
      CHECK(e.code() == IngestError::Code::missing_meta);
    }
  }
}

TEST_CASE("files without the index column also parse") {
  TempDir tmp("msnoidx");
  write_file(tmp / "data_subjects_info.csv",
             "code,weight,height,age,gender\n1,84,180,41,1\n");
  write_file(tmp / "A_DeviceMotion_data" / "sit_1" / "sub_1.csv",
             "attitude.roll,attitude.pitch\n0.5,0.6\n0.7,0.8\n");
  const auto ds = ingest_motionsense(tmp.path());
  REQUIRE(ds.recordings.size() == 1);
  CHECK(ds.channels ==
        std::vector<std::string>{"attitude.roll", "attitude.pitch"});
  CHECK(ds.recordings[0].frames == 2);
  CHECK(ds.recordings[0].labels == std::vector<int>{2, 2});
  CHECK(ds.recordings[0].at(1, 1) == doctest::Approx(0.8));
}

TEST_CASE("ingest options subset, reorder, and decimate") {
  TempDir tmp("opts");
  make_lara_root(tmp.path());

  IngestOptions opt;
  opt.channels = {"head_y", "head_x"};  // reorder
  const auto ds = ingest_lara_omocap(tmp.path(), opt);
  CHECK(ds.channels == std::vector<std::string>{"head_y", "head_x"});
  CHECK(ds.recordings[0].at(0, 0) == doctest::Approx(0.2));
  CHECK(ds.recordings[0].at(0, 1) == doctest::Approx(0.1));

  IngestOptions down;
  down.downsample = 2;
  const auto dd = ingest_lara_omocap(tmp.path(), down);
  CHECK(dd.sampling_rate_hz == 100.0);
  CHECK(dd.recordings[0].frames == 2);  // frames 0 and 2
  CHECK(dd.recordings[0].labels == std::vector<int>{0, 1});

  IngestOptions bad;
  bad.channels = {"nope"};
  CHECK_THROWS_AS(ingest_lara_omocap(tmp.path(), bad), ArgumentError);
}

TEST_CASE("source kinds parse and dispatch") {
  CHECK(parse_source_kind("lara_omocap") == SourceKind::lara_omocap);
  CHECK(parse_source_kind("motionsense") == SourceKind::motionsense);
  CHECK(parse_source_kind("canonical") == SourceKind::canonical);
  CHECK_THROWS_AS(parse_source_kind("usb"), ArgumentError);

  TempDir raw("dispatch");
  make_lara_root(raw.path());
  const auto ds = ingest(raw.path(), SourceKind::lara_omocap);

  TempDir canon("canon");
  save_dataset(ds, canon.path());
  const auto back = ingest(canon.path(), SourceKind::canonical);
  REQUIRE(back.recordings.size() == ds.recordings.size());
  for (std::size_t i = 0; i < ds.recordings.size(); ++i)
    CHECK(back.recordings[i].samples == ds.recordings[i].samples);
}

}  // TEST_SUITE
