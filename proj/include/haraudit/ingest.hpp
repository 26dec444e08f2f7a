// Copyright 2026 The har-audit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Parsers turning raw dataset layouts into the canonical in-memory form.
//
// lara_omocap (optical marker recordings, 200 Hz):
//   <root>/subjects.csv    header: subject_id,age,gender,height_cm,weight_kg
//                          and optionally handedness
//   <root>/classes.txt     one activity name per line, index order
//   <root>/recordings/<subject>_<k>.csv
//                          header: channel names plus final "class" column;
//                          rows carry numbers plus the activity name
//
// motionsense (smartphone device-motion logs, 50 Hz):
//   <root>/data_subjects_info.csv   header: code,weight,height,age,gender
//                                   (gender 0 = female, 1 = male)
//   <root>/A_DeviceMotion_data/<activity>_<trial>/sub_<code>.csv
//                                   optional unnamed index column, then the
//                                   device-motion channels; the folder's
//                                   activity prefix labels every frame
//
// The motionsense activity codes are dws, ups, sit, std, wlk, jog (fixed
// class order). By default the nine attitude/rotationRate/userAcceleration
// channels are kept and gravity.* dropped; an explicit channel selection
// overrides that.

#ifndef HARAUDIT_INGEST_HPP_
#define HARAUDIT_INGEST_HPP_

#include <algorithm>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "haraudit/csv.hpp"
#include "haraudit/dataset_io.hpp"
#include "haraudit/errors.hpp"
#include "haraudit/types.hpp"

namespace haraudit {

struct IngestOptions {
  std::size_t downsample = 1;               // keep every k-th frame
  std::vector<std::string> channels;        // subset/reorder; empty = default
};

inline constexpr double kLaraSamplingRateHz = 200.0;
inline constexpr double kMotionSenseSamplingRateHz = 50.0;

inline const std::vector<std::string>& motionsense_class_names() {
  static const std::vector<std::string> names = {"dws", "ups", "sit",
                                                 "std", "wlk", "jog"};
  return names;
}

inline const std::vector<std::string>& motionsense_default_channels() {
  static const std::vector<std::string> names = {
      "attitude.roll",     "attitude.pitch",     "attitude.yaw",
      "rotationRate.x",    "rotationRate.y",     "rotationRate.z",
      "userAcceleration.x", "userAcceleration.y", "userAcceleration.z"};
  return names;
}

// Subset and reorder channels by name. Requested names must exist.
inline LabeledDataset select_channels(const LabeledDataset& ds,
                                      const std::vector<std::string>& names) {
  if (names.empty()) return ds;
  std::vector<std::size_t> idx;
  for (const auto& n : names) {
    auto it = std::find(ds.channels.begin(), ds.channels.end(), n);
    if (it == ds.channels.end())
      throw ArgumentError("channel selection: '" + n + "' not in dataset");
    idx.push_back(static_cast<std::size_t>(it - ds.channels.begin()));
  }
  LabeledDataset out = ds;
  out.channels = names;
  out.recordings.clear();
  for (const auto& rec : ds.recordings) {
    Recording nr;
    nr.subject_id = rec.subject_id;
    nr.frames = rec.frames;
    nr.channels = idx.size();
    nr.labels = rec.labels;
    nr.samples.reserve(nr.frames * nr.channels);
    for (std::size_t f = 0; f < rec.frames; ++f)
      for (std::size_t c : idx) nr.samples.push_back(rec.at(f, c));
    out.recordings.push_back(std::move(nr));
  }
  return out;
}

inline LabeledDataset downsample_dataset(const LabeledDataset& ds,
                                         std::size_t k) {
  if (k == 0) throw ArgumentError("downsample factor must be positive");
  if (k == 1) return ds;
  LabeledDataset out = ds;
  out.sampling_rate_hz = ds.sampling_rate_hz / static_cast<double>(k);
  for (auto& rec : out.recordings) rec = downsample(rec, k);
  return out;
}

namespace detail {

inline std::size_t require_column(const std::vector<std::string>& header,
                                  const std::string& name,
                                  const std::string& file) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end())
    throw IngestError(IngestError::Code::bad_format,
                      file + ": missing required column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

inline LabeledDataset apply_options(LabeledDataset ds,
                                    const IngestOptions& opt) {
  if (!opt.channels.empty()) ds = select_channels(ds, opt.channels);
  if (opt.downsample > 1) ds = downsample_dataset(ds, opt.downsample);
  ds.validate();
  return ds;
}

}  // namespace detail

inline LabeledDataset ingest_lara_omocap(const std::filesystem::path& root,
                                         const IngestOptions& opt = {}) {
  const auto subjects_path = root / "subjects.csv";
  const auto classes_path = root / "classes.txt";
  if (!std::filesystem::exists(subjects_path))
    throw IngestError(IngestError::Code::missing_meta,
                      "missing " + subjects_path.string());
  if (!std::filesystem::exists(classes_path))
    throw IngestError(IngestError::Code::missing_meta,
                      "missing " + classes_path.string());

  LabeledDataset ds;
  ds.name = root.filename().empty() ? std::string("lara_omocap")
                                    : root.filename().string();
  ds.sampling_rate_hz = kLaraSamplingRateHz;

  {
    std::ifstream in(classes_path);
    std::string line;
    while (std::getline(in, line)) {
      const std::string name = csv::trim(line);
      if (!name.empty()) ds.class_names.push_back(name);
    }
    if (ds.class_names.empty())
      throw IngestError(IngestError::Code::bad_format,
                        classes_path.string() + ": no class names");
  }

  {
    auto rows = csv::read_file(subjects_path.string());
    if (rows.size() < 2)
      throw IngestError(IngestError::Code::bad_format,
                        subjects_path.string() + ": no subject rows");
    const auto& header = rows.front();
    const auto file = subjects_path.string();
    const std::size_t c_id = detail::require_column(header, "subject_id", file);
    const std::size_t c_age = detail::require_column(header, "age", file);
    const std::size_t c_gender = detail::require_column(header, "gender", file);
    const std::size_t c_height = detail::require_column(header, "height_cm", file);
    const std::size_t c_weight = detail::require_column(header, "weight_kg", file);
    auto hand_it = std::find(header.begin(), header.end(), "handedness");
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const auto& row = rows[r];
      const std::string where = file + " row " + std::to_string(r + 1);
      if (row.size() != header.size())
        throw IngestError(IngestError::Code::bad_format,
                          where + ": wrong column count");
      SubjectProfile s;
      s.id = row[c_id];
      s.age = static_cast<int>(csv::parse_long(row[c_age], where));
      try {
        s.gender = parse_gender(row[c_gender]);
      } catch (const ArgumentError& e) {
        throw IngestError(IngestError::Code::bad_format, where + ": " + e.what());
      }
      s.height_cm = csv::parse_double(row[c_height], where);
      s.weight_kg = csv::parse_double(row[c_weight], where);
      if (hand_it != header.end()) {
        const auto& hv = row[static_cast<std::size_t>(hand_it - header.begin())];
        if (!hv.empty()) {
          try {
            s.handedness = parse_handedness(hv);
          } catch (const ArgumentError& e) {
            throw IngestError(IngestError::Code::bad_format,
                              where + ": " + e.what());
          }
        }
      }
      ds.subjects.push_back(std::move(s));
    }
  }

  std::map<std::string, int> class_index;
  for (std::size_t k = 0; k < ds.class_names.size(); ++k)
    class_index[ds.class_names[k]] = static_cast<int>(k);
  std::map<std::string, std::size_t> subject_pos;
  for (std::size_t i = 0; i < ds.subjects.size(); ++i)
    subject_pos[ds.subjects[i].id] = i;

  struct Entry {
    std::size_t subject_pos;
    long k;
    std::filesystem::path path;
    bool operator<(const Entry& o) const {
      return std::tie(subject_pos, k) < std::tie(o.subject_pos, o.k);
    }
  };
  std::vector<Entry> entries;
  const auto rec_dir = root / "recordings";
  if (std::filesystem::is_directory(rec_dir)) {
    for (const auto& de : std::filesystem::directory_iterator(rec_dir)) {
      if (!de.is_regular_file() || de.path().extension() != ".csv") continue;
      auto [subject, k] = detail::parse_recording_name(de.path().stem().string());
      auto it = subject_pos.find(subject);
      if (it == subject_pos.end())
        throw IngestError(IngestError::Code::unknown_subject,
                          de.path().string() + ": subject '" + subject +
                              "' not in subjects.csv");
      entries.push_back({it->second, k, de.path()});
    }
  }
  if (entries.empty())
    throw IngestError(IngestError::Code::empty_dataset,
                      "no recordings under " + rec_dir.string());
  std::sort(entries.begin(), entries.end());

  for (const auto& e : entries) {
    auto rows = csv::read_file(e.path.string());
    if (rows.size() < 2)
      throw IngestError(IngestError::Code::bad_format,
                        e.path.string() + ": no frames");
    const auto& header = rows.front();
    if (header.size() < 2 || header.back() != "class")
      throw IngestError(IngestError::Code::bad_format,
                        e.path.string() + ": last column must be 'class'");
    std::vector<std::string> rec_channels(header.begin(), header.end() - 1);
    if (ds.channels.empty()) {
      ds.channels = rec_channels;
    } else if (rec_channels != ds.channels) {
      throw IngestError(IngestError::Code::channel_mismatch,
                        e.path.string() +
                            ": channels differ from earlier recordings");
    }
    Recording rec;
    rec.subject_id = ds.subjects[e.subject_pos].id;
    rec.channels = ds.channels.size();
    rec.frames = rows.size() - 1;
    rec.samples.reserve(rec.frames * rec.channels);
    rec.labels.reserve(rec.frames);
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const auto& row = rows[r];
      const std::string where = e.path.string() + " row " + std::to_string(r + 1);
      if (row.size() != rec.channels + 1)
        throw IngestError(IngestError::Code::bad_format,
                          where + ": wrong column count");
      for (std::size_t c = 0; c < rec.channels; ++c)
        rec.samples.push_back(
            static_cast<float>(csv::parse_double(row[c], where)));
      auto ci = class_index.find(row.back());
      if (ci == class_index.end())
        throw IngestError(IngestError::Code::unknown_label,
                          where + ": unknown activity '" + row.back() + "'");
      rec.labels.push_back(ci->second);
    }
    ds.recordings.push_back(std::move(rec));
  }

  ds.validate();
  return detail::apply_options(std::move(ds), opt);
}

inline LabeledDataset ingest_motionsense(const std::filesystem::path& root,
                                         const IngestOptions& opt = {}) {
  const auto info_path = root / "data_subjects_info.csv";
  if (!std::filesystem::exists(info_path))
    throw IngestError(IngestError::Code::missing_meta,
                      "missing " + info_path.string());

  LabeledDataset ds;
  ds.name = root.filename().empty() ? std::string("motionsense")
                                    : root.filename().string();
  ds.sampling_rate_hz = kMotionSenseSamplingRateHz;
  ds.class_names = motionsense_class_names();

  {
    auto rows = csv::read_file(info_path.string());
    if (rows.size() < 2)
      throw IngestError(IngestError::Code::bad_format,
                        info_path.string() + ": no subject rows");
    const auto& header = rows.front();
    const auto file = info_path.string();
    const std::size_t c_code = detail::require_column(header, "code", file);
    const std::size_t c_weight = detail::require_column(header, "weight", file);
    const std::size_t c_height = detail::require_column(header, "height", file);
    const std::size_t c_age = detail::require_column(header, "age", file);
    const std::size_t c_gender = detail::require_column(header, "gender", file);
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const auto& row = rows[r];
      const std::string where = file + " row " + std::to_string(r + 1);
      if (row.size() != header.size())
        throw IngestError(IngestError::Code::bad_format,
                          where + ": wrong column count");
      SubjectProfile s;
      s.id = "sub_" + row[c_code];
      s.weight_kg = csv::parse_double(row[c_weight], where);
      s.height_cm = csv::parse_double(row[c_height], where);
      s.age = static_cast<int>(csv::parse_long(row[c_age], where));
      const long g = csv::parse_long(row[c_gender], where);
      if (g != 0 && g != 1)
        throw IngestError(IngestError::Code::bad_format,
                          where + ": gender must be 0 (female) or 1 (male)");
      s.gender = g == 0 ? Gender::female : Gender::male;
      ds.subjects.push_back(std::move(s));
    }
  }

  std::map<std::string, int> class_index;
  for (std::size_t k = 0; k < ds.class_names.size(); ++k)
    class_index[ds.class_names[k]] = static_cast<int>(k);
  std::map<std::string, std::size_t> subject_pos;
  for (std::size_t i = 0; i < ds.subjects.size(); ++i)
    subject_pos[ds.subjects[i].id] = i;

  struct Entry {
    std::size_t subject_pos;
    std::string folder;
    int label;
    std::filesystem::path path;
    bool operator<(const Entry& o) const {
      return std::tie(subject_pos, folder) < std::tie(o.subject_pos, o.folder);
    }
  };
  std::vector<Entry> entries;
  const auto data_dir = root / "A_DeviceMotion_data";
  if (std::filesystem::is_directory(data_dir)) {
    for (const auto& folder : std::filesystem::directory_iterator(data_dir)) {
      if (!folder.is_directory()) continue;
      const std::string fname = folder.path().filename().string();
      const auto us = fname.find('_');
      const std::string act = us == std::string::npos ? fname : fname.substr(0, us);
      auto ci = class_index.find(act);
      if (ci == class_index.end())
        throw IngestError(IngestError::Code::unknown_label,
                          folder.path().string() +
                              ": unknown activity prefix '" + act + "'");
      for (const auto& de : std::filesystem::directory_iterator(folder.path())) {
        if (!de.is_regular_file() || de.path().extension() != ".csv") continue;
        const std::string subject = de.path().stem().string();
        auto it = subject_pos.find(subject);
        if (it == subject_pos.end())
          throw IngestError(IngestError::Code::unknown_subject,
                            de.path().string() + ": subject '" + subject +
                                "' not in data_subjects_info.csv");
        entries.push_back({it->second, fname, ci->second, de.path()});
      }
    }
  }
  if (entries.empty())
    throw IngestError(IngestError::Code::empty_dataset,
                      "no recordings under " + data_dir.string());
  std::sort(entries.begin(), entries.end());

  for (const auto& e : entries) {
    auto rows = csv::read_file(e.path.string());
    if (rows.size() < 2)
      throw IngestError(IngestError::Code::bad_format,
                        e.path.string() + ": no frames");
    auto header = rows.front();
    // The exported files carry an unnamed leading index column.
    const bool indexed = !header.empty() && header.front().empty();
    if (indexed) header.erase(header.begin());
    if (header.empty())
      throw IngestError(IngestError::Code::bad_format,
                        e.path.string() + ": no channel columns");
    if (ds.channels.empty()) {
      ds.channels = header;
    } else if (header != ds.channels) {
      throw IngestError(IngestError::Code::channel_mismatch,
                        e.path.string() +
                            ": channels differ from earlier recordings");
    }
    Recording rec;
    rec.subject_id = ds.subjects[e.subject_pos].id;
    rec.channels = ds.channels.size();
    rec.frames = rows.size() - 1;
    rec.samples.reserve(rec.frames * rec.channels);
    rec.labels.assign(rec.frames, e.label);
    const std::size_t skip = indexed ? 1 : 0;
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const auto& row = rows[r];
      const std::string where = e.path.string() + " row " + std::to_string(r + 1);
      if (row.size() != rec.channels + skip)
        throw IngestError(IngestError::Code::bad_format,
                          where + ": wrong column count");
      for (std::size_t c = 0; c < rec.channels; ++c)
        rec.samples.push_back(
            static_cast<float>(csv::parse_double(row[c + skip], where)));
    }
    ds.recordings.push_back(std::move(rec));
  }

  // Default to the orientation/rotation/acceleration channels when the
  // gravity triplet is present and no explicit selection was given.
  IngestOptions effective = opt;
  if (effective.channels.empty()) {
    const auto& want = motionsense_default_channels();
    const bool have_all = std::all_of(
        want.begin(), want.end(), [&](const std::string& n) {
          return std::find(ds.channels.begin(), ds.channels.end(), n) !=
                 ds.channels.end();
        });
    if (have_all && ds.channels.size() > want.size())
      effective.channels = want;
  }

  ds.validate();
  return detail::apply_options(std::move(ds), effective);
}

enum class SourceKind { lara_omocap, motionsense, canonical };

inline SourceKind parse_source_kind(const std::string& s) {
  if (s == "lara_omocap") return SourceKind::lara_omocap;
  if (s == "motionsense") return SourceKind::motionsense;
  if (s == "canonical") return SourceKind::canonical;
  throw ArgumentError("unknown source kind: '" + s +
                      "' (expected lara_omocap, motionsense, or canonical)");
}

inline LabeledDataset ingest(const std::filesystem::path& root, SourceKind kind,
                             const IngestOptions& opt = {}) {
  switch (kind) {
    case SourceKind::lara_omocap:
      return ingest_lara_omocap(root, opt);
    case SourceKind::motionsense:
      return ingest_motionsense(root, opt);
    case SourceKind::canonical:
      return detail::apply_options(load_dataset(root), opt);
  }
  throw ArgumentError("unknown source kind");
}

}  // namespace haraudit

#endif  // HARAUDIT_INGEST_HPP_
