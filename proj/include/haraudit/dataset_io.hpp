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
// Canonical on-disk layout:
//
//   <root>/meta.json                    dataset + subject metadata
//   <root>/recordings/<subject>_<k>.csv one file per recording
//
// Each recording CSV has a header (channel names plus a final "label"
// column), one frame per row, and an integer class id in the last column.
// Floats are written with enough digits to round-trip binary32 exactly, so
// save followed by load reproduces the dataset field for field.

#ifndef HARAUDIT_DATASET_IO_HPP_
#define HARAUDIT_DATASET_IO_HPP_

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "haraudit/csv.hpp"
#include "haraudit/errors.hpp"
#include "haraudit/types.hpp"

namespace haraudit {

namespace detail {

inline nlohmann::json subject_to_json(const SubjectProfile& s) {
  nlohmann::json j{{"id", s.id},
                   {"age", s.age},
                   {"gender", to_string(s.gender)},
                   {"height_cm", s.height_cm},
                   {"weight_kg", s.weight_kg}};
  if (s.handedness) j["handedness"] = to_string(*s.handedness);
  return j;
}

inline SubjectProfile subject_from_json(const nlohmann::json& j) {
  SubjectProfile s;
  s.id = j.at("id").get<std::string>();
  s.age = j.at("age").get<int>();
  s.gender = parse_gender(j.at("gender").get<std::string>());
  s.height_cm = j.at("height_cm").get<double>();
  s.weight_kg = j.at("weight_kg").get<double>();
  if (j.contains("handedness") && !j.at("handedness").is_null())
    s.handedness = parse_handedness(j.at("handedness").get<std::string>());
  return s;
}

// "<subject>_<k>.csv" -> {subject, k}. Subject ids may themselves contain
// underscores, so the split happens at the last one.
inline std::pair<std::string, long> parse_recording_name(
    const std::string& stem) {
  auto pos = stem.rfind('_');
  if (pos == std::string::npos || pos == 0 || pos + 1 >= stem.size())
    throw IngestError(IngestError::Code::bad_format,
                      "recording file name not of form <subject>_<k>: " + stem);
  return {stem.substr(0, pos),
          csv::parse_long(stem.substr(pos + 1), "recording index in " + stem)};
}

}  // namespace detail

// Loads meta.json only. Works on metadata-only roots (no recordings/),
// which is all the dataset-characteristics report needs.
inline LabeledDataset load_meta(const std::filesystem::path& root) {
  const auto meta_path = root / "meta.json";
  std::ifstream in(meta_path);
  if (!in)
    throw IngestError(IngestError::Code::missing_meta,
                      "missing meta.json under " + root.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IngestError(IngestError::Code::bad_format,
                      meta_path.string() + ": " + e.what());
  }
  LabeledDataset ds;
  try {
    ds.name = j.at("name").get<std::string>();
    ds.sampling_rate_hz = j.at("sampling_rate_hz").get<double>();
    ds.channels = j.at("channels").get<std::vector<std::string>>();
    ds.class_names = j.at("class_names").get<std::vector<std::string>>();
    for (const auto& sj : j.at("subjects"))
      ds.subjects.push_back(detail::subject_from_json(sj));
  } catch (const nlohmann::json::exception& e) {
    throw IngestError(IngestError::Code::bad_format,
                      meta_path.string() + ": " + e.what());
  }
  return ds;
}

// Loads a full canonical dataset. Recordings are ordered by (position of the
// subject in meta.json, recording index k).
inline LabeledDataset load_dataset(const std::filesystem::path& root) {
  LabeledDataset ds = load_meta(root);

  struct Entry {
    std::size_t subject_pos;
    long k;
    std::filesystem::path path;
    bool operator<(const Entry& o) const {
      return std::tie(subject_pos, k) < std::tie(o.subject_pos, o.k);
    }
  };
  std::map<std::string, std::size_t> subject_pos;
  for (std::size_t i = 0; i < ds.subjects.size(); ++i)
    subject_pos[ds.subjects[i].id] = i;

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
                              "' not present in meta.json");
      entries.push_back({it->second, k, de.path()});
    }
  }
  if (entries.empty())
    throw IngestError(IngestError::Code::empty_dataset,
                      "no recordings under " + rec_dir.string());
  std::sort(entries.begin(), entries.end());

  for (const auto& e : entries) {
    auto rows = csv::read_file(e.path.string());
    if (rows.empty())
      throw IngestError(IngestError::Code::bad_format,
                        e.path.string() + ": empty recording file");
    const auto& header = rows.front();
    if (header.size() != ds.channels.size() + 1 || header.back() != "label")
      throw IngestError(IngestError::Code::channel_mismatch,
                        e.path.string() + ": header does not match dataset "
                        "channels plus final 'label' column");
    for (std::size_t c = 0; c < ds.channels.size(); ++c) {
      if (header[c] != ds.channels[c])
        throw IngestError(IngestError::Code::channel_mismatch,
                          e.path.string() + ": channel column " +
                              std::to_string(c) + " is '" + header[c] +
                              "', expected '" + ds.channels[c] + "'");
    }
    Recording rec;
    rec.subject_id = ds.subjects[e.subject_pos].id;
    rec.channels = ds.channels.size();
    rec.frames = rows.size() - 1;
    rec.samples.reserve(rec.frames * rec.channels);
    rec.labels.reserve(rec.frames);
    const int n_classes = static_cast<int>(ds.class_names.size());
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const auto& row = rows[r];
      const std::string where =
          e.path.string() + " row " + std::to_string(r + 1);
      if (row.size() != rec.channels + 1)
        throw IngestError(IngestError::Code::bad_format,
                          where + ": wrong column count");
      for (std::size_t c = 0; c < rec.channels; ++c)
        rec.samples.push_back(
            static_cast<float>(csv::parse_double(row[c], where)));
      long lab = csv::parse_long(row.back(), where);
      if (lab < 0 || lab >= n_classes)
        throw IngestError(IngestError::Code::unknown_label,
                          where + ": label " + std::to_string(lab) +
                              " outside [0, " + std::to_string(n_classes) + ")");
      rec.labels.push_back(static_cast<int>(lab));
    }
    ds.recordings.push_back(std::move(rec));
  }
  ds.validate();
  return ds;
}

// Writes a canonical tree under root, creating directories as needed.
// Recording files are named <subject>_<k>.csv with k counting that
// subject's recordings in dataset order.
inline void save_dataset(const LabeledDataset& ds,
                         const std::filesystem::path& root) {
  ds.validate();
  std::filesystem::create_directories(root / "recordings");

  nlohmann::json j{{"name", ds.name},
                   {"sampling_rate_hz", ds.sampling_rate_hz},
                   {"channels", ds.channels},
                   {"class_names", ds.class_names}};
  j["subjects"] = nlohmann::json::array();
  for (const auto& s : ds.subjects)
    j["subjects"].push_back(detail::subject_to_json(s));
  std::ofstream meta(root / "meta.json");
  meta << j.dump(2) << '\n';
  if (!meta)
    throw Error("failed to write " + (root / "meta.json").string());

  std::map<std::string, long> next_k;
  for (const auto& rec : ds.recordings) {
    long k = next_k[rec.subject_id]++;
    const auto path =
        root / "recordings" / (rec.subject_id + "_" + std::to_string(k) + ".csv");
    std::ofstream out(path);
    for (const auto& ch : ds.channels) out << ch << ',';
    out << "label\n";
    for (std::size_t f = 0; f < rec.frames; ++f) {
      for (std::size_t c = 0; c < rec.channels; ++c)
        out << csv::format_float(rec.at(f, c)) << ',';
      out << rec.labels[f] << '\n';
    }
    if (!out) throw Error("failed to write " + path.string());
  }
}

}  // namespace haraudit

#endif  // HARAUDIT_DATASET_IO_HPP_
