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
// Canonical in-memory model for a labeled multi-channel activity dataset:
// subject metadata plus frame-aligned sensor recordings. All parsers produce
// this form and everything downstream consumes it.

#ifndef HARAUDIT_TYPES_HPP_
#define HARAUDIT_TYPES_HPP_

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "haraudit/errors.hpp"

namespace haraudit {

enum class Gender { female, male };
enum class Handedness { left, right };
enum class AgeClass { young, old };
enum class HeightClass { short_, tall };
enum class WeightClass { light, heavy };

inline const char* to_string(Gender g) {
  return g == Gender::female ? "female" : "male";
}
inline const char* to_string(Handedness h) {
  return h == Handedness::left ? "left" : "right";
}
inline const char* to_string(AgeClass a) {
  return a == AgeClass::young ? "young" : "old";
}
inline const char* to_string(HeightClass h) {
  return h == HeightClass::short_ ? "short" : "tall";
}
inline const char* to_string(WeightClass w) {
  return w == WeightClass::light ? "light" : "heavy";
}

inline Gender parse_gender(const std::string& s) {
  if (s == "female" || s == "f" || s == "F") return Gender::female;
  if (s == "male" || s == "m" || s == "M") return Gender::male;
  throw ArgumentError("unknown gender: '" + s + "'");
}

inline Handedness parse_handedness(const std::string& s) {
  if (s == "left" || s == "l" || s == "L") return Handedness::left;
  if (s == "right" || s == "r" || s == "R") return Handedness::right;
  throw ArgumentError("unknown handedness: '" + s + "'");
}

struct SubjectProfile {
  std::string id;
  int age = 0;
  Gender gender = Gender::female;
  double height_cm = 0.0;
  double weight_kg = 0.0;
  std::optional<Handedness> handedness;
};

// Attributes thresholded against pool medians. Age/gender drive the
// heterogeneity measure; height/weight feed the bias statistics.
struct BinarizedProfile {
  std::string id;
  AgeClass age_class = AgeClass::young;
  Gender gender = Gender::female;
  HeightClass height_class = HeightClass::short_;
  WeightClass weight_class = WeightClass::light;
};

// One continuous capture from one subject. samples is row-major
// [frames][channels]; labels holds one class id per frame.
struct Recording {
  std::string subject_id;
  std::size_t frames = 0;
  std::size_t channels = 0;
  std::vector<float> samples;
  std::vector<int> labels;

  float at(std::size_t frame, std::size_t channel) const {
    return samples[frame * channels + channel];
  }
};

struct LabeledDataset {
  std::string name;
  double sampling_rate_hz = 0.0;
  std::vector<std::string> channels;
  std::vector<std::string> class_names;
  std::vector<SubjectProfile> subjects;
  std::vector<Recording> recordings;

  const SubjectProfile* find_subject(const std::string& id) const {
    for (const auto& s : subjects)
      if (s.id == id) return &s;
    return nullptr;
  }

  // Structural invariants every canonical dataset satisfies. Parsers call
  // this before returning; hand-built datasets should call it too.
  void validate() const {
    if (name.empty()) throw ArgumentError("dataset name is empty");
    if (sampling_rate_hz <= 0.0)
      throw ArgumentError("sampling_rate_hz must be positive");
    if (channels.empty()) throw ArgumentError("dataset has no channels");
    if (class_names.empty()) throw ArgumentError("dataset has no classes");
    std::set<std::string> ids;
    for (const auto& s : subjects) {
      if (s.id.empty()) throw ArgumentError("subject with empty id");
      if (!ids.insert(s.id).second)
        throw ArgumentError("duplicate subject id: " + s.id);
      if (s.age <= 0)
        throw ArgumentError("subject " + s.id + ": age must be positive");
      if (s.height_cm <= 0.0)
        throw ArgumentError("subject " + s.id + ": height must be positive");
      if (s.weight_kg <= 0.0)
        throw ArgumentError("subject " + s.id + ": weight must be positive");
    }
    const int n_classes = static_cast<int>(class_names.size());
    for (std::size_t r = 0; r < recordings.size(); ++r) {
      const Recording& rec = recordings[r];
      const std::string where = "recording #" + std::to_string(r);
      if (!ids.count(rec.subject_id))
        throw ArgumentError(where + ": unknown subject '" + rec.subject_id + "'");
      if (rec.channels != channels.size())
        throw ArgumentError(where + ": channel count mismatch");
      if (rec.samples.size() != rec.frames * rec.channels)
        throw ArgumentError(where + ": sample buffer size mismatch");
      if (rec.labels.size() != rec.frames)
        throw ArgumentError(where + ": label count mismatch");
      for (int lab : rec.labels) {
        if (lab < 0 || lab >= n_classes)
          throw ArgumentError(where + ": label out of range: " +
                              std::to_string(lab));
      }
    }
  }
};

// Keeps frames 0, k, 2k, ... so the result has ceil(frames / k) frames.
// k = 1 is the identity.
inline Recording downsample(const Recording& rec, std::size_t k) {
  if (k == 0) throw ArgumentError("downsample: factor must be positive");
  if (k == 1) return rec;
  Recording out;
  out.subject_id = rec.subject_id;
  out.channels = rec.channels;
  out.frames = (rec.frames + k - 1) / k;
  out.samples.reserve(out.frames * out.channels);
  out.labels.reserve(out.frames);
  for (std::size_t f = 0; f < rec.frames; f += k) {
    const float* row = rec.samples.data() + f * rec.channels;
    out.samples.insert(out.samples.end(), row, row + rec.channels);
    out.labels.push_back(rec.labels[f]);
  }
  return out;
}

}  // namespace haraudit

#endif  // HARAUDIT_TYPES_HPP_
