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
// Sliding-window segmentation of recordings, per-channel z-normalization
// fitted on training windows only, and Gaussian noise augmentation.

#ifndef HARAUDIT_SEGMENTATION_HPP_
#define HARAUDIT_SEGMENTATION_HPP_

#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "haraudit/errors.hpp"
#include "haraudit/rng.hpp"
#include "haraudit/types.hpp"

namespace haraudit {

enum class LabelRule { majority, last_frame };

struct WindowConfig {
  std::size_t window_size = 100;
  std::size_t step = 12;
  LabelRule label_rule = LabelRule::majority;

  void validate() const {
    if (window_size == 0) throw ArgumentError("window_size must be positive");
    if (step == 0) throw ArgumentError("step must be positive");
  }
};

// Where a window came from; keeps subject provenance attached to every
// window so train/test disjointness can be asserted late.
struct WindowSource {
  std::string subject_id;
  std::size_t recording_index = 0;
  std::size_t start_frame = 0;
};

// Flat batch of fixed-size windows. data is [n][window_size][channels].
struct WindowSet {
  std::size_t window_size = 0;
  std::size_t channels = 0;
  std::vector<float> data;
  std::vector<int> labels;
  std::vector<WindowSource> sources;
  bool augmented = false;

  std::size_t size() const { return labels.size(); }
  std::size_t window_values() const { return window_size * channels; }
  const float* window(std::size_t i) const {
    return data.data() + i * window_values();
  }
  float* window(std::size_t i) { return data.data() + i * window_values(); }

  void append(const WindowSet& other) {
    if (size() == 0) {
      window_size = other.window_size;
      channels = other.channels;
    } else if (other.size() != 0 && (other.window_size != window_size ||
                                     other.channels != channels)) {
      throw ShapeError("append: incompatible window shapes");
    }
    data.insert(data.end(), other.data.begin(), other.data.end());
    labels.insert(labels.end(), other.labels.begin(), other.labels.end());
    sources.insert(sources.end(), other.sources.begin(), other.sources.end());
    augmented = augmented || other.augmented;
  }
};

namespace detail {

// Majority vote over the window's frame labels. Ties go to the label of the
// window's last frame when it is among the tied maxima, otherwise to the
// smallest tied class id, keeping the rule deterministic.
inline int window_label(const Recording& rec, std::size_t start,
                        std::size_t window_size, LabelRule rule) {
  const std::size_t last = start + window_size - 1;
  if (rule == LabelRule::last_frame) return rec.labels[last];
  std::map<int, std::size_t> counts;
  for (std::size_t f = start; f < start + window_size; ++f)
    ++counts[rec.labels[f]];
  std::size_t best = 0;
  for (const auto& [lab, cnt] : counts) best = std::max(best, cnt);
  if (counts[rec.labels[last]] == best) return rec.labels[last];
  for (const auto& [lab, cnt] : counts)
    if (cnt == best) return lab;
  return rec.labels[last];
}

}  // namespace detail

// Windows fully contained in the recording: starts 0, step, 2*step, ...
// while start + window_size <= frames. A recording shorter than one window
// yields zero windows.
inline WindowSet segment(const Recording& rec, const WindowConfig& cfg,
                         std::size_t recording_index = 0) {
  cfg.validate();
  WindowSet ws;
  ws.window_size = cfg.window_size;
  ws.channels = rec.channels;
  if (rec.frames < cfg.window_size) return ws;
  const std::size_t count = (rec.frames - cfg.window_size) / cfg.step + 1;
  ws.data.reserve(count * ws.window_values());
  ws.labels.reserve(count);
  ws.sources.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t start = w * cfg.step;
    const float* first = rec.samples.data() + start * rec.channels;
    ws.data.insert(ws.data.end(), first, first + cfg.window_size * rec.channels);
    ws.labels.push_back(
        detail::window_label(rec, start, cfg.window_size, cfg.label_rule));
    ws.sources.push_back({rec.subject_id, recording_index, start});
  }
  return ws;
}

// Segments every recording of the listed subjects, in dataset order.
// Windows never span recording boundaries, so they never mix subjects.
inline WindowSet segment_subjects(const LabeledDataset& ds,
                                  const std::vector<std::string>& subject_ids,
                                  const WindowConfig& cfg) {
  cfg.validate();
  std::set<std::string> wanted(subject_ids.begin(), subject_ids.end());
  for (const auto& id : subject_ids)
    if (!ds.find_subject(id))
      throw ArgumentError("segment_subjects: unknown subject '" + id + "'");
  WindowSet out;
  for (std::size_t r = 0; r < ds.recordings.size(); ++r) {
    if (!wanted.count(ds.recordings[r].subject_id)) continue;
    out.append(segment(ds.recordings[r], cfg, r));
  }
  out.window_size = cfg.window_size;
  out.channels = ds.channels.size();
  return out;
}

// Adds N(0, sigma^2) noise. Each window draws from its own stream keyed by
// (seed, index), so the result does not depend on batch composition.
inline WindowSet add_gaussian_noise(const WindowSet& ws, double sigma,
                                    std::uint64_t seed) {
  if (sigma < 0.0) throw ArgumentError("noise sigma must be non-negative");
  WindowSet out = ws;
  out.augmented = true;
  if (sigma == 0.0) return out;
  const std::size_t wv = ws.window_values();
  for (std::size_t i = 0; i < ws.size(); ++i) {
    Rng rng(stable_hash(seed, "noise", static_cast<std::uint64_t>(i)));
    float* w = out.window(i);
    for (std::size_t v = 0; v < wv; ++v)
      w[v] += static_cast<float>(rng.normal() * sigma);
  }
  return out;
}

// Per-channel z-normalization. Statistics come from the fit set only (the
// training windows); apply reuses them unchanged on any other set.
struct Normalizer {
  std::vector<double> mean;
  std::vector<double> sd;

  void apply(WindowSet& ws) const {
    if (ws.channels != mean.size())
      throw ShapeError("Normalizer: fitted on " + std::to_string(mean.size()) +
                       " channels, applied to " + std::to_string(ws.channels));
    const std::size_t n_rows = ws.size() * ws.window_size;
    for (std::size_t row = 0; row < n_rows; ++row) {
      float* p = ws.data.data() + row * ws.channels;
      for (std::size_t c = 0; c < ws.channels; ++c)
        p[c] = static_cast<float>((p[c] - mean[c]) / sd[c]);
    }
  }
};

// Near-zero variance is clamped (with a warning) so apply never divides by
// zero; a constant channel maps to all zeros.
inline Normalizer fit_normalizer(const WindowSet& ws) {
  if (ws.size() == 0)
    throw ArgumentError("fit_normalizer: empty window set");
  Normalizer n;
  n.mean.assign(ws.channels, 0.0);
  n.sd.assign(ws.channels, 0.0);
  const std::size_t n_rows = ws.size() * ws.window_size;
  for (std::size_t row = 0; row < n_rows; ++row) {
    const float* p = ws.data.data() + row * ws.channels;
    for (std::size_t c = 0; c < ws.channels; ++c) n.mean[c] += p[c];
  }
  for (std::size_t c = 0; c < ws.channels; ++c)
    n.mean[c] /= static_cast<double>(n_rows);
  for (std::size_t row = 0; row < n_rows; ++row) {
    const float* p = ws.data.data() + row * ws.channels;
    for (std::size_t c = 0; c < ws.channels; ++c) {
      const double d = p[c] - n.mean[c];
      n.sd[c] += d * d;
    }
  }
  constexpr double kMinVariance = 1e-8;
  for (std::size_t c = 0; c < ws.channels; ++c) {
    double var = n.sd[c] / static_cast<double>(n_rows);
    if (var < kMinVariance) {
      std::cerr << "warning: channel " << c
                << " has near-zero variance; clamping\n";
      var = kMinVariance;
    }
    n.sd[c] = std::sqrt(var);
  }
  return n;
}

}  // namespace haraudit

#endif  // HARAUDIT_SEGMENTATION_HPP_
