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
// Evaluation metrics and the small descriptive statistics used by reports.

#ifndef HARAUDIT_METRICS_HPP_
#define HARAUDIT_METRICS_HPP_

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "haraudit/errors.hpp"

namespace haraudit {

// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  int n_classes = 0;
  std::vector<long> counts;  // row-major [n_classes][n_classes]

  explicit ConfusionMatrix(int k = 0)
      : n_classes(k), counts(static_cast<std::size_t>(k) * k, 0) {}

  long& at(int truth, int pred) { return counts[truth * n_classes + pred]; }
  long at(int truth, int pred) const { return counts[truth * n_classes + pred]; }

  long total() const {
    long t = 0;
    for (long c : counts) t += c;
    return t;
  }
};

inline ConfusionMatrix confusion_matrix(const std::vector<int>& truth,
                                        const std::vector<int>& pred,
                                        int n_classes) {
  if (truth.size() != pred.size())
    throw ArgumentError("confusion_matrix: length mismatch");
  if (truth.empty())
    throw MetricError(MetricError::Code::no_samples,
                      "confusion_matrix: no samples");
  ConfusionMatrix m(n_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= n_classes || pred[i] < 0 ||
        pred[i] >= n_classes)
      throw ArgumentError("confusion_matrix: label out of range");
    ++m.at(truth[i], pred[i]);
  }
  return m;
}

inline double accuracy(const ConfusionMatrix& m) {
  const long total = m.total();
  if (total == 0)
    throw MetricError(MetricError::Code::no_samples, "accuracy: empty matrix");
  long diag = 0;
  for (int k = 0; k < m.n_classes; ++k) diag += m.at(k, k);
  return static_cast<double>(diag) / static_cast<double>(total);
}

// F1 per class, averaged with weights proportional to the true class
// support. A class with zero precision+recall denominator contributes
// F1 = 0 (it still counts toward the weighting if it has support).
inline double weighted_f1(const ConfusionMatrix& m) {
  const long total = m.total();
  if (total == 0)
    throw MetricError(MetricError::Code::no_samples, "weighted_f1: empty matrix");
  double sum = 0.0;
  for (int k = 0; k < m.n_classes; ++k) {
    long support = 0, predicted = 0;
    for (int j = 0; j < m.n_classes; ++j) {
      support += m.at(k, j);
      predicted += m.at(j, k);
    }
    if (support == 0) continue;
    const long tp = m.at(k, k);
    const double denom = static_cast<double>(support + predicted);
    const double f1 = denom > 0.0 ? 2.0 * static_cast<double>(tp) / denom : 0.0;
    sum += f1 * static_cast<double>(support);
  }
  return sum / static_cast<double>(total);
}

inline double mean(const std::vector<double>& v) {
  if (v.empty()) throw ArgumentError("mean of empty set");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Population standard deviation (divide by n). The per-group spreads are
// over the full set of settings/trials, not a sample from them.
inline double stddev(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

// Quantile with linear interpolation between order statistics
// (position p * (n - 1)).
inline double quantile(std::vector<double> v, double p) {
  if (v.empty()) throw ArgumentError("quantile of empty set");
  if (p < 0.0 || p > 1.0) throw ArgumentError("quantile: p outside [0, 1]");
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

// Five-number summary for boxplots.
struct BoxStats {
  double minimum = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double maximum = 0.0;
  std::size_t n = 0;
};

inline BoxStats box_stats(const std::vector<double>& v) {
  if (v.empty()) throw ArgumentError("box_stats of empty set");
  BoxStats b;
  b.minimum = *std::min_element(v.begin(), v.end());
  b.q1 = quantile(v, 0.25);
  b.median = quantile(v, 0.5);
  b.q3 = quantile(v, 0.75);
  b.maximum = *std::max_element(v.begin(), v.end());
  b.n = v.size();
  return b;
}

}  // namespace haraudit

#endif  // HARAUDIT_METRICS_HPP_
