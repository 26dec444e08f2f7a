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
// Self-contained SVG boxplots; no graphics dependencies.

#ifndef HARAUDIT_PLOTS_HPP_
#define HARAUDIT_PLOTS_HPP_

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "haraudit/errors.hpp"
#include "haraudit/metrics.hpp"

namespace haraudit {

namespace detail {

inline std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

}  // namespace detail

// One box-and-whisker per named group (min/q1/median/q3/max whiskers).
inline void write_boxplot_svg(const std::filesystem::path& path,
                              const std::string& title,
                              const std::string& y_label,
                              const std::vector<std::string>& group_names,
                              const std::vector<BoxStats>& stats) {
  if (group_names.empty() || group_names.size() != stats.size())
    throw ArgumentError("write_boxplot_svg: group/stat count mismatch");

  const double width = 640.0, height = 420.0;
  const double left = 70.0, right = 20.0, top = 48.0, bottom = 50.0;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;

  double lo = stats[0].minimum, hi = stats[0].maximum;
  for (const auto& s : stats) {
    lo = std::min(lo, s.minimum);
    hi = std::max(hi, s.maximum);
  }
  if (hi <= lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.06 * (hi - lo);
  lo -= pad;
  hi += pad;
  auto y_of = [&](double v) {
    return top + plot_h * (1.0 - (v - lo) / (hi - lo));
  };

  const std::size_t n = stats.size();
  const double slot = plot_w / static_cast<double>(n);
  const double box_w = std::min(60.0, slot * 0.5);

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
       detail::fmt_num(width) + "\" height=\"" + detail::fmt_num(height) +
       "\" viewBox=\"0 0 " + detail::fmt_num(width) + " " +
       detail::fmt_num(height) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + detail::fmt_num(width / 2) +
       "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       "font-size=\"16\">" + title + "</text>\n";
  s += "<text x=\"16\" y=\"" + detail::fmt_num(top + plot_h / 2) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
       "transform=\"rotate(-90 16 " + detail::fmt_num(top + plot_h / 2) +
       ")\">" + y_label + "</text>\n";

  // Axes and horizontal grid with value ticks.
  s += "<line x1=\"" + detail::fmt_num(left) + "\" y1=\"" +
       detail::fmt_num(top) + "\" x2=\"" + detail::fmt_num(left) + "\" y2=\"" +
       detail::fmt_num(top + plot_h) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + detail::fmt_num(left) + "\" y1=\"" +
       detail::fmt_num(top + plot_h) + "\" x2=\"" +
       detail::fmt_num(left + plot_w) + "\" y2=\"" +
       detail::fmt_num(top + plot_h) + "\" stroke=\"black\"/>\n";
  for (int tck = 0; tck <= 5; ++tck) {
    const double v = lo + (hi - lo) * tck / 5.0;
    const double y = y_of(v);
    s += "<line x1=\"" + detail::fmt_num(left - 4) + "\" y1=\"" +
         detail::fmt_num(y) + "\" x2=\"" + detail::fmt_num(left + plot_w) +
         "\" y2=\"" + detail::fmt_num(y) +
         "\" stroke=\"#cccccc\" stroke-width=\"0.5\"/>\n";
    s += "<text x=\"" + detail::fmt_num(left - 8) + "\" y=\"" +
         detail::fmt_num(y + 4) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" +
         detail::fmt_num(v) + "</text>\n";
  }

  for (std::size_t i = 0; i < n; ++i) {
    const auto& st = stats[i];
    const double cx = left + slot * (static_cast<double>(i) + 0.5);
    const double x0 = cx - box_w / 2, x1 = cx + box_w / 2;
    // Whiskers.
    s += "<line x1=\"" + detail::fmt_num(cx) + "\" y1=\"" +
         detail::fmt_num(y_of(st.minimum)) + "\" x2=\"" + detail::fmt_num(cx) +
         "\" y2=\"" + detail::fmt_num(y_of(st.q1)) + "\" stroke=\"black\"/>\n";
    s += "<line x1=\"" + detail::fmt_num(cx) + "\" y1=\"" +
         detail::fmt_num(y_of(st.q3)) + "\" x2=\"" + detail::fmt_num(cx) +
         "\" y2=\"" + detail::fmt_num(y_of(st.maximum)) +
         "\" stroke=\"black\"/>\n";
    for (double v : {st.minimum, st.maximum}) {
      s += "<line x1=\"" + detail::fmt_num(cx - box_w / 4) + "\" y1=\"" +
           detail::fmt_num(y_of(v)) + "\" x2=\"" +
           detail::fmt_num(cx + box_w / 4) + "\" y2=\"" +
           detail::fmt_num(y_of(v)) + "\" stroke=\"black\"/>\n";
    }
    // Box and median.
    s += "<rect x=\"" + detail::fmt_num(x0) + "\" y=\"" +
         detail::fmt_num(y_of(st.q3)) + "\" width=\"" +
         detail::fmt_num(x1 - x0) + "\" height=\"" +
         detail::fmt_num(y_of(st.q1) - y_of(st.q3)) +
         "\" fill=\"#9ecae1\" stroke=\"black\"/>\n";
    s += "<line x1=\"" + detail::fmt_num(x0) + "\" y1=\"" +
         detail::fmt_num(y_of(st.median)) + "\" x2=\"" + detail::fmt_num(x1) +
         "\" y2=\"" + detail::fmt_num(y_of(st.median)) +
         "\" stroke=\"black\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + detail::fmt_num(cx) + "\" y=\"" +
         detail::fmt_num(top + plot_h + 18) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"12\">" + group_names[i] + "</text>\n";
    s += "<text x=\"" + detail::fmt_num(cx) + "\" y=\"" +
         detail::fmt_num(top + plot_h + 34) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\" "
         "fill=\"#555555\">n=" + std::to_string(st.n) + "</text>\n";
  }
  s += "</svg>\n";

  std::ofstream out(path);
  out << s;
  if (!out) throw Error("failed to write " + path.string());
}

}  // namespace haraudit

#endif  // HARAUDIT_PLOTS_HPP_
