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
// Subject-pool curation: median binarization of subject attributes, 2x2
// association tests between attribute pairs, the heterogeneity measure over
// four-subject training groups, and enumeration/round-tripping of split
// settings.

#ifndef HARAUDIT_CURATION_HPP_
#define HARAUDIT_CURATION_HPP_

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <json.hpp>

#include "haraudit/errors.hpp"
#include "haraudit/rng.hpp"
#include "haraudit/types.hpp"

namespace haraudit {

inline double median(std::vector<double> v) {
  if (v.empty()) throw ArgumentError("median of empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Thresholds age/height/weight at the pool median. Values equal to the
// median fall into the lower class (young/short/light), so the lower class
// always holds at least half the pool.
inline std::vector<BinarizedProfile> binarize_profiles(
    const std::vector<SubjectProfile>& subjects) {
  if (subjects.empty()) throw ArgumentError("binarize_profiles: empty pool");
  std::vector<double> ages, heights, weights;
  for (const auto& s : subjects) {
    ages.push_back(static_cast<double>(s.age));
    heights.push_back(s.height_cm);
    weights.push_back(s.weight_kg);
  }
  const double age_med = median(ages);
  const double height_med = median(heights);
  const double weight_med = median(weights);

  std::vector<BinarizedProfile> out;
  out.reserve(subjects.size());
  for (const auto& s : subjects) {
    BinarizedProfile b;
    b.id = s.id;
    b.gender = s.gender;
    b.age_class = s.age <= age_med ? AgeClass::young : AgeClass::old;
    b.height_class =
        s.height_cm <= height_med ? HeightClass::short_ : HeightClass::tall;
    b.weight_class =
        s.weight_kg <= weight_med ? WeightClass::light : WeightClass::heavy;
    out.push_back(b);
  }
  return out;
}

enum class Attribute { gender, age, height, weight };

inline const char* to_string(Attribute a) {
  switch (a) {
    case Attribute::gender: return "gender";
    case Attribute::age: return "age";
    case Attribute::height: return "height";
    case Attribute::weight: return "weight";
  }
  return "?";
}

inline Attribute parse_attribute(const std::string& s) {
  if (s == "gender") return Attribute::gender;
  if (s == "age") return Attribute::age;
  if (s == "height") return Attribute::height;
  if (s == "weight") return Attribute::weight;
  throw ArgumentError("unknown attribute: '" + s + "'");
}

namespace detail {

inline int attribute_level(const BinarizedProfile& p, Attribute a) {
  switch (a) {
    case Attribute::gender: return p.gender == Gender::female ? 0 : 1;
    case Attribute::age: return p.age_class == AgeClass::young ? 0 : 1;
    case Attribute::height: return p.height_class == HeightClass::short_ ? 0 : 1;
    case Attribute::weight: return p.weight_class == WeightClass::light ? 0 : 1;
  }
  return 0;
}

inline std::array<std::string, 2> attribute_labels(Attribute a) {
  switch (a) {
    case Attribute::gender: return {"female", "male"};
    case Attribute::age: return {"young", "old"};
    case Attribute::height: return {"short", "tall"};
    case Attribute::weight: return {"light", "heavy"};
  }
  return {"?", "?"};
}

}  // namespace detail

struct ContingencyTable {
  std::string row_attr = "rows";
  std::string col_attr = "cols";
  std::array<std::string, 2> row_labels{"0", "1"};
  std::array<std::string, 2> col_labels{"0", "1"};
  std::array<std::array<long, 2>, 2> counts{{{0, 0}, {0, 0}}};
};

inline ContingencyTable crosstab(const std::vector<BinarizedProfile>& profiles,
                                 Attribute row, Attribute col) {
  if (profiles.empty()) throw ArgumentError("crosstab: empty pool");
  ContingencyTable t;
  t.row_attr = to_string(row);
  t.col_attr = to_string(col);
  t.row_labels = detail::attribute_labels(row);
  t.col_labels = detail::attribute_labels(col);
  for (const auto& p : profiles)
    ++t.counts[detail::attribute_level(p, row)][detail::attribute_level(p, col)];
  return t;
}

struct AssociationResult {
  double statistic = 0.0;
  int df = 1;
  double p_value = 1.0;
  double alpha = 0.05;
  bool significant = false;
};

// Pearson chi-square test of independence on a 2x2 table, df = 1,
// uncorrected by default. Set yates to apply the continuity correction.
inline AssociationResult association_test(
    const std::array<std::array<long, 2>, 2>& counts, bool yates = false,
    double alpha = 0.05) {
  const double r0 = static_cast<double>(counts[0][0] + counts[0][1]);
  const double r1 = static_cast<double>(counts[1][0] + counts[1][1]);
  const double c0 = static_cast<double>(counts[0][0] + counts[1][0]);
  const double c1 = static_cast<double>(counts[0][1] + counts[1][1]);
  if (r0 == 0.0 || r1 == 0.0 || c0 == 0.0 || c1 == 0.0)
    throw StatError(StatError::Code::degenerate_table,
                    "association_test: a marginal total is zero");
  const double total = r0 + r1;
  const double rows[2] = {r0, r1};
  const double cols[2] = {c0, c1};
  double stat = 0.0;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double expected = rows[i] * cols[j] / total;
      double diff = std::abs(static_cast<double>(counts[i][j]) - expected);
      if (yates) diff = std::max(0.0, diff - 0.5);
      stat += diff * diff / expected;
    }
  }
  AssociationResult res;
  res.statistic = stat;
  res.df = 1;
  res.alpha = alpha;
  boost::math::chi_squared dist(1.0);
  res.p_value = boost::math::cdf(boost::math::complement(dist, stat));
  res.significant = res.p_value < alpha;
  return res;
}

inline AssociationResult association_test(const ContingencyTable& t,
                                          bool yates = false,
                                          double alpha = 0.05) {
  return association_test(t.counts, yates, alpha);
}

// Heterogeneity of a four-subject training group, based on the number of
// distinct (age class, gender) profiles it contains:
//   1 distinct -> HM1, 3 -> HM3, 4 -> HM4;
//   2 distinct -> HM2a if the two profiles differ in exactly one attribute,
//                 HM2b if they differ in both.
// How the four subjects distribute over two profiles (2+2 vs 1+3) does not
// affect the label.
enum class HMLabel { HM1, HM2a, HM2b, HM3, HM4 };

inline const char* to_string(HMLabel h) {
  switch (h) {
    case HMLabel::HM1: return "HM1";
    case HMLabel::HM2a: return "HM2a";
    case HMLabel::HM2b: return "HM2b";
    case HMLabel::HM3: return "HM3";
    case HMLabel::HM4: return "HM4";
  }
  return "?";
}

inline HMLabel parse_hm_label(const std::string& s) {
  if (s == "HM1" || s == "hm1" || s == "1") return HMLabel::HM1;
  if (s == "HM2a" || s == "hm2a" || s == "2a") return HMLabel::HM2a;
  if (s == "HM2b" || s == "hm2b" || s == "2b") return HMLabel::HM2b;
  if (s == "HM3" || s == "hm3" || s == "3") return HMLabel::HM3;
  if (s == "HM4" || s == "hm4" || s == "4") return HMLabel::HM4;
  throw ArgumentError("unknown heterogeneity label: '" + s + "'");
}

inline constexpr std::array<HMLabel, 5> kAllHMLabels = {
    HMLabel::HM1, HMLabel::HM2a, HMLabel::HM2b, HMLabel::HM3, HMLabel::HM4};

inline HMLabel heterogeneity_measure(const std::vector<BinarizedProfile>& group) {
  if (group.size() != 4)
    throw ArgumentError("heterogeneity_measure: group must have 4 subjects, got " +
                        std::to_string(group.size()));
  std::set<std::pair<int, int>> distinct;
  for (const auto& p : group)
    distinct.insert({p.age_class == AgeClass::young ? 0 : 1,
                     p.gender == Gender::female ? 0 : 1});
  switch (distinct.size()) {
    case 1: return HMLabel::HM1;
    case 3: return HMLabel::HM3;
    case 4: return HMLabel::HM4;
    case 2: {
      auto it = distinct.begin();
      auto a = *it++;
      auto b = *it;
      const int diffs = (a.first != b.first) + (a.second != b.second);
      return diffs == 1 ? HMLabel::HM2a : HMLabel::HM2b;
    }
  }
  throw Error("unreachable");  // set of pairs from 4 elements has size 1..4
}

// One train/test split: four training subjects, everyone else held out.
struct SplitSetting {
  std::string setting_id;
  HMLabel hm = HMLabel::HM1;
  std::vector<std::string> train_subjects;
  std::uint64_t seed = 0;
};

// Enumerates four-subject groups with the requested heterogeneity. All
// C(n, 4) combinations are scanned (fine for the cohort sizes this targets),
// matching groups are shuffled with a seeded generator, and at most
// max_settings survive. Deterministic given (pool order, hm, seed).
inline std::vector<SplitSetting> enumerate_settings(
    const std::vector<BinarizedProfile>& pool, HMLabel hm, int max_settings,
    std::uint64_t seed) {
  if (pool.size() < 4)
    throw ArgumentError("enumerate_settings: pool has fewer than 4 subjects");
  if (max_settings < 1)
    throw ArgumentError("enumerate_settings: max_settings must be >= 1");
  std::set<std::string> ids;
  for (const auto& p : pool)
    if (!ids.insert(p.id).second)
      throw ArgumentError("enumerate_settings: duplicate subject id " + p.id);

  const std::size_t n = pool.size();
  std::vector<std::array<std::size_t, 4>> matches;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      for (std::size_t c = b + 1; c < n; ++c)
        for (std::size_t d = c + 1; d < n; ++d) {
          if (heterogeneity_measure({pool[a], pool[b], pool[c], pool[d]}) == hm)
            matches.push_back({a, b, c, d});
        }
  if (matches.empty())
    throw EnumerationError(EnumerationError::Code::infeasible_hm,
                           std::string("no four-subject group in this pool "
                                       "realizes ") + to_string(hm));

  Rng rng(stable_hash(seed, "enumerate", to_string(hm)));
  rng.shuffle(matches);
  if (matches.size() > static_cast<std::size_t>(max_settings))
    matches.resize(static_cast<std::size_t>(max_settings));

  std::string prefix = to_string(hm);
  std::transform(prefix.begin(), prefix.end(), prefix.begin(),
                 [](unsigned char ch) { return std::tolower(ch); });
  std::vector<SplitSetting> out;
  out.reserve(matches.size());
  for (std::size_t i = 0; i < matches.size(); ++i) {
    SplitSetting s;
    char idx[24];
    std::snprintf(idx, sizeof(idx), "%02zu", i);
    s.setting_id = prefix + "_" + idx;
    s.hm = hm;
    for (std::size_t j : matches[i]) s.train_subjects.push_back(pool[j].id);
    std::sort(s.train_subjects.begin(), s.train_subjects.end());
    s.seed = seed;
    out.push_back(std::move(s));
  }
  return out;
}

inline void save_manifest(const std::vector<SplitSetting>& settings,
                          const std::filesystem::path& path) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& s : settings)
    j.push_back({{"setting_id", s.setting_id},
                 {"hm", to_string(s.hm)},
                 {"train_subjects", s.train_subjects},
                 {"seed", s.seed}});
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw Error("failed to write manifest " + path.string());
}

// Parses a split manifest file without consulting any pool. Structural
// checks only: field presence, four train subjects, unique setting ids.
inline std::vector<SplitSetting> parse_manifest(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw ManifestError(ManifestError::Code::bad_format,
                        "cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ManifestError(ManifestError::Code::bad_format,
                        path.string() + ": " + e.what());
  }
  if (!j.is_array())
    throw ManifestError(ManifestError::Code::bad_format,
                        path.string() + ": top level must be a list");

  std::vector<SplitSetting> out;
  std::set<std::string> seen_ids;
  for (const auto& row : j) {
    SplitSetting s;
    try {
      s.setting_id = row.at("setting_id").get<std::string>();
      s.hm = parse_hm_label(row.at("hm").get<std::string>());
      s.train_subjects = row.at("train_subjects").get<std::vector<std::string>>();
      s.seed = row.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
      throw ManifestError(ManifestError::Code::bad_format,
                          path.string() + ": " + e.what());
    } catch (const ArgumentError& e) {
      throw ManifestError(ManifestError::Code::bad_format,
                          path.string() + ": " + e.what());
    }
    if (!seen_ids.insert(s.setting_id).second)
      throw ManifestError(ManifestError::Code::bad_format,
                          path.string() + ": duplicate setting_id " + s.setting_id);
    if (s.train_subjects.size() != 4)
      throw ManifestError(ManifestError::Code::bad_format,
                          s.setting_id + ": train_subjects must have 4 entries");
    out.push_back(std::move(s));
  }
  return out;
}

// Re-verifies settings against a subject pool: every train subject must
// exist there and the declared heterogeneity label must match the one
// recomputed from the pool's binarized profiles.
inline void verify_settings(const std::vector<SplitSetting>& settings,
                            const std::vector<BinarizedProfile>& pool) {
  std::map<std::string, const BinarizedProfile*> by_id;
  for (const auto& p : pool) by_id[p.id] = &p;
  for (const auto& s : settings) {
    std::vector<BinarizedProfile> group;
    for (const auto& id : s.train_subjects) {
      auto it = by_id.find(id);
      if (it == by_id.end())
        throw ManifestError(ManifestError::Code::unknown_subject,
                            s.setting_id + ": subject '" + id +
                                "' not in the pool");
      group.push_back(*it->second);
    }
    const HMLabel actual = heterogeneity_measure(group);
    if (actual != s.hm)
      throw ManifestError(ManifestError::Code::hm_mismatch,
                          s.setting_id + ": declared " +
                              std::string(to_string(s.hm)) + " but group is " +
                              to_string(actual));
  }
}

// Load + re-verify in one step; the usual entry point.
inline std::vector<SplitSetting> load_manifest(
    const std::filesystem::path& path,
    const std::vector<BinarizedProfile>& pool) {
  auto settings = parse_manifest(path);
  verify_settings(settings, pool);
  return settings;
}

}  // namespace haraudit

#endif  // HARAUDIT_CURATION_HPP_
