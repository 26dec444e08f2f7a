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
// Experiment orchestration: runs (setting x trial) training jobs against a
// canonical dataset, appends one JSON record per trial to a results file,
// and aggregates records into per-heterogeneity-group summaries.
//
// Determinism contract: records are written in (setting, trial) order
// regardless of worker count, every random stream is derived from
// (global_seed, setting_id, trial_index), and a resumed run appends exactly
// the records an uninterrupted run would have written. Wall time is the one
// field that legitimately differs between runs.

#ifndef HARAUDIT_EXPERIMENT_HPP_
#define HARAUDIT_EXPERIMENT_HPP_

#include <array>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "haraudit/classifier.hpp"
#include "haraudit/curation.hpp"
#include "haraudit/dataset_io.hpp"
#include "haraudit/errors.hpp"
#include "haraudit/metrics.hpp"
#include "haraudit/plots.hpp"
#include "haraudit/rng.hpp"
#include "haraudit/segmentation.hpp"

namespace haraudit {

inline void to_json(nlohmann::json& j, const WindowConfig& c) {
  j = nlohmann::json{
      {"window_size", c.window_size},
      {"step", c.step},
      {"label_rule",
       c.label_rule == LabelRule::majority ? "majority" : "last_frame"}};
}

inline void from_json(const nlohmann::json& j, WindowConfig& c) {
  c = WindowConfig{};
  j.at("window_size").get_to(c.window_size);
  j.at("step").get_to(c.step);
  if (j.contains("label_rule")) {
    const auto s = j.at("label_rule").get<std::string>();
    if (s == "majority")
      c.label_rule = LabelRule::majority;
    else if (s == "last_frame")
      c.label_rule = LabelRule::last_frame;
    else
      throw ConfigError("unknown label_rule: '" + s + "'");
  }
}

struct ExperimentManifest {
  std::filesystem::path dataset_root;
  WindowConfig window;
  ModelConfig model;  // empty branches / n_classes 0 = derive from dataset
  TrainConfig train;
  int trials_per_setting = 5;
  std::uint64_t global_seed = 0;
  bool vary_init_seed = false;
  std::vector<SplitSetting> settings;
};

// Reads an experiment manifest. Relative dataset_root/settings_path entries
// resolve against the manifest's own directory.
inline ExperimentManifest load_experiment_manifest(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open experiment manifest " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  ExperimentManifest m;
  const auto base = path.parent_path();
  try {
    std::filesystem::path root = j.at("dataset_root").get<std::string>();
    m.dataset_root = root.is_absolute() ? root : base / root;
    j.at("window").get_to(m.window);
    if (j.contains("model")) j.at("model").get_to(m.model);
    if (j.contains("train")) j.at("train").get_to(m.train);
    if (j.contains("trials_per_setting"))
      j.at("trials_per_setting").get_to(m.trials_per_setting);
    if (j.contains("global_seed")) j.at("global_seed").get_to(m.global_seed);
    if (j.contains("vary_init_seed"))
      j.at("vary_init_seed").get_to(m.vary_init_seed);
    if (j.contains("settings_path")) {
      std::filesystem::path sp = j.at("settings_path").get<std::string>();
      m.settings = parse_manifest(sp.is_absolute() ? sp : base / sp);
    } else if (j.contains("settings")) {
      for (const auto& row : j.at("settings")) {
        SplitSetting s;
        s.setting_id = row.at("setting_id").get<std::string>();
        s.hm = parse_hm_label(row.at("hm").get<std::string>());
        s.train_subjects =
            row.at("train_subjects").get<std::vector<std::string>>();
        s.seed = row.value("seed", std::uint64_t{0});
        m.settings.push_back(std::move(s));
      }
    } else {
      throw ConfigError(path.string() + ": needs settings or settings_path");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const ManifestError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const ArgumentError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  if (m.trials_per_setting < 1)
    throw ConfigError(path.string() + ": trials_per_setting must be >= 1");
  if (m.settings.empty())
    throw ConfigError(path.string() + ": no settings");
  return m;
}

// Branch partition defaults to one branch spanning all channels; class
// count defaults to the dataset's.
inline ModelConfig effective_model_config(ModelConfig m,
                                          const LabeledDataset& ds) {
  if (m.branches.empty()) {
    std::vector<int> all(ds.channels.size());
    for (std::size_t c = 0; c < all.size(); ++c) all[c] = static_cast<int>(c);
    m.branches.push_back(std::move(all));
  }
  if (m.n_classes == 0) m.n_classes = static_cast<int>(ds.class_names.size());
  return m;
}

struct ResultRecord {
  std::string setting_id;
  HMLabel hm = HMLabel::HM1;
  int trial_index = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> train_subjects;
  std::vector<std::string> test_subjects;
  std::string status = "ok";  // "ok" or "failed"
  double accuracy = 0.0;
  double weighted_f1 = 0.0;
  std::vector<std::vector<long>> confusion;
  int epochs_run = 0;
  int best_epoch = -1;
  double wall_time_s = 0.0;
  std::string error;
};

inline nlohmann::ordered_json result_to_json(const ResultRecord& r) {
  nlohmann::ordered_json j;
  j["setting_id"] = r.setting_id;
  j["hm"] = to_string(r.hm);
  j["trial_index"] = r.trial_index;
  j["seed"] = r.seed;
  j["train_subjects"] = r.train_subjects;
  j["test_subjects"] = r.test_subjects;
  j["status"] = r.status;
  if (r.status == "ok") {
    j["accuracy"] = r.accuracy;
    j["weighted_f1"] = r.weighted_f1;
    j["confusion"] = r.confusion;
    j["epochs_run"] = r.epochs_run;
    j["best_epoch"] = r.best_epoch;
  } else {
    j["error"] = r.error;
  }
  j["wall_time_s"] = r.wall_time_s;
  return j;
}

inline ResultRecord result_from_json(const nlohmann::json& j) {
  ResultRecord r;
  r.setting_id = j.at("setting_id").get<std::string>();
  r.hm = parse_hm_label(j.at("hm").get<std::string>());
  r.trial_index = j.at("trial_index").get<int>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.train_subjects = j.at("train_subjects").get<std::vector<std::string>>();
  r.test_subjects = j.at("test_subjects").get<std::vector<std::string>>();
  r.status = j.at("status").get<std::string>();
  if (r.status == "ok") {
    r.accuracy = j.at("accuracy").get<double>();
    r.weighted_f1 = j.at("weighted_f1").get<double>();
    r.confusion = j.at("confusion").get<std::vector<std::vector<long>>>();
    r.epochs_run = j.at("epochs_run").get<int>();
    r.best_epoch = j.at("best_epoch").get<int>();
  } else {
    r.error = j.value("error", "");
  }
  r.wall_time_s = j.at("wall_time_s").get<double>();
  return r;
}

inline std::vector<ResultRecord> load_results(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open results file " + path.string());
  std::vector<ResultRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(result_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(path.string() + " line " + std::to_string(lineno) + ": " +
                  e.what());
    }
  }
  return out;
}

// Equality of two result files up to wall_time_s (which never reproduces).
inline bool results_equivalent(const std::filesystem::path& a,
                               const std::filesystem::path& b) {
  auto ra = load_results(a);
  auto rb = load_results(b);
  if (ra.size() != rb.size()) return false;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    auto ja = result_to_json(ra[i]);
    auto jb = result_to_json(rb[i]);
    ja.erase("wall_time_s");
    jb.erase("wall_time_s");
    if (ja != jb) return false;
  }
  return true;
}

// On-disk window cache. Files live under the given directory, keyed by a
// hash of a descriptor that includes a content fingerprint of the subject's
// recordings, so stale entries can never be returned silently.
class WindowCache {
 public:
  explicit WindowCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  // Reads AUDIT_CACHE_DIR; disabled when unset or empty.
  static std::optional<WindowCache> from_environment() {
    const char* dir = std::getenv("AUDIT_CACHE_DIR");
    if (dir == nullptr || *dir == '\0') return std::nullopt;
    return WindowCache(dir);
  }

  std::optional<WindowSet> load(const nlohmann::json& descriptor) const {
    const auto key = cache_key(descriptor);
    const auto side_path = dir_ / (key + ".json");
    const auto bin_path = dir_ / (key + ".bin");
    std::ifstream side(side_path);
    if (!side) return std::nullopt;
    nlohmann::json stored;
    try {
      side >> stored;
    } catch (const nlohmann::json::exception&) {
      return std::nullopt;
    }
    if (stored != descriptor) return std::nullopt;

    std::ifstream in(bin_path, std::ios::binary);
    if (!in) return std::nullopt;
    char magic[8];
    in.read(magic, 8);
    if (!in || std::string(magic, 8) != "HAWCAC01") return std::nullopt;
    std::uint64_t n = 0, wsize = 0, channels = 0;
    in.read(reinterpret_cast<char*>(&n), 8);
    in.read(reinterpret_cast<char*>(&wsize), 8);
    in.read(reinterpret_cast<char*>(&channels), 8);
    if (!in) return std::nullopt;
    WindowSet ws;
    ws.window_size = wsize;
    ws.channels = channels;
    ws.data.resize(n * wsize * channels);
    ws.labels.resize(n);
    ws.sources.resize(n);
    in.read(reinterpret_cast<char*>(ws.data.data()),
            static_cast<std::streamsize>(ws.data.size() * sizeof(float)));
    std::vector<std::int32_t> labs(n);
    in.read(reinterpret_cast<char*>(labs.data()),
            static_cast<std::streamsize>(n * 4));
    std::vector<std::uint64_t> recs(n), starts(n);
    in.read(reinterpret_cast<char*>(recs.data()),
            static_cast<std::streamsize>(n * 8));
    in.read(reinterpret_cast<char*>(starts.data()),
            static_cast<std::streamsize>(n * 8));
    if (!in) return std::nullopt;
    const std::string subject = descriptor.value("subject", "");
    for (std::uint64_t i = 0; i < n; ++i) {
      ws.labels[i] = labs[i];
      ws.sources[i] = {subject, static_cast<std::size_t>(recs[i]),
                       static_cast<std::size_t>(starts[i])};
    }
    return ws;
  }

  void store(const nlohmann::json& descriptor, const WindowSet& ws) const {
    const auto key = cache_key(descriptor);
    const auto bin_path = dir_ / (key + ".bin");
    {
      std::ofstream out(bin_path, std::ios::binary);
      out.write("HAWCAC01", 8);
      const std::uint64_t n = ws.size(), wsize = ws.window_size,
                          channels = ws.channels;
      out.write(reinterpret_cast<const char*>(&n), 8);
      out.write(reinterpret_cast<const char*>(&wsize), 8);
      out.write(reinterpret_cast<const char*>(&channels), 8);
      out.write(reinterpret_cast<const char*>(ws.data.data()),
                static_cast<std::streamsize>(ws.data.size() * sizeof(float)));
      std::vector<std::int32_t> labs(ws.labels.begin(), ws.labels.end());
      out.write(reinterpret_cast<const char*>(labs.data()),
                static_cast<std::streamsize>(n * 4));
      std::vector<std::uint64_t> recs(n), starts(n);
      for (std::uint64_t i = 0; i < n; ++i) {
        recs[i] = ws.sources[i].recording_index;
        starts[i] = ws.sources[i].start_frame;
      }
      out.write(reinterpret_cast<const char*>(recs.data()),
                static_cast<std::streamsize>(n * 8));
      out.write(reinterpret_cast<const char*>(starts.data()),
                static_cast<std::streamsize>(n * 8));
      if (!out) throw Error("failed to write cache file " + bin_path.string());
    }
    std::ofstream side(dir_ / (key + ".json"));
    side << descriptor.dump(2) << '\n';
    if (!side) throw Error("failed to write cache sidecar for " + key);
  }

  static std::string cache_key(const nlohmann::json& descriptor) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(
                      stable_hash(descriptor.dump())));
    return buf;
  }

 private:
  std::filesystem::path dir_;
};

namespace detail {

inline std::uint64_t subject_fingerprint(const LabeledDataset& ds,
                                         const std::string& subject_id) {
  StableHash h;
  h.mix(ds.name).mix(subject_id);
  for (const auto& rec : ds.recordings) {
    if (rec.subject_id != subject_id) continue;
    h.mix(static_cast<std::uint64_t>(rec.frames));
    h.mix(static_cast<std::uint64_t>(rec.channels));
    for (float v : rec.samples) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      h.mix(static_cast<std::uint64_t>(bits));
    }
    for (int lab : rec.labels) h.mix(lab);
  }
  return h.digest();
}

inline nlohmann::json window_descriptor(const LabeledDataset& ds,
                                        const std::string& subject_id,
                                        const WindowConfig& cfg) {
  return nlohmann::json{
      {"kind", "subject_windows"},
      {"dataset", ds.name},
      {"subject", subject_id},
      {"window_size", cfg.window_size},
      {"step", cfg.step},
      {"label_rule",
       cfg.label_rule == LabelRule::majority ? "majority" : "last_frame"},
      {"channels", ds.channels.size()},
      {"fingerprint", subject_fingerprint(ds, subject_id)}};
}

}  // namespace detail

// Windows for every subject, cached on disk when a cache is supplied.
inline std::map<std::string, WindowSet> build_subject_windows(
    const LabeledDataset& ds, const WindowConfig& cfg,
    const std::optional<WindowCache>& cache) {
  std::map<std::string, WindowSet> out;
  for (const auto& s : ds.subjects) {
    if (cache) {
      const auto desc = detail::window_descriptor(ds, s.id, cfg);
      if (auto hit = cache->load(desc)) {
        out[s.id] = std::move(*hit);
        continue;
      }
      WindowSet ws = segment_subjects(ds, {s.id}, cfg);
      cache->store(desc, ws);
      out[s.id] = std::move(ws);
    } else {
      out[s.id] = segment_subjects(ds, {s.id}, cfg);
    }
  }
  return out;
}

struct RunSummary {
  std::size_t total = 0;
  std::size_t completed = 0;  // newly written ok records
  std::size_t failed = 0;     // newly written failed records
  std::size_t skipped = 0;    // already present in the results file
};

// Runs every (setting, trial) pair that is not already in the results file
// and appends records in canonical order. Worker count affects wall time
// only, never file content.
inline RunSummary run_experiment(const ExperimentManifest& manifest,
                                 const std::filesystem::path& out_path,
                                 int workers = 1) {
  if (workers < 1) throw ArgumentError("workers must be >= 1");
  manifest.train.validate();
  manifest.window.validate();

  const LabeledDataset ds = load_dataset(manifest.dataset_root);
  const auto profiles = binarize_profiles(ds.subjects);
  verify_settings(manifest.settings, profiles);
  const ModelConfig model_cfg = effective_model_config(manifest.model, ds);
  model_cfg.validate();
  // Fail fast on (model, window) combinations that cannot be built.
  { Network<float> probe(model_cfg, manifest.window.window_size, 0); }

  std::set<std::pair<std::string, int>> done;
  if (std::filesystem::exists(out_path)) {
    for (const auto& r : load_results(out_path))
      done.insert({r.setting_id, r.trial_index});
  }

  struct Task {
    const SplitSetting* setting;
    int trial;
  };
  std::vector<Task> tasks;
  RunSummary summary;
  for (const auto& s : manifest.settings) {
    for (int t = 0; t < manifest.trials_per_setting; ++t) {
      ++summary.total;
      if (done.count({s.setting_id, t}))
        ++summary.skipped;
      else
        tasks.push_back({&s, t});
    }
  }
  if (tasks.empty()) return summary;

  const auto cache = WindowCache::from_environment();
  const auto subject_windows =
      build_subject_windows(ds, manifest.window, cache);

  std::vector<std::string> all_subjects;
  for (const auto& s : ds.subjects) all_subjects.push_back(s.id);

  auto run_one = [&](const Task& task) -> ResultRecord {
    const auto t0 = std::chrono::steady_clock::now();
    ResultRecord rec;
    rec.setting_id = task.setting->setting_id;
    rec.hm = task.setting->hm;
    rec.trial_index = task.trial;
    rec.seed = stable_hash(manifest.global_seed, task.setting->setting_id,
                           static_cast<std::uint64_t>(task.trial));
    rec.train_subjects = task.setting->train_subjects;
    std::sort(rec.train_subjects.begin(), rec.train_subjects.end());
    std::set<std::string> train_set(rec.train_subjects.begin(),
                                    rec.train_subjects.end());
    for (const auto& id : all_subjects)
      if (!train_set.count(id)) rec.test_subjects.push_back(id);
    std::sort(rec.test_subjects.begin(), rec.test_subjects.end());

    try {
      WindowSet train_ws, test_ws;
      for (const auto& id : rec.train_subjects)
        train_ws.append(subject_windows.at(id));
      for (const auto& id : rec.test_subjects)
        test_ws.append(subject_windows.at(id));
      train_ws.window_size = test_ws.window_size = manifest.window.window_size;
      train_ws.channels = test_ws.channels = ds.channels.size();

      // Subject-disjointness and purity guards; violations are harness
      // bugs, surfaced as failed records rather than silent corruption.
      for (const auto& src : test_ws.sources)
        if (train_set.count(src.subject_id))
          throw Error("test window drawn from training subject " +
                      src.subject_id);
      if (test_ws.augmented)
        throw Error("test windows must not be augmented");

      if (train_ws.size() == 0)
        throw TrainError(TrainError::Code::degenerate_labels,
                         "no training windows for " + rec.setting_id);

      const Normalizer norm = fit_normalizer(train_ws);
      norm.apply(train_ws);
      norm.apply(test_ws);

      const std::uint64_t init_seed =
          manifest.vary_init_seed ? stable_hash(rec.seed, "init")
                                  : stable_hash(manifest.global_seed, "init");
      Network<float> net(model_cfg, manifest.window.window_size, init_seed);
      const TrainResult tr = train(net, train_ws, manifest.train, rec.seed);

      if (test_ws.size() == 0)
        throw MetricError(MetricError::Code::no_samples,
                          "no test windows for " + rec.setting_id);
      const auto preds = net.predict(test_ws);
      const auto cm = confusion_matrix(test_ws.labels, preds, model_cfg.n_classes);
      rec.accuracy = accuracy(cm);
      rec.weighted_f1 = weighted_f1(cm);
      rec.confusion.assign(static_cast<std::size_t>(model_cfg.n_classes),
                           std::vector<long>(
                               static_cast<std::size_t>(model_cfg.n_classes)));
      for (int i = 0; i < model_cfg.n_classes; ++i)
        for (int k = 0; k < model_cfg.n_classes; ++k)
          rec.confusion[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] =
              cm.at(i, k);
      rec.epochs_run = tr.epochs_run;
      rec.best_epoch = tr.best_epoch;
      rec.status = "ok";
    } catch (const std::exception& e) {
      rec.status = "failed";
      rec.error = e.what();
    }
    rec.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    return rec;
  };

  std::ofstream out(out_path, std::ios::app);
  if (!out) throw Error("cannot open results file " + out_path.string());

  std::atomic<std::size_t> next_task{0};
  std::mutex mu;
  std::map<std::size_t, ResultRecord> pending;
  std::size_t next_flush = 0;

  auto worker = [&]() {
    while (true) {
      const std::size_t i = next_task.fetch_add(1);
      if (i >= tasks.size()) break;
      ResultRecord rec = run_one(tasks[i]);
      std::lock_guard<std::mutex> lock(mu);
      pending.emplace(i, std::move(rec));
      while (true) {
        auto it = pending.find(next_flush);
        if (it == pending.end()) break;
        if (it->second.status == "ok")
          ++summary.completed;
        else
          ++summary.failed;
        out << result_to_json(it->second).dump() << '\n';
        out.flush();
        pending.erase(it);
        ++next_flush;
      }
    }
  };

  const int n_threads =
      std::min<int>(workers, static_cast<int>(tasks.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (!out) throw Error("failed writing results to " + out_path.string());
  return summary;
}

enum class GroupBy { hm, hm_subgroup };
enum class BoxplotOver { settings, trials };

inline std::string group_key(HMLabel hm, GroupBy by) {
  if (by == GroupBy::hm && (hm == HMLabel::HM2a || hm == HMLabel::HM2b))
    return "HM2";
  return to_string(hm);
}

struct GroupSummary {
  std::string group;
  std::size_t n_settings = 0;
  std::size_t n_trials = 0;
  double acc_mean = 0.0;   // mean over per-setting trial means
  double acc_sd = 0.0;     // population SD over per-setting trial means
  double wf1_mean = 0.0;
  double wf1_sd = 0.0;
  BoxStats acc_box;        // distribution per --boxplot-over
  BoxStats wf1_box;
  BoxStats acc_sd_box;     // per-setting across-trial SDs
  BoxStats wf1_sd_box;
};

struct ReportResult {
  std::vector<GroupSummary> groups;
  std::size_t n_ok = 0;
  std::size_t n_failed = 0;
};

// Aggregation hierarchy: trials average into settings, settings form the
// per-group distributions. Failed records are excluded (and counted).
inline ReportResult summarize_results(const std::vector<ResultRecord>& records,
                                      GroupBy group_by,
                                      BoxplotOver boxplot_over) {
  ReportResult res;
  struct SettingAgg {
    HMLabel hm;
    std::vector<double> acc, wf1;
  };
  std::map<std::string, SettingAgg> by_setting;
  for (const auto& r : records) {
    if (r.status != "ok") {
      ++res.n_failed;
      continue;
    }
    ++res.n_ok;
    auto& agg = by_setting[r.setting_id];
    agg.hm = r.hm;
    agg.acc.push_back(r.accuracy);
    agg.wf1.push_back(r.weighted_f1);
  }
  if (res.n_ok == 0)
    throw ReportError(ReportError::Code::empty,
                      "no successful records to aggregate");

  struct GroupAgg {
    std::vector<double> setting_acc_means, setting_wf1_means;
    std::vector<double> setting_acc_sds, setting_wf1_sds;
    std::vector<double> trial_accs, trial_wf1s;
    std::size_t n_trials = 0;
  };
  std::map<std::string, GroupAgg> groups;
  for (const auto& [sid, agg] : by_setting) {
    auto& g = groups[group_key(agg.hm, group_by)];
    g.setting_acc_means.push_back(mean(agg.acc));
    g.setting_wf1_means.push_back(mean(agg.wf1));
    g.setting_acc_sds.push_back(stddev(agg.acc));
    g.setting_wf1_sds.push_back(stddev(agg.wf1));
    g.trial_accs.insert(g.trial_accs.end(), agg.acc.begin(), agg.acc.end());
    g.trial_wf1s.insert(g.trial_wf1s.end(), agg.wf1.begin(), agg.wf1.end());
    g.n_trials += agg.acc.size();
  }

  for (const auto& [name, g] : groups) {
    GroupSummary s;
    s.group = name;
    s.n_settings = g.setting_acc_means.size();
    s.n_trials = g.n_trials;
    s.acc_mean = mean(g.setting_acc_means);
    s.acc_sd = stddev(g.setting_acc_means);
    s.wf1_mean = mean(g.setting_wf1_means);
    s.wf1_sd = stddev(g.setting_wf1_means);
    if (boxplot_over == BoxplotOver::settings) {
      s.acc_box = box_stats(g.setting_acc_means);
      s.wf1_box = box_stats(g.setting_wf1_means);
    } else {
      s.acc_box = box_stats(g.trial_accs);
      s.wf1_box = box_stats(g.trial_wf1s);
    }
    s.acc_sd_box = box_stats(g.setting_acc_sds);
    s.wf1_sd_box = box_stats(g.setting_wf1_sds);
    res.groups.push_back(std::move(s));
  }
  // Canonical group order: HM1 < HM2 < HM2a < HM2b < HM3 < HM4
  // (lexicographic happens to match).
  std::sort(res.groups.begin(), res.groups.end(),
            [](const GroupSummary& a, const GroupSummary& b) {
              return a.group < b.group;
            });
  return res;
}

inline nlohmann::ordered_json box_to_json(const BoxStats& b) {
  return nlohmann::ordered_json{{"min", b.minimum}, {"q1", b.q1},
                                {"median", b.median}, {"q3", b.q3},
                                {"max", b.maximum},  {"n", b.n}};
}

// Writes summary.json and summary.csv (plus four SVG boxplots when
// requested) under out_dir and returns the aggregation.
inline ReportResult report(const std::filesystem::path& results_path,
                           const std::filesystem::path& out_dir,
                           GroupBy group_by = GroupBy::hm_subgroup,
                           BoxplotOver boxplot_over = BoxplotOver::settings,
                           bool plots = false) {
  const auto records = load_results(results_path);
  ReportResult res = summarize_results(records, group_by, boxplot_over);
  std::filesystem::create_directories(out_dir);

  nlohmann::ordered_json j;
  j["group_by"] = group_by == GroupBy::hm ? "hm" : "hm_subgroup";
  j["boxplot_over"] =
      boxplot_over == BoxplotOver::settings ? "settings" : "trials";
  j["records_ok"] = res.n_ok;
  j["records_failed"] = res.n_failed;
  j["groups"] = nlohmann::ordered_json::array();
  for (const auto& g : res.groups) {
    nlohmann::ordered_json gj;
    gj["group"] = g.group;
    gj["n_settings"] = g.n_settings;
    gj["n_trials"] = g.n_trials;
    gj["accuracy_mean"] = g.acc_mean;
    gj["accuracy_sd"] = g.acc_sd;
    gj["weighted_f1_mean"] = g.wf1_mean;
    gj["weighted_f1_sd"] = g.wf1_sd;
    gj["accuracy_box"] = box_to_json(g.acc_box);
    gj["weighted_f1_box"] = box_to_json(g.wf1_box);
    gj["accuracy_sd_box"] = box_to_json(g.acc_sd_box);
    gj["weighted_f1_sd_box"] = box_to_json(g.wf1_sd_box);
    j["groups"].push_back(gj);
  }
  {
    std::ofstream out(out_dir / "summary.json");
    out << j.dump(2) << '\n';
    if (!out) throw Error("failed to write summary.json");
  }
  {
    std::ofstream out(out_dir / "summary.csv");
    out << "group,n_settings,n_trials,accuracy_mean,accuracy_sd,"
           "weighted_f1_mean,weighted_f1_sd\n";
    char buf[256];
    for (const auto& g : res.groups) {
      std::snprintf(buf, sizeof(buf), "%s,%zu,%zu,%.6f,%.6f,%.6f,%.6f\n",
                    g.group.c_str(), g.n_settings, g.n_trials, g.acc_mean,
                    g.acc_sd, g.wf1_mean, g.wf1_sd);
      out << buf;
    }
    if (!out) throw Error("failed to write summary.csv");
  }
  if (plots) {
    std::vector<std::string> names;
    std::vector<BoxStats> acc, wf1, acc_sd, wf1_sd;
    for (const auto& g : res.groups) {
      names.push_back(g.group);
      acc.push_back(g.acc_box);
      wf1.push_back(g.wf1_box);
      acc_sd.push_back(g.acc_sd_box);
      wf1_sd.push_back(g.wf1_sd_box);
    }
    const std::string over =
        boxplot_over == BoxplotOver::settings ? "settings" : "trials";
    write_boxplot_svg(out_dir / "boxplot_accuracy.svg",
                      "Accuracy by heterogeneity group (" + over + ")",
                      "accuracy", names, acc);
    write_boxplot_svg(out_dir / "boxplot_weighted_f1.svg",
                      "Weighted F1 by heterogeneity group (" + over + ")",
                      "weighted F1", names, wf1);
    write_boxplot_svg(out_dir / "boxplot_accuracy_sd.svg",
                      "Per-setting accuracy SD by heterogeneity group",
                      "accuracy SD", names, acc_sd);
    write_boxplot_svg(out_dir / "boxplot_weighted_f1_sd.svg",
                      "Per-setting weighted F1 SD by heterogeneity group",
                      "weighted F1 SD", names, wf1_sd);
  }
  return res;
}

// Pooled subject characteristics across one or more dataset roots
// (metadata only; recordings are not needed). With multiple datasets,
// subject ids are prefixed by dataset name to keep them unique.
struct CharacteristicsReport {
  std::size_t n_subjects = 0;
  // [age class][gender]: counts of YF, YM, OF, OM.
  std::array<std::array<int, 2>, 2> profile_counts{{{0, 0}, {0, 0}}};
  struct Pair {
    ContingencyTable table;
    bool tested = false;
    AssociationResult result;
    std::string note;
  };
  std::vector<Pair> pairs;
};

inline CharacteristicsReport characteristics(
    const std::vector<LabeledDataset>& datasets) {
  if (datasets.empty()) throw ArgumentError("characteristics: no datasets");
  std::vector<SubjectProfile> pool;
  for (const auto& ds : datasets) {
    for (auto s : ds.subjects) {
      if (datasets.size() > 1) s.id = ds.name + "/" + s.id;
      pool.push_back(std::move(s));
    }
  }
  const auto profiles = binarize_profiles(pool);

  CharacteristicsReport rep;
  rep.n_subjects = profiles.size();
  for (const auto& p : profiles)
    ++rep.profile_counts[p.age_class == AgeClass::young ? 0 : 1]
                        [p.gender == Gender::female ? 0 : 1];

  const std::array<std::pair<Attribute, Attribute>, 6> pairs = {{
      {Attribute::gender, Attribute::age},
      {Attribute::gender, Attribute::height},
      {Attribute::gender, Attribute::weight},
      {Attribute::age, Attribute::height},
      {Attribute::age, Attribute::weight},
      {Attribute::height, Attribute::weight},
  }};
  for (const auto& [a, b] : pairs) {
    CharacteristicsReport::Pair p;
    p.table = crosstab(profiles, a, b);
    try {
      p.result = association_test(p.table);
      p.tested = true;
    } catch (const StatError& e) {
      p.note = e.what();
    }
    rep.pairs.push_back(std::move(p));
  }
  return rep;
}

inline nlohmann::ordered_json characteristics_json(
    const CharacteristicsReport& rep) {
  nlohmann::ordered_json j;
  j["n_subjects"] = rep.n_subjects;
  j["profile_counts"] = {{"young_female", rep.profile_counts[0][0]},
                         {"young_male", rep.profile_counts[0][1]},
                         {"old_female", rep.profile_counts[1][0]},
                         {"old_male", rep.profile_counts[1][1]}};
  j["pairs"] = nlohmann::ordered_json::array();
  for (const auto& p : rep.pairs) {
    nlohmann::ordered_json pj;
    pj["row_attr"] = p.table.row_attr;
    pj["col_attr"] = p.table.col_attr;
    pj["counts"] = {{p.table.counts[0][0], p.table.counts[0][1]},
                    {p.table.counts[1][0], p.table.counts[1][1]}};
    if (p.tested) {
      pj["statistic"] = p.result.statistic;
      pj["df"] = p.result.df;
      pj["p_value"] = p.result.p_value;
      pj["significant"] = p.result.significant;
    } else {
      pj["note"] = p.note;
    }
    j["pairs"].push_back(pj);
  }
  return j;
}

inline void print_characteristics(const CharacteristicsReport& rep,
                                  std::ostream& os) {
  os << "subjects: " << rep.n_subjects << "\n";
  os << "profiles: young/female " << rep.profile_counts[0][0]
     << ", young/male " << rep.profile_counts[0][1] << ", old/female "
     << rep.profile_counts[1][0] << ", old/male " << rep.profile_counts[1][1]
     << "\n\n";
  for (const auto& p : rep.pairs) {
    os << p.table.row_attr << " x " << p.table.col_attr << ":\n";
    char buf[128];
    std::snprintf(buf, sizeof(buf), "  %12s  %6s %6s\n", "",
                  p.table.col_labels[0].c_str(), p.table.col_labels[1].c_str());
    os << buf;
    for (int i = 0; i < 2; ++i) {
      std::snprintf(buf, sizeof(buf), "  %12s  %6ld %6ld\n",
                    p.table.row_labels[static_cast<std::size_t>(i)].c_str(),
                    p.table.counts[static_cast<std::size_t>(i)][0],
                    p.table.counts[static_cast<std::size_t>(i)][1]);
      os << buf;
    }
    if (p.tested) {
      std::snprintf(buf, sizeof(buf),
                    "  chi2 = %.4f, df = %d, p = %.4g%s\n", p.result.statistic,
                    p.result.df, p.result.p_value,
                    p.result.significant ? "  [significant at 0.05]" : "");
      os << buf;
    } else {
      os << "  not testable: " << p.note << "\n";
    }
    os << "\n";
  }
}

}  // namespace haraudit

#endif  // HARAUDIT_EXPERIMENT_HPP_
