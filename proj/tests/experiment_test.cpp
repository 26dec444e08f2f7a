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
#include "haraudit/experiment.hpp"
#include "haraudit/synthetic.hpp"
#include "util.hpp"

using namespace haraudit;
using haraudit_test::TempDir;

namespace {

// Small synthetic cohort saved as a canonical root; big enough to train on
// but sized for fast unit runs.
void make_dataset_root(const std::filesystem::path& root) {
  SyntheticConfig cfg;
  cfg.young_female = 2;
  cfg.old_female = 2;
  cfg.young_male = 2;
  cfg.old_male = 2;
  cfg.n_classes = 3;
  cfg.n_channels = 2;
  cfg.frames_per_recording = 360;
  cfg.sampling_rate_hz = 50.0;
  cfg.idiosyncrasy_strength = 0.5;
  cfg.noise_sd = 0.05;
  cfg.seed = 21;
  save_dataset(generate_synthetic(cfg), root);
}

ExperimentManifest make_manifest(const std::filesystem::path& root) {
  ExperimentManifest m;
  m.dataset_root = root;
  m.window.window_size = 24;
  m.window.step = 12;
  m.model.conv_layers = 1;
  m.model.kernel_frames = 3;
  m.model.filters = 3;
  m.model.fc_units = 6;
  m.model.dropout_p = 0.1;
  m.train.lr = 2e-3;
  m.train.batch_size = 32;
  m.train.epochs = 2;
  m.train.noise_sigma = 0.01;
  m.train.patience = 0;
  m.train.val_fraction = 0.1;
  m.trials_per_setting = 2;
  m.global_seed = 7;

  const auto ds = load_meta(root);
  const auto profiles = binarize_profiles(ds.subjects);
  auto hm3 = enumerate_settings(profiles, HMLabel::HM3, 2, 7);
  auto hm4 = enumerate_settings(profiles, HMLabel::HM4, 2, 7);
  m.settings = hm3;
  m.settings.insert(m.settings.end(), hm4.begin(), hm4.end());
  return m;
}

std::vector<std::string> read_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) lines.push_back(line);
  return lines;
}

ResultRecord ok_record(const std::string& setting, HMLabel hm, int trial,
                       double acc, double wf1) {
  ResultRecord r;
  r.setting_id = setting;
  r.hm = hm;
  r.trial_index = trial;
  r.seed = 1;
  r.train_subjects = {"a", "b", "c", "d"};
  r.test_subjects = {"e"};
  r.status = "ok";
  r.accuracy = acc;
  r.weighted_f1 = wf1;
  r.confusion = {{1, 0}, {0, 1}};
  r.epochs_run = 2;
  r.best_epoch = 1;
  r.wall_time_s = 0.5;
  return r;
}

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("result records round-trip through json with stable key order") {
  const auto rec = ok_record("hm1_00", HMLabel::HM1, 3, 0.75, 0.7);
  const auto j = result_to_json(rec);
  const std::string dumped = j.dump();
  // Canonical field order, wall time last.
  CHECK(dumped.find("\"setting_id\"") < dumped.find("\"hm\""));
  CHECK(dumped.find("\"hm\"") < dumped.find("\"trial_index\""));
  CHECK(dumped.find("\"status\"") < dumped.find("\"accuracy\""));
  CHECK(dumped.rfind("\"wall_time_s\"") > dumped.rfind("\"best_epoch\""));

  const auto back = result_from_json(nlohmann::json::parse(dumped));
  CHECK(back.setting_id == rec.setting_id);
  CHECK(back.hm == rec.hm);
  CHECK(back.trial_index == rec.trial_index);
  CHECK(back.seed == rec.seed);
  CHECK(back.train_subjects == rec.train_subjects);
  CHECK(back.test_subjects == rec.test_subjects);
  CHECK(back.status == rec.status);
  CHECK(back.accuracy == rec.accuracy);
  CHECK(back.weighted_f1 == rec.weighted_f1);
  CHECK(back.confusion == rec.confusion);
  CHECK(back.epochs_run == rec.epochs_run);
  CHECK(back.best_epoch == rec.best_epoch);
  CHECK(back.wall_time_s == rec.wall_time_s);

  ResultRecord failed;
  failed.setting_id = "hm4_01";
  failed.hm = HMLabel::HM4;
  failed.trial_index = 0;
  failed.seed = 2;
  failed.train_subjects = {"a", "b", "c", "d"};
  failed.test_subjects = {"e"};
  failed.status = "failed";
  failed.error = "boom";
  failed.wall_time_s = 0.1;
  const auto fj = result_to_json(failed);
  CHECK(fj.contains("error"));
  CHECK_FALSE(fj.contains("accuracy"));
  const auto fback = result_from_json(fj);
  CHECK(fback.status == "failed");
  CHECK(fback.error == "boom");
}

TEST_CASE("results equivalence ignores wall time only") {
  TempDir tmp("equiv");
  auto write_results = [&](const std::string& name, double acc,
                           double wall) {
    auto rec = ok_record("hm1_00", HMLabel::HM1, 0, acc, 0.7);
    rec.wall_time_s = wall;
    std::ofstream out(tmp / name);
    out << result_to_json(rec).dump() << '\n';
    return tmp / name;
  };
  const auto a = write_results("a.jsonl", 0.8, 1.0);
  const auto b = write_results("b.jsonl", 0.8, 2.0);
  const auto c = write_results("c.jsonl", 0.81, 1.0);
  CHECK(results_equivalent(a, b));
  CHECK_FALSE(results_equivalent(a, c));

  // Different record counts are never equivalent.
  {
    std::ofstream out(tmp / "a.jsonl", std::ios::app);
    out << result_to_json(ok_record("hm1_00", HMLabel::HM1, 1, 0.9, 0.9)).dump()
        << '\n';
  }
  CHECK_FALSE(results_equivalent(a, b));
}

TEST_CASE("experiment manifests load with relative paths and defaults") {
  TempDir tmp("manifest");
  make_dataset_root(tmp / "data");

  nlohmann::json settings = nlohmann::json::array();
  settings.push_back({{"setting_id", "x"},
                      {"hm", "HM1"},
                      {"train_subjects", {"a", "b", "c", "d"}},
                      {"seed", 3}});
  {
    std::ofstream out(tmp / "splits.json");
    out << settings.dump();
  }
  nlohmann::json j = {{"dataset_root", "data"},
                      {"window", {{"window_size", 24}, {"step", 12}}},
                      {"settings_path", "splits.json"}};
  {
    std::ofstream out(tmp / "exp.json");
    out << j.dump();
  }

  const auto m = load_experiment_manifest(tmp / "exp.json");
  CHECK(m.dataset_root == tmp / "data");
  CHECK(m.window.window_size == 24);
  CHECK(m.trials_per_setting == 5);        // default
  CHECK(m.train.lr == TrainConfig{}.lr);   // default
  CHECK_FALSE(m.vary_init_seed);
  REQUIRE(m.settings.size() == 1);
  CHECK(m.settings[0].setting_id == "x");

  // Inline settings work too; missing both is an error.
  j.erase("settings_path");
  j["settings"] = settings;
  j["trials_per_setting"] = 3;
  {
    std::ofstream out(tmp / "exp2.json");
    out << j.dump();
  }
  CHECK(load_experiment_manifest(tmp / "exp2.json").trials_per_setting == 3);

  j.erase("settings");
  {
    std::ofstream out(tmp / "exp3.json");
    out << j.dump();
  }
  CHECK_THROWS_AS(load_experiment_manifest(tmp / "exp3.json"), ConfigError);

  j["settings"] = settings;
  j["trials_per_setting"] = 0;
  {
    std::ofstream out(tmp / "exp4.json");
    out << j.dump();
  }
  CHECK_THROWS_AS(load_experiment_manifest(tmp / "exp4.json"), ConfigError);
}

TEST_CASE("model config defaults derive from the dataset") {
  TempDir tmp("derive");
  make_dataset_root(tmp / "data");
  const auto ds = load_dataset(tmp / "data");

  ModelConfig m;  // everything default
  const auto eff = effective_model_config(m, ds);
  REQUIRE(eff.branches.size() == 1);
  CHECK(eff.branches[0] == std::vector<int>{0, 1});
  CHECK(eff.n_classes == 3);

  ModelConfig partial;
  partial.branches = {{1}, {0}};
  partial.n_classes = 7;
  const auto kept = effective_model_config(partial, ds);
  CHECK(kept.branches == partial.branches);
  CHECK(kept.n_classes == 7);
}

TEST_CASE("runs are complete, ordered, resumable, and worker-invariant") {
  TempDir tmp("run");
  make_dataset_root(tmp / "data");
  const auto manifest = make_manifest(tmp / "data");
  const std::size_t expected =
      manifest.settings.size() *
      static_cast<std::size_t>(manifest.trials_per_setting);

  const auto out1 = tmp / "r1.jsonl";
  const auto s1 = run_experiment(manifest, out1, 1);
  CHECK(s1.total == expected);
  CHECK(s1.completed == expected);
  CHECK(s1.skipped == 0);
  CHECK(s1.failed == 0);

  const auto records = load_results(out1);
  REQUIRE(records.size() == expected);
  std::size_t i = 0;
  for (const auto& s : manifest.settings) {
    for (int t = 0; t < manifest.trials_per_setting; ++t, ++i) {
      CHECK(records[i].setting_id == s.setting_id);
      CHECK(records[i].trial_index == t);
      CHECK(records[i].status == "ok");
      CHECK(records[i].accuracy >= 0.0);
      CHECK(records[i].accuracy <= 1.0);
      CHECK(records[i].train_subjects.size() == 4);
      CHECK(records[i].test_subjects.size() == 4);
    }
  }

  // Re-run: everything is already present.
  const auto s2 = run_experiment(manifest, out1, 1);
  CHECK(s2.skipped == expected);
  CHECK(s2.completed == 0);
  CHECK(load_results(out1).size() == expected);

  // Truncate to simulate an interrupted run, then resume.
  const auto lines = read_lines(out1);
  {
    std::ofstream out(out1, std::ios::trunc);
    for (std::size_t k = 0; k + 3 < lines.size(); ++k) out << lines[k] << '\n';
  }
  const auto s3 = run_experiment(manifest, out1, 1);
  CHECK(s3.skipped == expected - 3);
  CHECK(s3.completed == 3);
  CHECK(results_equivalent(out1, out1));

  // A fresh run and a resumed run carry identical payloads.
  const auto out2 = tmp / "r2.jsonl";
  run_experiment(manifest, out2, 1);
  CHECK(results_equivalent(out1, out2));

  // Worker count changes neither content nor order.
  const auto out3 = tmp / "r3.jsonl";
  run_experiment(manifest, out3, 3);
  CHECK(results_equivalent(out1, out3));
  const auto r3 = load_results(out3);
  for (std::size_t k = 0; k < r3.size(); ++k) {
    CHECK(r3[k].setting_id == records[k].setting_id);
    CHECK(r3[k].trial_index == records[k].trial_index);
    CHECK(r3[k].accuracy == records[k].accuracy);
  }
}

TEST_CASE("window caching returns identical windows on a warm start") {
  TempDir tmp("cache");
  make_dataset_root(tmp / "data");
  const auto ds = load_dataset(tmp / "data");
  WindowConfig cfg;
  cfg.window_size = 24;
  cfg.step = 12;

  const auto cache_dir = tmp / "wcache";
  const std::optional<WindowCache> cache{WindowCache(cache_dir)};
  const auto cold = build_subject_windows(ds, cfg, cache);
  CHECK(std::filesystem::exists(cache_dir));
  std::size_t files = 0;
  for (const auto& de : std::filesystem::directory_iterator(cache_dir)) {
    (void)de;
    ++files;
  }
  CHECK(files == 2 * ds.subjects.size());  // payload + sidecar per subject

  const auto warm = build_subject_windows(ds, cfg, cache);
  REQUIRE(warm.size() == cold.size());
  for (const auto& [id, ws] : cold) {
    const auto& w2 = warm.at(id);
    CHECK(w2.data == ws.data);
    CHECK(w2.labels == ws.labels);
    REQUIRE(w2.sources.size() == ws.sources.size());
    for (std::size_t k = 0; k < ws.sources.size(); ++k) {
      CHECK(w2.sources[k].subject_id == ws.sources[k].subject_id);
      CHECK(w2.sources[k].recording_index == ws.sources[k].recording_index);
      CHECK(w2.sources[k].start_frame == ws.sources[k].start_frame);
    }
  }

  // A corrupted payload silently falls back to recomputation.
  for (const auto& de : std::filesystem::directory_iterator(cache_dir)) {
    if (de.path().extension() == ".bin") {
      std::ofstream out(de.path(), std::ios::trunc | std::ios::binary);
      out << "junk";
    }
  }
  const auto again = build_subject_windows(ds, cfg, cache);
  for (const auto& [id, ws] : cold) CHECK(again.at(id).data == ws.data);

  // No cache: plain recomputation matches too.
  const auto plain = build_subject_windows(ds, cfg, std::nullopt);
  for (const auto& [id, ws] : cold) CHECK(plain.at(id).data == ws.data);
}

TEST_CASE("summaries aggregate trials into settings into groups") {
  std::vector<ResultRecord> records;
  records.push_back(ok_record("hm1_00", HMLabel::HM1, 0, 0.5, 0.45));
  records.push_back(ok_record("hm1_00", HMLabel::HM1, 1, 0.7, 0.65));
  records.push_back(ok_record("hm1_01", HMLabel::HM1, 0, 0.8, 0.75));
  records.push_back(ok_record("hm1_01", HMLabel::HM1, 1, 0.8, 0.75));
  records.push_back(ok_record("hm2a_00", HMLabel::HM2a, 0, 0.6, 0.55));
  records.push_back(ok_record("hm2b_00", HMLabel::HM2b, 0, 0.9, 0.85));
  ResultRecord bad;
  bad.setting_id = "hm4_00";
  bad.hm = HMLabel::HM4;
  bad.trial_index = 0;
  bad.status = "failed";
  bad.error = "x";
  records.push_back(bad);

  const auto by_sub = summarize_results(records, GroupBy::hm_subgroup,
                                        BoxplotOver::settings);
  CHECK(by_sub.n_ok == 6);
  CHECK(by_sub.n_failed == 1);
  REQUIRE(by_sub.groups.size() == 3);  // HM1, HM2a, HM2b
  CHECK(by_sub.groups[0].group == "HM1");
  CHECK(by_sub.groups[0].n_settings == 2);
  CHECK(by_sub.groups[0].n_trials == 4);
  // Setting means 0.6 and 0.8 -> group mean 0.7, population SD 0.1.
  CHECK(by_sub.groups[0].acc_mean == doctest::Approx(0.7));
  CHECK(by_sub.groups[0].acc_sd == doctest::Approx(0.1));
  // Boxplot over settings: n equals the setting count.
  CHECK(by_sub.groups[0].acc_box.n == 2);
  // Per-setting SDs: {0.1, 0.0}.
  CHECK(by_sub.groups[0].acc_sd_box.maximum == doctest::Approx(0.1));
  CHECK(by_sub.groups[0].acc_sd_box.minimum == doctest::Approx(0.0));

  CHECK(by_sub.groups[1].group == "HM2a");
  CHECK(by_sub.groups[2].group == "HM2b");

  // Merged two-profile group.
  const auto by_hm =
      summarize_results(records, GroupBy::hm, BoxplotOver::trials);
  REQUIRE(by_hm.groups.size() == 2);  // HM1, HM2
  CHECK(by_hm.groups[1].group == "HM2");
  CHECK(by_hm.groups[1].n_settings == 2);
  CHECK(by_hm.groups[1].acc_mean == doctest::Approx(0.75));
  // Boxplot over trials: n equals the trial count.
  CHECK(by_hm.groups[0].acc_box.n == 4);

  // Nothing but failures: refuse to aggregate.
  std::vector<ResultRecord> only_bad = {bad};
  CHECK_THROWS_AS(
      summarize_results(only_bad, GroupBy::hm, BoxplotOver::settings),
      ReportError);
}

TEST_CASE("report writes summary files and optional plots") {
  TempDir tmp("report");
  const auto results = tmp / "results.jsonl";
  {
    std::ofstream out(results);
    out << result_to_json(ok_record("hm1_00", HMLabel::HM1, 0, 0.5, 0.45)).dump()
        << '\n'
        << result_to_json(ok_record("hm1_00", HMLabel::HM1, 1, 0.7, 0.65)).dump()
        << '\n'
        << result_to_json(ok_record("hm4_00", HMLabel::HM4, 0, 0.9, 0.88)).dump()
        << '\n';
  }

  const auto out_dir = tmp / "out";
  const auto res = report(results, out_dir, GroupBy::hm_subgroup,
                          BoxplotOver::settings, false);
  CHECK(res.groups.size() == 2);
  CHECK(std::filesystem::exists(out_dir / "summary.json"));
  CHECK(std::filesystem::exists(out_dir / "summary.csv"));
  CHECK_FALSE(std::filesystem::exists(out_dir / "boxplot_accuracy.svg"));

  std::ifstream in(out_dir / "summary.json");
  nlohmann::json j;
  in >> j;
  CHECK(j.at("records_ok") == 3);
  CHECK(j.at("groups").size() == 2);
  CHECK(j.at("groups")[0].at("group") == "HM1");
  CHECK(j.at("groups")[0].at("accuracy_mean") == doctest::Approx(0.6));

  const auto lines = read_lines(out_dir / "summary.csv");
  REQUIRE(lines.size() == 3);  // header + 2 groups
  CHECK(lines[0].rfind("group,", 0) == 0);
  CHECK(lines[1].rfind("HM1,1,2,0.600000", 0) == 0);

  report(results, out_dir, GroupBy::hm_subgroup, BoxplotOver::settings, true);
  for (const char* name :
       {"boxplot_accuracy.svg", "boxplot_weighted_f1.svg",
        "boxplot_accuracy_sd.svg", "boxplot_weighted_f1_sd.svg"}) {
    CHECK(std::filesystem::exists(out_dir / name));
    std::ifstream svg(out_dir / name);
    std::string first;
    std::getline(svg, first);
    CHECK(first.find("<svg") != std::string::npos);
  }
}

TEST_CASE("pooled characteristics count profiles and test all six pairs") {
  TempDir tmp("chars");
  make_dataset_root(tmp / "data");
  const auto ds = load_meta(tmp / "data");

  const auto rep = characteristics({ds});
  CHECK(rep.n_subjects == 8);
  CHECK(rep.profile_counts[0][0] == 2);
  CHECK(rep.profile_counts[0][1] == 2);
  CHECK(rep.profile_counts[1][0] == 2);
  CHECK(rep.profile_counts[1][1] == 2);
  REQUIRE(rep.pairs.size() == 6);
  CHECK(rep.pairs[0].table.row_attr == "gender");
  CHECK(rep.pairs[0].table.col_attr == "age");
  CHECK(rep.pairs[5].table.row_attr == "height");
  CHECK(rep.pairs[5].table.col_attr == "weight");

  // Pooling two copies doubles every count (ids get prefixed, so the pool
  // stays valid).
  auto ds2 = ds;
  ds2.name = "copy";
  const auto pooled = characteristics({ds, ds2});
  CHECK(pooled.n_subjects == 16);
  CHECK(pooled.profile_counts[0][0] == 4);

  // Degenerate marginals surface as untested pairs with a note.
  LabeledDataset mono = ds;
  for (auto& s : mono.subjects) s.gender = Gender::female;
  const auto degen = characteristics({mono});
  CHECK_FALSE(degen.pairs[0].tested);
  CHECK(!degen.pairs[0].note.empty());
  CHECK(degen.pairs[5].tested);  // height x weight still fine

  const auto cj = characteristics_json(degen);
  CHECK(cj.at("pairs")[0].contains("note"));
  CHECK_FALSE(cj.at("pairs")[0].contains("p_value"));
}

}  // TEST_SUITE
