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
// Command-line front end.
//
// Exit codes: 0 success, 2 configuration/usage error, 3 data error,
// 4 run completed but some trials failed.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "haraudit/curation.hpp"
#include "haraudit/dataset_io.hpp"
#include "haraudit/experiment.hpp"
#include "haraudit/ingest.hpp"
#include "haraudit/synthetic.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitPartial = 4;

int cmd_ingest(const std::string& kind, const std::string& in_dir,
               const std::string& out_dir, std::size_t downsample,
               const std::vector<std::string>& channels) {
  haraudit::IngestOptions opt;
  opt.downsample = downsample;
  opt.channels = channels;
  const auto ds =
      haraudit::ingest(in_dir, haraudit::parse_source_kind(kind), opt);
  haraudit::save_dataset(ds, out_dir);
  std::cout << "wrote " << ds.recordings.size() << " recordings, "
            << ds.subjects.size() << " subjects to " << out_dir << "\n";
  return kExitOk;
}

int cmd_synth(const haraudit::SyntheticConfig& cfg, const std::string& out_dir) {
  const auto ds = haraudit::generate_synthetic(cfg);
  haraudit::save_dataset(ds, out_dir);
  std::cout << "wrote synthetic dataset (" << ds.subjects.size()
            << " subjects, " << ds.recordings.size() << " recordings) to "
            << out_dir << "\n";
  return kExitOk;
}

int cmd_enumerate(const std::string& dataset, const std::string& hm,
                  int max_settings, std::uint64_t seed,
                  const std::string& out_path) {
  const auto meta = haraudit::load_meta(dataset);
  const auto profiles = haraudit::binarize_profiles(meta.subjects);
  std::vector<haraudit::SplitSetting> settings;
  if (hm == "all") {
    for (auto label : haraudit::kAllHMLabels) {
      try {
        auto part = haraudit::enumerate_settings(profiles, label, max_settings,
                                                 seed);
        settings.insert(settings.end(), part.begin(), part.end());
      } catch (const haraudit::EnumerationError& e) {
        std::cerr << "note: " << e.what() << "\n";
      }
    }
    if (settings.empty())
      throw haraudit::EnumerationError(
          haraudit::EnumerationError::Code::infeasible_hm,
          "no heterogeneity level has a realization in this pool");
  } else {
    settings = haraudit::enumerate_settings(
        profiles, haraudit::parse_hm_label(hm), max_settings, seed);
  }
  haraudit::save_manifest(settings, out_path);
  std::cout << "wrote " << settings.size() << " settings to " << out_path
            << "\n";
  return kExitOk;
}

int cmd_run(const std::string& manifest_path, const std::string& out_path,
            int workers) {
  const auto manifest = haraudit::load_experiment_manifest(manifest_path);
  const auto summary = haraudit::run_experiment(manifest, out_path, workers);
  std::cout << "trials total " << summary.total << ", completed "
            << summary.completed << ", failed " << summary.failed
            << ", skipped " << summary.skipped << "\n";
  return summary.failed > 0 ? kExitPartial : kExitOk;
}

int cmd_report(const std::string& results, const std::string& out_dir,
               const std::string& group_by, const std::string& boxplot_over,
               bool plots) {
  haraudit::GroupBy gb;
  if (group_by == "hm")
    gb = haraudit::GroupBy::hm;
  else if (group_by == "hm_subgroup")
    gb = haraudit::GroupBy::hm_subgroup;
  else
    throw haraudit::ConfigError("--group-by must be hm or hm_subgroup");
  haraudit::BoxplotOver bo;
  if (boxplot_over == "settings")
    bo = haraudit::BoxplotOver::settings;
  else if (boxplot_over == "trials")
    bo = haraudit::BoxplotOver::trials;
  else
    throw haraudit::ConfigError("--boxplot-over must be settings or trials");

  const auto res = haraudit::report(results, out_dir, gb, bo, plots);
  std::printf("%-6s %10s %9s %10s %9s %11s %8s\n", "group", "settings",
              "trials", "acc_mean", "acc_sd", "wf1_mean", "wf1_sd");
  for (const auto& g : res.groups)
    std::printf("%-6s %10zu %9zu %10.4f %9.4f %11.4f %8.4f\n", g.group.c_str(),
                g.n_settings, g.n_trials, g.acc_mean, g.acc_sd, g.wf1_mean,
                g.wf1_sd);
  if (res.n_failed > 0)
    std::cout << "(excluded " << res.n_failed << " failed records)\n";
  return kExitOk;
}

int cmd_characteristics(const std::vector<std::string>& roots,
                        const std::string& json_out) {
  std::vector<haraudit::LabeledDataset> metas;
  for (const auto& r : roots) metas.push_back(haraudit::load_meta(r));
  const auto rep = haraudit::characteristics(metas);
  haraudit::print_characteristics(rep, std::cout);
  if (!json_out.empty()) {
    std::ofstream out(json_out);
    out << haraudit::characteristics_json(rep).dump(2) << '\n';
    if (!out) throw haraudit::Error("failed to write " + json_out);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dataset bias audit harness for activity recognition"};
  app.require_subcommand(1);

  // ingest
  auto* ingest = app.add_subcommand(
      "ingest", "Convert a raw dataset layout into canonical form");
  std::string ingest_kind, ingest_in, ingest_out;
  std::size_t ingest_down = 1;
  std::vector<std::string> ingest_channels;
  ingest->add_option("--kind", ingest_kind,
                     "Source layout: lara_omocap, motionsense, canonical")
      ->required();
  ingest->add_option("--in", ingest_in, "Source root directory")->required();
  ingest->add_option("--out", ingest_out, "Canonical output directory")
      ->required();
  ingest->add_option("--downsample", ingest_down,
                     "Keep every k-th frame (default 1)");
  ingest->add_option("--channels", ingest_channels,
                     "Comma-separated channel subset/order")
      ->delimiter(',');

  // synth
  auto* synth =
      app.add_subcommand("synth", "Generate a synthetic labeled cohort");
  haraudit::SyntheticConfig synth_cfg;
  std::string synth_out;
  synth->add_option("--out", synth_out, "Canonical output directory")
      ->required();
  synth->add_option("--young-female", synth_cfg.young_female,
                    "Young female subjects")->required();
  synth->add_option("--old-female", synth_cfg.old_female,
                    "Old female subjects")->required();
  synth->add_option("--young-male", synth_cfg.young_male,
                    "Young male subjects")->required();
  synth->add_option("--old-male", synth_cfg.old_male, "Old male subjects")
      ->required();
  synth->add_option("--classes", synth_cfg.n_classes, "Activity classes");
  synth->add_option("--channels", synth_cfg.n_channels, "Sensor channels");
  synth->add_option("--frames", synth_cfg.frames_per_recording,
                    "Frames per recording");
  synth->add_option("--rate", synth_cfg.sampling_rate_hz, "Sampling rate (Hz)");
  synth->add_option("--strength", synth_cfg.idiosyncrasy_strength,
                    "Subject idiosyncrasy strength (0 = none)");
  synth->add_option("--noise", synth_cfg.noise_sd, "White noise SD");
  synth->add_option("--seed", synth_cfg.seed, "Generator seed");

  // enumerate
  auto* enumerate = app.add_subcommand(
      "enumerate", "Enumerate four-subject training groups by heterogeneity");
  std::string enum_dataset, enum_hm = "all", enum_out;
  int enum_max = 10;
  std::uint64_t enum_seed = 0;
  enumerate->add_option("--dataset", enum_dataset, "Canonical dataset root")
      ->required();
  enumerate->add_option("--hm", enum_hm,
                        "HM1|HM2a|HM2b|HM3|HM4 or 'all' (default all)");
  enumerate->add_option("--max-settings", enum_max,
                        "Cap per heterogeneity level (default 10)");
  enumerate->add_option("--seed", enum_seed, "Selection shuffle seed");
  enumerate->add_option("--out", enum_out, "Manifest output path")->required();

  // run
  auto* run = app.add_subcommand("run", "Run an experiment manifest");
  std::string run_manifest, run_out;
  int run_workers = 1;
  run->add_option("--manifest", run_manifest, "Experiment manifest JSON")
      ->required();
  run->add_option("--out", run_out, "Results JSONL path (appended)")
      ->required();
  run->add_option("--workers", run_workers, "Worker threads (default 1)");

  // report
  auto* rep = app.add_subcommand("report", "Aggregate a results file");
  std::string rep_results, rep_out, rep_group = "hm_subgroup",
              rep_box = "settings";
  bool rep_plots = false;
  rep->add_option("--results", rep_results, "Results JSONL path")->required();
  rep->add_option("--out", rep_out, "Output directory")->required();
  rep->add_option("--group-by", rep_group, "hm or hm_subgroup (default)");
  rep->add_option("--boxplot-over", rep_box,
                  "settings (default) or trials");
  rep->add_flag("--plots", rep_plots, "Also write SVG boxplots");

  // characteristics
  auto* chars = app.add_subcommand(
      "characteristics", "Subject-pool composition and association tests");
  std::vector<std::string> chars_roots;
  std::string chars_json;
  chars->add_option("--dataset", chars_roots,
                    "Canonical dataset root (repeatable; pooled)")
      ->required();
  chars->add_option("--json", chars_json, "Also write a JSON report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*ingest)
      return cmd_ingest(ingest_kind, ingest_in, ingest_out, ingest_down,
                        ingest_channels);
    if (*synth) return cmd_synth(synth_cfg, synth_out);
    if (*enumerate)
      return cmd_enumerate(enum_dataset, enum_hm, enum_max, enum_seed, enum_out);
    if (*run) return cmd_run(run_manifest, run_out, run_workers);
    if (*rep)
      return cmd_report(rep_results, rep_out, rep_group, rep_box, rep_plots);
    if (*chars) return cmd_characteristics(chars_roots, chars_json);
  } catch (const haraudit::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const haraudit::ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const haraudit::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitConfig;
}
