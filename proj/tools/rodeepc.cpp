#include "rodeepc/bench.hpp"
#include "rodeepc/config.hpp"
#include "rodeepc/csv.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

namespace {

using namespace rodeepc;

struct Overrides {
  std::vector<std::uint64_t> seeds;
  std::optional<Index> duration;
  std::optional<int> workers;
  std::optional<std::string> output;
  std::optional<std::string> controller;
  std::optional<double> sigma_thr;
  bool no_traces = false;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seeds", o.seeds, "Seed list (replaces the configured seeds)");
  cmd->add_option("--duration", o.duration, "Closed-loop duration T_c");
  cmd->add_option("--workers", o.workers, "Worker threads");
  cmd->add_option("-o,--output", o.output, "Output directory");
  cmd->add_flag("--no-traces", o.no_traces, "Skip per-step trace files");
}

ExperimentConfig load(const std::string& path, const Overrides& o) {
  ExperimentConfig c = load_config(path);
  if (!o.seeds.empty()) c.seeds = o.seeds;
  if (o.duration) c.duration = *o.duration;
  if (o.workers) c.workers = *o.workers;
  if (o.output) c.output_dir = *o.output;
  if (o.controller) c.controller = parse_variant(*o.controller);
  if (o.sigma_thr) c.deepc.sigma_thr = *o.sigma_thr;
  if (o.no_traces) c.write_traces = false;
  c.validate();
  return c;
}

void print_summary(const char* label, const std::vector<RunMetrics>& runs) {
  const Summary s = summarize(runs);
  std::printf("%-16s rmse=%.6g violations=%.3g (runs>0: %lld) loop=%.3g ms update=%.3g ms failed=%lld\n",
              label, s.mean_rmse, s.mean_violations, static_cast<long long>(s.runs_with_violations),
              1e3 * s.mean_loop_time, 1e3 * s.mean_svd_update_time, static_cast<long long>(s.failed));
}

int report_error(const std::string& kind, const std::string& message) {
  nlohmann::json j{{"error", {{"kind", kind}, {"message", message}}}};
  std::cerr << j.dump() << '\n';
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rodeepc: online reduced-order DeePC experiments"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides ov;

  auto* run = app.add_subcommand("run", "Run one controller over all seeds");
  run->add_option("config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--controller", ov.controller, "Override the controller variant");
  run->add_option("--sigma-thr", ov.sigma_thr, "Override sigma_thr");
  add_overrides(run, ov);

  std::vector<std::string> variants;
  std::string timing_baseline;
  auto* compare = app.add_subcommand("compare", "Run several controller variants on shared seeds");
  compare->add_option("config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  compare->add_option("--variants", variants, "Variants to compare")->required();
  compare->add_option("--timing-baseline", timing_baseline, "Variant used as denominator of timing ratios");
  add_overrides(compare, ov);

  std::vector<std::string> values;
  auto* sweep = app.add_subcommand("sweep-thr", "Sweep sigma_thr for the configured controller");
  sweep->add_option("config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  sweep->add_option("--values", values, "Threshold values (numbers or inf)")->required();
  sweep->add_option("--controller", ov.controller, "Override the controller variant");
  add_overrides(sweep, ov);

  std::uint64_t data_seed = 1;
  std::string data_out;
  auto* gen = app.add_subcommand("gen-data", "Generate and export offline data");
  gen->add_option("config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  gen->add_option("--seed", data_seed, "Run seed (offline seed offset is added)");
  gen->add_option("--csv", data_out, "Output CSV path (default <output>/offline.csv)");
  gen->add_option("-o,--output", ov.output, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*run) {
      const ExperimentConfig cfg = load(config_path, ov);
      const auto runs = run_experiment(cfg);
      write_metrics_json(cfg.output_dir / to_string(cfg.controller) / "metrics.json", runs);
      print_summary(to_string(cfg.controller), runs);
    } else if (*compare) {
      ExperimentConfig cfg = load(config_path, ov);
      std::vector<ControllerVariant> vs;
      for (const auto& v : variants) vs.push_back(parse_variant(v));
      const auto results = compare_variants(cfg, vs);
      nlohmann::json summary = nlohmann::json::object();
      for (const auto& r : results) {
        write_metrics_json(cfg.output_dir / to_string(r.variant) / "metrics.json", r.runs);
        print_summary(to_string(r.variant), r.runs);
        summary[to_string(r.variant)] = nlohmann::json::parse(metrics_to_json(r.runs))["summary"];
      }
      if (!timing_baseline.empty()) {
        const ControllerVariant base = parse_variant(timing_baseline);
        const VariantResult* b = nullptr;
        for (const auto& r : results)
          if (r.variant == base) b = &r;
        if (!b) throw ConfigError("timing baseline is not among the compared variants");
        nlohmann::json timing = nlohmann::json::object();
        for (const auto& r : results) {
          if (r.variant == base) continue;
          const TimingReport t = compare_timing(r.runs, b->runs);
          timing[to_string(r.variant)] = nlohmann::json::parse(timing_to_json(t));
          std::printf("%s / %s: loop ratio %.3g [%.3g, %.3g]\n", to_string(r.variant),
                      to_string(base), t.loop_time.mean, t.loop_time.ci_low, t.loop_time.ci_high);
        }
        summary["timing_vs_" + timing_baseline] = timing;
      }
      std::filesystem::create_directories(cfg.output_dir);
      std::ofstream(cfg.output_dir / "comparison.json") << summary.dump(2) << '\n';
    } else if (*sweep) {
      const ExperimentConfig cfg = load(config_path, ov);
      std::vector<double> thr;
      for (const auto& v : values) {
        if (v == "inf") thr.push_back(kInf);
        else thr.push_back(std::stod(v));
      }
      const auto rows = sweep_threshold(cfg, thr);
      std::filesystem::create_directories(cfg.output_dir);
      CsvWriter w(cfg.output_dir / "sweep.csv",
                  {"sigma_thr", "seed", "tracking_rmse", "violation_count", "admitted_windows",
                   "mean_loop_time", "failed"});
      for (const auto& r : rows) {
        w.write_row({r.sigma_thr, static_cast<double>(r.metrics.seed), r.metrics.tracking_rmse,
                     static_cast<double>(r.metrics.violation_count),
                     static_cast<double>(r.metrics.admitted_windows), r.metrics.mean_loop_time,
                     r.metrics.failed ? 1.0 : 0.0});
        std::printf("thr=%-10g seed=%-6llu rmse=%.6g violations=%lld admitted=%lld\n", r.sigma_thr,
                    static_cast<unsigned long long>(r.metrics.seed), r.metrics.tracking_rmse,
                    static_cast<long long>(r.metrics.violation_count),
                    static_cast<long long>(r.metrics.admitted_windows));
      }
    } else if (*gen) {
      ExperimentConfig cfg = load_config(config_path);
      if (ov.output) cfg.output_dir = *ov.output;
      const OfflineData d = make_offline_data(cfg, data_seed);
      const std::filesystem::path out =
          data_out.empty() ? cfg.output_dir / "offline.csv" : std::filesystem::path(data_out);
      if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
      write_offline_csv(out, d);
      std::printf("wrote %s (segments=%zu, rank=%lld, attempts=%d)\n", out.string().c_str(),
                  d.inputs.size(), static_cast<long long>(d.rank), d.attempts);
    }
  } catch (const Error& e) {
    return report_error(e.kind(), e.what());
  } catch (const std::exception& e) {
    return report_error("internal", e.what());
  }
  return 0;
}
