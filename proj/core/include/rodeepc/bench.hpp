#pragma once

#include "rodeepc/common.hpp"
#include "rodeepc/config.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace rodeepc {

struct OrderSample {
  Index k = 0;
  Index rank = 0;
  Index reduced_order = 0;
  double sigma_max = 0.0;
  double sigma_ra = 0.0;
  double sigma_r = 0.0;
};

struct RunMetrics {
  std::uint64_t seed = 0;
  ControllerVariant variant = ControllerVariant::static_deepc;
  double sigma_thr = 0.0;

  double tracking_rmse = 0.0;
  std::int64_t violation_count = 0;
  double mean_loop_time = 0.0;        // seconds, solve + data update
  double mean_svd_update_time = 0.0;  // seconds, data update only
  double mean_solve_time = 0.0;
  std::int64_t admitted_windows = 0;
  std::int64_t steps = 0;             // closed-loop steps completed
  std::int64_t non_optimal_solves = 0;
  Index offline_rank = 0;
  std::vector<OrderSample> order_trace;

  bool failed = false;
  std::string failure;
  Index failure_step = -1;
};

/// Per-step record of one closed-loop run.
struct TraceRow {
  Index k = 0;
  Vector u, y, reference, input_reference;
  Index rank = 0;
  Index reduced_order = 0;
  double sigma_r = 0.0;
  bool admitted = false;
  double loop_time = 0.0;
};

struct RunOutput {
  RunMetrics metrics;
  std::vector<TraceRow> trace;
};

/// Offline data for `seed`, generated on the frozen plant as configured.
OfflineData make_offline_data(const ExperimentConfig& cfg, std::uint64_t seed);

/// One seed of warmup followed by the receding-horizon loop up to cfg.duration.
/// Errors after the first closed-loop step yield partial metrics with `failed`
/// set; configuration errors propagate.
RunOutput run_single(const ExperimentConfig& cfg, std::uint64_t seed);

/// Runs every seed of cfg across cfg.workers threads. Results follow the
/// order of cfg.seeds. When cfg.write_traces is set, per-seed trace.csv and
/// orders.csv land in output_dir/<variant>/seed_<seed>/.
std::vector<RunMetrics> run_experiment(const ExperimentConfig& cfg);

struct VariantResult {
  ControllerVariant variant;
  std::vector<RunMetrics> runs;
};
std::vector<VariantResult> compare_variants(const ExperimentConfig& cfg,
                                            const std::vector<ControllerVariant>& variants);

struct SweepRow {
  double sigma_thr;
  RunMetrics metrics;
};
std::vector<SweepRow> sweep_threshold(const ExperimentConfig& cfg, const std::vector<double>& thresholds);

struct RatioEstimate {
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t samples = 0;
};

struct TimingReport {
  RatioEstimate loop_time;  // a / b
  RatioEstimate svd_time;
};

/// Per-seed ratios a/b, paired by position, with a normal 95% interval.
TimingReport compare_timing(const std::vector<RunMetrics>& a, const std::vector<RunMetrics>& b);

struct Summary {
  double mean_rmse = 0.0;
  double mean_violations = 0.0;
  std::int64_t runs_with_violations = 0;
  double mean_loop_time = 0.0;
  double mean_svd_update_time = 0.0;
  std::int64_t failed = 0;
};
Summary summarize(const std::vector<RunMetrics>& runs);

std::int64_t count_violations(const std::vector<TraceRow>& trace, double bound);

void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& trace);
void write_orders_csv(const std::filesystem::path& path, const std::vector<OrderSample>& orders);
/// One row per sample: k, segment, u channels, y channels.
void write_offline_csv(const std::filesystem::path& path, const OfflineData& data);

std::string metrics_to_json(const std::vector<RunMetrics>& runs, int indent = 2);
void write_metrics_json(const std::filesystem::path& path, const std::vector<RunMetrics>& runs);
std::string timing_to_json(const TimingReport& report, int indent = 2);

}  // namespace rodeepc
