#include "rodeepc/bench.hpp"

#include "rodeepc/csv.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

namespace rodeepc {

namespace {

using Clock = std::chrono::steady_clock;
constexpr Index kTimingSkip = 10;

double elapsed(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::filesystem::path seed_dir(const ExperimentConfig& cfg, std::uint64_t seed) {
  return cfg.output_dir / to_string(cfg.controller) / ("seed_" + std::to_string(seed));
}

// Runs f(i) for i in [0, n) on up to `workers` threads; rethrows the first error.
template <class F>
void parallel_for(std::size_t n, int workers, F f) {
  const std::size_t w = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < w; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

RatioEstimate ratio_estimate(const std::vector<double>& r) {
  RatioEstimate e;
  e.samples = r.size();
  if (r.empty()) {
    e.mean = e.ci_low = e.ci_high = std::nan("");
    return e;
  }
  double sum = 0.0;
  for (double v : r) sum += v;
  e.mean = sum / static_cast<double>(r.size());
  double var = 0.0;
  for (double v : r) var += (v - e.mean) * (v - e.mean);
  const double sd = r.size() > 1 ? std::sqrt(var / static_cast<double>(r.size() - 1)) : 0.0;
  const double half = 1.96 * sd / std::sqrt(static_cast<double>(r.size()));
  e.ci_low = e.mean - half;
  e.ci_high = e.mean + half;
  return e;
}

nlohmann::json ratio_json(const RatioEstimate& e) {
  return {{"mean", e.mean}, {"ci_low", e.ci_low}, {"ci_high", e.ci_high}, {"samples", e.samples}};
}

}  // namespace

OfflineData make_offline_data(const ExperimentConfig& cfg, std::uint64_t seed) {
  OfflineSpec spec;
  spec.lengths = cfg.offline_lengths;
  spec.depth = cfg.deepc.depth();
  spec.required_rank = cfg.offline_required_rank;
  spec.lambda = cfg.offline_lambda;
  spec.retries = cfg.offline_retries;
  spec.seed = seed + cfg.offline_seed_offset;
  if (cfg.offline_noise && cfg.noise_bound > 0.0)
    spec.noise = NoiseModel{NoiseKind::uniform_ball, cfg.noise_bound, spec.seed};
  return generate_offline_data(cfg.make_plant(), cfg.excitation, spec);
}

RunOutput run_single(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  RunOutput out;
  RunMetrics& mt = out.metrics;
  mt.seed = seed;
  mt.variant = cfg.controller;
  mt.sigma_thr = cfg.deepc.sigma_thr;

  const OfflineData offline = make_offline_data(cfg, seed);
  mt.offline_rank = offline.rank;

  DeePCConfig dc = cfg.deepc;
  dc.variant = cfg.controller;
  Controller ctrl(dc, offline.inputs, offline.outputs);
  LtvPlant plant = cfg.make_plant();
  if (cfg.noise_bound > 0.0) plant.set_noise(NoiseModel{NoiseKind::uniform_ball, cfg.noise_bound, seed});

  const Index N = dc.horizon;
  const Index T = dc.t_ini;
  Index k = warmup(ctrl, plant, cfg.warmup, 0);

  double sq_err = 0.0;
  std::int64_t err_count = 0;
  double loop_sum = 0.0, upd_sum = 0.0, solve_sum = 0.0;
  std::int64_t timed = 0;
  out.trace.reserve(static_cast<std::size_t>(std::max<Index>(0, cfg.duration - T)));
  mt.order_trace.reserve(out.trace.capacity());

  try {
    for (; k < cfg.duration; ++k) {
      const Matrix ref = cfg.output_reference.window(k, N);
      Matrix iref;
      if (cfg.input_reference) iref = cfg.input_reference->window(k, N);

      const auto t0 = Clock::now();
      const StepResult sr = ctrl.solve(ref, cfg.input_reference ? &iref : nullptr);
      const double solve_t = elapsed(t0);
      const Vector y = plant.step(sr.applied_input, k);
      const auto t1 = Clock::now();
      const UpdateInfo info = ctrl.observe(sr.applied_input, y);
      const double upd_t = elapsed(t1);
      const double loop_t = solve_t + upd_t;

      TraceRow row;
      row.k = k;
      row.u = sr.applied_input;
      row.y = y;
      row.reference = ref.col(0);
      if (cfg.input_reference) row.input_reference = iref.col(0);
      row.rank = ctrl.rank();
      row.reduced_order = ctrl.reduced_order();
      row.sigma_r = ctrl.sigma_r();
      row.admitted = info.admitted;
      row.loop_time = loop_t;

      if (cfg.metric == TrackingMetric::output) {
        sq_err += (row.reference - y).squaredNorm();
        err_count += y.size();
      } else {
        sq_err += (row.input_reference - row.u).squaredNorm();
        err_count += row.u.size();
      }
      for (Index i = 0; i < y.size(); ++i)
        if (std::abs(y(i)) > cfg.violation_bound) {
          ++mt.violation_count;
          break;
        }
      if (sr.status != QpStatus::optimal) ++mt.non_optimal_solves;
      if (info.admitted) ++mt.admitted_windows;
      if (mt.steps >= kTimingSkip) {
        loop_sum += loop_t;
        upd_sum += upd_t;
        solve_sum += solve_t;
        ++timed;
      }
      ++mt.steps;
      mt.order_trace.push_back(OrderSample{k, ctrl.rank(), ctrl.reduced_order(), ctrl.sigma_max(),
                                           ctrl.sigma_ra(), ctrl.sigma_r()});
      out.trace.push_back(std::move(row));
    }
  } catch (const Error& e) {
    mt.failed = true;
    mt.failure = e.what();
    mt.failure_step = k;
  }

  mt.tracking_rmse = err_count > 0 ? std::sqrt(sq_err / static_cast<double>(err_count)) : 0.0;
  if (timed > 0) {
    mt.mean_loop_time = loop_sum / static_cast<double>(timed);
    mt.mean_svd_update_time = upd_sum / static_cast<double>(timed);
    mt.mean_solve_time = solve_sum / static_cast<double>(timed);
  }
  return out;
}

std::vector<RunMetrics> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<RunMetrics> results(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), cfg.workers, [&](std::size_t i) {
    RunOutput out = run_single(cfg, cfg.seeds[i]);
    if (cfg.write_traces) {
      const auto dir = seed_dir(cfg, cfg.seeds[i]);
      std::filesystem::create_directories(dir);
      write_trace_csv(dir / "trace.csv", out.trace);
      write_orders_csv(dir / "orders.csv", out.metrics.order_trace);
    }
    results[i] = std::move(out.metrics);
  });
  return results;
}

std::vector<VariantResult> compare_variants(const ExperimentConfig& cfg,
                                            const std::vector<ControllerVariant>& variants) {
  std::vector<VariantResult> out;
  for (ControllerVariant v : variants) {
    ExperimentConfig c = cfg;
    c.controller = v;
    out.push_back(VariantResult{v, run_experiment(c)});
  }
  return out;
}

std::vector<SweepRow> sweep_threshold(const ExperimentConfig& cfg, const std::vector<double>& thresholds) {
  std::vector<SweepRow> rows;
  for (double thr : thresholds) {
    if (thr < 0.0 || std::isnan(thr)) throw ConfigError("sigma_thr values must be >= 0");
    ExperimentConfig c = cfg;
    c.deepc.sigma_thr = thr;
    c.write_traces = false;
    for (RunMetrics& m : run_experiment(c)) rows.push_back(SweepRow{thr, std::move(m)});
  }
  return rows;
}

TimingReport compare_timing(const std::vector<RunMetrics>& a, const std::vector<RunMetrics>& b) {
  if (a.size() != b.size()) throw DimensionError("timing comparison needs paired runs");
  std::vector<double> loop, svd;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (b[i].mean_loop_time > 0.0) loop.push_back(a[i].mean_loop_time / b[i].mean_loop_time);
    if (b[i].mean_svd_update_time > 0.0)
      svd.push_back(a[i].mean_svd_update_time / b[i].mean_svd_update_time);
  }
  return TimingReport{ratio_estimate(loop), ratio_estimate(svd)};
}

Summary summarize(const std::vector<RunMetrics>& runs) {
  Summary s;
  if (runs.empty()) return s;
  for (const auto& r : runs) {
    s.mean_rmse += r.tracking_rmse;
    s.mean_violations += static_cast<double>(r.violation_count);
    s.runs_with_violations += r.violation_count > 0 ? 1 : 0;
    s.mean_loop_time += r.mean_loop_time;
    s.mean_svd_update_time += r.mean_svd_update_time;
    s.failed += r.failed ? 1 : 0;
  }
  const auto n = static_cast<double>(runs.size());
  s.mean_rmse /= n;
  s.mean_violations /= n;
  s.mean_loop_time /= n;
  s.mean_svd_update_time /= n;
  return s;
}

std::int64_t count_violations(const std::vector<TraceRow>& trace, double bound) {
  std::int64_t n = 0;
  for (const auto& r : trace)
    if (r.y.size() > 0 && r.y.cwiseAbs().maxCoeff() > bound) ++n;
  return n;
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& trace) {
  std::vector<std::string> header{"k"};
  const Index m = trace.empty() ? 0 : trace.front().u.size();
  const Index p = trace.empty() ? 0 : trace.front().y.size();
  const bool has_iref = !trace.empty() && trace.front().input_reference.size() > 0;
  for (Index i = 0; i < m; ++i) header.push_back("u" + std::to_string(i));
  for (Index i = 0; i < p; ++i) header.push_back("y" + std::to_string(i));
  for (Index i = 0; i < p; ++i) header.push_back("ref" + std::to_string(i));
  if (has_iref)
    for (Index i = 0; i < m; ++i) header.push_back("uref" + std::to_string(i));
  for (const char* h : {"r", "r_a", "sigma_r", "admitted", "loop_time"}) header.emplace_back(h);
  CsvWriter w(path, header);
  std::vector<double> row;
  for (const auto& t : trace) {
    row.clear();
    row.push_back(static_cast<double>(t.k));
    for (Index i = 0; i < m; ++i) row.push_back(t.u(i));
    for (Index i = 0; i < p; ++i) row.push_back(t.y(i));
    for (Index i = 0; i < p; ++i) row.push_back(t.reference(i));
    if (has_iref)
      for (Index i = 0; i < m; ++i) row.push_back(t.input_reference(i));
    row.push_back(static_cast<double>(t.rank));
    row.push_back(static_cast<double>(t.reduced_order));
    row.push_back(t.sigma_r);
    row.push_back(t.admitted ? 1.0 : 0.0);
    row.push_back(t.loop_time);
    w.write_row(row);
  }
}

void write_orders_csv(const std::filesystem::path& path, const std::vector<OrderSample>& orders) {
  CsvWriter w(path, {"k", "r", "r_a", "sigma_1", "sigma_ra", "sigma_r"});
  for (const auto& o : orders)
    w.write_row({static_cast<double>(o.k), static_cast<double>(o.rank),
                 static_cast<double>(o.reduced_order), o.sigma_max, o.sigma_ra, o.sigma_r});
}

void write_offline_csv(const std::filesystem::path& path, const OfflineData& data) {
  const Index m = data.inputs.channels();
  const Index p = data.outputs.channels();
  std::vector<std::string> header{"k", "segment"};
  for (Index i = 0; i < m; ++i) header.push_back("u" + std::to_string(i));
  for (Index i = 0; i < p; ++i) header.push_back("y" + std::to_string(i));
  CsvWriter w(path, header);
  std::vector<double> row;
  for (std::size_t s = 0; s < data.inputs.size(); ++s) {
    const auto& u = data.inputs.segments()[s];
    const auto& y = data.outputs.segments()[s];
    for (Index k = 0; k < u.length(); ++k) {
      row.assign({static_cast<double>(k), static_cast<double>(s)});
      for (Index i = 0; i < m; ++i) row.push_back(u.data()(i, k));
      for (Index i = 0; i < p; ++i) row.push_back(y.data()(i, k));
      w.write_row(row);
    }
  }
}

std::string metrics_to_json(const std::vector<RunMetrics>& runs, int indent) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : runs) {
    nlohmann::json j{{"seed", r.seed},
                     {"variant", to_string(r.variant)},
                     {"sigma_thr", std::isfinite(r.sigma_thr) ? nlohmann::json(r.sigma_thr)
                                                              : nlohmann::json("inf")},
                     {"tracking_rmse", r.tracking_rmse},
                     {"violation_count", r.violation_count},
                     {"mean_loop_time", r.mean_loop_time},
                     {"mean_svd_update_time", r.mean_svd_update_time},
                     {"mean_solve_time", r.mean_solve_time},
                     {"admitted_windows", r.admitted_windows},
                     {"steps", r.steps},
                     {"non_optimal_solves", r.non_optimal_solves},
                     {"offline_rank", r.offline_rank},
                     {"failed", r.failed}};
    if (!r.order_trace.empty()) {
      j["final_rank"] = r.order_trace.back().rank;
      j["final_reduced_order"] = r.order_trace.back().reduced_order;
    }
    if (r.failed) {
      j["failure"] = r.failure;
      j["failure_step"] = r.failure_step;
    }
    arr.push_back(std::move(j));
  }
  const Summary s = summarize(runs);
  nlohmann::json out{{"runs", arr},
                     {"summary",
                      {{"mean_rmse", s.mean_rmse},
                       {"mean_violations", s.mean_violations},
                       {"runs_with_violations", s.runs_with_violations},
                       {"mean_loop_time", s.mean_loop_time},
                       {"mean_svd_update_time", s.mean_svd_update_time},
                       {"failed", s.failed}}}};
  return out.dump(indent);
}

void write_metrics_json(const std::filesystem::path& path, const std::vector<RunMetrics>& runs) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw Error("io", "cannot write " + path.string());
  f << metrics_to_json(runs) << '\n';
}

std::string timing_to_json(const TimingReport& report, int indent) {
  nlohmann::json j{{"loop_time_ratio", ratio_json(report.loop_time)},
                   {"svd_update_time_ratio", ratio_json(report.svd_time)}};
  return j.dump(indent);
}

}  // namespace rodeepc
