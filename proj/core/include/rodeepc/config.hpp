#pragma once

#include "rodeepc/common.hpp"
#include "rodeepc/deepc.hpp"
#include "rodeepc/plants.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace rodeepc {

enum class BenchmarkKind { ltv, rollover, custom };
const char* to_string(BenchmarkKind b);

/// Piecewise-constant vector signal, right-continuous, optionally periodic.
struct PiecewiseSignal {
  std::vector<std::pair<Index, Vector>> points;
  std::optional<Index> period;

  Index dim() const noexcept { return points.empty() ? 0 : points.front().second.size(); }
  Vector at(Index k) const;
  /// Columns k, k+1, ..., k+n-1.
  Matrix window(Index k, Index n) const;
};

enum class TrackingMetric { output, input };

struct ExperimentConfig {
  BenchmarkKind benchmark = BenchmarkKind::ltv;
  ControllerVariant controller = ControllerVariant::reduced_online;
  DeePCConfig deepc;

  // Plant.
  double sampling_time = 0.1;
  double noise_bound = 0.002;
  std::optional<Vector> initial_state;
  LambdaSchedule schedule;
  Matrix custom_a0, custom_b0, custom_c, custom_da, custom_db;

  // Offline data collection.
  ExcitationPolicy excitation;
  std::vector<Index> offline_lengths{300, 300};
  double offline_lambda = 0.0;
  bool offline_noise = true;
  std::uint64_t offline_seed_offset = 1000;
  int offline_retries = 5;
  Index offline_required_rank = 0;

  WarmupPolicy warmup;
  PiecewiseSignal output_reference;
  std::optional<PiecewiseSignal> input_reference;
  TrackingMetric metric = TrackingMetric::output;
  double violation_bound = kInf;  // |y_i| > bound counts as a violation

  Index duration = 2100;
  std::vector<std::uint64_t> seeds{1};
  int workers = 1;
  std::filesystem::path output_dir = "out";
  bool write_traces = true;

  LtvPlant make_plant() const;
  /// Throws ConfigError on any inconsistency, before anything is simulated.
  void validate() const;
};

/// Benchmark defaults (horizons, durations, noise, warmup, boxes) for `kind`.
ExperimentConfig default_config(BenchmarkKind kind);

/// Parses a JSON experiment description. Unknown keys are rejected. Bounds
/// may be numbers, "inf"/"-inf" strings, or null (unbounded).
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace rodeepc
