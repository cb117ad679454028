#pragma once

#include "rodeepc/common.hpp"
#include "rodeepc/trajectory.hpp"

#include <optional>
#include <random>
#include <utility>
#include <vector>

namespace rodeepc {

/// Piecewise-constant, right-continuous parameter trace lambda(k). With a
/// repeat period the breakpoints are interpreted modulo the period.
class LambdaSchedule {
 public:
  LambdaSchedule();
  LambdaSchedule(std::vector<std::pair<Index, double>> breakpoints,
                 std::optional<Index> period = std::nullopt);
  static LambdaSchedule constant(double value);

  double operator()(Index k) const;
  const std::vector<std::pair<Index, double>>& breakpoints() const noexcept { return points_; }
  std::optional<Index> period() const noexcept { return period_; }

 private:
  std::vector<std::pair<Index, double>> points_;
  std::optional<Index> period_;
};

enum class NoiseKind { none, uniform_ball };

struct NoiseModel {
  NoiseKind kind = NoiseKind::none;
  double bound = 0.0;
  std::uint64_t seed = 0;
};

/// Draws vectors uniformly in direction with radius uniform on [0, bound].
class NoiseSource {
 public:
  NoiseSource() = default;
  NoiseSource(const NoiseModel& model, std::uint64_t stream);
  Vector draw(Index dim);
  const NoiseModel& model() const noexcept { return model_; }

 private:
  NoiseModel model_;
  std::mt19937_64 rng_;
};

/// x(k+1) = A(k) x(k) + B(k) u(k) + d_p(k),  y(k) = C x(k) + d_m(k) with
/// A(k) = A0 + lambda(k) dA and B(k) = B0 + lambda(k) dB.
class LtvPlant {
 public:
  LtvPlant() = default;
  LtvPlant(Matrix a0, Matrix b0, Matrix c, Matrix da, Matrix db, Vector x0);

  Index state_dim() const noexcept { return a0_.rows(); }
  Index input_dim() const noexcept { return b0_.cols(); }
  Index output_dim() const noexcept { return c_.rows(); }

  Matrix A_at(Index k) const;
  Matrix B_at(Index k) const;
  const Matrix& A0() const noexcept { return a0_; }
  const Matrix& B0() const noexcept { return b0_; }
  const Matrix& C() const noexcept { return c_; }
  const Matrix& drift_A() const noexcept { return da_; }
  const Matrix& drift_B() const noexcept { return db_; }

  void set_schedule(LambdaSchedule s) { schedule_ = std::move(s); }
  const LambdaSchedule& schedule() const noexcept { return schedule_; }
  /// Seeds independent process and measurement streams from `model.seed`.
  void set_noise(const NoiseModel& model);

  const Vector& initial_state() const noexcept { return x0_; }
  void set_initial_state(Vector x0);
  const Vector& state() const noexcept { return x_; }
  void reset() { x_ = x0_; }

  /// Returns y(k) = C x(k) + d_m(k), then advances the state with lambda(k)
  /// and d_p(k). Throws SimulationError if the state becomes non-finite.
  Vector step(const Eigen::Ref<const Vector>& u, Index k);

 private:
  Matrix a0_, b0_, c_, da_, db_;
  Vector x0_, x_;
  LambdaSchedule schedule_;
  NoiseSource process_, measurement_;
};

LtvPlant make_ltv_benchmark();
LtvPlant make_rollover_benchmark(double sampling_time = 0.1);

struct ExcitationPolicy {
  double amplitude = 1.0;  // uniform on [offset - amplitude, offset + amplitude]
  double offset = 0.0;
  Index hold = 1;  // each draw is held for this many samples
};

struct OfflineSpec {
  std::vector<Index> lengths;
  Index depth = 1;
  /// Minimum acceptable rank of the stacked mosaic-Hankel matrix; 0 selects
  /// m*K + n.
  Index required_rank = 0;
  double lambda = 0.0;  // frozen parameter during collection
  bool reset_each_segment = true;
  int retries = 5;
  std::uint64_t seed = 0;
  NoiseModel noise;
};

struct OfflineData {
  TrajectoryDataset inputs;
  TrajectoryDataset outputs;
  Index rank = 0;
  int attempts = 0;
};

/// Collects excited I/O segments from `plant` (which is left reset). Throws
/// DataGenerationError when the rank requirement fails `retries` times.
OfflineData generate_offline_data(LtvPlant plant, const ExcitationPolicy& policy,
                                  const OfflineSpec& spec);

inline bool ltr_violation(double y) { return std::abs(y) > 1.0; }

}  // namespace rodeepc
