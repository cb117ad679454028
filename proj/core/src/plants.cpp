#include "rodeepc/plants.hpp"

#include <algorithm>
#include <cmath>

namespace rodeepc {

LambdaSchedule::LambdaSchedule() : points_{{0, 0.0}} {}

LambdaSchedule::LambdaSchedule(std::vector<std::pair<Index, double>> breakpoints,
                               std::optional<Index> period)
    : points_(std::move(breakpoints)), period_(period) {
  if (points_.empty()) throw ConfigError("lambda schedule needs at least one breakpoint");
  for (std::size_t i = 1; i < points_.size(); ++i)
    if (points_[i].first <= points_[i - 1].first)
      throw ConfigError("lambda breakpoints must be strictly increasing in step");
  for (const auto& p : points_)
    if (!std::isfinite(p.second)) throw ConfigError("lambda values must be finite");
  if (period_ && (*period_ <= 0 || points_.back().first >= *period_))
    throw ConfigError("lambda period must exceed the last breakpoint");
}

LambdaSchedule LambdaSchedule::constant(double value) { return LambdaSchedule({{0, value}}); }

double LambdaSchedule::operator()(Index k) const {
  if (period_) k = ((k % *period_) + *period_) % *period_;
  // Steps before the first breakpoint take its value.
  double v = points_.front().second;
  for (const auto& p : points_) {
    if (p.first > k) break;
    v = p.second;
  }
  return v;
}

NoiseSource::NoiseSource(const NoiseModel& model, std::uint64_t stream) : model_(model) {
  std::seed_seq seq{static_cast<std::uint32_t>(model.seed & 0xffffffffu),
                    static_cast<std::uint32_t>(model.seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  rng_.seed(seq);
}

Vector NoiseSource::draw(Index dim) {
  if (model_.kind == NoiseKind::none || model_.bound == 0.0) return Vector::Zero(dim);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  Vector v(dim);
  double norm = 0.0;
  do {
    for (Index i = 0; i < dim; ++i) v(i) = nd(rng_);
    norm = v.norm();
  } while (norm == 0.0);
  return v * (model_.bound * ud(rng_) / norm);
}

LtvPlant::LtvPlant(Matrix a0, Matrix b0, Matrix c, Matrix da, Matrix db, Vector x0)
    : a0_(std::move(a0)), b0_(std::move(b0)), c_(std::move(c)), da_(std::move(da)),
      db_(std::move(db)) {
  const Index n = a0_.rows();
  if (a0_.cols() != n || da_.rows() != n || da_.cols() != n)
    throw ShapeError("A0 and drift_A must be square and of equal size");
  if (b0_.rows() != n || db_.rows() != n || db_.cols() != b0_.cols())
    throw ShapeError("B0 and drift_B must be n x m");
  if (c_.cols() != n) throw ShapeError("C must have n columns");
  set_initial_state(std::move(x0));
}

void LtvPlant::set_initial_state(Vector x0) {
  if (x0.size() != state_dim()) throw ShapeError("initial state has wrong dimension");
  x0_ = std::move(x0);
  x_ = x0_;
}

Matrix LtvPlant::A_at(Index k) const { return a0_ + schedule_(k) * da_; }
Matrix LtvPlant::B_at(Index k) const { return b0_ + schedule_(k) * db_; }

void LtvPlant::set_noise(const NoiseModel& model) {
  if (model.bound < 0.0) throw ConfigError("noise bound must be >= 0");
  process_ = NoiseSource(model, 1);
  measurement_ = NoiseSource(model, 2);
}

Vector LtvPlant::step(const Eigen::Ref<const Vector>& u, Index k) {
  if (u.size() != input_dim()) throw ShapeError("plant input has wrong dimension");
  if (!u.allFinite()) throw SimulationError("non-finite plant input", k);
  Vector y = c_ * x_ + measurement_.draw(output_dim());
  const double lam = schedule_(k);
  x_ = (a0_ + lam * da_) * x_ + (b0_ + lam * db_) * u + process_.draw(state_dim());
  if (!x_.allFinite()) throw SimulationError("plant state diverged", k);
  return y;
}

LtvPlant make_ltv_benchmark() {
  Matrix a0(4, 4), da(4, 4), b0(4, 2), db(4, 2), c(2, 4);
  a0 << 0.921, 0, 0.041, 0,
        0, 0.918, 0, 0.033,
        0, 0, 0.924, 0,
        0, 0, 0, 0.937;
  da << 0.01, 0, 0.001, 0,
        0, 0.01, 0, 0.001,
        0, 0, 0.01, 0,
        0, 0, 0, 0.01;
  b0 << 0.017, 0.001,
        0.001, 0.023,
        0, 0.061,
        0.072, 0;
  db << 0.001, 0.0001,
        0.0001, 0.001,
        0, 0.001,
        0.001, 0;
  c << 1, 0, 0, 0,
       0, 1, 0, 0;
  return LtvPlant(a0, b0, c, da, db, Vector::Constant(4, 0.5));
}

LtvPlant make_rollover_benchmark(double ts) {
  if (!(ts > 0.0)) throw DomainError("sampling time must be positive");
  Matrix m(4, 4);
  m << 0.00499, 0.997, 0.0154, -6.81e-5,
       -78.3, -12.2, -65.3, -3.89,
       -0.932, -0.799, -6.20, -1.57,
       1.52, 3.32, 8.27, -1.49;
  Vector b(4);
  b << -5.76e-5, 2.80, 0.278, 0.655;
  Matrix c(1, 4);
  c << 0.1200, 0.0124, -0.0108, 0.0109;
  const Matrix a0 = ts * m + Matrix::Identity(4, 4);
  const Matrix b0 = ts * b;
  return LtvPlant(a0, b0, c, 0.01 * a0, 0.01 * b0, Vector::Zero(4));
}

OfflineData generate_offline_data(LtvPlant plant, const ExcitationPolicy& policy,
                                  const OfflineSpec& spec) {
  if (spec.lengths.empty()) throw ConfigError("offline data needs at least one segment");
  if (spec.depth < 1) throw DimensionError("offline depth must be >= 1");
  if (policy.hold < 1) throw ConfigError("excitation hold must be >= 1");
  for (Index t : spec.lengths)
    if (t < spec.depth)
      throw DimensionError("offline segment of length " + std::to_string(t) +
                           " is shorter than depth " + std::to_string(spec.depth));
  const Index m = plant.input_dim();
  const Index p = plant.output_dim();
  const Index required =
      spec.required_rank > 0 ? spec.required_rank : m * spec.depth + plant.state_dim();
  plant.set_schedule(LambdaSchedule::constant(spec.lambda));

  for (int attempt = 0; attempt < std::max(1, spec.retries); ++attempt) {
    const std::uint64_t seed = spec.seed + static_cast<std::uint64_t>(attempt) * 0x9e3779b97f4a7c15ull;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ud(policy.offset - policy.amplitude,
                                              policy.offset + policy.amplitude);
    NoiseModel nm = spec.noise;
    nm.seed = seed;
    plant.set_noise(nm);
    plant.reset();
    std::vector<SignalSequence> us, ys;
    for (Index t : spec.lengths) {
      if (spec.reset_each_segment) plant.reset();
      Matrix u(m, t), y(p, t);
      for (Index k = 0; k < t; ++k) {
        if (k % policy.hold == 0)
          for (Index i = 0; i < m; ++i) u(i, k) = ud(rng);
        else
          u.col(k) = u.col(k - 1);
        y.col(k) = plant.step(u.col(k), k);
      }
      us.emplace_back(std::move(u));
      ys.emplace_back(std::move(y));
    }
    OfflineData d{TrajectoryDataset(std::move(us)), TrajectoryDataset(std::move(ys)), 0,
                  attempt + 1};
    d.rank = numerical_rank(stack_io(d.inputs, d.outputs, spec.depth)).rank;
    if (d.rank >= required) return d;
  }
  throw DataGenerationError("offline data failed to reach rank " + std::to_string(required) +
                            " after " + std::to_string(spec.retries) + " attempts");
}

}  // namespace rodeepc
