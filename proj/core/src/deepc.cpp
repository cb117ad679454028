#include "rodeepc/deepc.hpp"

#include <chrono>
#include <cmath>

namespace rodeepc {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

const char* to_string(ControllerVariant v) {
  switch (v) {
    case ControllerVariant::static_deepc: return "static";
    case ControllerVariant::replace_oldest: return "replace_oldest";
    case ControllerVariant::gated_online: return "gated_online";
    case ControllerVariant::reduced_online: return "reduced_online";
  }
  return "unknown";
}

ControllerVariant parse_variant(const std::string& s) {
  if (s == "static" || s == "static_deepc") return ControllerVariant::static_deepc;
  if (s == "replace_oldest" || s == "replace") return ControllerVariant::replace_oldest;
  if (s == "gated_online" || s == "gated") return ControllerVariant::gated_online;
  if (s == "reduced_online" || s == "reduced") return ControllerVariant::reduced_online;
  throw ConfigError("unknown controller variant '" + s + "'");
}

const char* to_string(GateEngine e) {
  return e == GateEngine::incremental ? "incremental" : "batch";
}

GateEngine parse_gate_engine(const std::string& s) {
  if (s == "incremental") return GateEngine::incremental;
  if (s == "batch") return GateEngine::batch;
  throw ConfigError("unknown gate engine '" + s + "'");
}

ChannelBox ChannelBox::unbounded(Index dim) {
  return ChannelBox{Vector::Constant(dim, -kInf), Vector::Constant(dim, kInf)};
}

ChannelBox ChannelBox::symmetric(Index dim, double bound) {
  return ChannelBox{Vector::Constant(dim, -bound), Vector::Constant(dim, bound)};
}

bool ChannelBox::contains(const Eigen::Ref<const Vector>& v, double slack) const {
  for (Index i = 0; i < v.size(); ++i)
    if (v(i) < lower(i) - slack || v(i) > upper(i) + slack) return false;
  return true;
}

void DeePCConfig::normalize() {
  if (t_ini < 1 || horizon < 1) throw ConfigError("T_ini and N must be >= 1");
  if (input_dim < 1 || output_dim < 1) throw ConfigError("input and output dimensions must be >= 1");
  if (state_dim_bound < 0) throw ConfigError("state dimension bound must be >= 0");
  if (output_weight.size() == 0) output_weight = Matrix::Identity(output_dim, output_dim);
  if (input_weight.size() == 0) input_weight = 0.1 * Matrix::Identity(input_dim, input_dim);
  if (output_weight.rows() != output_dim || output_weight.cols() != output_dim)
    throw ConfigError("output weight must be p x p");
  if (input_weight.rows() != input_dim || input_weight.cols() != input_dim)
    throw ConfigError("input weight must be m x m");
  if (!output_weight.isApprox(output_weight.transpose()) ||
      !input_weight.isApprox(input_weight.transpose()))
    throw ConfigError("cost weights must be symmetric");
  if (reg_g < 0.0 || reg_slack < 0.0) throw ConfigError("regularization weights must be >= 0");
  if (!(sigma_thr >= 0.0)) throw ConfigError("sigma_thr must be >= 0");
  if (input_box.lower.size() == 0) input_box = ChannelBox::unbounded(input_dim);
  if (output_box.lower.size() == 0) output_box = ChannelBox::unbounded(output_dim);
  auto check_box = [](const ChannelBox& b, Index dim, const char* what) {
    if (b.lower.size() != dim || b.upper.size() != dim)
      throw ConfigError(std::string(what) + " box has wrong dimension");
    for (Index i = 0; i < dim; ++i)
      if (b.lower(i) > b.upper(i)) throw ConfigError(std::string(what) + " box has lower > upper");
  };
  check_box(input_box, input_dim, "input");
  check_box(output_box, output_dim, "output");
  if (floor() < 1) throw ConfigError("rank floor must be >= 1");
}

Controller::Controller(DeePCConfig cfg, const TrajectoryDataset& u_data,
                       const TrajectoryDataset& y_data)
    : cfg_(std::move(cfg)), solver_(QpSettings{}) {
  cfg_.normalize();
  solver_.settings() = cfg_.qp;
  layout_ = cfg_.layout();
  row_order_ = layout_.block_row_order();
  if (u_data.channels() != cfg_.input_dim || y_data.channels() != cfg_.output_dim)
    throw ConfigError("offline data channels do not match the controller dimensions");
  hankel_ = stack_io(u_data, y_data, cfg_.depth());

  const bool needs_svd = cfg_.variant == ControllerVariant::reduced_online ||
                         (cfg_.variant == ControllerVariant::gated_online &&
                          cfg_.gate_engine == GateEngine::incremental);
  if (needs_svd) {
    svd_ = init_from_batch(hankel_, cfg_.svd.rel_tol);
    has_svd_ = true;
    rank_ = svd_.rank();
    sigma_r_ = svd_.sigma_r();
    sigma_max_ = svd_.sigma_max();
  } else {
    const RankInfo info = numerical_rank(hankel_, cfg_.svd.rel_tol);
    rank_ = info.rank;
    sigma_r_ = info.sigma_r;
    sigma_max_ = info.sigma_max;
  }
  if (cfg_.variant == ControllerVariant::reduced_online) {
    r_a_ = std::min(cfg_.floor(), rank_);
    floor_clamped_ = cfg_.floor() > rank_;
    sigma_ra_ = r_a_ > 0 ? svd_.sigma(r_a_ - 1) : 0.0;
  } else {
    r_a_ = rank_;
    sigma_ra_ = sigma_r_;
  }
  refresh_data();
}

void Controller::refresh_data() {
  if (cfg_.variant == ControllerVariant::reduced_online)
    data_ = reduced_matrix(svd_, r_a_)(row_order_, Eigen::all);
  else
    data_ = hankel_.matrix()(row_order_, Eigen::all);
  ++data_version_;
}

Matrix Controller::data_matrix() const {
  if (cfg_.variant == ControllerVariant::reduced_online) return reduced_matrix(svd_, r_a_);
  return hankel_.matrix();
}

Index Controller::decision_size() const noexcept {
  return data_.cols() + (cfg_.input_dim + cfg_.output_dim) * (cfg_.horizon + cfg_.t_ini);
}

void Controller::refresh_template() {
  if (template_version_ == data_version_) return;
  const Index m = cfg_.input_dim, p = cfg_.output_dim;
  const Index T = cfg_.t_ini, N = cfg_.horizon;
  const Index ng = data_.cols();
  const Index off_u = ng, off_y = ng + m * N, off_su = off_y + p * N, off_sy = off_su + m * T;
  const Index n = off_sy + p * T;
  const Index rows = layout_.rows();

  QuadraticProgram& qp = template_;
  qp.eq_matrix = Matrix::Zero(rows, n);
  qp.eq_matrix.leftCols(ng) = data_;
  // Row blocks are [U_P; U_F; Y_P; Y_F]; each row carries one -1 on its
  // slack or future-trajectory variable.
  const Index r_up = 0, r_uf = m * T, r_yp = r_uf + m * N, r_yf = r_yp + p * T;
  for (Index i = 0; i < m * T; ++i) qp.eq_matrix(r_up + i, off_su + i) = -1.0;
  for (Index i = 0; i < m * N; ++i) qp.eq_matrix(r_uf + i, off_u + i) = -1.0;
  for (Index i = 0; i < p * T; ++i) qp.eq_matrix(r_yp + i, off_sy + i) = -1.0;
  for (Index i = 0; i < p * N; ++i) qp.eq_matrix(r_yf + i, off_y + i) = -1.0;

  qp.hessian = BlockDiagonal();
  qp.hessian.add_diagonal(Vector::Constant(ng, 2.0 * cfg_.reg_g));
  qp.hessian.add_repeated(2.0 * cfg_.input_weight, N);
  qp.hessian.add_repeated(2.0 * cfg_.output_weight, N);
  qp.hessian.add_diagonal(Vector::Constant(m * T + p * T, 2.0 * cfg_.reg_slack));

  qp.lower_bounds = Vector::Constant(n, -kInf);
  qp.upper_bounds = Vector::Constant(n, kInf);
  for (Index t = 0; t < N; ++t) {
    qp.lower_bounds.segment(off_u + t * m, m) = cfg_.input_box.lower;
    qp.upper_bounds.segment(off_u + t * m, m) = cfg_.input_box.upper;
    qp.lower_bounds.segment(off_y + t * p, p) = cfg_.output_box.lower;
    qp.upper_bounds.segment(off_y + t * p, p) = cfg_.output_box.upper;
  }
  if (cfg_.pin_slack) {
    qp.lower_bounds.tail(m * T + p * T).setZero();
    qp.upper_bounds.tail(m * T + p * T).setZero();
  }
  qp.linear_cost = Vector::Zero(n);
  qp.eq_rhs = Vector::Zero(rows);
  template_version_ = data_version_;
}

Vector Controller::u_ini() const {
  const Index m = cfg_.input_dim, T = cfg_.t_ini;
  Vector v(m * T);
  const Index start = static_cast<Index>(window_.size()) - T;
  for (Index t = 0; t < T; ++t) v.segment(t * m, m) = window_[static_cast<std::size_t>(start + t)].first;
  return v;
}

Vector Controller::y_ini() const {
  const Index p = cfg_.output_dim, T = cfg_.t_ini;
  Vector v(p * T);
  const Index start = static_cast<Index>(window_.size()) - T;
  for (Index t = 0; t < T; ++t) v.segment(t * p, p) = window_[static_cast<std::size_t>(start + t)].second;
  return v;
}

QuadraticProgram Controller::assemble(const Eigen::Ref<const Matrix>& reference,
                                      const Matrix* input_reference) {
  const Index m = cfg_.input_dim, p = cfg_.output_dim;
  const Index T = cfg_.t_ini, N = cfg_.horizon;
  if (reference.rows() != p || reference.cols() != N)
    throw ShapeError("reference must be p x N (" + std::to_string(p) + " x " + std::to_string(N) +
                     ")");
  if (input_reference && (input_reference->rows() != m || input_reference->cols() != N))
    throw ShapeError("input reference must be m x N");
  if (!ready()) throw ProtocolError("controller needs T_ini observed samples before solving");
  refresh_template();

  QuadraticProgram qp = template_;
  const Index ng = data_.cols();
  const Index off_u = ng, off_y = ng + m * N;
  for (Index t = 0; t < N; ++t) {
    if (input_reference)
      qp.linear_cost.segment(off_u + t * m, m) = -2.0 * cfg_.input_weight * input_reference->col(t);
    qp.linear_cost.segment(off_y + t * p, p) = -2.0 * cfg_.output_weight * reference.col(t);
  }
  qp.eq_rhs.segment(0, m * T) = u_ini();
  qp.eq_rhs.segment(m * T + m * N, p * T) = y_ini();
  return qp;
}

StepResult Controller::solve(const Eigen::Ref<const Matrix>& reference, const Matrix* input_reference) {
  const auto t0 = Clock::now();
  const QuadraticProgram qp = assemble(reference, input_reference);
  const QpSolution sol = solver_.solve(qp);
  if (sol.status == QpStatus::infeasible)
    throw SolverError("DeePC QP reported infeasible (n=" + std::to_string(qp.num_vars()) +
                      ", primal residual " + std::to_string(sol.primal_eq_residual) + ")");

  const Index m = cfg_.input_dim, p = cfg_.output_dim;
  const Index T = cfg_.t_ini, N = cfg_.horizon;
  const Index ng = data_.cols();
  StepResult r;
  r.status = sol.status;
  r.qp_iterations = sol.iterations;
  r.predicted_inputs = Eigen::Map<const Matrix>(sol.primal.data() + ng, m, N);
  r.predicted_outputs = Eigen::Map<const Matrix>(sol.primal.data() + ng + m * N, p, N);
  r.applied_input = r.predicted_inputs.col(0)
                        .cwiseMax(cfg_.input_box.lower)
                        .cwiseMin(cfg_.input_box.upper);
  r.g_norm = sol.primal.head(ng).norm();
  r.slack_u_norm = sol.primal.segment(ng + (m + p) * N, m * T).norm();
  r.slack_y_norm = sol.primal.tail(p * T).norm();
  double constant = 0.0;
  for (Index t = 0; t < N; ++t) {
    constant += reference.col(t).dot(cfg_.output_weight * reference.col(t));
    if (input_reference)
      constant += input_reference->col(t).dot(cfg_.input_weight * input_reference->col(t));
  }
  r.cost = qp.objective(sol.primal) + constant;
  r.rank = rank_;
  r.reduced_order = r_a_;
  r.sigma_r = sigma_r_;
  r.solve_seconds = seconds_since(t0);
  return r;
}

UpdateInfo Controller::observe(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& y) {
  if (u.size() != cfg_.input_dim || y.size() != cfg_.output_dim)
    throw ShapeError("observed sample has wrong dimension");
  window_.emplace_back(u, y);
  if (static_cast<Index>(window_.size()) > cfg_.depth()) window_.pop_front();
  ++samples_;

  UpdateInfo info;
  if (static_cast<Index>(window_.size()) < cfg_.depth()) return info;
  info.attempted = true;
  const auto t0 = Clock::now();

  const Index K = cfg_.depth();
  Matrix us(cfg_.input_dim, K), ys(cfg_.output_dim, K);
  for (Index t = 0; t < K; ++t) {
    us.col(t) = window_[static_cast<std::size_t>(t)].first;
    ys.col(t) = window_[static_cast<std::size_t>(t)].second;
  }
  const Vector w = stack_window(us, ys);

  switch (cfg_.variant) {
    case ControllerVariant::static_deepc:
      break;
    case ControllerVariant::replace_oldest:
      hankel_.replace_oldest(w, samples_);
      info.admitted = true;
      refresh_data();
      break;
    case ControllerVariant::gated_online:
      if (cfg_.gate_engine == GateEngine::incremental) {
        SvdState trial = svd_;
        append_update(trial, w, cfg_.svd);
        if (informativeness_gate(trial.sigma_r(), cfg_.sigma_thr)) {
          svd_ = std::move(trial);
          hankel_.append_window(w, samples_);
          info.admitted = true;
          rank_ = svd_.rank();
          sigma_r_ = svd_.sigma_r();
          sigma_max_ = svd_.sigma_max();
        }
      } else {
        hankel_.append_window(w, samples_);
        const RankInfo ri = numerical_rank(hankel_, cfg_.svd.rel_tol);
        if (informativeness_gate(ri.sigma_r, cfg_.sigma_thr)) {
          info.admitted = true;
          rank_ = ri.rank;
          sigma_r_ = ri.sigma_r;
          sigma_max_ = ri.sigma_max;
        } else {
          hankel_.remove_last_window();
        }
      }
      if (info.admitted) {
        r_a_ = rank_;
        sigma_ra_ = sigma_r_;
        refresh_data();
      }
      break;
    case ControllerVariant::reduced_online: {
      if (cfg_.gate_reduced) {
        SvdState trial = svd_;
        append_update(trial, w, cfg_.svd);
        if (informativeness_gate(trial.sigma_r(), cfg_.sigma_thr)) {
          svd_ = std::move(trial);
          info.admitted = true;
        }
      } else {
        append_update(svd_, w, cfg_.svd);
        info.admitted = true;
      }
      rank_ = svd_.rank();
      sigma_r_ = svd_.sigma_r();
      sigma_max_ = svd_.sigma_max();
      const OrderSelection sel = adaptive_order(svd_.sigma, cfg_.sigma_thr, cfg_.floor());
      r_a_ = sel.adaptive_order;
      floor_clamped_ = sel.floor_clamped;
      sigma_ra_ = r_a_ > 0 ? svd_.sigma(r_a_ - 1) : 0.0;
      refresh_data();
      break;
    }
  }
  if (info.admitted) ++admitted_;
  info.seconds = seconds_since(t0);
  return info;
}

StepResult Controller::step(const Eigen::Ref<const Matrix>& reference,
                            const std::function<Vector(const Vector&)>& apply,
                            const Matrix* input_reference) {
  StepResult r = solve(reference, input_reference);
  const Vector y = apply(r.applied_input);
  const UpdateInfo info = observe(r.applied_input, y);
  r.admitted = info.admitted;
  r.update_seconds = info.seconds;
  return r;
}

Index warmup(Controller& ctrl, LtvPlant& plant, const WarmupPolicy& policy, Index k0) {
  const Index m = plant.input_dim();
  Vector u = Vector::Zero(m);
  if (policy.kind == WarmupKind::constant) {
    if (policy.value.size() == 1)
      u = Vector::Constant(m, policy.value(0));
    else if (policy.value.size() == m)
      u = policy.value;
    else
      throw ConfigError("warmup value must have 1 or m entries");
  }
  const Index T = ctrl.config().t_ini;
  for (Index k = k0; k < k0 + T; ++k) ctrl.observe(u, plant.step(u, k));
  return k0 + T;
}

}  // namespace rodeepc
