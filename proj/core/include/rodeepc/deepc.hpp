#pragma once

#include "rodeepc/common.hpp"
#include "rodeepc/plants.hpp"
#include "rodeepc/qpsolve.hpp"
#include "rodeepc/svdtrack.hpp"
#include "rodeepc/trajectory.hpp"

#include <deque>
#include <functional>
#include <optional>
#include <string>

namespace rodeepc {

enum class ControllerVariant { static_deepc, replace_oldest, gated_online, reduced_online };

/// How the gated controller evaluates sigma_r of the grown matrix.
enum class GateEngine { incremental, batch };

const char* to_string(ControllerVariant v);
ControllerVariant parse_variant(const std::string& s);
const char* to_string(GateEngine e);
GateEngine parse_gate_engine(const std::string& s);

/// Per-channel box; entries may be +-inf.
struct ChannelBox {
  Vector lower;
  Vector upper;

  static ChannelBox unbounded(Index dim);
  static ChannelBox symmetric(Index dim, double bound);
  bool contains(const Eigen::Ref<const Vector>& v, double slack = 0.0) const;
};

struct DeePCConfig {
  Index t_ini = 1;
  Index horizon = 1;
  Index input_dim = 1;
  Index output_dim = 1;
  Index state_dim_bound = 1;

  Matrix output_weight;  // Q, p x p; empty selects the identity
  Matrix input_weight;   // R, m x m; empty selects 0.1 I
  double reg_g = 10.0;
  double reg_slack = 1e5;
  ChannelBox input_box;   // empty vectors select unbounded
  ChannelBox output_box;
  bool pin_slack = false;  // force sigma_u = sigma_y = 0

  ControllerVariant variant = ControllerVariant::static_deepc;
  GateEngine gate_engine = GateEngine::incremental;
  double sigma_thr = 0.0;
  Index rank_floor = 0;       // 0 selects m*K + n
  bool gate_reduced = false;  // also gate the reduced-order update on sigma_thr

  SvdOptions svd;
  QpSettings qp;

  Index depth() const noexcept { return t_ini + horizon; }
  Index floor() const noexcept {
    return rank_floor > 0 ? rank_floor : input_dim * depth() + state_dim_bound;
  }
  IoLayout layout() const { return IoLayout{t_ini, horizon, input_dim, output_dim}; }
  /// Fills defaults for empty weights/boxes and checks every dimension.
  void normalize();
};

struct StepResult {
  Vector applied_input;     // u*(1), m entries
  Matrix predicted_inputs;  // m x N
  Matrix predicted_outputs; // p x N
  double slack_u_norm = 0.0;
  double slack_y_norm = 0.0;
  double g_norm = 0.0;
  double cost = 0.0;
  QpStatus status = QpStatus::max_iter;
  int qp_iterations = 0;
  bool admitted = false;
  Index rank = 0;
  Index reduced_order = 0;
  double sigma_r = 0.0;
  double solve_seconds = 0.0;
  double update_seconds = 0.0;
};

struct UpdateInfo {
  bool attempted = false;  // a full window was available
  bool admitted = false;
  double seconds = 0.0;
};

/// One receding-horizon DeePC loop. Call `solve` for the current input, apply
/// it, then `observe` the applied input and the measured output.
class Controller {
 public:
  Controller(DeePCConfig cfg, const TrajectoryDataset& u_data, const TrajectoryDataset& y_data);

  const DeePCConfig& config() const noexcept { return cfg_; }
  bool ready() const noexcept { return static_cast<Index>(window_.size()) >= cfg_.t_ini; }

  /// `reference` is p x N; `input_reference` (m x N) enters the input cost as
  /// ||u - u_ref||_R and defaults to zero.
  QuadraticProgram assemble(const Eigen::Ref<const Matrix>& reference,
                            const Matrix* input_reference = nullptr);
  StepResult solve(const Eigen::Ref<const Matrix>& reference,
                   const Matrix* input_reference = nullptr);
  UpdateInfo observe(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& y);

  /// solve -> apply -> observe. `apply` receives u*(1) and returns the measurement.
  StepResult step(const Eigen::Ref<const Matrix>& reference,
                  const std::function<Vector(const Vector&)>& apply,
                  const Matrix* input_reference = nullptr);

  Vector u_ini() const;  // m*T_ini, oldest sample first
  Vector y_ini() const;
  Index samples_observed() const noexcept { return samples_; }

  Index rank() const noexcept { return rank_; }
  Index reduced_order() const noexcept { return r_a_; }
  double sigma_r() const noexcept { return sigma_r_; }
  double sigma_max() const noexcept { return sigma_max_; }
  double sigma_ra() const noexcept { return sigma_ra_; }
  bool floor_clamped() const noexcept { return floor_clamped_; }
  std::int64_t admitted_windows() const noexcept { return admitted_; }
  const MosaicHankel& hankel() const noexcept { return hankel_; }
  const SvdState* svd() const noexcept { return has_svd_ ? &svd_ : nullptr; }
  /// Current data matrix in stacked (sample-major) row order: the Hankel
  /// matrix, or U_{r_a} Sigma_{r_a} for the reduced variant.
  Matrix data_matrix() const;
  Index decision_size() const noexcept;
  const QpSolver& solver() const noexcept { return solver_; }

 private:
  void refresh_data();
  void refresh_template();

  DeePCConfig cfg_;
  IoLayout layout_;
  std::vector<Index> row_order_;
  MosaicHankel hankel_;
  SvdState svd_;
  bool has_svd_ = false;
  Matrix data_;  // permuted rows [U_P; U_F; Y_P; Y_F], one column per data vector
  std::int64_t data_version_ = 0;

  // Cached QP structure; rebuilt when data_version_ changes.
  std::int64_t template_version_ = -1;
  QuadraticProgram template_;

  QpSolver solver_;
  std::deque<std::pair<Vector, Vector>> window_;  // last K (u, y) samples
  Index samples_ = 0;
  std::int64_t admitted_ = 0;

  Index rank_ = 0;
  Index r_a_ = 0;
  double sigma_r_ = 0.0;
  double sigma_max_ = 0.0;
  double sigma_ra_ = 0.0;
  bool floor_clamped_ = false;
};

enum class WarmupKind { zero, constant };

struct WarmupPolicy {
  WarmupKind kind = WarmupKind::zero;
  Vector value;  // used by `constant`
};

/// Drives `plant` with the warmup policy for T_ini steps starting at k0,
/// feeding every sample to the controller. Returns the next step index.
Index warmup(Controller& ctrl, LtvPlant& plant, const WarmupPolicy& policy, Index k0 = 0);

}  // namespace rodeepc
