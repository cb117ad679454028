#pragma once

#include "rodeepc/common.hpp"

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <vector>

namespace rodeepc {

/// Symmetric block-diagonal matrix. Each block is either diagonal (stored as a
/// column vector) or dense; a single dense block represents a general matrix.
class BlockDiagonal {
 public:
  struct Block {
    Index offset = 0;
    bool diagonal = true;
    Matrix values;  // n x 1 if diagonal, n x n otherwise
    Index size() const noexcept { return values.rows(); }
  };

  BlockDiagonal() = default;
  static BlockDiagonal dense(Matrix m);

  void add_diagonal(const Eigen::Ref<const Vector>& d);
  void add_dense(const Eigen::Ref<const Matrix>& m);
  void add_repeated(const Eigen::Ref<const Matrix>& m, Index count);

  Index size() const noexcept { return size_; }
  const std::vector<Block>& blocks() const noexcept { return blocks_; }

  Vector apply(const Eigen::Ref<const Vector>& x) const;
  Matrix to_dense() const;
  Vector diagonal() const;
  BlockDiagonal scaled(double s) const;
  bool operator==(const BlockDiagonal& o) const;

 private:
  std::vector<Block> blocks_;
  Index size_ = 0;
};

/// min 0.5 x^T H x + c^T x  s.t.  A x = b,  lower <= x <= upper.
struct QuadraticProgram {
  BlockDiagonal hessian;
  Vector linear_cost;
  Matrix eq_matrix;
  Vector eq_rhs;
  Vector lower_bounds;
  Vector upper_bounds;

  Index num_vars() const noexcept { return linear_cost.size(); }
  Index num_eq() const noexcept { return eq_matrix.rows(); }
  /// Throws ShapeError/DomainError on inconsistent dimensions, asymmetric
  /// Hessian blocks, NaNs, or lower > upper.
  void validate() const;
  double objective(const Eigen::Ref<const Vector>& x) const;
};

enum class QpStatus { optimal, max_iter, infeasible };
const char* to_string(QpStatus s);

struct QpSolution {
  Vector primal;
  Vector eq_multipliers;
  Vector bound_multipliers;  // > 0 at an active upper bound, < 0 at a lower bound
  QpStatus status = QpStatus::max_iter;
  double primal_eq_residual = kInf;
  double dual_residual = kInf;
  double complementarity = kInf;
  int iterations = 0;
  bool polished = false;
};

struct KktResiduals {
  double primal = 0.0;  // max(||Ax - b||_inf, box violation)
  double dual = 0.0;    // ||Hx + c + A^T nu + mu||_inf
  double comp = 0.0;    // worst bound complementarity / multiplier sign violation
};

/// Stationarity convention: H x + c + A^T nu + mu = 0.
KktResiduals kkt_residuals(const QuadraticProgram& qp, const QpSolution& sol);

struct QpSettings {
  double tol = 1e-6;
  int max_iter = 4000;
  double sigma = 1e-6;
  double alpha = 1.6;
  double rho = 0.1;
  int check_interval = 25;
  bool polish = true;
  bool warm_start = true;
};

/// Reusable solver workspace. Factorizations are cached and reused while the
/// Hessian and equality matrix are unchanged between calls; the previous
/// solution serves as the warm start when dimensions match.
class QpSolver {
 public:
  explicit QpSolver(QpSettings settings = {});
  QpSolver(QpSolver&&) noexcept;
  QpSolver& operator=(QpSolver&&) noexcept;
  ~QpSolver();

  QpSolution solve(const QuadraticProgram& qp);
  const QpSettings& settings() const noexcept { return settings_; }
  QpSettings& settings() noexcept { return settings_; }
  /// Number of factorizations performed so far (for cache diagnostics).
  std::int64_t factorizations() const noexcept;

  struct Workspace;

 private:
  QpSettings settings_;
  std::unique_ptr<Workspace> ws_;
};

QpSolution solve(const QuadraticProgram& qp, double tol = 1e-6, int max_iter = 4000);

/// Plain-text canonical dump: dimensions, dense H, c, A, b, lower, upper.
void write_qp_text(std::ostream& out, const QuadraticProgram& qp);
void write_qp_text(const std::filesystem::path& path, const QuadraticProgram& qp);
QuadraticProgram read_qp_text(std::istream& in);

}  // namespace rodeepc
