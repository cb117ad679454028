#include "rodeepc/qpsolve.hpp"

#include "rodeepc/csv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>

namespace rodeepc {

// ---------------------------------------------------------------------------
// BlockDiagonal

BlockDiagonal BlockDiagonal::dense(Matrix m) {
  BlockDiagonal b;
  b.add_dense(m);
  return b;
}

void BlockDiagonal::add_diagonal(const Eigen::Ref<const Vector>& d) {
  if (d.size() == 0) return;
  blocks_.push_back(Block{size_, true, Matrix(d)});
  size_ += d.size();
}

void BlockDiagonal::add_dense(const Eigen::Ref<const Matrix>& m) {
  if (m.rows() != m.cols()) throw ShapeError("Hessian block must be square");
  if (m.size() == 0) return;
  blocks_.push_back(Block{size_, false, Matrix(m)});
  size_ += m.rows();
}

void BlockDiagonal::add_repeated(const Eigen::Ref<const Matrix>& m, Index count) {
  if (m.rows() != m.cols()) throw ShapeError("Hessian block must be square");
  const bool is_diag = m.isDiagonal(0.0);
  if (is_diag) {
    add_diagonal(m.diagonal().replicate(count, 1));
    return;
  }
  for (Index i = 0; i < count; ++i) add_dense(m);
}

Vector BlockDiagonal::apply(const Eigen::Ref<const Vector>& x) const {
  if (x.size() != size_) throw ShapeError("block-diagonal apply: dimension mismatch");
  Vector out(size_);
  for (const auto& b : blocks_) {
    if (b.diagonal)
      out.segment(b.offset, b.size()) = b.values.col(0).cwiseProduct(x.segment(b.offset, b.size()));
    else
      out.segment(b.offset, b.size()).noalias() = b.values * x.segment(b.offset, b.size());
  }
  return out;
}

Matrix BlockDiagonal::to_dense() const {
  Matrix m = Matrix::Zero(size_, size_);
  for (const auto& b : blocks_) {
    if (b.diagonal)
      m.block(b.offset, b.offset, b.size(), b.size()).diagonal() = b.values.col(0);
    else
      m.block(b.offset, b.offset, b.size(), b.size()) = b.values;
  }
  return m;
}

Vector BlockDiagonal::diagonal() const {
  Vector d(size_);
  for (const auto& b : blocks_)
    d.segment(b.offset, b.size()) = b.diagonal ? Vector(b.values.col(0)) : Vector(b.values.diagonal());
  return d;
}

BlockDiagonal BlockDiagonal::scaled(double s) const {
  BlockDiagonal out = *this;
  for (auto& b : out.blocks_) b.values *= s;
  return out;
}

bool BlockDiagonal::operator==(const BlockDiagonal& o) const {
  if (size_ != o.size_ || blocks_.size() != o.blocks_.size()) return false;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& a = blocks_[i];
    const auto& b = o.blocks_[i];
    if (a.offset != b.offset || a.diagonal != b.diagonal || a.values.rows() != b.values.rows() ||
        a.values.cols() != b.values.cols() || a.values != b.values)
      return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// QuadraticProgram

void QuadraticProgram::validate() const {
  const Index n = num_vars();
  if (hessian.size() != n) throw ShapeError("Hessian size does not match linear cost");
  if (lower_bounds.size() != n || upper_bounds.size() != n)
    throw ShapeError("bound vectors must have one entry per variable");
  if (eq_matrix.rows() != eq_rhs.size()) throw ShapeError("equality matrix/rhs row mismatch");
  if (eq_matrix.rows() > 0 && eq_matrix.cols() != n)
    throw ShapeError("equality matrix column count does not match variables");
  if (!linear_cost.allFinite() || !eq_matrix.allFinite() || !eq_rhs.allFinite())
    throw DomainError("QP data contains non-finite entries");
  for (const auto& b : hessian.blocks()) {
    if (!b.values.allFinite()) throw DomainError("Hessian contains non-finite entries");
    if (!b.diagonal && (b.values - b.values.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw DomainError("Hessian block is not symmetric");
  }
  for (Index i = 0; i < n; ++i) {
    if (std::isnan(lower_bounds(i)) || std::isnan(upper_bounds(i)))
      throw DomainError("bounds contain NaN");
    if (lower_bounds(i) > upper_bounds(i))
      throw DomainError("lower bound exceeds upper bound at index " + std::to_string(i));
  }
}

double QuadraticProgram::objective(const Eigen::Ref<const Vector>& x) const {
  return 0.5 * x.dot(hessian.apply(x)) + linear_cost.dot(x);
}

const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::max_iter: return "max_iter";
    case QpStatus::infeasible: return "infeasible";
  }
  return "unknown";
}

namespace {

double inf_norm(const Eigen::Ref<const Vector>& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

KktResiduals residuals_of(const QuadraticProgram& qp, const Vector& x, const Vector& nu,
                          const Vector& mu) {
  KktResiduals r;
  const Index n = qp.num_vars();
  double box = 0.0;
  for (Index i = 0; i < n; ++i)
    box = std::max({box, qp.lower_bounds(i) - x(i), x(i) - qp.upper_bounds(i)});
  r.primal = box;
  Vector grad = qp.hessian.apply(x) + qp.linear_cost + mu;
  if (qp.num_eq() > 0) {
    r.primal = std::max(r.primal, inf_norm(qp.eq_matrix * x - qp.eq_rhs));
    grad.noalias() += qp.eq_matrix.transpose() * nu;
  }
  r.dual = inf_norm(grad);
  for (Index i = 0; i < n; ++i) {
    const double up = std::max(mu(i), 0.0);
    const double lo = std::max(-mu(i), 0.0);
    double c = 0.0;
    if (up > 0.0)
      c = std::isfinite(qp.upper_bounds(i)) ? std::min(up, std::abs(qp.upper_bounds(i) - x(i))) : up;
    if (lo > 0.0)
      c = std::max(c, std::isfinite(qp.lower_bounds(i))
                          ? std::min(lo, std::abs(x(i) - qp.lower_bounds(i)))
                          : lo);
    r.comp = std::max(r.comp, c);
  }
  return r;
}

}  // namespace

KktResiduals kkt_residuals(const QuadraticProgram& qp, const QpSolution& sol) {
  const Index n = qp.num_vars();
  if (sol.primal.size() != n || sol.bound_multipliers.size() != n ||
      sol.eq_multipliers.size() != qp.num_eq())
    throw ShapeError("solution dimensions do not match the QP");
  return residuals_of(qp, sol.primal, sol.eq_multipliers, sol.bound_multipliers);
}

// ---------------------------------------------------------------------------
// Solver workspace

struct QpSolver::Workspace {
  // Cache keys.
  BlockDiagonal hessian;
  Matrix eq_matrix;
  Vector rho;
  double sigma = -1.0;
  bool factor_scaled = false;
  bool valid = false;

  // Row selection after dropping dependent equality rows.
  std::vector<Index> rows;
  bool all_rows = true;
  bool rows_checked = false;
  // Only built once dependent rows have been dropped.
  std::unique_ptr<Eigen::CompleteOrthogonalDecomposition<Matrix>> cod;

  // Ruiz equilibration: x = D xs, rows scaled by E, cost scaled by c.
  bool scaling_ready = false;
  Vector d_scale, e_scale;
  double c_scale = 1.0;
  BlockDiagonal h_scaled;
  Matrix a_scaled;

  // Equality rows entering the factorization, in the current mode.
  Matrix a_sel;

  // Factorization of D = H + sigma I + diag(rho) and S = A D^-1 A^T.
  struct InvBlock {
    Index offset;
    bool diagonal;
    Matrix inv;  // n x 1 or n x n
  };
  std::vector<InvBlock> dinv;
  Eigen::LLT<Matrix> schur;
  std::int64_t factor_count = 0;

  // Warm start (unscaled).
  Vector x, z, y, nu;

  Vector apply_dinv(const Eigen::Ref<const Vector>& v) const {
    Vector out(v.size());
    for (const auto& b : dinv) {
      const Index k = b.inv.rows();
      if (b.diagonal)
        out.segment(b.offset, k) = b.inv.col(0).cwiseProduct(v.segment(b.offset, k));
      else
        out.segment(b.offset, k).noalias() = b.inv * v.segment(b.offset, k);
    }
    return out;
  }
};

QpSolver::QpSolver(QpSettings s) : settings_(s), ws_(std::make_unique<Workspace>()) {}
QpSolver::QpSolver(QpSolver&&) noexcept = default;
QpSolver& QpSolver::operator=(QpSolver&&) noexcept = default;
QpSolver::~QpSolver() = default;

std::int64_t QpSolver::factorizations() const noexcept { return ws_->factor_count; }

namespace {

enum class FactorResult { ok, rank_deficient, not_definite };

/// Builds D^-1 blockwise and the Cholesky factor of the Schur complement.
FactorResult factorize(QpSolver::Workspace& ws, const BlockDiagonal& h, const Matrix& a,
                       const Vector& rho, double sigma) {
  const Index n = h.size();
  ws.dinv.clear();
  Matrix half(a.rows(), n);  // A * chol(D^-1)
  for (const auto& b : h.blocks()) {
    const Index k = b.size();
    if (b.diagonal) {
      Vector d = b.values.col(0) + Vector::Constant(k, sigma) + rho.segment(b.offset, k);
      if ((d.array() <= 0.0).any()) return FactorResult::not_definite;
      Vector inv = d.cwiseInverse();
      ws.dinv.push_back({b.offset, true, inv});
      if (a.rows()) half.middleCols(b.offset, k) = a.middleCols(b.offset, k) * inv.cwiseSqrt().asDiagonal();
    } else {
      Matrix d = b.values;
      d.diagonal() += Vector::Constant(k, sigma) + rho.segment(b.offset, k);
      Eigen::LLT<Matrix> llt(d);
      if (llt.info() != Eigen::Success) return FactorResult::not_definite;
      const Matrix inv = llt.solve(Matrix::Identity(k, k));
      ws.dinv.push_back({b.offset, false, inv});
      if (a.rows()) {
        // D^-1 = L^-T L^-1, so A L^-T has Gram matrix A D^-1 A^T.
        Matrix blk = a.middleCols(b.offset, k);
        llt.matrixU().solveInPlace<Eigen::OnTheRight>(blk);
        half.middleCols(b.offset, k) = blk;
      }
    }
  }
  ++ws.factor_count;
  if (a.rows() == 0) return FactorResult::ok;
  Matrix s = Matrix::Zero(a.rows(), a.rows());
  s.selfadjointView<Eigen::Lower>().rankUpdate(half);
  ws.schur.compute(s);
  if (ws.schur.info() != Eigen::Success) return FactorResult::rank_deficient;
  const Vector diag = Matrix(ws.schur.matrixL()).diagonal();
  const double ratio = diag.minCoeff() / diag.maxCoeff();
  if (!(ratio * ratio > 1e-13)) return FactorResult::rank_deficient;
  return FactorResult::ok;
}

/// Solves [D A^T; A 0][x; nu] = [r; b] with the cached factors.
void kkt_solve(const QpSolver::Workspace& ws, const Matrix& a, const Vector& r, const Vector& b,
               Vector& x, Vector& nu) {
  const Vector dr = ws.apply_dinv(r);
  if (a.rows() == 0) {
    x = dr;
    nu.resize(0);
    return;
  }
  nu = ws.schur.solve(a * dr - b);
  x = ws.apply_dinv(r - a.transpose() * nu);
}

/// Keeps a linearly independent subset of the equality rows.
void select_rows(QpSolver::Workspace& ws, const QuadraticProgram& qp) {
  Eigen::ColPivHouseholderQR<Matrix> qr(qp.eq_matrix.transpose());
  qr.setThreshold(1e-10);
  const Index rank = qr.rank();
  ws.rows.clear();
  for (Index i = 0; i < rank; ++i) ws.rows.push_back(qr.colsPermutation().indices()(i));
  std::sort(ws.rows.begin(), ws.rows.end());
  ws.all_rows = rank == qp.eq_matrix.rows();
}

bool equality_consistent(QpSolver::Workspace& ws, const QuadraticProgram& qp) {
  if (qp.num_eq() == 0 || ws.all_rows) return true;
  if (!ws.cod) {
    ws.cod = std::make_unique<Eigen::CompleteOrthogonalDecomposition<Matrix>>();
    ws.cod->setThreshold(1e-10);
    ws.cod->compute(qp.eq_matrix);
  }
  const Vector x0 = ws.cod->solve(qp.eq_rhs);
  const double res = inf_norm(qp.eq_matrix * x0 - qp.eq_rhs);
  return res <= 1e-8 * std::max(1.0, inf_norm(qp.eq_rhs));
}

Vector expand_nu(const Vector& nu_sel, const std::vector<Index>& rows, Index m) {
  Vector nu = Vector::Zero(m);
  for (std::size_t i = 0; i < rows.size(); ++i) nu(rows[i]) = nu_sel(static_cast<Index>(i));
  return nu;
}

/// Column infinity norms of a block-diagonal matrix.
Vector column_norms(const BlockDiagonal& h) {
  Vector out(h.size());
  for (const auto& b : h.blocks()) {
    if (b.diagonal)
      out.segment(b.offset, b.size()) = b.values.col(0).cwiseAbs();
    else
      out.segment(b.offset, b.size()) = b.values.cwiseAbs().colwise().maxCoeff().transpose();
  }
  return out;
}

void scale_blocks(BlockDiagonal& h, const Vector& s) {
  BlockDiagonal out;
  for (const auto& b : h.blocks()) {
    const auto sb = s.segment(b.offset, b.size());
    if (b.diagonal)
      out.add_diagonal(b.values.col(0).cwiseProduct(sb.cwiseAbs2()));
    else
      out.add_dense(sb.asDiagonal() * b.values * sb.asDiagonal());
  }
  h = std::move(out);
}

/// Modified Ruiz equilibration of [H A^T; A 0].
void equilibrate(QpSolver::Workspace& ws, const QuadraticProgram& qp) {
  const Index n = qp.num_vars();
  const Index m = qp.num_eq();
  ws.h_scaled = qp.hessian;
  ws.a_scaled = qp.eq_matrix;
  ws.d_scale = Vector::Ones(n);
  ws.e_scale = Vector::Ones(m);
  auto inv_sqrt = [](double v) { return v < 1e-4 ? 1.0 : std::clamp(1.0 / std::sqrt(v), 1e-4, 1e4); };
  for (int pass = 0; pass < 15; ++pass) {
    Vector cn = column_norms(ws.h_scaled);
    if (m) cn = cn.cwiseMax(ws.a_scaled.cwiseAbs().colwise().maxCoeff().transpose());
    Vector dc = cn.unaryExpr(inv_sqrt);
    Vector rc = m ? Vector(ws.a_scaled.cwiseAbs().rowwise().maxCoeff().unaryExpr(inv_sqrt)) : Vector();
    scale_blocks(ws.h_scaled, dc);
    if (m) ws.a_scaled = rc.asDiagonal() * ws.a_scaled * dc.asDiagonal();
    ws.d_scale.array() *= dc.array();
    if (m) ws.e_scale.array() *= rc.array();
    if ((dc.array() - 1.0).abs().maxCoeff() < 1e-3 && (m == 0 || (rc.array() - 1.0).abs().maxCoeff() < 1e-3)) break;
  }
  const double mean_col = n ? column_norms(ws.h_scaled).mean() : 0.0;
  ws.c_scale = mean_col > 1e-4 ? std::clamp(1.0 / mean_col, 1e-4, 1e4) : 1.0;
  ws.h_scaled = ws.h_scaled.scaled(ws.c_scale);
  ws.scaling_ready = true;
}

/// Regularized block-structured KKT solves on a free subset of variables.
class ReducedKkt {
 public:
  ReducedKkt(const BlockDiagonal& h, const Matrix& a, const std::vector<char>& is_free, double delta)
      : delta_(delta), n_(h.size()) {
    for (Index i = 0; i < n_; ++i)
      if (is_free[static_cast<std::size_t>(i)]) free_.push_back(i);
    pos_ = std::vector<Index>(static_cast<std::size_t>(n_), -1);
    for (std::size_t i = 0; i < free_.size(); ++i) pos_[static_cast<std::size_t>(free_[i])] = static_cast<Index>(i);
    const Index nf = static_cast<Index>(free_.size());
    for (const auto& b : h.blocks()) {
      std::vector<Index> loc;
      for (Index j = 0; j < b.size(); ++j)
        if (is_free[static_cast<std::size_t>(b.offset + j)]) loc.push_back(j);
      if (loc.empty()) continue;
      Part part;
      part.idx.reserve(loc.size());
      for (Index j : loc) part.idx.push_back(pos_[static_cast<std::size_t>(b.offset + j)]);
      if (b.diagonal) {
        part.h = Vector(b.values.col(0)(loc));
      } else {
        part.h = b.values(loc, loc);
      }
      part.diagonal = b.diagonal;
      parts_.push_back(std::move(part));
    }
    for (auto& p : parts_) {
      if (p.diagonal) {
        p.inv = (p.h.col(0).array() + delta_).inverse().matrix();
      } else {
        Matrix d = p.h;
        d.diagonal().array() += delta_;
        p.inv = Eigen::LLT<Matrix>(d).solve(Matrix::Identity(d.rows(), d.cols()));
      }
    }
    af_ = a.rows() ? Matrix(a(Eigen::all, free_)) : Matrix(0, nf);
    if (af_.rows()) {
      Matrix dinv_at(nf, af_.rows());
      for (Index e = 0; e < af_.rows(); ++e) dinv_at.col(e) = apply_dinv(af_.row(e).transpose());
      Matrix s = af_ * dinv_at;
      s.diagonal().array() += delta_;
      schur_.compute(s);
      ok_ = schur_.info() == Eigen::Success;
    }
  }

  bool ok() const noexcept { return ok_; }
  const std::vector<Index>& free() const noexcept { return free_; }

  /// Solves [H_ff A_f^T; A_f 0] [x; nu] = [r1; r2] by proximal refinement.
  void solve(const Vector& r1, const Vector& r2, Vector& x, Vector& nu) const {
    x = Vector::Zero(r1.size());
    nu = Vector::Zero(r2.size());
    Vector e1 = r1, e2 = r2;
    const double scale = std::max({1.0, inf_norm(r1), inf_norm(r2)});
    for (int it = 0; it < 25; ++it) {
      Vector dx, dnu;
      reg_solve(e1, e2, dx, dnu);
      x += dx;
      nu += dnu;
      e1 = r1 - apply_h(x);
      if (af_.rows()) e1.noalias() -= af_.transpose() * nu;
      e2 = af_.rows() ? Vector(r2 - af_ * x) : Vector();
      if (std::max(inf_norm(e1), inf_norm(e2)) <= 1e-14 * scale) break;
    }
  }

 private:
  struct Part {
    std::vector<Index> idx;
    bool diagonal = true;
    Matrix h, inv;
  };

  Vector apply_dinv(const Vector& v) const {
    Vector out(v.size());
    for (const auto& p : parts_) {
      const Vector vs = v(p.idx);
      out(p.idx) = p.diagonal ? Vector(p.inv.col(0).cwiseProduct(vs)) : Vector(p.inv * vs);
    }
    return out;
  }
  Vector apply_h(const Vector& v) const {
    Vector out(v.size());
    for (const auto& p : parts_) {
      const Vector vs = v(p.idx);
      out(p.idx) = p.diagonal ? Vector(p.h.col(0).cwiseProduct(vs)) : Vector(p.h * vs);
    }
    return out;
  }
  void reg_solve(const Vector& r1, const Vector& r2, Vector& x, Vector& nu) const {
    const Vector dr = apply_dinv(r1);
    if (af_.rows() == 0) {
      x = dr;
      nu.resize(0);
      return;
    }
    nu = schur_.solve(af_ * dr - r2);
    x = apply_dinv(r1 - af_.transpose() * nu);
  }

  double delta_;
  Index n_;
  std::vector<Index> free_, pos_;
  std::vector<Part> parts_;
  Matrix af_;
  Eigen::LLT<Matrix> schur_;
  bool ok_ = true;
};

}  // namespace

QpSolution QpSolver::solve(const QuadraticProgram& qp) {
  qp.validate();
  auto& ws = *ws_;
  const auto& st = settings_;
  const Index n = qp.num_vars();
  const Index m = qp.num_eq();

  QpSolution sol;
  sol.primal = Vector::Zero(n);
  sol.eq_multipliers = Vector::Zero(m);
  sol.bound_multipliers = Vector::Zero(n);

  const bool structure_same = ws.hessian.size() == n && ws.eq_matrix.rows() == m &&
                              ws.eq_matrix.cols() == qp.eq_matrix.cols() &&
                              ws.eq_matrix == qp.eq_matrix && ws.hessian == qp.hessian;
  if (!structure_same) {
    ws.valid = false;
    ws.hessian = qp.hessian;
    ws.eq_matrix = qp.eq_matrix;
    ws.rows.resize(static_cast<std::size_t>(m));
    for (Index i = 0; i < m; ++i) ws.rows[static_cast<std::size_t>(i)] = i;
    ws.all_rows = true;
    ws.rows_checked = false;
    ws.scaling_ready = false;
    ws.cod.reset();
  }

  const bool any_bounds =
      (qp.lower_bounds.array() > -kInf).any() || (qp.upper_bounds.array() < kInf).any();
  if (any_bounds && !ws.scaling_ready) equilibrate(ws, qp);

  const BlockDiagonal& h_mode = any_bounds ? ws.h_scaled : qp.hessian;
  const Matrix& a_mode = any_bounds ? ws.a_scaled : qp.eq_matrix;
  auto refresh_a_sel = [&]() { ws.a_sel = ws.all_rows ? a_mode : Matrix(a_mode(ws.rows, Eigen::all)); };

  auto ensure_factor = [&](const Vector& rho, double sigma) -> bool {
    if (ws.valid && ws.factor_scaled == any_bounds && ws.sigma == sigma && ws.rho.size() == rho.size() &&
        ws.rho == rho)
      return true;
    refresh_a_sel();
    for (int attempt = 0; attempt < 2; ++attempt) {
      const FactorResult fr = factorize(ws, h_mode, ws.a_sel, rho, sigma);
      if (fr == FactorResult::ok) {
        ws.valid = true;
        ws.factor_scaled = any_bounds;
        ws.rho = rho;
        ws.sigma = sigma;
        return true;
      }
      ws.valid = false;
      if (fr == FactorResult::not_definite) return false;
      if (ws.rows_checked) break;
      ws.rows_checked = true;
      select_rows(ws, qp);
      refresh_a_sel();
    }
    return false;
  };

  auto infeasible = [&]() {
    sol.status = QpStatus::infeasible;
    const KktResiduals r = kkt_residuals(qp, sol);
    sol.primal_eq_residual = r.primal;
    sol.dual_residual = r.dual;
    sol.complementarity = r.comp;
    return sol;
  };

  auto finish = [&](QpSolution& s) {
    const KktResiduals r = kkt_residuals(qp, s);
    s.primal_eq_residual = r.primal;
    s.dual_residual = r.dual;
    s.complementarity = r.comp;
    if (s.status != QpStatus::infeasible)
      s.status = (r.primal <= st.tol && r.dual <= st.tol && r.comp <= st.tol) ? QpStatus::optimal
                                                                             : QpStatus::max_iter;
  };

  if (!any_bounds) {
    // Equality-constrained: proximal-point refinement of the KKT system; a
    // single solve when the Hessian itself is positive definite.
    const Vector rho0 = Vector::Zero(n);
    double sig = 0.0;
    if (!ensure_factor(rho0, 0.0)) {
      sig = st.sigma;
      if (!ensure_factor(rho0, sig)) {
        sol.status = QpStatus::max_iter;
        finish(sol);
        return sol;
      }
    }
    if (!equality_consistent(ws, qp)) return infeasible();
    Vector x = (ws.x.size() == n && st.warm_start) ? ws.x : Vector::Zero(n);
    Vector nu_sel;
    const Vector b = ws.all_rows ? qp.eq_rhs : Vector(qp.eq_rhs(ws.rows));
    int it = 0;
    for (; it < std::max(1, st.max_iter); ++it) {
      Vector xn;
      kkt_solve(ws, ws.a_sel, Vector(sig * x - qp.linear_cost), b, xn, nu_sel);
      const double step = inf_norm(xn - x);
      x = xn;
      if (sig == 0.0 || step <= 1e-3 * st.tol * std::max(1.0, inf_norm(x))) break;
    }
    // Iterative refinement against the unshifted system.
    for (int ref = 0; sig == 0.0 && ref < 2; ++ref) {
      const Vector gres = qp.hessian.apply(x) + qp.linear_cost +
                          (m ? Vector(ws.a_sel.transpose() * nu_sel) : Vector::Zero(n));
      const Vector pres = m ? Vector(ws.a_sel * x - b) : Vector();
      Vector dx, dnu;
      kkt_solve(ws, ws.a_sel, Vector(-gres), m ? Vector(-pres) : Vector(), dx, dnu);
      x += dx;
      if (m) nu_sel += dnu;
    }
    sol.primal = x;
    sol.eq_multipliers = m ? expand_nu(nu_sel, ws.rows, m) : Vector();
    sol.iterations = it + 1;
    ws.x = x;
    finish(sol);
    return sol;
  }

  // Box constraints present: ADMM on the equilibrated split x = z, z in [l, u],
  // with the equality constraints solved exactly in every x-update.
  const Vector& ds = ws.d_scale;
  const double cs = ws.c_scale;
  const Vector q = cs * ds.cwiseProduct(qp.linear_cost);
  const Vector lo = qp.lower_bounds.cwiseQuotient(ds);
  const Vector hi = qp.upper_bounds.cwiseQuotient(ds);

  auto unscale = [&](const Vector& xs, const Vector& nus, const Vector& ys) {
    QpSolution s;
    s.primal = ds.cwiseProduct(xs);
    const Vector nu_s = expand_nu(nus, ws.rows, m);
    s.eq_multipliers = m ? Vector(ws.e_scale.cwiseProduct(nu_s) / cs) : Vector();
    s.bound_multipliers = ys.cwiseQuotient(ds) / cs;
    return s;
  };

  Vector rho(n);
  double rho_scalar = st.rho;
  auto make_rho = [&](double r) {
    for (Index i = 0; i < n; ++i) {
      if (!std::isfinite(lo(i)) && !std::isfinite(hi(i)))
        rho(i) = 0.0;
      else if (lo(i) == hi(i))
        rho(i) = 1e3 * r;
      else
        rho(i) = r;
    }
  };
  make_rho(rho_scalar);
  if (ws.valid && ws.factor_scaled && ws.sigma == st.sigma && ws.rho.size() == n) {
    // Reuse the penalty the previous solve settled on.
    double prev = 0.0;
    for (Index i = 0; i < n; ++i)
      if (ws.rho(i) > 0.0 && lo(i) != hi(i)) prev = ws.rho(i);
    if (prev > 0.0) {
      rho_scalar = prev;
      make_rho(rho_scalar);
    }
  }
  if (!ensure_factor(rho, st.sigma)) throw SolverError("QP Hessian is not positive semidefinite");
  if (!equality_consistent(ws, qp)) return infeasible();
  const Vector b = ws.all_rows ? Vector(ws.e_scale.cwiseProduct(qp.eq_rhs))
                               : Vector(ws.e_scale(ws.rows).cwiseProduct(qp.eq_rhs(ws.rows)));

  const bool warm = st.warm_start && ws.x.size() == n && ws.z.size() == n && ws.y.size() == n;
  Vector x = warm ? Vector(ws.x.cwiseQuotient(ds)) : Vector::Zero(n);
  Vector z = warm ? Vector(ws.z.cwiseQuotient(ds)) : Vector(x.cwiseMax(lo).cwiseMin(hi));
  Vector y = warm ? Vector(cs * ws.y.cwiseProduct(ds)) : Vector::Zero(n);
  for (Index i = 0; i < n; ++i)
    if (rho(i) == 0.0) y(i) = 0.0;
  Vector nu_sel = Vector::Zero(static_cast<Index>(ws.rows.size()));
  Vector xt = x;

  std::vector<char> last_polish_set;
  auto polish = [&](QpSolution& out) -> bool {
    std::vector<char> is_free(static_cast<std::size_t>(n), 1);
    std::vector<char> signature(static_cast<std::size_t>(n), 0);
    Vector xfix = Vector::Zero(n);
    for (Index i = 0; i < n; ++i) {
      const bool at_l = std::isfinite(lo(i)) && (z(i) - lo(i) < -y(i) || lo(i) == hi(i));
      const bool at_u = !at_l && std::isfinite(hi(i)) && (hi(i) - z(i) < y(i));
      if (at_l || at_u) {
        is_free[static_cast<std::size_t>(i)] = 0;
        signature[static_cast<std::size_t>(i)] = at_l ? 1 : 2;
        xfix(i) = at_l ? lo(i) : hi(i);
      }
    }
    if (signature == last_polish_set) return false;
    last_polish_set = signature;

    const ReducedKkt kkt(h_mode, ws.a_sel, is_free, 1e-7);
    if (!kkt.ok()) return false;
    const auto& fr = kkt.free();
    const Vector hx_fix = h_mode.apply(xfix);
    const Vector r1 = -(q(fr) + hx_fix(fr));
    const Vector r2 = ws.a_sel.rows() ? Vector(b - ws.a_sel * xfix) : Vector();
    Vector xf, nup;
    kkt.solve(r1, r2, xf, nup);
    if (!xf.allFinite() || !nup.allFinite()) return false;
    Vector xp = xfix;
    xp(fr) = xf;
    Vector stat = h_mode.apply(xp) + q;
    if (ws.a_sel.rows()) stat.noalias() += ws.a_sel.transpose() * nup;
    Vector mu = Vector::Zero(n);
    for (Index i = 0; i < n; ++i)
      if (!is_free[static_cast<std::size_t>(i)]) mu(i) = -stat(i);
    QpSolution cand = unscale(xp, nup, mu);
    const KktResiduals r = kkt_residuals(qp, cand);
    if (r.primal <= st.tol && r.dual <= st.tol && r.comp <= st.tol) {
      out = cand;
      out.polished = true;
      return true;
    }
    return false;
  };

  int it = 0;
  bool done = false;
  const double alpha = st.alpha;
  for (it = 1; it <= st.max_iter; ++it) {
    Vector r = st.sigma * x - q + rho.cwiseProduct(z) - y;
    kkt_solve(ws, ws.a_sel, r, b, xt, nu_sel);
    const Vector xrel = alpha * xt + (1.0 - alpha) * x;
    const Vector zrel = alpha * xt + (1.0 - alpha) * z;
    Vector znew(n);
    for (Index i = 0; i < n; ++i) {
      if (rho(i) == 0.0) {
        znew(i) = xt(i);
        continue;
      }
      znew(i) = std::clamp(zrel(i) + y(i) / rho(i), lo(i), hi(i));
      y(i) += rho(i) * (zrel(i) - znew(i));
    }
    x = xrel;
    z = znew;

    if (it % st.check_interval == 0 || it == st.max_iter) {
      QpSolution cand = unscale(xt, nu_sel, y);
      const KktResiduals res = kkt_residuals(qp, cand);
      if (res.primal <= st.tol && res.dual <= st.tol && res.comp <= st.tol) {
        sol = cand;
        done = true;
        break;
      }
      if (st.polish && polish(sol)) {
        done = true;
        break;
      }
      // Residual balancing in the scaled space.
      const Vector hx = h_mode.apply(xt);
      Vector grad = hx + q + y;
      if (ws.a_sel.rows()) grad.noalias() += ws.a_sel.transpose() * nu_sel;
      const double pscale = std::max({inf_norm(xt), inf_norm(z), 1e-12});
      const double dscale = std::max({inf_norm(hx), inf_norm(q), inf_norm(y), 1e-12});
      const double rp = inf_norm(xt - z) / pscale;
      const double rd = inf_norm(grad) / dscale;
      if (rp > 0.0 && rd > 0.0) {
        const double f = std::sqrt(rp / rd);
        const double cand_rho = std::clamp(rho_scalar * f, 1e-6, 1e6);
        if (cand_rho > 5.0 * rho_scalar || cand_rho < 0.2 * rho_scalar) {
          rho_scalar = cand_rho;
          make_rho(rho_scalar);
          ensure_factor(rho, st.sigma);
        }
      }
      sol = cand;
    }
  }
  if (!done && st.polish) {
    last_polish_set.clear();
    polish(sol);
  }
  sol.iterations = std::min(it, st.max_iter);
  ws.x = sol.primal;
  ws.z = sol.primal.cwiseMax(qp.lower_bounds).cwiseMin(qp.upper_bounds);
  ws.y = sol.bound_multipliers;
  finish(sol);
  return sol;
}

QpSolution solve(const QuadraticProgram& qp, double tol, int max_iter) {
  QpSettings s;
  s.tol = tol;
  s.max_iter = max_iter;
  QpSolver solver(s);
  return solver.solve(qp);
}

// ---------------------------------------------------------------------------
// Text dump

namespace {

void write_vec(std::ostream& out, const Vector& v) {
  for (Index i = 0; i < v.size(); ++i) out << (i ? " " : "") << format_double(v(i));
  out << '\n';
}

void write_mat(std::ostream& out, const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i) write_vec(out, m.row(i).transpose());
}

double parse_token(const std::string& t) {
  if (t == "inf" || t == "+inf") return kInf;
  if (t == "-inf") return -kInf;
  std::size_t pos = 0;
  const double v = std::stod(t, &pos);
  if (pos != t.size()) throw ShapeError("bad number in QP text: " + t);
  return v;
}

void expect(std::istream& in, const std::string& word) {
  std::string t;
  if (!(in >> t) || t != word) throw ShapeError("QP text: expected '" + word + "', got '" + t + "'");
}

Vector read_vec(std::istream& in, Index n) {
  Vector v(n);
  std::string t;
  for (Index i = 0; i < n; ++i) {
    if (!(in >> t)) throw ShapeError("QP text: truncated vector");
    v(i) = parse_token(t);
  }
  return v;
}

}  // namespace

void write_qp_text(std::ostream& out, const QuadraticProgram& qp) {
  out << "qp " << qp.num_vars() << ' ' << qp.num_eq() << '\n';
  out << "H\n";
  write_mat(out, qp.hessian.to_dense());
  out << "c\n";
  write_vec(out, qp.linear_cost);
  out << "A\n";
  write_mat(out, qp.eq_matrix);
  out << "b\n";
  write_vec(out, qp.eq_rhs);
  out << "lower\n";
  write_vec(out, qp.lower_bounds);
  out << "upper\n";
  write_vec(out, qp.upper_bounds);
}

void write_qp_text(const std::filesystem::path& path, const QuadraticProgram& qp) {
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot open " + path.string() + " for writing");
  write_qp_text(out, qp);
}

QuadraticProgram read_qp_text(std::istream& in) {
  expect(in, "qp");
  Index n = 0, m = 0;
  if (!(in >> n >> m) || n < 0 || m < 0) throw ShapeError("QP text: bad header");
  QuadraticProgram qp;
  expect(in, "H");
  Matrix h(n, n);
  for (Index i = 0; i < n; ++i) h.row(i) = read_vec(in, n).transpose();
  qp.hessian = BlockDiagonal::dense(h);
  expect(in, "c");
  qp.linear_cost = read_vec(in, n);
  expect(in, "A");
  qp.eq_matrix.resize(m, n);
  for (Index i = 0; i < m; ++i) qp.eq_matrix.row(i) = read_vec(in, n).transpose();
  expect(in, "b");
  qp.eq_rhs = read_vec(in, m);
  expect(in, "lower");
  qp.lower_bounds = read_vec(in, n);
  expect(in, "upper");
  qp.upper_bounds = read_vec(in, n);
  qp.validate();
  return qp;
}

}  // namespace rodeepc
