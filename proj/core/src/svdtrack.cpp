#include "rodeepc/svdtrack.hpp"

#include "rank_one_eigen.hpp"

#include <cmath>

namespace rodeepc {

namespace {

void check_window(const SvdState& s, const Eigen::Ref<const Vector>& w) {
  if (w.size() != s.rows)
    throw ShapeError("update vector has " + std::to_string(w.size()) + " entries, state has " +
                     std::to_string(s.rows) + " rows");
  if (!w.allFinite()) throw DomainError("update vector contains non-finite entries");
}

/// Left singular vectors and values of the core whose Gram matrix is
/// diag(d)^2 + z z^T. `core` is the explicit matrix, used by the dense path
/// and as a fallback.
template <class MakeCore>
void diagonalize_core(const Vector& d, const Vector& z, const MakeCore& make_core, CoreSolver solver,
                      Vector& values, Matrix& left) {
  if (solver == CoreSolver::secular && detail::rank_one_eig(d, z, values, left)) return;
  const Matrix core = make_core();
  if (!core.allFinite()) throw DomainError("SVD update produced non-finite values");
  Eigen::BDCSVD<Matrix> svd(core, Eigen::ComputeFullU);
  values = svd.singularValues();
  left = svd.matrixU();
}

Matrix wide_core(const Vector& sigma, const Vector& a) {
  const Index r = sigma.size();
  Matrix s = Matrix::Zero(r, r + 1);
  s.leftCols(r).diagonal() = sigma;
  s.col(r) = a;
  return s;
}

void apply_inspan(SvdState& state, const Vector& a, const SvdOptions& opt) {
  Vector values;
  Matrix rot;
  diagonalize_core(state.sigma, a, [&] { return wide_core(state.sigma, a); }, opt.core, values, rot);
  state.left = state.left * rot;
  state.sigma = values.head(state.rank());
}

}  // namespace

SvdState init_from_batch(const Eigen::Ref<const Matrix>& m, double rel_tol) {
  if (m.size() == 0) throw DomainError("cannot initialize an SVD from an empty matrix");
  if (!(rel_tol > 0.0)) throw DomainError("rank tolerance must be positive");
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU);
  const Vector& s = svd.singularValues();
  Index r = 0;
  if (s.size() && s(0) > 0.0)
    while (r < s.size() && s(r) >= rel_tol * s(0)) ++r;
  SvdState st;
  st.rows = m.rows();
  st.left = svd.matrixU().leftCols(r);
  st.sigma = s.head(r);
  return st;
}

SvdState init_from_batch(const MosaicHankel& m, double rel_tol) {
  return init_from_batch(m.matrix(), rel_tol);
}

AppendReport append_update_lowrank(SvdState& state, const Eigen::Ref<const Vector>& w,
                                   const SvdOptions& opt) {
  check_window(state, w);
  const Index r = state.rank();
  if (r >= state.rows) throw ProtocolError("low-rank update requires rank < rows");

  AppendReport rep;
  const double wnorm = w.norm();
  if (r == 0) {
    ++state.update_count;
    rep.residual_norm = wnorm;
    if (wnorm == 0.0) return rep;
    state.left = w / wnorm;
    state.sigma = Vector::Constant(1, wnorm);
    rep.kind = AppendKind::grew;
    return rep;
  }

  // Two Gram-Schmidt passes keep P orthogonal to U when w is close to span(U).
  Vector a = state.left.transpose() * w;
  Vector p = w - state.left * a;
  const Vector a2 = state.left.transpose() * p;
  p.noalias() -= state.left * a2;
  a += a2;
  const double R = p.norm();
  rep.residual_norm = R;
  ++state.update_count;

  if (R < opt.orth_tol * wnorm || wnorm == 0.0) {
    apply_inspan(state, a, opt);
    rep.kind = AppendKind::in_span;
    return rep;
  }

  Vector d(r + 1), z(r + 1);
  d << state.sigma, 0.0;
  z << a, R;
  auto core = [&] {
    Matrix c = Matrix::Zero(r + 1, r + 1);
    c.topLeftCorner(r, r).diagonal() = state.sigma;
    c.col(r) = z;
    return c;
  };
  Vector values;
  Matrix rot;
  diagonalize_core(d, z, core, opt.core, values, rot);

  const bool grows = values(r) >= opt.rel_tol * values(0) && values(r) > 0.0;
  const Index keep = grows ? r + 1 : r;
  Matrix basis(state.rows, r + 1);
  basis.leftCols(r) = state.left;
  basis.col(r) = p / R;
  state.left.noalias() = basis * rot.leftCols(keep);
  state.sigma = values.head(keep);
  rep.kind = grows ? AppendKind::grew : AppendKind::kept_rank;
  return rep;
}

AppendReport append_update_fullrank(SvdState& state, const Eigen::Ref<const Vector>& w,
                                    const SvdOptions& opt) {
  check_window(state, w);
  if (state.rank() != state.rows) throw ProtocolError("full-rank update requires rank == rows");
  const Vector a = state.left.transpose() * w;
  ++state.update_count;
  apply_inspan(state, a, opt);
  return AppendReport{AppendKind::full_row_rank, 0.0};
}

AppendReport append_update(SvdState& state, const Eigen::Ref<const Vector>& w,
                           const SvdOptions& opt) {
  const AppendReport rep = state.rank() < state.rows ? append_update_lowrank(state, w, opt)
                                                     : append_update_fullrank(state, w, opt);
  if (opt.reorth_interval > 0 && state.update_count % opt.reorth_interval == 0 &&
      state.rank() > 0)
    reorthonormalize(state);
  return rep;
}

OrderSelection adaptive_order(const Eigen::Ref<const Vector>& sv, double threshold, Index floor) {
  if (floor < 1) throw DomainError("order floor must be >= 1");
  if (threshold < 0.0) throw DomainError("order threshold must be >= 0");
  OrderSelection sel;
  sel.threshold = threshold;
  sel.floor = floor;
  const Index r = sv.size();
  if (floor > r) {
    sel.adaptive_order = r;
    sel.floor_clamped = true;
    return sel;
  }
  sel.adaptive_order = floor;
  for (Index i = floor; i <= r && sv(i - 1) >= threshold; ++i) sel.adaptive_order = i;
  return sel;
}

Matrix reduced_matrix(const SvdState& state, Index order) {
  if (order < 0 || order > state.rank())
    throw DimensionError("reduced order " + std::to_string(order) + " exceeds rank " +
                         std::to_string(state.rank()));
  return state.left.leftCols(order) * state.sigma.head(order).asDiagonal();
}

void reorthonormalize(SvdState& state) {
  const Index r = state.rank();
  if (r == 0) return;
  Eigen::HouseholderQR<Matrix> qr(state.left);
  const Matrix q = qr.householderQ() * Matrix::Identity(state.rows, r);
  Matrix b = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  b = b * state.sigma.asDiagonal();
  Eigen::BDCSVD<Matrix> svd(b, Eigen::ComputeFullU);
  state.left.noalias() = q * svd.matrixU();
  state.sigma = svd.singularValues();
}

double orthogonality_defect(const SvdState& state) {
  if (state.rank() == 0) return 0.0;
  const Matrix g = state.left.transpose() * state.left;
  return (g - Matrix::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
}

}  // namespace rodeepc
