#pragma once

// Independent reference implementations used only by the tests. None of these
// share code with the library beyond Eigen.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <vector>

namespace oracle {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline VectorXd batch_singular_values(const MatrixXd& m) {
  return Eigen::JacobiSVD<MatrixXd>(m).singularValues();
}

inline Index batch_rank(const MatrixXd& m, double rel_tol = 1e-10) {
  const VectorXd s = batch_singular_values(m);
  Index r = 0;
  while (r < s.size() && s(0) > 0.0 && s(r) >= rel_tol * s(0)) ++r;
  return r;
}

/// Left singular basis of the leading `r` directions.
inline MatrixXd batch_left_basis(const MatrixXd& m, Index r) {
  Eigen::JacobiSVD<MatrixXd> svd(m, Eigen::ComputeThinU);
  return svd.matrixU().leftCols(r);
}

/// Largest principal angle between span(a) and span(b) (both orthonormal,
/// equal column count), computed through the sine to keep small angles exact.
inline double max_principal_angle(const MatrixXd& a, const MatrixXd& b) {
  const MatrixXd resid = b - a * (a.transpose() * b);
  const double s = Eigen::JacobiSVD<MatrixXd>(resid).singularValues()(0);
  return std::asin(std::min(1.0, s));
}

/// Window-by-window Hankel construction straight from the definition.
inline MatrixXd brute_hankel(const std::vector<std::vector<VectorXd>>& segments, Index depth) {
  const Index q = segments.front().front().size();
  std::vector<VectorXd> cols;
  for (const auto& seg : segments) {
    const auto t = static_cast<Index>(seg.size());
    for (Index j = 0; j + depth <= t; ++j) {
      VectorXd c(q * depth);
      for (Index i = 0; i < depth; ++i)
        for (Index ch = 0; ch < q; ++ch) c(i * q + ch) = seg[static_cast<std::size_t>(j + i)](ch);
      cols.push_back(c);
    }
  }
  MatrixXd h(q * depth, static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) h.col(static_cast<Index>(j)) = cols[j];
  return h;
}

/// Least-squares residual of projecting w onto the column space of m,
/// relative to ||w||.
inline double subspace_residual(const MatrixXd& m, const VectorXd& w) {
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(m);
  cod.setThreshold(1e-10);
  const VectorXd g = cod.solve(w);
  return (m * g - w).norm() / w.norm();
}

/// Dense strictly convex QP: min 0.5 x'Hx + c'x, Ax = b, l <= x <= u.
struct DenseQp {
  MatrixXd h;
  VectorXd c;
  MatrixXd a;
  VectorXd b;
  VectorXd lo;
  VectorXd hi;
};

/// Exhaustive active-set enumeration. Every assignment of each variable to
/// {free, at lower, at upper} is a candidate; candidates are visited in order
/// of increasing active-set size and the first one satisfying all KKT
/// conditions is returned (the KKT point of a strictly convex QP is unique).
inline std::optional<VectorXd> enumerate_active_sets(const DenseQp& qp, double tol = 1e-9) {
  const Index n = qp.c.size();
  const Index m = qp.a.rows();
  std::vector<int> state(static_cast<std::size_t>(n), 0);

  auto try_state = [&]() -> std::optional<VectorXd> {
    std::vector<Index> fr, fx;
    VectorXd xf = VectorXd::Zero(n);
    for (Index i = 0; i < n; ++i) {
      const int s = state[static_cast<std::size_t>(i)];
      if (s == 0) {
        fr.push_back(i);
      } else {
        fx.push_back(i);
        xf(i) = s < 0 ? qp.lo(i) : qp.hi(i);
        if (!std::isfinite(xf(i))) return std::nullopt;
      }
    }
    const auto nf = static_cast<Index>(fr.size());
    MatrixXd k = MatrixXd::Zero(nf + m, nf + m);
    VectorXd rhs(nf + m);
    for (Index i = 0; i < nf; ++i) {
      for (Index j = 0; j < nf; ++j) k(i, j) = qp.h(fr[i], fr[j]);
      double ci = qp.c(fr[i]);
      for (Index j : fx) ci += qp.h(fr[i], j) * xf(j);
      rhs(i) = -ci;
      for (Index e = 0; e < m; ++e) k(i, nf + e) = k(nf + e, i) = qp.a(e, fr[i]);
    }
    for (Index e = 0; e < m; ++e) {
      double be = qp.b(e);
      for (Index j : fx) be -= qp.a(e, j) * xf(j);
      rhs(nf + e) = be;
    }
    VectorXd sol = VectorXd::Zero(nf + m);
    if (nf + m > 0) {
      Eigen::FullPivLU<MatrixXd> lu(k);
      if (!lu.isInvertible()) return std::nullopt;
      sol = lu.solve(rhs);
    }
    VectorXd x = xf;
    for (Index i = 0; i < nf; ++i) x(fr[i]) = sol(i);
    for (Index i : fr)
      if (x(i) < qp.lo(i) - tol || x(i) > qp.hi(i) + tol) return std::nullopt;
    const VectorXd nu = sol.tail(m);
    const VectorXd grad = qp.h * x + qp.c + qp.a.transpose() * nu;
    for (Index i : fx) {
      const double mu = -grad(i);  // stationarity: grad + mu = 0
      const int s = state[static_cast<std::size_t>(i)];
      if (qp.lo(i) == qp.hi(i)) continue;
      if (s > 0 && mu < -tol) return std::nullopt;
      if (s < 0 && mu > tol) return std::nullopt;
    }
    return x;
  };

  for (Index active = 0; active <= n; ++active) {
    std::vector<int> pick(static_cast<std::size_t>(n), 0);
    std::fill(pick.end() - active, pick.end(), 1);
    do {
      std::vector<Index> idx;
      for (Index i = 0; i < n; ++i)
        if (pick[static_cast<std::size_t>(i)]) idx.push_back(i);
      for (unsigned mask = 0; mask < (1u << active); ++mask) {
        std::fill(state.begin(), state.end(), 0);
        for (Index j = 0; j < active; ++j)
          state[static_cast<std::size_t>(idx[static_cast<std::size_t>(j)])] =
              (mask >> j) & 1u ? 1 : -1;
        if (auto x = try_state()) return x;
      }
    } while (std::next_permutation(pick.begin(), pick.end()));
  }
  return std::nullopt;
}

/// Random strictly convex QP with a feasible interior point.
inline DenseQp random_qp(std::mt19937_64& rng, Index n, Index m) {
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.1, 1.0);
  DenseQp qp;
  MatrixXd g(n, n);
  for (Index i = 0; i < g.size(); ++i) g.data()[i] = nd(rng);
  qp.h = g * g.transpose() + 0.1 * MatrixXd::Identity(n, n);
  qp.c.resize(n);
  for (Index i = 0; i < n; ++i) qp.c(i) = 3.0 * nd(rng);
  VectorXd x0(n);
  for (Index i = 0; i < n; ++i) x0(i) = nd(rng);
  qp.a.resize(m, n);
  for (Index i = 0; i < qp.a.size(); ++i) qp.a.data()[i] = nd(rng);
  qp.b = qp.a * x0;
  qp.lo.resize(n);
  qp.hi.resize(n);
  for (Index i = 0; i < n; ++i) {
    qp.lo(i) = x0(i) - ud(rng);
    qp.hi(i) = x0(i) + ud(rng);
  }
  return qp;
}

}  // namespace oracle
