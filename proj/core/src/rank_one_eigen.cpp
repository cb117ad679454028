#include "rank_one_eigen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

extern "C" void dlasd4_(const int* n, const int* i, const double* d, const double* z,
                        double* delta, const double* rho, double* sigma, double* work,
                        int* info);

namespace rodeepc::detail {

namespace {

struct Rotation {
  Index p, q;
  double c, s;
};

}  // namespace

bool rank_one_eig(const Vector& d, const Vector& z, Vector& omega, Matrix& vectors) {
  const Index n = d.size();
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::stable_sort(perm.begin(), perm.end(), [&](Index a, Index b) { return d(a) < d(b); });

  Vector ds(n), zs(n);
  for (Index i = 0; i < n; ++i) {
    ds(i) = d(perm[static_cast<std::size_t>(i)]);
    zs(i) = z(perm[static_cast<std::size_t>(i)]);
  }

  const double eps = std::numeric_limits<double>::epsilon();
  const double tol = 8.0 * eps * std::max(ds.size() ? ds(n - 1) : 0.0, zs.norm());

  std::vector<bool> deflated(static_cast<std::size_t>(n), false);
  std::vector<Rotation> rotations;
  Index prev = -1;
  for (Index j = 0; j < n; ++j) {
    if (std::abs(zs(j)) <= tol) {
      zs(j) = 0.0;
      deflated[static_cast<std::size_t>(j)] = true;
      continue;
    }
    if (prev >= 0 && ds(j) - ds(prev) <= tol) {
      // Nearly equal poles: rotate the weight of `prev` onto `j` and deflate `prev`.
      const double r = std::hypot(zs(prev), zs(j));
      const double c = zs(j) / r;
      const double s = zs(prev) / r;
      rotations.push_back({prev, j, c, s});
      zs(j) = r;
      zs(prev) = 0.0;
      deflated[static_cast<std::size_t>(prev)] = true;
    }
    prev = j;
  }

  std::vector<Index> live;
  for (Index j = 0; j < n; ++j)
    if (!deflated[static_cast<std::size_t>(j)]) live.push_back(j);
  const auto k = static_cast<Index>(live.size());

  // Eigenpairs in the sorted and rotated coordinates.
  Vector w_all(n);
  Matrix v_all = Matrix::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    if (deflated[static_cast<std::size_t>(j)]) {
      w_all(j) = ds(j);
      v_all(j, j) = 1.0;
    }
  }

  if (k > 0) {
    Vector dk(k), zk(k);
    for (Index j = 0; j < k; ++j) {
      dk(j) = ds(live[static_cast<std::size_t>(j)]);
      zk(j) = zs(live[static_cast<std::size_t>(j)]);
    }
    const double rho = zk.squaredNorm();
    const Vector zn = zk / std::sqrt(rho);

    Matrix delta(k, k), work(k, k);  // column i holds the data of root i
    Vector roots(k);
    const int kk = static_cast<int>(k);
    for (int i = 0; i < kk; ++i) {
      const int ione = i + 1;
      int info = 0;
      double sig = 0.0;
      dlasd4_(&kk, &ione, dk.data(), zn.data(), delta.col(i).data(), &rho, &sig,
              work.col(i).data(), &info);
      if (info != 0) return false;
      roots(i) = sig;
    }

    // Recompute z from the computed roots so the eigenvectors come out
    // orthogonal to working precision.
    Vector zhat(k);
    for (Index j = 0; j < k; ++j) {
      double prod = -delta(j, k - 1) * work(j, k - 1);
      for (Index i = 0; i < j; ++i)
        prod *= (-delta(j, i) * work(j, i)) / ((dk(i) - dk(j)) * (dk(i) + dk(j)));
      for (Index i = j; i < k - 1; ++i)
        prod *= (-delta(j, i) * work(j, i)) / ((dk(i + 1) - dk(j)) * (dk(i + 1) + dk(j)));
      zhat(j) = std::copysign(std::sqrt(std::abs(prod)), zn(j));
    }

    for (Index i = 0; i < k; ++i) {
      Vector v(k);
      for (Index j = 0; j < k; ++j) v(j) = zhat(j) / (delta(j, i) * work(j, i));
      v.normalize();
      const Index slot = live[static_cast<std::size_t>(i)];
      w_all(slot) = roots(i);
      for (Index j = 0; j < k; ++j) v_all(live[static_cast<std::size_t>(j)], slot) = v(j);
    }
  }

  for (auto it = rotations.rbegin(); it != rotations.rend(); ++it) {
    for (Index col = 0; col < n; ++col) {
      const double xp = v_all(it->p, col);
      const double xq = v_all(it->q, col);
      v_all(it->p, col) = it->c * xp + it->s * xq;
      v_all(it->q, col) = -it->s * xp + it->c * xq;
    }
  }

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return w_all(a) > w_all(b); });

  omega.resize(n);
  vectors.resize(n, n);
  for (Index c = 0; c < n; ++c) {
    const Index src = order[static_cast<std::size_t>(c)];
    omega(c) = w_all(src);
    for (Index r = 0; r < n; ++r) vectors(perm[static_cast<std::size_t>(r)], c) = v_all(r, src);
  }
  return true;
}

}  // namespace rodeepc::detail
