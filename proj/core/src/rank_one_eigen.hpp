#pragma once

#include "rodeepc/common.hpp"

namespace rodeepc::detail {

/// Eigen-decomposition of diag(d)^2 + z z^T with d >= 0 in any order.
/// `omega` receives the square roots of the eigenvalues in descending order and
/// `vectors` the matching orthonormal eigenvectors as columns. Returns false if
/// the LAPACK root finder reports a failure.
bool rank_one_eig(const Vector& d, const Vector& z, Vector& omega, Matrix& vectors);

}  // namespace rodeepc::detail
