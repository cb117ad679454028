#include "oracles.hpp"

#include <doctest.h>
#include <rodeepc/svdtrack.hpp>

#include <random>

using namespace rodeepc;

namespace {

Matrix random_matrix(std::mt19937_64& rng, Index r, Index c) {
  std::normal_distribution<double> nd;
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
  return m;
}

double max_rel_sigma_error(const SvdState& s, const Matrix& running) {
  const Vector ref = oracle::batch_singular_values(running);
  double worst = 0.0;
  for (Index i = 0; i < s.rank(); ++i)
    worst = std::max(worst, std::abs(s.sigma(i) - ref(i)) / ref(0));
  return worst;
}

void append_col(Matrix& m, const Vector& w) {
  m.conservativeResize(Eigen::NoChange, m.cols() + 1);
  m.col(m.cols() - 1) = w;
}

}  // namespace

TEST_SUITE("svdtrack") {

TEST_CASE("init from a diagonal matrix") {
  Matrix m = Matrix::Zero(4, 3);
  m(0, 0) = 3.0;
  m(1, 1) = 2.0;
  const SvdState s = init_from_batch(m);
  REQUIRE(s.rank() == 2);
  CHECK(s.sigma(0) == doctest::Approx(3.0));
  CHECK(s.sigma(1) == doctest::Approx(2.0));
  CHECK(s.rows == 4);
  CHECK_THROWS_AS(init_from_batch(Matrix(0, 0)), DomainError);
}

TEST_CASE("init from a rank-5 product matches the batch oracle") {
  std::mt19937_64 rng(21);
  const Matrix m = random_matrix(rng, 12, 5) * random_matrix(rng, 5, 20);
  const SvdState s = init_from_batch(m);
  REQUIRE(s.rank() == 5);
  const Vector ref = oracle::batch_singular_values(m);
  for (Index i = 0; i < 5; ++i) CHECK(std::abs(s.sigma(i) - ref(i)) <= 1e-10 * ref(i));
  // Reconstruction through the implicit right factor: U U^T M = M.
  CHECK((s.left * (s.left.transpose() * m) - m).norm() <= 1e-10 * ref(0));
}

TEST_CASE("orthogonal append grows the rank") {
  Matrix m = Matrix::Zero(3, 1);
  m(0, 0) = 1.0;
  SvdState s = init_from_batch(m);
  const AppendReport rep = append_update_lowrank(s, Vector::Unit(3, 1));
  CHECK(rep.kind == AppendKind::grew);
  REQUIRE(s.rank() == 2);
  CHECK(s.sigma(0) == doctest::Approx(1.0));
  CHECK(s.sigma(1) == doctest::Approx(1.0));
}

TEST_CASE("in-span append keeps the rank and matches the oracle") {
  std::mt19937_64 rng(22);
  Matrix m = random_matrix(rng, 10, 3) * random_matrix(rng, 3, 6);
  SvdState s = init_from_batch(m);
  const Vector w = 2.0 * s.left.col(0) * s.sigma(0) + 0.5 * s.left.col(2);
  const AppendReport rep = append_update_lowrank(s, w);
  append_col(m, w);
  CHECK(rep.kind == AppendKind::in_span);
  CHECK(s.rank() == 3);
  CHECK(max_rel_sigma_error(s, m) <= 1e-12);
}

TEST_CASE("30 random appends to a 20x5 seed track the oracle") {
  std::mt19937_64 rng(23);
  Matrix m = random_matrix(rng, 20, 5);
  SvdState s = init_from_batch(m);
  for (int k = 0; k < 30; ++k) {
    const Vector w = random_matrix(rng, 20, 1);
    append_update(s, w);
    append_col(m, w);
    CHECK(max_rel_sigma_error(s, m) <= 1e-8);
    const Matrix ub = oracle::batch_left_basis(m, s.rank());
    CHECK(oracle::max_principal_angle(ub, s.left) <= 1e-6);
  }
  CHECK(s.rank() == 20);
}

TEST_CASE("full-rank branch on the identity") {
  SvdState s = init_from_batch(Matrix::Identity(2, 2));
  append_update_fullrank(s, Vector::Zero(2));
  CHECK(s.sigma(0) == doctest::Approx(1.0));
  CHECK(s.sigma(1) == doctest::Approx(1.0));

  SvdState t = init_from_batch(Matrix::Identity(2, 2));
  append_update_fullrank(t, Vector::Unit(2, 0));
  CHECK(t.sigma(0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
  CHECK(t.sigma(1) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(append_update_lowrank(t, Vector::Unit(2, 0)), ProtocolError);
}

TEST_CASE("50 appends to a full-row-rank 10x10 seed") {
  for (CoreSolver core : {CoreSolver::secular, CoreSolver::dense}) {
    std::mt19937_64 rng(24);
    Matrix m = random_matrix(rng, 10, 10);
    SvdState s = init_from_batch(m);
    SvdOptions opt;
    opt.core = core;
    for (int k = 0; k < 50; ++k) {
      const Vector w = random_matrix(rng, 10, 1);
      const AppendReport rep = append_update(s, w, opt);
      CHECK(rep.kind == AppendKind::full_row_rank);
      append_col(m, w);
      CHECK(max_rel_sigma_error(s, m) <= 1e-8);
    }
  }
}

TEST_CASE("shape and value errors on updates") {
  SvdState s = init_from_batch(Matrix::Identity(3, 2));
  CHECK_THROWS_AS(append_update(s, Vector::Zero(4)), ShapeError);
  Vector bad = Vector::Zero(3);
  bad(1) = std::nan("");
  CHECK_THROWS_AS(append_update(s, bad), DomainError);
}

TEST_CASE("interlacing: no singular value shrinks after an append") {
  std::mt19937_64 rng(25);
  Matrix m = random_matrix(rng, 15, 4);
  SvdState s = init_from_batch(m);
  for (int k = 0; k < 40; ++k) {
    const Vector before = s.sigma;
    Vector w = random_matrix(rng, 15, 1);
    if (k % 5 == 0) w = s.left * random_matrix(rng, s.rank(), 1);  // in-span
    append_update(s, w);
    REQUIRE(s.rank() >= before.size());
    for (Index i = 0; i < before.size(); ++i) CHECK(s.sigma(i) >= before(i) * (1.0 - 1e-12));
    for (Index i = 1; i < s.rank(); ++i) CHECK(s.sigma(i) <= s.sigma(i - 1));
    CHECK(s.sigma_r() > 0.0);
    CHECK(orthogonality_defect(s) <= 1e-8);
  }
}

TEST_CASE("informativeness gate semantics") {
  CHECK(informativeness_gate(0.5, 0.5));
  CHECK(informativeness_gate(0.0, 0.0));
  CHECK(informativeness_gate(1e-300, 0.0));
  CHECK_FALSE(informativeness_gate(0.5 - 1e-12, 0.5));
  CHECK_FALSE(informativeness_gate(1e300, kInf));
  CHECK_THROWS_AS(informativeness_gate(1.0, -1.0), DomainError);
}

TEST_CASE("adaptive order examples") {
  Vector s5(5);
  s5 << 5, 4, 3, 2, 1;
  CHECK(adaptive_order(s5, 2.5, 2).adaptive_order == 3);
  Vector s3(3);
  s3 << 5, 4, 3;
  CHECK(adaptive_order(s3, 10.0, 2).adaptive_order == 2);
  CHECK(adaptive_order(s3, 0.0, 1).adaptive_order == 3);

  const OrderSelection clamped = adaptive_order(s3, 0.0, 7);
  CHECK(clamped.adaptive_order == 3);
  CHECK(clamped.floor_clamped);
  CHECK_THROWS_AS(adaptive_order(s3, 1.0, 0), DomainError);
  CHECK_THROWS_AS(adaptive_order(s3, -1.0, 1), DomainError);

  // The scan stops at the first value below the threshold.
  Vector dip(4);
  dip << 5, 1, 4, 4;  // not sorted on purpose; only the scan rule is exercised
  CHECK(adaptive_order(dip, 2.0, 1).adaptive_order == 1);
}

TEST_CASE("reduced matrix: Gram equivalence and Eckart-Young") {
  std::mt19937_64 rng(26);
  const Matrix m = random_matrix(rng, 8, 20);
  const SvdState s = init_from_batch(m);
  const Matrix full = reduced_matrix(s, s.rank());
  const Matrix g = m * m.transpose();
  CHECK((full * full.transpose() - g).norm() <= 1e-8 * g.norm());

  const Matrix r1 = reduced_matrix(s, 1);
  CHECK(r1.cols() == 1);
  // Best rank-1 approximation error in the spectral norm equals sigma_2.
  const Matrix proj = s.left.col(0) * (s.left.col(0).transpose() * m);
  const double err = oracle::batch_singular_values(m - proj)(0);
  CHECK(err == doctest::Approx(s.sigma(1)).epsilon(1e-10));
  CHECK((r1 * r1.transpose() - proj * proj.transpose()).norm() <= 1e-8 * g.norm());
  CHECK_THROWS_AS(reduced_matrix(s, s.rank() + 1), DimensionError);
}

TEST_CASE("reorthonormalize: idempotent and repairs injected drift") {
  std::mt19937_64 rng(27);
  const Matrix m = random_matrix(rng, 12, 6);
  SvdState s = init_from_batch(m);
  const SvdState copy = s;
  reorthonormalize(s);
  CHECK((s.sigma - copy.sigma).cwiseAbs().maxCoeff() <= 1e-12 * copy.sigma(0));
  CHECK(oracle::max_principal_angle(copy.left, s.left) <= 1e-12);

  SvdState drift = copy;
  drift.left += 1e-6 * random_matrix(rng, 12, 6) / std::sqrt(72.0);
  CHECK(orthogonality_defect(drift) > 1e-8);
  const Matrix before = drift.left;
  reorthonormalize(drift);
  CHECK(orthogonality_defect(drift) <= 1e-12);
  Matrix qb = Eigen::HouseholderQR<Matrix>(before).householderQ() * Matrix::Identity(12, 6);
  CHECK(oracle::max_principal_angle(qb, drift.left) <= 1e-10);
}

TEST_CASE("10000-update chain with periodic re-orthonormalization") {
  std::mt19937_64 rng(28);
  const Index rows = 8;
  Matrix m = random_matrix(rng, rows, 3);
  SvdState s = init_from_batch(m);
  m.conservativeResize(Eigen::NoChange, 3 + 10000);
  for (Index k = 0; k < 10000; ++k) {
    const Vector w = random_matrix(rng, rows, 1);
    m.col(3 + k) = w;
    append_update(s, w);
  }
  CHECK(s.update_count == 10000);
  const Vector ref = oracle::batch_singular_values(m);
  for (Index i = 0; i < rows; ++i) CHECK(std::abs(s.sigma(i) - ref(i)) <= 1e-6 * ref(i));
  CHECK(orthogonality_defect(s) <= 1e-8);
}

}  // TEST_SUITE
