#include "oracles.hpp"

#include <doctest.h>
#include <rodeepc/trajectory.hpp>

#include <random>

using namespace rodeepc;

namespace {

Matrix random_matrix(std::mt19937_64& rng, Index r, Index c) {
  std::normal_distribution<double> nd;
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
  return m;
}

std::vector<std::vector<Vector>> as_samples(const std::vector<Matrix>& segs) {
  std::vector<std::vector<Vector>> out;
  for (const auto& s : segs) {
    std::vector<Vector> v;
    for (Index k = 0; k < s.cols(); ++k) v.push_back(s.col(k));
    out.push_back(v);
  }
  return out;
}

SignalSequence scalar_seq(std::initializer_list<double> v) {
  std::vector<double> x(v);
  return SignalSequence::scalar(x);
}

}  // namespace

TEST_SUITE("trajectory") {

TEST_CASE("signal sequences reject non-finite data and empty input") {
  Matrix m(1, 2);
  m << 1.0, std::nan("");
  CHECK_THROWS_AS(SignalSequence{m}, DomainError);
  CHECK_THROWS(SignalSequence{Matrix(1, 0)});
  CHECK_THROWS_AS(TrajectoryDataset({SignalSequence(Matrix::Ones(1, 3)), SignalSequence(Matrix::Ones(2, 3))}),
                  ShapeError);
}

TEST_CASE("scalar Hankel of [1,2,3,4] with depth 2") {
  const MosaicHankel h = build_hankel(scalar_seq({1, 2, 3, 4}), 2);
  Matrix expect(2, 3);
  expect << 1, 2, 3, 2, 3, 4;
  CHECK(h.cols() == 3);
  CHECK(h.matrix() == expect);
}

TEST_CASE("depth equal to length gives a single column") {
  std::mt19937_64 rng(3);
  const Matrix data = random_matrix(rng, 2, 6);
  const MosaicHankel h = build_hankel(SignalSequence(data), 6);
  CHECK(h.cols() == 1);
  CHECK(h.matrix().col(0) == Eigen::Map<const Vector>(data.data(), 12));
}

TEST_CASE("depth out of range is a dimension error") {
  CHECK_THROWS_AS(build_hankel(scalar_seq({1, 2, 3}), 4), DimensionError);
  CHECK_THROWS_AS(build_hankel(scalar_seq({1, 2, 3}), 0), DimensionError);
}

TEST_CASE("two-channel Hankel matches brute-force window enumeration") {
  std::mt19937_64 rng(11);
  const Matrix data = random_matrix(rng, 2, 5);
  const MosaicHankel h = build_hankel(SignalSequence(data), 3);
  CHECK(h.rows() == 6);
  CHECK(h.cols() == 3);
  CHECK(h.matrix() == oracle::brute_hankel(as_samples({data}), 3));
}

TEST_CASE("mosaic of two scalar segments") {
  const TrajectoryDataset d({scalar_seq({1, 2, 3}), scalar_seq({4, 5, 6})});
  const MosaicHankel h = build_mosaic(d, 2);
  Matrix expect(2, 4);
  expect << 1, 2, 4, 5, 2, 3, 5, 6;
  CHECK(h.cols() == 4);
  CHECK(h.matrix() == expect);
  CHECK(h.origins()[2].segment == 1);
  CHECK(h.origins()[2].start == 0);
}

TEST_CASE("single-segment mosaic equals the Hankel matrix") {
  std::mt19937_64 rng(5);
  const SignalSequence s(random_matrix(rng, 3, 12));
  CHECK(build_mosaic(TrajectoryDataset({s}), 4).matrix() == build_hankel(s, 4).matrix());
}

TEST_CASE("three random segments: column count and window membership") {
  std::mt19937_64 rng(7);
  std::vector<Matrix> segs{random_matrix(rng, 2, 9), random_matrix(rng, 2, 6), random_matrix(rng, 2, 11)};
  std::vector<SignalSequence> ss;
  for (const auto& s : segs) ss.emplace_back(s);
  const TrajectoryDataset d(ss);
  const MosaicHankel h = build_mosaic(d, 4);
  CHECK(h.cols() == d.total_length() - 3 * 3);
  const Matrix brute = oracle::brute_hankel(as_samples(segs), 4);
  for (Index j = 0; j < h.cols(); ++j) {
    int hits = 0;
    for (Index b = 0; b < brute.cols(); ++b) hits += (brute.col(b) == h.matrix().col(j)) ? 1 : 0;
    CHECK(hits == 1);
  }
}

TEST_CASE("mosaic rejects short segments") {
  const TrajectoryDataset d({scalar_seq({1, 2, 3}), scalar_seq({4})});
  CHECK_THROWS_AS(build_mosaic(d, 2), DimensionError);
}

TEST_CASE("stack_io orders inputs before outputs within each sample") {
  const TrajectoryDataset u({scalar_seq({1, 2, 3})});
  const TrajectoryDataset y({scalar_seq({10, 20, 30})});
  const MosaicHankel h = stack_io(u, y, 2);
  Matrix expect(4, 2);
  expect << 1, 2, 10, 20, 2, 3, 20, 30;
  CHECK(h.matrix() == expect);

  const BlockPartition b = partition(h, IoLayout{1, 1, 1, 1});
  CHECK(b.past_inputs == expect.row(0));
  CHECK(b.past_outputs == expect.row(1));
  CHECK(b.future_inputs == expect.row(2));
  CHECK(b.future_outputs == expect.row(3));
}

TEST_CASE("stack_io rejects mismatched segment structure") {
  const TrajectoryDataset u({scalar_seq({1, 2, 3})});
  const TrajectoryDataset y({scalar_seq({1, 2})});
  CHECK_THROWS_AS(stack_io(u, y, 2), ShapeError);
  const TrajectoryDataset y2({scalar_seq({1, 2, 3}), scalar_seq({1, 2, 3})});
  CHECK_THROWS_AS(stack_io(u, y2, 2), ShapeError);
}

TEST_CASE("benchmark row counts and partition block shapes") {
  std::mt19937_64 rng(1);
  const TrajectoryDataset u({SignalSequence(random_matrix(rng, 2, 120))});
  const TrajectoryDataset y({SignalSequence(random_matrix(rng, 2, 120))});
  const MosaicHankel h = stack_io(u, y, 80);
  CHECK(h.rows() == 320);
  const BlockPartition b = partition(h, IoLayout{35, 45, 2, 2});
  CHECK(b.past_inputs.rows() == 70);
  CHECK(b.future_inputs.rows() == 90);
  CHECK(b.past_outputs.rows() == 70);
  CHECK(b.future_outputs.rows() == 90);
  CHECK(b.past_inputs.cols() == h.cols());

  const TrajectoryDataset u1({SignalSequence(random_matrix(rng, 1, 60))});
  const TrajectoryDataset y1({SignalSequence(random_matrix(rng, 1, 60))});
  CHECK(stack_io(u1, y1, 25).rows() == 50);
}

TEST_CASE("partition then restack is the identity") {
  std::mt19937_64 rng(2);
  for (const IoLayout lay : {IoLayout{3, 4, 2, 1}, IoLayout{1, 1, 1, 1}, IoLayout{5, 2, 1, 3}}) {
    const Matrix m = random_matrix(rng, lay.rows(), 13);
    CHECK(restack(partition(m, lay), lay) == m);
    const auto order = lay.block_row_order();
    const BlockPartition b = partition(m, lay);
    Matrix stacked(lay.rows(), 13);
    stacked << b.past_inputs, b.future_inputs, b.past_outputs, b.future_outputs;
    CHECK(stacked == m(order, Eigen::all));
  }
  CHECK_THROWS_AS(partition(Matrix::Zero(7, 2), IoLayout{1, 1, 1, 1}), ShapeError);
}

TEST_CASE("append then remove restores the matrix bit for bit") {
  std::mt19937_64 rng(4);
  MosaicHankel h = build_hankel(SignalSequence(random_matrix(rng, 2, 10)), 3);
  const Matrix before = h.matrix();
  const Index r0 = numerical_rank(h).rank;
  h.append_window(random_matrix(rng, 6, 1).col(0), 42);
  CHECK(h.cols() == before.cols() + 1);
  CHECK(numerical_rank(h).rank >= r0);
  h.remove_last_window();
  CHECK(h.matrix() == before);
  CHECK_THROWS_AS(h.remove_last_window(), ProtocolError);
  CHECK_THROWS_AS(h.append_window(Vector::Zero(5)), ShapeError);
}

TEST_CASE("appending an in-span column keeps the rank") {
  std::mt19937_64 rng(8);
  const Matrix low = random_matrix(rng, 8, 3) * random_matrix(rng, 3, 10);
  MosaicHankel h(1, 8);
  for (Index j = 0; j < low.cols(); ++j) h.append_window(low.col(j));
  const Index r0 = numerical_rank(h).rank;
  CHECK(r0 == 3);
  h.append_window(low * random_matrix(rng, 10, 1));
  CHECK(numerical_rank(h).rank == r0);
}

TEST_CASE("replace_oldest evicts in FIFO order until only online windows remain") {
  MosaicHankel h = build_hankel(scalar_seq({1, 2, 3, 4, 5}), 2);
  const Index L = h.cols();
  for (Index i = 0; i < L; ++i) {
    Vector w(2);
    w << 100.0 + static_cast<double>(i), 0.0;
    h.replace_oldest(w, i);
    CHECK(h.cols() == L);
  }
  for (const auto& o : h.origins()) CHECK(o.online);
  CHECK(h.offline_cols() == 0);
  Vector w(2);
  w << 999.0, 0.0;
  const Index slot = h.replace_oldest(w, 99);
  CHECK(h.matrix()(0, slot) == 999.0);
  // The column holding 100 was the first online window and so the oldest.
  CHECK(slot == 0);
}

TEST_CASE("numerical rank on known spectra and against the oracle") {
  Matrix d = Matrix::Zero(3, 3);
  d(0, 0) = 1.0;
  d(1, 1) = 1.0;
  const RankInfo info = numerical_rank(d);
  CHECK(info.rank == 2);
  CHECK(info.sigma_r == doctest::Approx(1.0));
  CHECK_THROWS_AS(numerical_rank(Matrix(0, 0)), DomainError);

  std::mt19937_64 rng(9);
  for (int t = 0; t < 20; ++t) {
    const Index k = 1 + t % 19;
    const Matrix m = random_matrix(rng, 20, k) * random_matrix(rng, k, 30);
    CHECK(numerical_rank(m).rank == oracle::batch_rank(m));
  }
}

TEST_CASE("noiseless LTI data with PE input reaches rank mK+n") {
  // Two-state controllable and observable SISO system.
  Matrix a(2, 2), b(2, 1), c(1, 2);
  a << 0.7, 0.2, -0.1, 0.5;
  b << 1.0, 0.5;
  c << 1.0, 0.3;
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> ud(-1, 1);
  const Index T = 80, K = 6;
  Matrix u(1, T), y(1, T);
  Vector x = Vector::Zero(2);
  for (Index k = 0; k < T; ++k) {
    u(0, k) = ud(rng);
    y.col(k) = c * x;
    x = a * x + b * u.col(k);
  }
  const MosaicHankel h = stack_io(TrajectoryDataset({SignalSequence(u)}), TrajectoryDataset({SignalSequence(y)}), K);
  const Index r = numerical_rank(h).rank;
  CHECK(r == 1 * K + 2);
  CHECK(is_persistently_exciting(SignalSequence(u), K + 2));
}

TEST_CASE("persistency of excitation") {
  CHECK_FALSE(is_persistently_exciting(scalar_seq({2, 2, 2, 2, 2}), 2));
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> ud(-1, 1);
  std::vector<double> v(20);
  for (auto& e : v) e = ud(rng);
  CHECK(is_persistently_exciting(SignalSequence::scalar(v), 5));
  CHECK_FALSE(is_persistently_exciting(scalar_seq({0, 0, 1}), 3));
  CHECK(is_persistently_exciting(scalar_seq({0, 0, 1, 0, 0}), 3));
  CHECK_FALSE(is_persistently_exciting(scalar_seq({0, 0, 0}), 3));
  CHECK_THROWS(is_persistently_exciting(scalar_seq({1, 2}), 3));
}

}  // TEST_SUITE
