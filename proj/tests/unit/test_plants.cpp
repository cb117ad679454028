#include "oracles.hpp"

#include <doctest.h>
#include <rodeepc/plants.hpp>

#include <random>

using namespace rodeepc;

TEST_SUITE("plants") {

TEST_CASE("LTV benchmark matrices") {
  const LtvPlant p = make_ltv_benchmark();
  CHECK(p.state_dim() == 4);
  CHECK(p.input_dim() == 2);
  CHECK(p.output_dim() == 2);
  LtvPlant q = p;
  q.set_schedule(LambdaSchedule::constant(0.0));
  CHECK(q.A_at(0)(0, 0) == 0.921);
  q.set_schedule(LambdaSchedule::constant(1.0));
  CHECK(q.B_at(0)(0, 0) == doctest::Approx(0.018).epsilon(1e-15));
  Matrix c_expect = Matrix::Zero(2, 4);
  c_expect(0, 0) = c_expect(1, 1) = 1.0;
  CHECK(p.C() == c_expect);
  CHECK(p.initial_state() == Vector::Constant(4, 0.5));
}

TEST_CASE("rollover benchmark matrices") {
  const LtvPlant p = make_rollover_benchmark(0.1);
  CHECK(p.state_dim() == 4);
  CHECK(p.input_dim() == 1);
  CHECK(p.output_dim() == 1);
  CHECK(p.A0()(1, 0) == doctest::Approx(-7.83).epsilon(1e-14));
  CHECK(p.A0()(0, 0) == doctest::Approx(1.000499).epsilon(1e-14));
  CHECK(p.B0()(1, 0) == doctest::Approx(0.280).epsilon(1e-14));
  CHECK((p.C() * Vector::Unit(4, 0))(0) == doctest::Approx(0.12));
  const Matrix drift_a = 0.01 * p.A0();
  const Matrix drift_b = 0.01 * p.B0();
  CHECK(p.drift_A() == drift_a);
  CHECK(p.drift_B() == drift_b);
  CHECK_THROWS_AS(make_rollover_benchmark(0.0), DomainError);
}

TEST_CASE("zero input from rest without noise stays at zero") {
  LtvPlant p = make_ltv_benchmark();
  p.set_initial_state(Vector::Zero(4));
  for (Index k = 0; k < 50; ++k) CHECK(p.step(Vector::Zero(2), k).norm() == 0.0);
}

TEST_CASE("noiseless rollout matches a dense matrix recursion") {
  LtvPlant p = make_ltv_benchmark();
  p.set_schedule(LambdaSchedule({{0, 0.0}, {20, 1.5}, {60, 0.5}}));
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> ud(-1, 1);
  Matrix a0(4, 4), da(4, 4), b0(4, 2), db(4, 2);
  a0 << 0.921, 0, 0.041, 0, 0, 0.918, 0, 0.033, 0, 0, 0.924, 0, 0, 0, 0, 0.937;
  da << 0.01, 0, 0.001, 0, 0, 0.01, 0, 0.001, 0, 0, 0.01, 0, 0, 0, 0, 0.01;
  b0 << 0.017, 0.001, 0.001, 0.023, 0, 0.061, 0.072, 0;
  db << 0.001, 0.0001, 0.0001, 0.001, 0, 0.001, 0.001, 0;
  Vector x = Vector::Constant(4, 0.5);
  for (Index k = 0; k < 100; ++k) {
    Vector u(2);
    u << ud(rng), ud(rng);
    const double lam = k < 20 ? 0.0 : (k < 60 ? 1.5 : 0.5);
    const Vector y_ref = x.head(2);
    x = (a0 + lam * da) * x + (b0 + lam * db) * u;
    const Vector y = p.step(u, k);
    CHECK((y - y_ref).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("first LTV output is C x(0) plus bounded measurement noise") {
  LtvPlant p = make_ltv_benchmark();
  p.set_noise(NoiseModel{NoiseKind::uniform_ball, 0.002, 5});
  const Vector y = p.step(Vector::Zero(2), 0);
  CHECK((y - Vector::Constant(2, 0.5)).norm() <= 0.002);
  CHECK((y - Vector::Constant(2, 0.5)).norm() > 0.0);
}

TEST_CASE("noise draws respect the bound and are reproducible") {
  NoiseSource a(NoiseModel{NoiseKind::uniform_ball, 0.002, 77}, 1);
  NoiseSource b(NoiseModel{NoiseKind::uniform_ball, 0.002, 77}, 1);
  NoiseSource c(NoiseModel{NoiseKind::uniform_ball, 0.002, 77}, 2);
  bool differs = false;
  double max_norm = 0.0;
  for (int i = 0; i < 5000; ++i) {
    const Vector va = a.draw(4), vb = b.draw(4), vc = c.draw(4);
    CHECK(va.norm() <= 0.002);
    max_norm = std::max(max_norm, va.norm());
    CHECK(va == vb);
    differs = differs || (va != vc);
  }
  CHECK(differs);
  CHECK(max_norm > 0.0019);
  NoiseSource none(NoiseModel{NoiseKind::none, 0.002, 1}, 1);
  CHECK(none.draw(3).norm() == 0.0);
}

TEST_CASE("identical seeds give bit-identical rollouts") {
  auto run = [](std::uint64_t seed) {
    LtvPlant p = make_ltv_benchmark();
    p.set_noise(NoiseModel{NoiseKind::uniform_ball, 0.002, seed});
    Matrix ys(2, 200);
    for (Index k = 0; k < 200; ++k) ys.col(k) = p.step(Vector::Constant(2, 0.1), k);
    return ys;
  };
  CHECK(run(3) == run(3));
  CHECK(run(3) != run(4));
}

TEST_CASE("lambda schedules") {
  const LambdaSchedule s({{0, 0.0}, {10, 1.0}, {20, 2.0}}, 30);
  CHECK(s(0) == 0.0);
  CHECK(s(9) == 0.0);
  CHECK(s(10) == 1.0);  // right-continuous
  CHECK(s(25) == 2.0);
  CHECK(s(30) == 0.0);
  CHECK(s(41) == 1.0);
  const LambdaSchedule late({{5, 3.0}});
  CHECK(late(0) == 3.0);
  CHECK_THROWS_AS(LambdaSchedule(std::vector<std::pair<Index, double>>{}), ConfigError);
  CHECK_THROWS_AS(LambdaSchedule({{3, 1.0}, {3, 2.0}}), ConfigError);
  CHECK_THROWS_AS(LambdaSchedule({{0, 1.0}, {10, 2.0}}, 10), ConfigError);
}

TEST_CASE("offline data reaches the rank targets") {
  const LtvPlant p = make_ltv_benchmark();
  OfflineSpec spec;
  spec.depth = 80;
  spec.seed = 7;

  SUBCASE("noiseless single segment: rank mK+n exactly") {
    spec.lengths = {500};
    const OfflineData d = generate_offline_data(p, ExcitationPolicy{}, spec);
    CHECK(d.rank == 2 * 80 + 4);
    CHECK(oracle::batch_rank(stack_io(d.inputs, d.outputs, 80).matrix()) == 164);
  }
  SUBCASE("noisy data: rank qK = 320") {
    spec.lengths = {300, 300};
    spec.noise = NoiseModel{NoiseKind::uniform_ball, 0.002, 0};
    spec.required_rank = 320;
    const OfflineData d = generate_offline_data(p, ExcitationPolicy{}, spec);
    CHECK(d.rank == 320);
    CHECK(d.inputs.size() == 2);
  }
  SUBCASE("two noiseless segments pass the mosaic check") {
    spec.lengths = {200, 200};
    const OfflineData d = generate_offline_data(p, ExcitationPolicy{}, spec);
    CHECK(d.rank == 164);
    CHECK(oracle::batch_rank(stack_io(d.inputs, d.outputs, 80).matrix()) == 164);
  }
  SUBCASE("unreachable rank exhausts the retry budget") {
    spec.lengths = {150};
    spec.required_rank = 400;
    spec.retries = 2;
    CHECK_THROWS_AS(generate_offline_data(p, ExcitationPolicy{}, spec), DataGenerationError);
  }
  SUBCASE("segments shorter than the depth are rejected") {
    spec.lengths = {50};
    CHECK_THROWS_AS(generate_offline_data(p, ExcitationPolicy{}, spec), DimensionError);
  }
}

TEST_CASE("divergence raises a simulation error with the step index") {
  LtvPlant p(Matrix::Identity(1, 1) * 1e10, Matrix::Ones(1, 1), Matrix::Ones(1, 1), Matrix::Zero(1, 1),
             Matrix::Zero(1, 1), Vector::Ones(1));
  Index failed_at = -1;
  try {
    for (Index k = 0; k < 1000; ++k) p.step(Vector::Zero(1), k);
  } catch (const SimulationError& e) {
    failed_at = e.step();
  }
  CHECK(failed_at > 0);
  CHECK(failed_at < 100);
  CHECK_THROWS_AS(p.step(Vector::Constant(1, std::nan("")), 0), SimulationError);
}

TEST_CASE("rollover violation predicate") {
  CHECK_FALSE(ltr_violation(1.0));
  CHECK_FALSE(ltr_violation(-1.0));
  CHECK(ltr_violation(-1.001));
  CHECK(ltr_violation(1.0000001));
  CHECK_FALSE(ltr_violation(0.0));
}

}  // TEST_SUITE
