#include <cmath>
#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "safeinit/csv.hpp"
#include "safeinit/errors.hpp"
#include "safeinit/experiments.hpp"
#include "safeinit/sysmodel.hpp"

using namespace safeinit;
using namespace safeinit::sysmodel;
using linalg::Matrix;

TEST_CASE("pseudo inverse of the nonlinearity channel") {
  Matrix g = Matrix::column({0.0, -0.01});
  Matrix gd = pseudo_inverse_G(g);
  CHECK(gd(0, 0) == doctest::Approx(0.0));
  CHECK(gd(0, 1) == doctest::Approx(-100.0));

  Matrix id = pseudo_inverse_G(Matrix::identity(3));
  CHECK(linalg::frobenius_norm(id - Matrix::identity(3)) <= 1e-12);

  Matrix ones = pseudo_inverse_G(Matrix::column({1.0, 1.0}));
  CHECK(ones(0, 0) == doctest::Approx(0.5));
  CHECK(ones(0, 1) == doctest::Approx(0.5));

  CHECK_THROWS_AS(pseudo_inverse_G(Matrix::column({0.0, 0.0})), ModelError);
}

TEST_CASE("phi sample extraction") {
  SystemModel model;
  model.A = Matrix(2, 2, {0.5, 0.1, 0.0, 0.3});
  model.B = Matrix::column({1.0, 0.0});
  model.G = Matrix::column({0.0, 1.0});
  model.C_q = Matrix(1, 2, {1.0, 0.0});
  model.validate();

  // Linear system: extracted nonlinearity is identically zero.
  Dataset data;
  std::vector<double> x{0.4, -0.2}, u{0.3};
  std::vector<double> xp = linalg::matvec(model.A, x);
  xp[0] += u[0];
  data.transitions.push_back({x, u, xp});
  PhiSamples ps = extract_phi_samples(model, data);
  CHECK(std::abs(ps.phi[0][0]) <= 1e-12);
  CHECK(ps.q[0][0] == doctest::Approx(0.4));

  // Single triple with a planted sample value.
  xp[1] += 0.7;
  data.transitions[0].x_plus = xp;
  ps = extract_phi_samples(model, data);
  CHECK(ps.phi[0][0] == doctest::Approx(0.7));
}

TEST_CASE("pendulum extraction round-trips the oracle") {
  auto setup = experiments::pendulum_setup();
  Dataset data = experiments::collect_pendulum_dataset(setup, 5);
  PhiSamples ps = extract_phi_samples(setup.model, data);
  REQUIRE(ps.q.size() == 50);
  for (std::size_t j = 0; j < ps.q.size(); ++j) {
    double truth = setup.oracle(ps.q[j])[0];
    REQUIRE(ps.phi[j][0] == doctest::Approx(truth).epsilon(1e-9));
  }
}

TEST_CASE("relevant input detection") {
  Rng rng(2);
  std::vector<std::vector<double>> xs;
  std::vector<std::vector<double>> phi_sin, phi_const, phi_sum;
  for (int i = 0; i < 200; ++i) {
    std::vector<double> x{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
    phi_sin.push_back({std::sin(x[0])});
    phi_const.push_back({1.0});
    phi_sum.push_back({x[0] + x[1]});
    xs.push_back(std::move(x));
  }
  auto mask = detect_relevant_inputs(xs, phi_sin, 1);
  CHECK(mask[0]);
  CHECK_FALSE(mask[1]);
  mask = detect_relevant_inputs(xs, phi_const, 1);
  CHECK_FALSE(mask[0]);
  CHECK_FALSE(mask[1]);
  mask = detect_relevant_inputs(xs, phi_sum, 1);
  CHECK(mask[0]);
  CHECK(mask[1]);
}

TEST_CASE("closed-loop simulation basics") {
  SystemModel model;
  model.A = Matrix(1, 1, {0.5});
  model.B = Matrix(1, 1, {0.0});
  model.G = Matrix(1, 1, {1.0});
  model.C_q = Matrix::identity(1);
  NonlinearOracle zero = [](const std::vector<double>& q) {
    return std::vector<double>(q.size(), 0.0);
  };
  Policy no_input = [](const std::vector<double>&) { return std::vector<double>{0.0}; };

  Trajectory traj = simulate_closed_loop(model, zero, no_input, {1.0}, 20);
  REQUIRE(traj.states.size() == 21);
  REQUIRE(traj.inputs.size() == 20);
  for (std::size_t t = 0; t < traj.states.size(); ++t)
    CHECK(traj.states[t][0] == doctest::Approx(std::pow(0.5, double(t))));

  // Unstable open loop hits the divergence threshold within 31 steps.
  model.A = Matrix(1, 1, {2.0});
  traj = simulate_closed_loop(model, zero, no_input, {1.0}, 100);
  CHECK(traj.diverged);
  CHECK(traj.states.size() <= 32);
}

TEST_CASE("discounted cost accumulation") {
  SystemModel model;
  model.A = Matrix(1, 1, {0.5});
  model.B = Matrix(1, 1, {0.0});
  model.G = Matrix(1, 1, {1.0});
  model.C_q = Matrix::identity(1);
  NonlinearOracle zero = [](const std::vector<double>& q) {
    return std::vector<double>(q.size(), 0.0);
  };
  Policy no_input = [](const std::vector<double>&) { return std::vector<double>{0.0}; };
  CostFunction quad = [](const std::vector<double>& x, const std::vector<double>&) {
    return x[0] * x[0];
  };

  Trajectory traj = simulate_closed_loop(model, zero, no_input, {1.0}, 200);
  CHECK(accumulate_cost(traj, quad, 1.0) == doctest::Approx(4.0 / 3.0));
  CHECK(accumulate_cost(traj, quad, 0.0) == doctest::Approx(1.0));

  Trajectory at_origin = simulate_closed_loop(model, zero, no_input, {0.0}, 50);
  CHECK(accumulate_cost(at_origin, quad, 0.9) == doctest::Approx(0.0));
}

TEST_CASE("dataset csv round trip") {
  auto setup = experiments::pendulum_setup();
  Dataset data = experiments::collect_pendulum_dataset(setup, 123);
  std::string path =
      (std::filesystem::temp_directory_path() / "safeinit_dataset_rt.csv").string();
  write_dataset_csv(path, data, 2, 1);
  Dataset back = read_dataset_csv(path, 2, 1);
  REQUIRE(back.transitions.size() == data.transitions.size());
  for (std::size_t j = 0; j < data.transitions.size(); ++j) {
    for (int i = 0; i < 2; ++i) {
      CHECK(back.transitions[j].x[i] ==
            doctest::Approx(data.transitions[j].x[i]).epsilon(1e-12));
      CHECK(back.transitions[j].x_plus[i] ==
            doctest::Approx(data.transitions[j].x_plus[i]).epsilon(1e-12));
    }
    CHECK(back.transitions[j].u[0] ==
          doctest::Approx(data.transitions[j].u[0]).epsilon(1e-12));
  }
  std::filesystem::remove(path);
}
