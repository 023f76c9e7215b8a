#include <cmath>

#include "doctest.h"
#include "safeinit/adp.hpp"
#include "safeinit/errors.hpp"
#include "safeinit/experiments.hpp"
#include "safeinit/rng.hpp"

using namespace safeinit;
using namespace safeinit::adp;
using linalg::Matrix;
using linalg::SymMatrix;

namespace {

sysmodel::SystemModel scalar_model(double a, double b) {
  sysmodel::SystemModel m;
  m.A = Matrix(1, 1, {a});
  m.B = Matrix(1, 1, {b});
  m.G = Matrix(1, 1, {1.0});
  m.C_q = Matrix::identity(1);
  return m;
}

sysmodel::NonlinearOracle zero_oracle() {
  return [](const std::vector<double>& q) {
    return std::vector<double>(q.size(), 0.0);
  };
}

}  // namespace

TEST_CASE("basis gradients match finite differences") {
  Rng rng(1);
  for (const BasisSet& basis : {pendulum_basis(), quadratic_basis(3)}) {
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> x(basis.n_x());
      for (double& v : x) v = rng.uniform(-1.5, 1.5);
      Matrix g = basis.gradient(x);
      for (std::size_t i = 0; i < basis.dim(); ++i) {
        for (std::size_t j = 0; j < basis.n_x(); ++j) {
          double h = 1e-6 * (1.0 + std::abs(x[j]));
          std::vector<double> xp(x), xm(x);
          xp[j] += h;
          xm[j] -= h;
          double fd = (basis.evaluate(xp)[i] - basis.evaluate(xm)[i]) / (2.0 * h);
          double scale = std::max(1.0, std::abs(fd));
          REQUIRE(std::abs(g(i, j) - fd) <= 1e-6 * scale);
        }
      }
    }
  }
}

TEST_CASE("weight initialization reproduces the quadratic form") {
  BasisSet small(2, {{0.5, {2, 0}}, {0.5, {0, 2}}, {1.0, {1, 1}}});
  std::vector<double> w = init_weights_from_P(small, SymMatrix::identity(2));
  CHECK(w[0] == doctest::Approx(2.0));
  CHECK(w[1] == doctest::Approx(2.0));
  CHECK(w[2] == doctest::Approx(0.0));

  SymMatrix p = SymMatrix::from(Matrix(2, 2, {1.3, -0.4, -0.4, 0.8}));
  std::vector<double> wp = init_weights_from_P(pendulum_basis(), p);
  CHECK(wp[0] == doctest::Approx(2.0 * p(0, 0)));
  CHECK(wp[1] == doctest::Approx(2.0 * p(1, 1)));
  CHECK(wp[2] == doctest::Approx(p(0, 1) + p(1, 0)));
  for (std::size_t i = 3; i < wp.size(); ++i) CHECK(wp[i] == doctest::Approx(0.0));

  // omega0^T psi(x) == x^T P x at random points.
  Rng rng(2);
  BasisSet quad = quadratic_basis(4);
  SymMatrix p4(4);
  for (int i = 0; i < 4; ++i)
    for (int j = i; j < 4; ++j) p4.set(i, j, rng.normal());
  std::vector<double> w4 = init_weights_from_P(quad, p4);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(4);
    for (double& v : x) v = rng.uniform(-2.0, 2.0);
    std::vector<double> psi = quad.evaluate(x);
    double val = linalg::dot(w4, psi);
    double quad_form = 0.0;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) quad_form += x[i] * p4(i, j) * x[j];
    REQUIRE(val == doctest::Approx(quad_form).epsilon(1e-10));
  }

  // A missing cross term that would carry weight is a hard error.
  BasisSet deficient(2, {{0.5, {2, 0}}, {0.5, {0, 2}}});
  SymMatrix coupled = SymMatrix::from(Matrix(2, 2, {1.0, 0.5, 0.5, 1.0}));
  CHECK_THROWS_AS(init_weights_from_P(deficient, coupled), LearningError);
}

TEST_CASE("temporal-difference evaluation step") {
  BasisSet basis(1, {{0.5, {2}}});
  ValueApproximator approx{&basis, {0.0}};
  double residual = policy_evaluation_step(approx, {1.0}, {0.0}, 1.0, 1.0, 0.5);
  CHECK(residual == doctest::Approx(1.0));
  CHECK(approx.omega[0] == doctest::Approx(0.25));

  // Zero residual and zero learning rate leave the weights alone.
  ValueApproximator fixed{&basis, {2.0}};
  residual = policy_evaluation_step(fixed, {1.0}, {0.0}, 1.0, 1.0, 0.5);
  CHECK(residual == doctest::Approx(0.0));
  CHECK(fixed.omega[0] == doctest::Approx(2.0));

  ValueApproximator frozen{&basis, {3.0}};
  policy_evaluation_step(frozen, {1.0}, {0.5}, 1.0, 1.0, 0.0);
  CHECK(frozen.omega[0] == doctest::Approx(3.0));
}

TEST_CASE("saturated stage cost closed form") {
  SymMatrix r = SymMatrix::from(0.5 * Matrix::identity(1));
  CHECK(constrained_cost({0.0}, 1.0, r, 0.3) == doctest::Approx(0.3));
  CHECK(constrained_cost({0.4}, 1.0, r, 0.0) ==
        doctest::Approx(constrained_cost({-0.4}, 1.0, r, 0.0)));
  CHECK_THROWS_AS(constrained_cost({1.0}, 1.0, r, 0.0), LearningError);

  // Quadrature of the defining integral: d/du penalty = 2 ubar R atanh(u/ubar).
  Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    double ubar = rng.uniform(0.2, 3.0);
    double u = rng.uniform(-0.999, 0.999) * ubar;
    double rv = rng.uniform(0.1, 4.0);
    SymMatrix rs = SymMatrix::from(rv * Matrix::identity(1));
    double closed = constrained_cost({u}, ubar, rs, 0.0);

    double quad = 0.0;
    const int steps = 40000;  // Simpson; atanh steepens near the bound
    auto integrand = [&](double v) { return 2.0 * ubar * rv * std::atanh(v / ubar); };
    double hstep = u / steps;
    for (int i = 0; i < steps; i += 2)
      quad += hstep / 3.0 *
              (integrand(i * hstep) + 4.0 * integrand((i + 1) * hstep) +
               integrand((i + 2) * hstep));
    REQUIRE(std::abs(closed - quad) <= 1e-8);
  }

  // Boundary limit 2 ln2 R ubar^2; ubar = 1, R = 0.5 -> ln 2.
  double prev = 0.0;
  for (int k = 4; k <= 9; ++k) {
    prev = constrained_cost({1.0 - std::pow(10.0, -k)}, 1.0, r, 0.0);
  }
  CHECK(prev == doctest::Approx(0.693147).epsilon(1e-4));
}

TEST_CASE("policy improvement fixed points") {
  sysmodel::SystemModel model = scalar_model(0.0, 1.0);
  BasisSet basis(1, {{0.5, {2}}});

  // Zero value gradient: the minimizer is no input at all.
  ValueApproximator flat{&basis, {0.0}};
  ImprovementResult res = policy_improvement_unconstrained(
      flat, model, {1.0}, SymMatrix::identity(1), 1.0);
  CHECK(res.converged);
  CHECK(res.u[0] == doctest::Approx(0.0));

  // A = 0 makes x+ = u, so u = -u w has the unique fixed point u = 0.
  ValueApproximator vw{&basis, {0.6}};
  res = policy_improvement_unconstrained(vw, model, {2.0}, SymMatrix::identity(1), 1.0);
  CHECK(res.converged);
  CHECK(res.u[0] == doctest::Approx(0.0).epsilon(1e-8));

  // Constrained improvement saturates toward -ubar for huge gradients but
  // stays strictly inside the bound.
  ValueApproximator steep{&basis, {1e6}};
  sysmodel::SystemModel drift = scalar_model(1.0, 0.001);
  res = policy_improvement_constrained(steep, drift, {5.0}, SymMatrix::identity(1), 1.0,
                                       2.0);
  CHECK(std::abs(res.u[0]) < 2.0);
  CHECK(res.u[0] < -1.9);

  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    ValueApproximator v{&basis, {rng.uniform(-50.0, 50.0)}};
    double ubar = rng.uniform(0.5, 2.0);
    ImprovementResult c = policy_improvement_constrained(
        v, scalar_model(rng.uniform(-1.0, 1.0), 1.0), {rng.uniform(-3.0, 3.0)},
        SymMatrix::identity(1), 0.95, ubar);
    REQUIRE(std::abs(c.u[0]) / ubar <= 1.0 - 1e-12);
  }
}

TEST_CASE("constrained improvement matches a grid-search argmin") {
  sysmodel::SystemModel model = scalar_model(0.8, 1.0);
  BasisSet basis(1, {{0.5, {2}}});
  ValueApproximator v{&basis, {2.5}};
  double gamma = 0.95, ubar = 1.0;
  SymMatrix r = SymMatrix::identity(1);
  double x = 1.2;
  ImprovementResult res =
      policy_improvement_constrained(v, model, {x}, r, gamma, ubar);
  REQUIRE(res.converged);

  double best_u = 0.0, best_val = 1e300;
  for (double u = -0.9999; u <= 0.9999; u += 1e-4) {
    double xp = 0.8 * x + u;
    double val = constrained_cost({u}, ubar, r, 0.0) + gamma * v.value({xp});
    if (val < best_val) {
      best_val = val;
      best_u = u;
    }
  }
  CHECK(res.u[0] == doctest::Approx(best_u).epsilon(1e-3));
}

TEST_CASE("policy iteration termination contract") {
  sysmodel::SystemModel model = scalar_model(0.9, 1.0);
  synthesis::ControllerCertificate cert;
  cert.K0 = Matrix(1, 1, {-0.5});
  cert.P = SymMatrix::identity(1);
  cert.nu = 1.0;
  cert.alpha = 0.95;

  BasisSet basis(1, {{0.5, {2}}});
  StageCost cost;
  cost.Q = SymMatrix::identity(1);
  cost.R = SymMatrix::identity(1);

  LearnConfig cfg;
  cfg.gamma = 1.0;
  cfg.eta = 1e-2;
  cfg.eps_ac = 1e12;  // absurdly loose: must stop at the first comparison
  cfg.max_iterations = 50;
  cfg.sweep_steps = 50;
  cfg.eval_passes = 20;
  cfg.seed = 5;
  LearnResult lr = run_policy_iteration(model, zero_oracle(), cert, basis, cost, cfg);
  CHECK(lr.converged);
  CHECK(lr.iterations <= 2);
}

TEST_CASE("safe abort on diverging rollouts") {
  sysmodel::SystemModel model = scalar_model(2.0, 1.0);
  synthesis::ControllerCertificate cert;
  cert.K0 = Matrix(1, 1, {0.0});  // leaves the unstable plant open loop
  cert.P = SymMatrix::identity(1);
  cert.nu = 1.0;
  cert.alpha = 0.95;
  BasisSet basis(1, {{0.5, {2}}});
  StageCost cost;
  cost.Q = SymMatrix::identity(1);
  cost.R = SymMatrix::identity(1);
  LearnConfig cfg;
  cfg.sweep_steps = 100;
  cfg.seed = 6;
  CHECK_THROWS_AS(run_policy_iteration(model, zero_oracle(), cert, basis, cost, cfg),
                  LearningError);
}

TEST_CASE("value iteration with zero discount fits the stage cost") {
  sysmodel::SystemModel model = scalar_model(0.5, 1.0);
  synthesis::ControllerCertificate cert;
  cert.K0 = Matrix(1, 1, {-0.25});
  cert.P = SymMatrix::identity(1);
  cert.nu = 1.0;
  cert.alpha = 0.95;
  BasisSet basis(1, {{0.5, {2}}});
  StageCost cost;
  cost.Q = SymMatrix::identity(1);
  cost.R = SymMatrix::identity(1);
  LearnConfig cfg;
  cfg.gamma = 1e-9;  // effectively gamma = 0: J fits U(x, u*(x))
  cfg.eta = 1e-2;
  cfg.eps_ac = 1e-9;
  cfg.max_iterations = 20;
  cfg.sweep_steps = 100;
  cfg.seed = 7;
  LearnResult lr = run_value_iteration(model, zero_oracle(), cert, basis, cost, cfg);
  // With gamma ~ 0 the greedy input is ~0 and J(x) ~= x^2, i.e. omega ~= 2.
  CHECK(lr.omega[0] == doctest::Approx(2.0).epsilon(1e-3));
}

TEST_CASE("admissibility verdicts") {
  sysmodel::SystemModel model = scalar_model(2.0, 1.0);
  sysmodel::CostFunction quad = [](const std::vector<double>& x,
                                   const std::vector<double>& u) {
    return x[0] * x[0] + u[0] * u[0];
  };

  sysmodel::Policy nothing = [](const std::vector<double>&) {
    return std::vector<double>{0.0};
  };
  auto bad = admissibility_check(model, zero_oracle(), nothing, quad, 0.95,
                                 {{1.0}}, 400);
  REQUIRE(bad.size() == 1);
  CHECK_FALSE(bad[0].admissible);

  sysmodel::Policy deadbeat = [](const std::vector<double>& x) {
    return std::vector<double>{-2.0 * x[0]};
  };
  auto good = admissibility_check(model, zero_oracle(), deadbeat, quad, 0.95,
                                  {{1.0}, {-3.0}}, 400);
  for (const auto& verdict : good) CHECK(verdict.admissible);
}
