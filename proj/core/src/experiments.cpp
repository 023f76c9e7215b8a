#include "safeinit/experiments.hpp"

#include <cmath>

#include "safeinit/errors.hpp"
#include "safeinit/rng.hpp"

namespace safeinit::experiments {

namespace {

constexpr double kMass = 0.333;
constexpr double kLength = 0.667;
constexpr double kGravity = 9.81;
constexpr double kFriction = 0.2;
constexpr double kInertia = 0.1975;
constexpr double kTau = 0.01;

// Random orthogonal factor: eigenvector matrix of a random symmetric matrix.
Matrix random_orthogonal(Rng& rng, std::size_t n) {
  Matrix s(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      double v = rng.normal();
      s(i, j) = v;
      s(j, i) = v;
    }
  return linalg::sym_eig(linalg::SymMatrix::from(s)).eigenvectors;
}

}  // namespace

PendulumSetup pendulum_setup() {
  PendulumSetup setup;
  setup.tau = kTau;
  setup.L_star = kMass * kGravity * kLength / kInertia;
  setup.model.A = Matrix(2, 2);
  setup.model.A(0, 0) = 1.0;
  setup.model.A(0, 1) = kTau;
  setup.model.A(1, 1) = 1.0 - kTau * kFriction;
  setup.model.B = Matrix(2, 1);
  setup.model.B(1, 0) = kTau;
  setup.model.G = Matrix(2, 1);
  setup.model.G(1, 0) = -kTau;
  setup.model.C_q = Matrix(1, 2);
  setup.model.C_q(0, 0) = 1.0;
  const double scale = setup.L_star;
  setup.oracle = [scale](const std::vector<double>& q) {
    return std::vector<double>{scale * std::sin(q[0])};
  };
  return setup;
}

sysmodel::Dataset collect_pendulum_dataset(const PendulumSetup& setup,
                                           std::uint64_t seed) {
  Rng rng = Rng::stream(seed, 0);
  sysmodel::Dataset data;
  sysmodel::Policy zero_input = [](const std::vector<double>&) {
    return std::vector<double>{0.0};
  };
  const double pi = std::acos(-1.0);
  for (std::size_t traj = 0; traj < 10; ++traj) {
    // Stratify the angle so the ten trajectories cover [-pi, pi] instead of
    // clustering; the velocity stays fully random.
    double lo = -pi + 2.0 * pi * static_cast<double>(traj) / 10.0;
    std::vector<double> x0{rng.uniform(lo, lo + 2.0 * pi / 10.0), rng.uniform(-2.0, 2.0)};
    sysmodel::Trajectory t =
        sysmodel::simulate_closed_loop(setup.model, setup.oracle, zero_input, x0, 41);
    // One-step transitions spaced 0.1 s apart: 5 per trajectory.
    for (std::size_t k = 0; k < 5; ++k) {
      std::size_t at = 10 * k;
      data.transitions.push_back({t.states[at], t.inputs[at], t.states[at + 1]});
    }
  }
  return data;
}

lipschitz::EstimationConfig pendulum_estimation_config(std::uint64_t seed) {
  lipschitz::EstimationConfig config;
  config.beta = 0.01;
  config.kernel = lipschitz::Kernel::Epanechnikov;
  config.bandwidth = 0.05;
  config.seed = seed;
  return config;
}

adp::StageCost pendulum_cost_unconstrained() {
  adp::StageCost cost;
  cost.kind = adp::StageCost::Kind::L1Quadratic;
  cost.Q = linalg::SymMatrix::identity(2);
  cost.R = linalg::SymMatrix::from(0.5 * linalg::Matrix::identity(1));
  return cost;
}

adp::StageCost pendulum_cost_constrained(double ubar) {
  adp::StageCost cost;
  cost.kind = adp::StageCost::Kind::Constrained;
  cost.Q = linalg::SymMatrix::identity(2);
  cost.R = linalg::SymMatrix::from(0.5 * linalg::Matrix::identity(1));
  cost.ubar = ubar;
  return cost;
}

Linear20Setup linear20_setup(std::uint64_t seed) {
  const std::size_t n = 20, m = 10;
  Rng rng = Rng::stream(seed, 0);
  Linear20Setup setup;

  Matrix a_core = 0.3 * random_orthogonal(rng, n);
  Matrix b(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) b(i, j) = rng.normal();
  Matrix delta = 0.34 * random_orthogonal(rng, n);
  setup.L_star = 0.34;

  // Push A into instability through the input channel so the known pair
  // (A0, B) can still undo it.
  Matrix f(m, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) f(i, j) = 0.02 * rng.normal();
  Matrix a0 = a_core + b * f;
  for (int tries = 0; tries < 40; ++tries) {
    if (linalg::spectral_radius(a0 + delta) > 1.02) break;
    f = 1.3 * f;
    a0 = a_core + b * f;
  }

  setup.model.A = a0;
  setup.model.B = b;
  setup.model.G = linalg::Matrix::identity(n);
  setup.model.C_q = linalg::Matrix::identity(n);
  setup.A_true = a0 + delta;
  setup.oracle = [delta](const std::vector<double>& q) {
    return linalg::matvec(delta, q);
  };
  return setup;
}

sysmodel::Dataset collect_linear20_dataset(const Linear20Setup& setup,
                                           std::uint64_t seed) {
  Rng rng = Rng::stream(seed, 1);
  sysmodel::Dataset data;
  const std::size_t n = setup.model.n_x(), m = setup.model.n_u();
  for (std::size_t k = 0; k < 500; ++k) {
    std::vector<double> x(n), u(m);
    for (double& v : x) v = rng.uniform(-0.1, 0.1);
    for (double& v : u) v = rng.uniform(-0.1, 0.1);
    std::vector<double> xp = linalg::matvec(setup.A_true, x);
    std::vector<double> bu = linalg::matvec(setup.model.B, u);
    for (std::size_t i = 0; i < n; ++i) xp[i] += bu[i];
    data.transitions.push_back({x, u, xp});
  }
  return data;
}

lipschitz::EstimationConfig linear20_estimation_config(std::uint64_t seed) {
  lipschitz::EstimationConfig config;
  config.beta = 0.001;
  config.seed = seed;
  return config;
}

std::vector<std::vector<double>> ellipsoid_boundary_points(const linalg::SymMatrix& P,
                                                           std::size_t count,
                                                           std::uint64_t seed) {
  const std::size_t n = P.dim();
  linalg::EigDecomp eig = linalg::sym_eig(P);
  for (double lam : eig.eigenvalues)
    if (lam <= 0.0) throw NumericalError("ellipsoid_boundary_points: P not PD");
  Matrix inv_sqrt(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    double s = 1.0 / std::sqrt(eig.eigenvalues[k]);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        inv_sqrt(i, j) += s * eig.eigenvectors(i, k) * eig.eigenvectors(j, k);
  }
  Rng rng = Rng::stream(seed, 2);
  std::vector<std::vector<double>> points;
  for (std::size_t k = 0; k < count; ++k) {
    std::vector<double> d(n);
    double norm = 0.0;
    for (double& di : d) {
      di = rng.normal();
      norm += di * di;
    }
    norm = std::sqrt(norm);
    if (norm <= 0.0) {
      d.assign(n, 0.0);
      d[0] = 1.0;
      norm = 1.0;
    }
    for (double& di : d) di /= norm;
    points.push_back(linalg::matvec(inv_sqrt, d));
  }
  return points;
}

}  // namespace safeinit::experiments
