#pragma once

#include <cstdint>

#include "safeinit/adp.hpp"
#include "safeinit/lipschitz.hpp"
#include "safeinit/synthesis.hpp"
#include "safeinit/sysmodel.hpp"

namespace safeinit::experiments {

using linalg::Matrix;

// Inverted pendulum discretized at tau = 0.01 s: theta+ = theta + tau w,
// w+ = (1 - tau f_d/J) w + (tau/J) u - tau phi(theta), with
// phi(theta) = (Mgl/J) sin theta entering through G = [0; -tau].
struct PendulumSetup {
  sysmodel::SystemModel model;
  sysmodel::NonlinearOracle oracle;
  double L_star;  // Mgl/J
  double tau;
};

PendulumSetup pendulum_setup();

// 50 one-step transitions at 0.1 s intervals along 10 open-loop trajectories
// from initial conditions uniform in [-pi,pi] x [-2,2].
sysmodel::Dataset collect_pendulum_dataset(const PendulumSetup& setup,
                                           std::uint64_t seed);

// The estimator settings used throughout the pendulum study.
lipschitz::EstimationConfig pendulum_estimation_config(std::uint64_t seed);

// The 11-term value basis and stage costs of the pendulum study.
adp::StageCost pendulum_cost_unconstrained();          // sum|Qx|_1 + u^T R u
adp::StageCost pendulum_cost_constrained(double ubar); // saturated penalty

// Random 20-state 10-input plant x+ = A x + B u with A = A0 + Delta; A0 and
// B are treated as known, Delta enters as the unknown nonlinearity
// phi(x) = Delta x with G = C_q = I. Delta is a scaled orthogonal matrix so
// every direction realizes the true Lipschitz constant.
struct Linear20Setup {
  sysmodel::SystemModel model;  // A0, B, G = I, C_q = I
  Matrix A_true;
  sysmodel::NonlinearOracle oracle;  // x -> Delta x
  double L_star;                     // ||Delta||_2
};

Linear20Setup linear20_setup(std::uint64_t seed);

// 500 transitions from states and inputs perturbed uniformly in
// [-0.1, 0.1] per coordinate.
sysmodel::Dataset collect_linear20_dataset(const Linear20Setup& setup,
                                           std::uint64_t seed);

lipschitz::EstimationConfig linear20_estimation_config(std::uint64_t seed);

// Boundary points of the certificate ellipsoid {x : x^T P x = 1}.
std::vector<std::vector<double>> ellipsoid_boundary_points(const linalg::SymMatrix& P,
                                                           std::size_t count,
                                                           std::uint64_t seed);

}  // namespace safeinit::experiments
