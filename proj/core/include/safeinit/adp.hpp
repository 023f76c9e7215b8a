#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "safeinit/synthesis.hpp"
#include "safeinit/sysmodel.hpp"

namespace safeinit::adp {

using linalg::Matrix;
using linalg::SymMatrix;

// One polynomial basis term: coeff * prod_i x_i^exponents[i].
struct MonomialTerm {
  double coeff;
  std::vector<unsigned> exponents;
};

class BasisSet {
 public:
  BasisSet(std::size_t n_x, std::vector<MonomialTerm> terms);

  std::size_t dim() const { return terms_.size(); }
  std::size_t n_x() const { return n_x_; }
  const std::vector<MonomialTerm>& terms() const { return terms_; }

  std::vector<double> evaluate(const std::vector<double>& x) const;
  // Row i holds grad psi_i; dim() x n_x.
  Matrix gradient(const std::vector<double>& x) const;

 private:
  std::size_t n_x_;
  std::vector<MonomialTerm> terms_;
};

// The 11-term polynomial basis used for the pendulum study:
// x1^2/2, x2^2/2, x1 x2, x1^2 x2/2, x1 x2^2/2, x1^4/4, x2^4/4,
// x1^3/3, x2^3/3, x1^2 x2^2/2, x1^4 x2^4/4.
BasisSet pendulum_basis();

// All n(n+1)/2 quadratic monomials: xi^2/2 then cross terms xi xj (i<j).
BasisSet quadratic_basis(std::size_t n);

// Weights reproducing x^T P x exactly, matched monomial by monomial;
// everything outside the quadratic terms is zero.
std::vector<double> init_weights_from_P(const BasisSet& basis, const SymMatrix& P);

struct ValueApproximator {
  const BasisSet* basis = nullptr;
  std::vector<double> omega;

  double value(const std::vector<double>& x) const;
};

// Stage cost variants used across the experiments.
struct StageCost {
  enum class Kind { Quadratic, L1Quadratic, Constrained };
  Kind kind = Kind::Quadratic;
  SymMatrix Q, R;
  double ubar = 0.0;  // Constrained only

  double operator()(const std::vector<double>& x, const std::vector<double>& u) const;
};

// Input-penalty closed form 2 ubar u^T R atanh(u/ubar) +
// ubar^2 diag(R)^T ln(1 - u_i^2/ubar^2), plus the state cost q_of_x.
// Requires |u_i| < ubar strictly.
double constrained_cost(const std::vector<double>& u, double ubar, const SymMatrix& R,
                        double q_of_x);

// One stochastic-gradient TD update on omega; returns the absolute residual
// |omega^T phi - U| before the update, phi = psi(x_t) - gamma psi(x_next).
double policy_evaluation_step(ValueApproximator& approx, const std::vector<double>& x_t,
                              const std::vector<double>& x_next, double stage_cost,
                              double gamma, double eta);

struct ImprovementResult {
  std::vector<double> u;
  bool converged = false;
  std::size_t iterations = 0;
};

// u = -(gamma/2) R^-1 B^T grad psi(x+)^T omega with x+ = A x + B u (+ G phi_t
// when the nonlinearity sample at x is available); damped fixed point,
// damping 0.5, tolerance 1e-10, cap 100.
ImprovementResult policy_improvement_unconstrained(
    const ValueApproximator& approx, const sysmodel::SystemModel& model,
    const std::vector<double>& x_t, const SymMatrix& R, double gamma,
    const std::optional<std::vector<double>>& phi_t = {});

// Saturated variant u = -ubar tanh((gamma/(2 ubar)) R^-1 B^T grad psi(x+)^T
// omega); output strictly inside (-ubar, ubar).
ImprovementResult policy_improvement_constrained(
    const ValueApproximator& approx, const sysmodel::SystemModel& model,
    const std::vector<double>& x_t, const SymMatrix& R, double gamma, double ubar,
    const std::optional<std::vector<double>>& phi_t = {});

sysmodel::Policy make_linear_policy(const Matrix& K);

// Greedy policy for the current weights; recomputes the improvement fixed
// point at every queried state. Uses the oracle (when given) to reconstruct
// the nonlinearity sample entering the one-step prediction.
sysmodel::Policy make_greedy_policy(const BasisSet& basis, std::vector<double> omega,
                                    const sysmodel::SystemModel& model,
                                    const SymMatrix& R, double gamma,
                                    sysmodel::NonlinearOracle oracle = nullptr,
                                    std::optional<double> ubar = {});

struct LearnConfig {
  double gamma = 0.95;
  double eta = 1e-4;
  double eps_ac = 1e-6;         // termination on sup-norm value change
  std::size_t max_iterations = 100;
  std::size_t sweep_steps = 200;  // on-policy steps per evaluation sweep
  std::size_t sweeps = 1;         // rollouts per iteration (fresh start each)
  std::size_t eval_passes = 100;  // repeated SGD passes over a sweep
  std::size_t probe_states = 100;
  double probe_radius = 1.0;
  std::uint64_t seed = 0;
  std::optional<double> ubar;     // switches improvement to the saturated form
  double eta_decay_tau = 0.0;     // 0: constant eta; else eta/(1 + k/tau)
  std::vector<double> omega0;     // overrides init_weights_from_P when non-empty
};

struct IterationRecord {
  std::size_t iter;
  double residual;      // mean TD residual over the final evaluation pass
  double value_change;  // sup over probe states of |J_k - J_{k-1}|
  double cost;          // discounted cost of the iteration's rollout
  std::vector<double> omega;
};

struct LearnResult {
  std::vector<IterationRecord> history;
  std::vector<double> omega;
  bool converged = false;
  std::size_t iterations = 0;
};

// Algorithm: policy iteration from the certified gain and matched weights;
// rollouts that trip the divergence flag abort with the iteration index.
LearnResult run_policy_iteration(const sysmodel::SystemModel& model,
                                 const sysmodel::NonlinearOracle& oracle,
                                 const synthesis::ControllerCertificate& cert,
                                 const BasisSet& basis, const StageCost& cost,
                                 const LearnConfig& config);

// On-policy value iteration; weight updates by batch least squares once the
// accumulated regressors reach full rank.
LearnResult run_value_iteration(const sysmodel::SystemModel& model,
                                const sysmodel::NonlinearOracle& oracle,
                                const synthesis::ControllerCertificate& cert,
                                const BasisSet& basis, const StageCost& cost,
                                const LearnConfig& config);

struct AdmissibilityVerdict {
  std::vector<double> x0;
  bool admissible = false;
  double decay_rate = 0.0;  // fitted envelope alpha
  double cost = 0.0;        // discounted cost over the horizon
};

// Simulates each initial state, fits a log-linear decay envelope to ||x_t||
// and checks the discounted cost tail has converged.
std::vector<AdmissibilityVerdict> admissibility_check(
    const sysmodel::SystemModel& model, const sysmodel::NonlinearOracle& oracle,
    const sysmodel::Policy& policy, const sysmodel::CostFunction& cost, double gamma,
    const std::vector<std::vector<double>>& x0s, std::size_t horizon);

// Training log CSV: iter,residual,value_change,cost,omega_1..omega_n0.
void write_training_log(const std::string& path, const LearnResult& result);

}  // namespace safeinit::adp
