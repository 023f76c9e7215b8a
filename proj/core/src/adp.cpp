#include "safeinit/adp.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

#include "safeinit/csv.hpp"
#include "safeinit/errors.hpp"
#include "safeinit/rng.hpp"

namespace safeinit::adp {

BasisSet::BasisSet(std::size_t n_x, std::vector<MonomialTerm> terms)
    : n_x_(n_x), terms_(std::move(terms)) {
  if (terms_.empty()) throw LearningError("basis: no terms");
  for (const MonomialTerm& t : terms_)
    if (t.exponents.size() != n_x_)
      throw LearningError("basis: exponent arity does not match the state dimension");
}

std::vector<double> BasisSet::evaluate(const std::vector<double>& x) const {
  if (x.size() != n_x_) throw LearningError("basis: state dimension mismatch");
  std::vector<double> out;
  out.reserve(terms_.size());
  for (const MonomialTerm& t : terms_) {
    double v = t.coeff;
    for (std::size_t i = 0; i < n_x_; ++i)
      for (unsigned e = 0; e < t.exponents[i]; ++e) v *= x[i];
    out.push_back(v);
  }
  return out;
}

Matrix BasisSet::gradient(const std::vector<double>& x) const {
  if (x.size() != n_x_) throw LearningError("basis: state dimension mismatch");
  Matrix g(terms_.size(), n_x_);
  for (std::size_t k = 0; k < terms_.size(); ++k) {
    const MonomialTerm& t = terms_[k];
    for (std::size_t d = 0; d < n_x_; ++d) {
      if (t.exponents[d] == 0) continue;
      double v = t.coeff * t.exponents[d];
      for (std::size_t i = 0; i < n_x_; ++i) {
        unsigned e = t.exponents[i] - (i == d ? 1 : 0);
        for (unsigned r = 0; r < e; ++r) v *= x[i];
      }
      g(k, d) = v;
    }
  }
  return g;
}

BasisSet pendulum_basis() {
  return BasisSet(2, {
                         {0.5, {2, 0}},
                         {0.5, {0, 2}},
                         {1.0, {1, 1}},
                         {0.5, {2, 1}},
                         {0.5, {1, 2}},
                         {0.25, {4, 0}},
                         {0.25, {0, 4}},
                         {1.0 / 3.0, {3, 0}},
                         {1.0 / 3.0, {0, 3}},
                         {0.5, {2, 2}},
                         {0.25, {4, 4}},
                     });
}

BasisSet quadratic_basis(std::size_t n) {
  std::vector<MonomialTerm> terms;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<unsigned> e(n, 0);
    e[i] = 2;
    terms.push_back({0.5, e});
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      std::vector<unsigned> e(n, 0);
      e[i] = 1;
      e[j] = 1;
      terms.push_back({1.0, e});
    }
  return BasisSet(n, std::move(terms));
}

std::vector<double> init_weights_from_P(const BasisSet& basis, const SymMatrix& P) {
  const std::size_t n = basis.n_x();
  if (P.dim() != n) throw LearningError("init_weights_from_P: P dimension mismatch");
  std::vector<double> omega(basis.dim(), 0.0);

  // Match x^T P x monomial by monomial: x_i^2 carries P_ii, x_i x_j (i<j)
  // carries 2 P_ij.
  auto find_term = [&](const std::vector<unsigned>& want) -> std::size_t {
    for (std::size_t k = 0; k < basis.dim(); ++k)
      if (basis.terms()[k].exponents == want) return k;
    return basis.dim();
  };
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<unsigned> want(n, 0);
    want[i] = 2;
    std::size_t k = find_term(want);
    if (k == basis.dim())
      throw LearningError("init_weights_from_P: basis lacks the x_" +
                          std::to_string(i + 1) + "^2 term");
    omega[k] = P(i, i) / basis.terms()[k].coeff;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double target = 2.0 * P(i, j);
      std::vector<unsigned> want(n, 0);
      want[i] = 1;
      want[j] = 1;
      std::size_t k = find_term(want);
      if (k == basis.dim()) {
        if (target != 0.0)
          throw LearningError("init_weights_from_P: basis lacks the x_" +
                              std::to_string(i + 1) + " x_" + std::to_string(j + 1) +
                              " term");
        continue;
      }
      omega[k] = target / basis.terms()[k].coeff;
    }
  return omega;
}

double ValueApproximator::value(const std::vector<double>& x) const {
  return linalg::dot(omega, basis->evaluate(x));
}

double StageCost::operator()(const std::vector<double>& x,
                             const std::vector<double>& u) const {
  std::vector<double> qx = linalg::matvec(Q.as_matrix(), x);
  std::vector<double> ru = linalg::matvec(R.as_matrix(), u);
  switch (kind) {
    case Kind::Quadratic:
      return linalg::dot(x, qx) + linalg::dot(u, ru);
    case Kind::L1Quadratic: {
      double l1 = 0.0;
      for (double v : qx) l1 += std::abs(v);
      return l1 + linalg::dot(u, ru);
    }
    case Kind::Constrained:
      return constrained_cost(u, ubar, R, linalg::dot(x, qx));
  }
  throw LearningError("stage cost: unknown variant");
}

double constrained_cost(const std::vector<double>& u, double ubar, const SymMatrix& R,
                        double q_of_x) {
  if (!(ubar > 0.0)) throw LearningError("constrained_cost: ubar must be positive");
  for (double ui : u)
    if (std::abs(ui) >= ubar)
      throw LearningError("constrained_cost: |u| must stay strictly below ubar");
  std::vector<double> at(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) at[i] = std::atanh(u[i] / ubar);
  std::vector<double> r_at = linalg::matvec(R.as_matrix(), at);
  double penalty = 2.0 * ubar * linalg::dot(u, r_at);
  for (std::size_t i = 0; i < u.size(); ++i)
    penalty += ubar * ubar * R(i, i) * std::log(1.0 - u[i] * u[i] / (ubar * ubar));
  return q_of_x + penalty;
}

double policy_evaluation_step(ValueApproximator& approx, const std::vector<double>& x_t,
                              const std::vector<double>& x_next, double stage_cost,
                              double gamma, double eta) {
  std::vector<double> phi = approx.basis->evaluate(x_t);
  std::vector<double> next = approx.basis->evaluate(x_next);
  for (std::size_t i = 0; i < phi.size(); ++i) phi[i] -= gamma * next[i];
  double residual = linalg::dot(approx.omega, phi) - stage_cost;
  for (std::size_t i = 0; i < phi.size(); ++i) approx.omega[i] -= eta * phi[i] * residual;
  return std::abs(residual);
}

namespace {

// Shared improvement solve for both rules: damped fixed point first (the
// documented contract), then a Newton polish with a finite-difference
// Jacobian when the plain iteration is non-contractive (large B^T W B makes
// the map expansive no matter the damping).
ImprovementResult improvement_fixed_point(const ValueApproximator& approx,
                                          const sysmodel::SystemModel& model,
                                          const std::vector<double>& x_t,
                                          const SymMatrix& R, double gamma,
                                          const std::optional<std::vector<double>>& phi_t,
                                          std::optional<double> ubar) {
  const std::size_t n_u = model.n_u();
  std::vector<double> base = linalg::matvec(model.A, x_t);
  if (phi_t) {
    std::vector<double> gp = linalg::matvec(model.G, *phi_t);
    for (std::size_t i = 0; i < base.size(); ++i) base[i] += gp[i];
  }

  // Right-hand side of the implicit improvement relation at input u.
  auto formula = [&](const std::vector<double>& u) {
    std::vector<double> xp = base;
    std::vector<double> bu = linalg::matvec(model.B, u);
    for (std::size_t i = 0; i < xp.size(); ++i) xp[i] += bu[i];

    Matrix grad = approx.basis->gradient(xp);  // n0 x n_x
    std::vector<double> g(model.n_x(), 0.0);
    for (std::size_t k = 0; k < approx.omega.size(); ++k)
      for (std::size_t d = 0; d < model.n_x(); ++d)
        g[d] += approx.omega[k] * grad(k, d);
    std::vector<double> v = linalg::matvec(linalg::transpose(model.B), g);
    for (double vi : v)
      if (!std::isfinite(vi))
        throw LearningError(
            "policy improvement diverged; improvement objective may be unbounded");
    Matrix rinv_v = linalg::solve(R.as_matrix(), Matrix::column(v));

    std::vector<double> u_new(n_u);
    if (ubar) {
      const double scale = gamma / (2.0 * *ubar);
      for (std::size_t i = 0; i < n_u; ++i) {
        double t = std::tanh(scale * rinv_v(i, 0));
        // Margin leaves rounding headroom so |u|/ubar stays <= 1 - 1e-12.
        t = std::clamp(t, -(1.0 - 4e-12), 1.0 - 4e-12);
        u_new[i] = -*ubar * t;
      }
    } else {
      for (std::size_t i = 0; i < n_u; ++i) u_new[i] = -0.5 * gamma * rinv_v(i, 0);
    }
    return u_new;
  };

  ImprovementResult result;
  result.u.assign(n_u, 0.0);
  for (std::size_t it = 0; it < 100; ++it) {
    std::vector<double> u_new = formula(result.u);
    double diff = 0.0, mag = 0.0;
    for (std::size_t i = 0; i < n_u; ++i) {
      diff = std::max(diff, std::abs(u_new[i] - result.u[i]));
      mag = std::max(mag, std::abs(u_new[i]));
    }
    result.iterations = it + 1;
    if (!std::isfinite(diff) || mag > 1e8) break;  // expansive map; go to Newton
    for (std::size_t i = 0; i < n_u; ++i)
      result.u[i] = 0.5 * result.u[i] + 0.5 * u_new[i];
    if (diff <= 1e-10) {
      result.u = u_new;
      result.converged = true;
      break;
    }
  }

  if (!result.converged) {
    std::vector<double> u(n_u, 0.0);
    for (std::size_t newton = 0; newton < 50 && !result.converged; ++newton) {
      std::vector<double> fu = formula(u);
      double res_norm = 0.0;
      for (std::size_t i = 0; i < n_u; ++i)
        res_norm = std::max(res_norm, std::abs(fu[i] - u[i]));
      if (res_norm <= 1e-10) {
        u = fu;
        result.converged = true;
        break;
      }
      // J = d(formula)/du by forward differences; solve (I - J) du = fu - u.
      Matrix ij(n_u, n_u);
      Matrix rhs(n_u, 1);
      for (std::size_t j = 0; j < n_u; ++j) {
        double h = 1e-7 * (1.0 + std::abs(u[j]));
        std::vector<double> up = u;
        up[j] += h;
        std::vector<double> fp = formula(up);
        for (std::size_t i = 0; i < n_u; ++i)
          ij(i, j) = (i == j ? 1.0 : 0.0) - (fp[i] - fu[i]) / h;
      }
      for (std::size_t i = 0; i < n_u; ++i) rhs(i, 0) = fu[i] - u[i];
      Matrix du(n_u, 1);
      try {
        du = linalg::solve(ij, rhs);
      } catch (const NumericalError&) {
        break;  // singular Jacobian; report non-convergence
      }
      for (std::size_t i = 0; i < n_u; ++i) u[i] += du(i, 0);
      for (double ui : u)
        if (!std::isfinite(ui) || std::abs(ui) > 1e12)
          throw LearningError(
              "policy improvement diverged; improvement objective may be unbounded");
      ++result.iterations;
    }
    if (result.converged) result.u = u;
  }

  for (double ui : result.u)
    if (!std::isfinite(ui))
      throw LearningError("policy improvement produced a non-finite input");
  return result;
}

std::vector<double> ball_sample(Rng& rng, std::size_t n, double radius) {
  std::vector<double> x(n);
  double norm = 0.0;
  for (double& xi : x) {
    xi = rng.normal();
    norm += xi * xi;
  }
  norm = std::sqrt(norm);
  if (norm <= 0.0) return std::vector<double>(n, 0.0);
  double r = radius * std::pow(rng.uniform01(), 1.0 / static_cast<double>(n));
  for (double& xi : x) xi *= r / norm;
  return x;
}

// Sweep starts sit on the sphere so every rollout carries full-scale
// excitation; interior starts can make all TD features vanish.
std::vector<double> sphere_sample(Rng& rng, std::size_t n, double radius) {
  std::vector<double> x(n);
  double norm = 0.0;
  for (double& xi : x) {
    xi = rng.normal();
    norm += xi * xi;
  }
  norm = std::sqrt(norm);
  if (norm <= 0.0) {
    x.assign(n, 0.0);
    x[0] = radius;
    return x;
  }
  for (double& xi : x) xi *= radius / norm;
  return x;
}

}  // namespace

ImprovementResult policy_improvement_unconstrained(
    const ValueApproximator& approx, const sysmodel::SystemModel& model,
    const std::vector<double>& x_t, const SymMatrix& R, double gamma,
    const std::optional<std::vector<double>>& phi_t) {
  return improvement_fixed_point(approx, model, x_t, R, gamma, phi_t, std::nullopt);
}

ImprovementResult policy_improvement_constrained(
    const ValueApproximator& approx, const sysmodel::SystemModel& model,
    const std::vector<double>& x_t, const SymMatrix& R, double gamma, double ubar,
    const std::optional<std::vector<double>>& phi_t) {
  if (!(ubar > 0.0)) throw LearningError("policy_improvement_constrained: bad ubar");
  return improvement_fixed_point(approx, model, x_t, R, gamma, phi_t, ubar);
}

sysmodel::Policy make_linear_policy(const Matrix& K) {
  return [K](const std::vector<double>& x) { return linalg::matvec(K, x); };
}

sysmodel::Policy make_greedy_policy(const BasisSet& basis, std::vector<double> omega,
                                    const sysmodel::SystemModel& model,
                                    const SymMatrix& R, double gamma,
                                    sysmodel::NonlinearOracle oracle,
                                    std::optional<double> ubar) {
  auto shared_basis = std::make_shared<BasisSet>(basis);
  return [shared_basis, omega = std::move(omega), model, R, gamma,
          oracle = std::move(oracle), ubar](const std::vector<double>& x) {
    ValueApproximator approx{shared_basis.get(), omega};
    std::optional<std::vector<double>> phi_t;
    if (oracle) phi_t = oracle(linalg::matvec(model.C_q, x));
    return improvement_fixed_point(approx, model, x, R, gamma, phi_t, ubar).u;
  };
}

namespace {

struct Sweep {
  std::vector<std::vector<double>> x, u, x_next;
  std::vector<double> stage;
  double discounted_cost = 0.0;  // mean over the iteration's rollouts
};

Sweep collect_sweep(const sysmodel::SystemModel& model,
                    const sysmodel::NonlinearOracle& oracle, const sysmodel::Policy& policy,
                    const std::vector<double>& x0, std::size_t steps,
                    const StageCost& cost, double gamma, std::size_t iter_index) {
  sysmodel::Trajectory traj = sysmodel::simulate_closed_loop(model, oracle, policy, x0, steps);
  if (traj.diverged)
    throw LearningError("safe-abort: rollout diverged at learning iteration " +
                        std::to_string(iter_index));
  Sweep sweep;
  double g = 1.0;
  for (std::size_t t = 0; t < traj.inputs.size(); ++t) {
    sweep.x.push_back(traj.states[t]);
    sweep.u.push_back(traj.inputs[t]);
    sweep.x_next.push_back(traj.states[t + 1]);
    double c = cost(traj.states[t], traj.inputs[t]);
    sweep.stage.push_back(c);
    sweep.discounted_cost += g * c;
    g *= gamma;
  }
  return sweep;
}

Sweep collect_iteration_data(const sysmodel::SystemModel& model,
                             const sysmodel::NonlinearOracle& oracle,
                             const sysmodel::Policy& policy, const StageCost& cost,
                             const LearnConfig& config, std::size_t iter_index) {
  Rng rng = Rng::stream(config.seed, 100 + iter_index);
  Sweep merged;
  const std::size_t n_sweeps = std::max<std::size_t>(1, config.sweeps);
  for (std::size_t s = 0; s < n_sweeps; ++s) {
    std::vector<double> x0 = sphere_sample(rng, model.n_x(), config.probe_radius);
    Sweep one = collect_sweep(model, oracle, policy, x0, config.sweep_steps, cost,
                              config.gamma, iter_index);
    merged.x.insert(merged.x.end(), one.x.begin(), one.x.end());
    merged.u.insert(merged.u.end(), one.u.begin(), one.u.end());
    merged.x_next.insert(merged.x_next.end(), one.x_next.begin(), one.x_next.end());
    merged.stage.insert(merged.stage.end(), one.stage.begin(), one.stage.end());
    merged.discounted_cost += one.discounted_cost;
  }
  merged.discounted_cost /= static_cast<double>(n_sweeps);
  return merged;
}

std::vector<std::vector<double>> make_probes(const LearnConfig& config, std::size_t n_x) {
  Rng rng = Rng::stream(config.seed, 0);
  std::vector<std::vector<double>> probes;
  for (std::size_t i = 0; i < config.probe_states; ++i)
    probes.push_back(ball_sample(rng, n_x, config.probe_radius));
  return probes;
}

double eta_at(const LearnConfig& config, std::size_t k) {
  if (config.eta_decay_tau <= 0.0) return config.eta;
  return config.eta / (1.0 + static_cast<double>(k) / config.eta_decay_tau);
}

}  // namespace

LearnResult run_policy_iteration(const sysmodel::SystemModel& model,
                                 const sysmodel::NonlinearOracle& oracle,
                                 const synthesis::ControllerCertificate& cert,
                                 const BasisSet& basis, const StageCost& cost,
                                 const LearnConfig& config) {
  LearnResult result;
  result.omega = config.omega0.empty() ? init_weights_from_P(basis, cert.P)
                                       : config.omega0;
  if (result.omega.size() != basis.dim())
    throw LearningError("weight override does not match the basis dimension");
  std::vector<std::vector<double>> probes = make_probes(config, model.n_x());
  ValueApproximator approx{&basis, result.omega};
  std::vector<double> j_prev;
  for (const auto& p : probes) j_prev.push_back(approx.value(p));

  for (std::size_t k = 0; k < config.max_iterations; ++k) {
    sysmodel::Policy policy =
        k == 0 ? make_linear_policy(cert.K0)
               : make_greedy_policy(basis, approx.omega, model, cost.R, config.gamma,
                                    oracle, config.ubar);
    Sweep sweep = collect_iteration_data(model, oracle, policy, cost, config, k);

    double eta = eta_at(config, k);
    double residual = 0.0;
    for (std::size_t pass = 0; pass < config.eval_passes; ++pass) {
      residual = 0.0;
      for (std::size_t t = 0; t < sweep.x.size(); ++t)
        residual += policy_evaluation_step(approx, sweep.x[t], sweep.x_next[t],
                                           sweep.stage[t], config.gamma, eta);
      residual /= static_cast<double>(sweep.x.size());
    }

    double change = 0.0;
    for (std::size_t p = 0; p < probes.size(); ++p) {
      double j = approx.value(probes[p]);
      change = std::max(change, std::abs(j - j_prev[p]));
      j_prev[p] = j;
    }
    result.history.push_back({k, residual, change, sweep.discounted_cost, approx.omega});
    result.iterations = k + 1;
    if (k >= 1 && change < config.eps_ac) {
      result.converged = true;
      break;
    }
  }
  result.omega = approx.omega;
  return result;
}

LearnResult run_value_iteration(const sysmodel::SystemModel& model,
                                const sysmodel::NonlinearOracle& oracle,
                                const synthesis::ControllerCertificate& cert,
                                const BasisSet& basis, const StageCost& cost,
                                const LearnConfig& config) {
  LearnResult result;
  result.omega = config.omega0.empty() ? init_weights_from_P(basis, cert.P)
                                       : config.omega0;
  if (result.omega.size() != basis.dim())
    throw LearningError("weight override does not match the basis dimension");
  std::vector<std::vector<double>> probes = make_probes(config, model.n_x());
  ValueApproximator approx{&basis, result.omega};
  std::vector<double> j_prev;
  for (const auto& p : probes) j_prev.push_back(approx.value(p));

  const std::size_t n0 = basis.dim();
  std::vector<std::vector<double>> sample_x;    // visited states
  std::vector<std::vector<double>> sample_phi;  // oracle at C_q x (empty if none)
  std::vector<std::vector<double>> reg_rows;    // psi(x)
  bool ever_solved = false;

  // One Bellman-optimality backup target at a stored state, greedy under the
  // current weights.
  auto backup_target = [&](std::size_t r) {
    std::optional<std::vector<double>> phi_r;
    if (!sample_phi[r].empty()) phi_r = sample_phi[r];
    ImprovementResult imp = improvement_fixed_point(approx, model, sample_x[r], cost.R,
                                                    config.gamma, phi_r, config.ubar);
    std::vector<double> xp = linalg::matvec(model.A, sample_x[r]);
    std::vector<double> bu = linalg::matvec(model.B, imp.u);
    for (std::size_t i = 0; i < xp.size(); ++i) xp[i] += bu[i];
    if (phi_r) {
      std::vector<double> gp = linalg::matvec(model.G, *phi_r);
      for (std::size_t i = 0; i < xp.size(); ++i) xp[i] += gp[i];
    }
    return cost(sample_x[r], imp.u) + config.gamma * approx.value(xp);
  };

  for (std::size_t k = 0; k < config.max_iterations; ++k) {
    sysmodel::Policy policy = make_greedy_policy(basis, approx.omega, model, cost.R,
                                                 config.gamma, oracle, config.ubar);
    Sweep sweep = collect_iteration_data(model, oracle, policy, cost, config, k);
    for (std::size_t t = 0; t < sweep.x.size(); ++t) {
      sample_x.push_back(sweep.x[t]);
      sample_phi.push_back(oracle ? oracle(linalg::matvec(model.C_q, sweep.x[t]))
                                  : std::vector<double>{});
      reg_rows.push_back(basis.evaluate(sweep.x[t]));
    }

    // Normal equations for omega_{k+1}: psi(x)^T omega = min_u [U + gamma J_k(x+)].
    Matrix gram(n0, n0);
    Matrix rhs(n0, 1);
    std::vector<double> targets(reg_rows.size());
    for (std::size_t r = 0; r < reg_rows.size(); ++r) {
      targets[r] = backup_target(r);
      for (std::size_t i = 0; i < n0; ++i) {
        rhs(i, 0) += reg_rows[r][i] * targets[r];
        for (std::size_t j = 0; j < n0; ++j) gram(i, j) += reg_rows[r][i] * reg_rows[r][j];
      }
    }

    // Equilibrate columns before solving: high-degree terms can sit many
    // orders of magnitude below the quadratics on in-domain data, which
    // wrecks the Gram conditioning without any true rank deficiency.
    std::vector<double> scale(n0, 1.0);
    for (std::size_t i = 0; i < n0; ++i)
      if (gram(i, i) > 0.0) scale[i] = 1.0 / std::sqrt(gram(i, i));
    Matrix gram_s(n0, n0);
    Matrix rhs_s(n0, 1);
    for (std::size_t i = 0; i < n0; ++i) {
      rhs_s(i, 0) = rhs(i, 0) * scale[i];
      for (std::size_t j = 0; j < n0; ++j) gram_s(i, j) = gram(i, j) * scale[i] * scale[j];
    }

    double residual = 0.0, change = 0.0;
    try {
      Matrix sol = linalg::solve(gram_s, rhs_s);
      for (std::size_t i = 0; i < n0; ++i) approx.omega[i] = sol(i, 0) * scale[i];
      ever_solved = true;
      for (std::size_t r = 0; r < reg_rows.size(); ++r)
        residual += std::abs(linalg::dot(approx.omega, reg_rows[r]) - targets[r]);
      residual /= static_cast<double>(reg_rows.size());
    } catch (const NumericalError&) {
      // Rank condition not reached yet: keep collecting transitions.
      result.history.push_back({k, 0.0, 0.0, sweep.discounted_cost, approx.omega});
      result.iterations = k + 1;
      continue;
    }

    for (std::size_t p = 0; p < probes.size(); ++p) {
      double j = approx.value(probes[p]);
      change = std::max(change, std::abs(j - j_prev[p]));
      j_prev[p] = j;
    }
    result.history.push_back({k, residual, change, sweep.discounted_cost, approx.omega});
    result.iterations = k + 1;
    if (change < config.eps_ac) {
      result.converged = true;
      break;
    }
  }

  if (!ever_solved) {
    // Identify the deficient directions for the error message.
    Matrix gram(n0, n0);
    for (const auto& row : reg_rows)
      for (std::size_t i = 0; i < n0; ++i)
        for (std::size_t j = 0; j < n0; ++j) gram(i, j) += row[i] * row[j];
    linalg::EigDecomp eig = linalg::sym_eig(SymMatrix::from(gram));
    std::ostringstream msg;
    msg << "value iteration: regressors never reached rank " << n0
        << "; deficient basis directions:";
    double top = 0.0;
    for (std::size_t i = 0; i < n0; ++i)
      top = std::max(top, std::abs(eig.eigenvectors(i, 0)));
    for (std::size_t i = 0; i < n0; ++i)
      if (std::abs(eig.eigenvectors(i, 0)) > 0.5 * top) msg << " #" << (i + 1);
    throw LearningError(msg.str());
  }
  result.omega = approx.omega;
  return result;
}

std::vector<AdmissibilityVerdict> admissibility_check(
    const sysmodel::SystemModel& model, const sysmodel::NonlinearOracle& oracle,
    const sysmodel::Policy& policy, const sysmodel::CostFunction& cost, double gamma,
    const std::vector<std::vector<double>>& x0s, std::size_t horizon) {
  std::vector<AdmissibilityVerdict> verdicts;
  for (const auto& x0 : x0s) {
    AdmissibilityVerdict v;
    v.x0 = x0;
    sysmodel::Trajectory traj =
        sysmodel::simulate_closed_loop(model, oracle, policy, x0, horizon);
    if (traj.diverged) {
      verdicts.push_back(v);
      continue;
    }
    // Log-linear envelope fit of ||x_t||.
    double sum_t = 0.0, sum_y = 0.0, sum_tt = 0.0, sum_ty = 0.0;
    std::size_t m = 0;
    for (std::size_t t = 0; t < traj.states.size(); ++t) {
      double norm = linalg::norm2(traj.states[t]);
      if (norm <= 1e-14) continue;
      double y = std::log(norm);
      double tt = static_cast<double>(t);
      sum_t += tt;
      sum_y += y;
      sum_tt += tt * tt;
      sum_ty += tt * y;
      ++m;
    }
    double rate = 0.0;
    if (m >= 2) {
      double denom = static_cast<double>(m) * sum_tt - sum_t * sum_t;
      double slope = denom != 0.0 ? (static_cast<double>(m) * sum_ty - sum_t * sum_y) / denom
                                  : 0.0;
      rate = std::exp(slope);
    }
    v.decay_rate = rate;

    double total = 0.0, g = 1.0, tail = 0.0;
    std::size_t tail_start = traj.inputs.size() - traj.inputs.size() / 10;
    for (std::size_t t = 0; t < traj.inputs.size(); ++t) {
      double c = g * cost(traj.states[t], traj.inputs[t]);
      total += c;
      if (t >= tail_start) tail += c;
      g *= gamma;
    }
    v.cost = total;
    bool cost_converged = tail <= 1e-8 * (total + 1e-12);
    v.admissible = rate < 1.0 && cost_converged;
    verdicts.push_back(v);
  }
  return verdicts;
}

void write_training_log(const std::string& path, const LearnResult& result) {
  csv::Table t;
  t.header = {"iter", "residual", "value_change", "cost"};
  std::size_t n0 = result.omega.size();
  for (std::size_t i = 1; i <= n0; ++i) t.header.push_back("omega_" + std::to_string(i));
  for (const IterationRecord& rec : result.history) {
    std::vector<double> row{static_cast<double>(rec.iter), rec.residual,
                            rec.value_change, rec.cost};
    row.insert(row.end(), rec.omega.begin(), rec.omega.end());
    t.rows.push_back(std::move(row));
  }
  csv::write(path, t);
}

}  // namespace safeinit::adp
