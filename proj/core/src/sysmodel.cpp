#include "safeinit/sysmodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "safeinit/csv.hpp"
#include "safeinit/errors.hpp"

namespace safeinit::sysmodel {

using linalg::transpose;

void SystemModel::validate() const {
  if (A.rows() != A.cols()) throw ModelError("model: A not square");
  if (B.rows() != A.rows()) throw ModelError("model: B row mismatch");
  if (G.rows() != A.rows()) throw ModelError("model: G row mismatch");
  if (C_q.cols() != A.cols()) throw ModelError("model: C_q column mismatch");
  for (double g : G.data())
    if (g != 0.0 && g != 1.0 && g != -1.0) {
      // Scaled channels appear in discretized models; only sign/zero
      // structure is required downstream, so accept any finite entries
      // but keep the rank check strict.
      break;
    }
  pseudo_inverse_G(G);  // throws if rank deficient
}

Matrix pseudo_inverse_G(const Matrix& G) {
  Matrix gtg = transpose(G) * G;
  linalg::NumericConfig cfg;
  try {
    Matrix gtg_inv = linalg::inverse(gtg, cfg);
    return gtg_inv * transpose(G);
  } catch (const NumericalError&) {
    throw ModelError("pseudo_inverse_G: G is rank deficient");
  }
}

PhiSamples extract_phi_samples(const SystemModel& model, const Dataset& data) {
  Matrix g_dag = pseudo_inverse_G(model.G);
  PhiSamples out;
  out.q.reserve(data.transitions.size());
  out.phi.reserve(data.transitions.size());
  for (const Transition& tr : data.transitions) {
    if (tr.x.size() != model.n_x() || tr.u.size() != model.n_u() ||
        tr.x_plus.size() != model.n_x())
      throw ModelError("extract_phi_samples: transition dimension mismatch");
    std::vector<double> residual = tr.x_plus;
    std::vector<double> ax = linalg::matvec(model.A, tr.x);
    std::vector<double> bu = linalg::matvec(model.B, tr.u);
    for (std::size_t i = 0; i < residual.size(); ++i) residual[i] -= ax[i] + bu[i];
    out.phi.push_back(linalg::matvec(g_dag, residual));
    out.q.push_back(linalg::matvec(model.C_q, tr.x));
  }
  return out;
}

namespace {

// 1-NN regression error of phi given inputs xs (leave-one-out).
double one_nn_error(const std::vector<std::vector<double>>& xs,
                    const std::vector<std::vector<double>>& phi) {
  const std::size_t n = xs.size();
  double err = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_j = i;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double d = 0.0;
      for (std::size_t k = 0; k < xs[i].size(); ++k) {
        double diff = xs[i][k] - xs[j][k];
        d += diff * diff;
      }
      if (d < best) {
        best = d;
        best_j = j;
      }
    }
    double e = 0.0;
    for (std::size_t k = 0; k < phi[i].size(); ++k) {
      double diff = phi[i][k] - phi[best_j][k];
      e += diff * diff;
    }
    err += e;
  }
  return err / static_cast<double>(n);
}

}  // namespace

std::vector<bool> detect_relevant_inputs(const std::vector<std::vector<double>>& x,
                                         const std::vector<std::vector<double>>& phi,
                                         std::uint64_t seed) {
  if (x.size() < 20) throw EstimationError("detect_relevant_inputs: need >= 20 samples");
  if (x.size() != phi.size())
    throw EstimationError("detect_relevant_inputs: sample count mismatch");
  const std::size_t n = x.size();
  const std::size_t dims = x[0].size();

  const double baseline = one_nn_error(x, phi);

  // Error range for the 5% threshold: baseline vs fully shuffled all-coords.
  std::vector<double> importance(dims, 0.0);
  double worst = baseline;
  const int shuffles = 10;
  for (std::size_t d = 0; d < dims; ++d) {
    double acc = 0.0;
    for (int s = 0; s < shuffles; ++s) {
      Rng rng = Rng::stream(seed, d * 1000 + static_cast<std::uint64_t>(s));
      std::vector<std::vector<double>> xs = x;
      // Fisher-Yates on coordinate d.
      for (std::size_t i = n - 1; i > 0; --i) {
        std::size_t j = rng.below(i + 1);
        std::swap(xs[i][d], xs[j][d]);
      }
      acc += one_nn_error(xs, phi);
    }
    importance[d] = acc / shuffles;
    worst = std::max(worst, importance[d]);
  }

  double range = worst - baseline;
  std::vector<bool> mask(dims, false);
  if (range <= 0.0) return mask;  // constant phi: nothing is relevant
  for (std::size_t d = 0; d < dims; ++d)
    mask[d] = (importance[d] - baseline) > 0.05 * range;
  return mask;
}

Matrix selection_matrix(const std::vector<bool>& mask) {
  std::size_t count = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
  if (count == 0) throw ModelError("selection_matrix: empty relevance mask");
  Matrix sel(count, mask.size());
  std::size_t r = 0;
  for (std::size_t c = 0; c < mask.size(); ++c)
    if (mask[c]) sel(r++, c) = 1.0;
  return sel;
}

Trajectory simulate_closed_loop(const SystemModel& model, const NonlinearOracle& oracle,
                                const Policy& policy, const std::vector<double>& x0,
                                std::size_t steps) {
  if (x0.size() != model.n_x()) throw ModelError("simulate: x0 dimension mismatch");
  Trajectory traj;
  traj.states.push_back(x0);
  std::vector<double> x = x0;
  for (std::size_t t = 0; t < steps; ++t) {
    if (linalg::norm2(x) > 1e9) {
      traj.diverged = true;
      break;
    }
    std::vector<double> u = policy(x);
    std::vector<double> q = linalg::matvec(model.C_q, x);
    std::vector<double> phi = oracle ? oracle(q) : std::vector<double>(model.n_phi(), 0.0);
    std::vector<double> xn = linalg::matvec(model.A, x);
    std::vector<double> bu = linalg::matvec(model.B, u);
    std::vector<double> gp = linalg::matvec(model.G, phi);
    for (std::size_t i = 0; i < xn.size(); ++i) xn[i] += bu[i] + gp[i];
    traj.inputs.push_back(std::move(u));
    traj.states.push_back(xn);
    x = std::move(xn);
  }
  return traj;
}

double accumulate_cost(const Trajectory& traj, const CostFunction& cost, double gamma) {
  double total = 0.0;
  double g = 1.0;
  for (std::size_t t = 0; t < traj.inputs.size(); ++t) {
    total += g * cost(traj.states[t], traj.inputs[t]);
    g *= gamma;
  }
  return total;
}

void write_dataset_csv(const std::string& path, const Dataset& data, std::size_t n_x,
                       std::size_t n_u) {
  csv::Table t;
  for (std::size_t i = 1; i <= n_x; ++i) t.header.push_back("x" + std::to_string(i));
  for (std::size_t i = 1; i <= n_u; ++i) t.header.push_back("u" + std::to_string(i));
  for (std::size_t i = 1; i <= n_x; ++i) t.header.push_back("xp" + std::to_string(i));
  for (const Transition& tr : data.transitions) {
    std::vector<double> row;
    row.insert(row.end(), tr.x.begin(), tr.x.end());
    row.insert(row.end(), tr.u.begin(), tr.u.end());
    row.insert(row.end(), tr.x_plus.begin(), tr.x_plus.end());
    t.rows.push_back(std::move(row));
  }
  csv::write(path, t);
}

Dataset read_dataset_csv(const std::string& path, std::size_t n_x, std::size_t n_u) {
  csv::Table t = csv::read(path);
  if (t.header.size() != 2 * n_x + n_u)
    throw ParseError("dataset: " + path + ": expected " + std::to_string(2 * n_x + n_u) +
                     " columns for n_x=" + std::to_string(n_x) +
                     ", n_u=" + std::to_string(n_u));
  Dataset data;
  for (const auto& row : t.rows) {
    Transition tr;
    tr.x.assign(row.begin(), row.begin() + n_x);
    tr.u.assign(row.begin() + n_x, row.begin() + n_x + n_u);
    tr.x_plus.assign(row.begin() + n_x + n_u, row.end());
    data.transitions.push_back(std::move(tr));
  }
  return data;
}

}  // namespace safeinit::sysmodel
