#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "safeinit/linalg.hpp"
#include "safeinit/rng.hpp"

namespace safeinit::sysmodel {

using linalg::Matrix;

// Known parts of x+ = A x + B u + G phi(C_q x). G is a 0/1 selection with
// full column rank; C_q may be unknown, in which case it is an identity
// restricted to the relevant coordinates (the exact entries are absorbed
// into the Lipschitz constant).
struct SystemModel {
  Matrix A;    // n_x x n_x
  Matrix B;    // n_x x n_u
  Matrix G;    // n_x x n_phi, entries in {0,1}, full column rank
  Matrix C_q;  // n_q x n_x

  std::size_t n_x() const { return A.rows(); }
  std::size_t n_u() const { return B.cols(); }
  std::size_t n_phi() const { return G.cols(); }
  std::size_t n_q() const { return C_q.rows(); }

  void validate() const;  // throws ModelError
};

// Ground-truth nonlinearity, used only by simulators and test oracles.
// phi(0) = 0.
using NonlinearOracle = std::function<std::vector<double>(const std::vector<double>& q)>;

struct Transition {
  std::vector<double> x;
  std::vector<double> u;
  std::vector<double> x_plus;
};

struct Dataset {
  std::vector<Transition> transitions;
};

// Extracted nonlinearity samples {(q_j, phi(q_j))}.
struct PhiSamples {
  std::vector<std::vector<double>> q;
  std::vector<std::vector<double>> phi;
};

struct Trajectory {
  std::vector<std::vector<double>> states;  // steps+1 entries unless diverged
  std::vector<std::vector<double>> inputs;
  bool diverged = false;
};

using Policy = std::function<std::vector<double>(const std::vector<double>& x)>;

// G† = (G^T G)^-1 G^T; G† G = I. Throws ModelError on rank deficiency.
Matrix pseudo_inverse_G(const Matrix& G);

// phi_j = G†(x+_j - A x_j - B u_j), q_j = C_q x_j.
PhiSamples extract_phi_samples(const SystemModel& model, const Dataset& data);

// Permutation importance of each state coordinate for a 1-NN regression of
// phi on x: coordinate i is relevant iff shuffling it (10 seeded shuffles)
// raises the regression error by more than 5% of the baseline error range.
std::vector<bool> detect_relevant_inputs(const std::vector<std::vector<double>>& x,
                                         const std::vector<std::vector<double>>& phi,
                                         std::uint64_t seed = 0);

// Selection-row C_q for the given relevance mask.
Matrix selection_matrix(const std::vector<bool>& mask);

// Exact recursion x+ = A x + B u(x) + G phi(C_q x). State norm above 1e9
// truncates the trajectory and sets the divergence flag; not an error,
// so Monte Carlo sweeps can record failures.
Trajectory simulate_closed_loop(const SystemModel& model, const NonlinearOracle& oracle,
                                const Policy& policy, const std::vector<double>& x0,
                                std::size_t steps);

using CostFunction =
    std::function<double(const std::vector<double>& x, const std::vector<double>& u)>;

// Sum of gamma^t U(x_t, u_t) over the recorded horizon.
double accumulate_cost(const Trajectory& traj, const CostFunction& cost, double gamma);

// Dataset CSV: header x1..xn,u1..um,xp1..xpn, one transition per row.
void write_dataset_csv(const std::string& path, const Dataset& data, std::size_t n_x,
                       std::size_t n_u);
Dataset read_dataset_csv(const std::string& path, std::size_t n_x, std::size_t n_u);

}  // namespace safeinit::sysmodel
