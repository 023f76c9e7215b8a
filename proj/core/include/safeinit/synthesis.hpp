#pragma once

#include <optional>
#include <string>
#include <vector>

#include "safeinit/sdp.hpp"
#include "safeinit/sysmodel.hpp"

namespace safeinit::synthesis {

using linalg::Matrix;
using linalg::SymMatrix;

// Stabilizing gain with its Lyapunov certificate: V = x^T P x decays by
// alpha^2 per step for every nonlinearity with Lipschitz constant <= L_hat.
struct ControllerCertificate {
  Matrix K0;    // n_u x n_x
  SymMatrix P;  // positive definite
  double nu = 0.0;
  double alpha = 0.0;
  double L_hat = 0.0;
  bool constrained = false;
  double margin = 0.0;  // worst certified slack across LMI blocks
};

struct EllipsoidDomain {
  SymMatrix P;  // {x : x^T P x <= 1}
};

bool ellipsoid_contains(const EllipsoidDomain& e, const std::vector<double>& x);

// Half-space input constraints xi_i^T u <= 1; |u_j| <= ubar enters as the
// pair xi = +-e_j / ubar.
struct InputConstraintSet {
  std::vector<std::vector<double>> xis;
};

InputConstraintSet box_input_constraints(std::size_t n_u, double ubar);

// Decision-variable layout for the synthesis LMIs (S, Y, and nu unless
// pinned by config).
sdp::VariableLayout synthesis_layout(const sysmodel::SystemModel& model, bool free_nu);

// Decay-rate LMI in the variables (S, Y, nu): 4x4 block NSD matrix
//   [ -a^2 S      0      (AS+BY)^T   S C_q^T L ]
//   [    0      -nu I      nu G^T        0     ]
//   [ AS+BY      nu G       -S           0     ]
//   [ L C_q S      0         0        -nu I    ]
// with K0 = Y S^-1 and P = S^-1 recovering the decay certificate.
sdp::LmiConstraint build_stability_lmi(const sysmodel::SystemModel& model, double L_hat,
                                       double alpha, std::optional<double> nu_pin = {});

// One PSD block [[1, xi^T Y],[Y^T xi, S]] per half space: Schur complement
// of the input bound xi^T K0 P^-1 K0^T xi <= 1 over the ellipsoid.
std::vector<sdp::LmiConstraint> build_input_constraint_lmis(
    const sysmodel::SystemModel& model, const InputConstraintSet& constraints,
    bool free_nu);

struct SynthesisOptions {
  std::vector<double> alpha_grid;  // empty: 0.99 down to 0.5 step 0.01
  std::optional<double> alpha;     // single fixed alpha overrides the grid
  std::optional<double> nu_pin;
  std::optional<InputConstraintSet> input_constraints;
  bool maximize_domain = false;
  sdp::SolveOptions solve;
};

struct AlphaAttempt {
  double alpha;
  double merit;
  sdp::SolveStatus status;
};

struct SynthesisOutcome {
  ControllerCertificate certificate;
  std::vector<AlphaAttempt> attempts;
  double ball_radius_sq = 0.0;  // largest lambda with S >= lambda I kept feasible
};

// Descending alpha scan; first certified solution wins. maximize_domain then
// bisects the guaranteed ball radius inside E_P (10 steps). Throws
// SynthesisError carrying per-alpha merits when nothing certifies.
SynthesisOutcome synthesize(const sysmodel::SystemModel& model, double L_hat,
                            const SynthesisOptions& options = {});

struct Theorem1Report {
  bool holds = false;
  double margin = 0.0;  // lambda_max of Psi + Gamma^T M Gamma; certified when <= 0
};

// Independent re-derivation of the decay condition from (K0, P, nu): builds
// Psi, Gamma and the multiplier M directly and eigenvalue-checks NSD-ness.
// Does not touch the LMI assembly path.
Theorem1Report verify_theorem1(const sysmodel::SystemModel& model,
                               const ControllerCertificate& cert);

// The certificate remains valid for any smaller Lipschitz constant.
bool check_monotonicity(const sysmodel::SystemModel& model,
                        const ControllerCertificate& cert, double L_low);

struct LqrSolution {
  Matrix K;     // u = K x
  SymMatrix P;  // value matrix
  std::size_t iterations = 0;
};

// Fixed-point iteration on the discrete Riccati equation from P = Q;
// diverging iterates report the pair as not stabilizable.
LqrSolution riccati_lqr(const Matrix& A, const Matrix& B, const SymMatrix& Q,
                        const SymMatrix& R);

// Flat key-value serialization (K0, P row-major, nu, alpha, L_hat, margin).
void write_certificate(const std::string& path, const ControllerCertificate& cert);
ControllerCertificate read_certificate(const std::string& path);

}  // namespace safeinit::synthesis
