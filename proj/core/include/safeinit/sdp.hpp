#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "safeinit/linalg.hpp"

namespace safeinit::sdp {

using linalg::Matrix;
using linalg::SymMatrix;

// Decision variables of the synthesis problems: symmetric S, rectangular Y,
// scalar nu. Any of the three parts may be absent (zero-sized).
struct Variables {
  SymMatrix S;  // dim_S x dim_S
  Matrix Y;     // y_rows x y_cols
  double nu = 0.0;
};

// Flattening order: lower triangle of S (row-major), Y row-major, then nu.
struct VariableLayout {
  std::size_t dim_S = 0;
  std::size_t y_rows = 0, y_cols = 0;
  bool has_nu = false;

  std::size_t total() const {
    return dim_S * (dim_S + 1) / 2 + y_rows * y_cols + (has_nu ? 1 : 0);
  }
  std::vector<double> flatten(const Variables& v) const;
  Variables unflatten(const std::vector<double>& z) const;
};

enum class Sense { NSD, PSD };

// Affine map z -> M(z), stored as a constant block plus sparse per-variable
// coefficient blocks probed from a dense builder, so assembly and the
// eigenvector adjoint stay cheap inside the solver loop.
class LmiConstraint {
 public:
  struct Triplet {
    std::size_t r, c;
    double v;
  };

  static LmiConstraint from_builder(std::string name, Sense sense,
                                    const VariableLayout& layout,
                                    const std::function<SymMatrix(const Variables&)>& build);

  SymMatrix assemble(const std::vector<double>& z) const;
  // v^T dM/dz_i v for the subgradient adjoint at rank-one vv^T.
  double quad_form_coeff(std::size_t var, const std::vector<double>& v) const;

  const std::string& name() const { return name_; }
  Sense sense() const { return sense_; }
  const SymMatrix& constant() const { return constant_; }
  std::size_t block_dim() const { return constant_.dim(); }
  std::size_t n_vars() const { return coeffs_.size(); }

 private:
  std::string name_;
  Sense sense_ = Sense::NSD;
  SymMatrix constant_;
  std::vector<std::vector<Triplet>> coeffs_;  // one triplet list per variable
};

enum class SolveStatus { Feasible, InfeasibleSuspected, IterationCap };

struct ConstraintEigen {
  std::string name;
  double extreme;  // lambda_max for NSD blocks, lambda_min for PSD blocks
  bool satisfied;
};

struct SolveOptions {
  double epsilon = 0.0;  // <= 0 selects the scaled default
  std::size_t max_iter = 20000;
  std::uint64_t seed = 0;
  std::vector<double> init;  // warm start; empty selects the jittered default
};

struct FeasibilityResult {
  SolveStatus status = SolveStatus::IterationCap;
  std::vector<double> z;
  std::vector<ConstraintEigen> extremes;
  std::size_t iterations = 0;
  double merit = 0.0;    // max over constraints of the signed extreme eigenvalue
  double epsilon = 0.0;  // margin actually used
};

struct VerifyReport {
  bool certified = false;
  std::vector<ConstraintEigen> extremes;
  double margin = 0.0;  // worst signed slack across blocks
  std::string failure;  // empty when certified
};

// 1e-6 * (1 + largest constant-block norm): strictness that scales with the
// problem data so "<= 0" survives floating point.
double default_epsilon(const std::vector<LmiConstraint>& constraints);

// Merit f(z) = max over constraints of lambda_max(+-M(z)); feasible iff
// f <= -epsilon. Exposed for the convexity/subgradient property tests.
double merit(const std::vector<LmiConstraint>& constraints, const std::vector<double>& z);

// Spectral subgradient descent with Polyak steps toward the margin target.
// S >= 1e-8 I and nu >= 1e-8 are enforced by projection after every step.
// Stagnation above merit 0 for 500 consecutive iterations reports
// infeasible-suspected (no dual certificate is computed).
FeasibilityResult solve_feasibility(const std::vector<LmiConstraint>& constraints,
                                    const VariableLayout& layout,
                                    const SolveOptions& options = {});

// A-posteriori certification at margin epsilon/2, independent of the solver
// trajectory: pure eigenvalue checks per block plus the variable clamps.
VerifyReport verify(const std::vector<LmiConstraint>& constraints,
                    const VariableLayout& layout, const std::vector<double>& z,
                    double epsilon);

}  // namespace safeinit::sdp
