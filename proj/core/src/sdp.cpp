#include "safeinit/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "safeinit/errors.hpp"
#include "safeinit/rng.hpp"

namespace safeinit::sdp {

namespace {

constexpr double kSClamp = 1e-8;
constexpr double kNuClamp = 1e-8;

// Eigenvalue-clipped projection onto {S : S >= floor * I}.
SymMatrix project_floor(const SymMatrix& s, double floor) {
  linalg::EigDecomp eig = linalg::sym_eig(s);
  const std::size_t n = s.dim();
  Matrix out(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    double lam = std::max(eig.eigenvalues[k], floor);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        out(i, j) += lam * eig.eigenvectors(i, k) * eig.eigenvectors(j, k);
  }
  return SymMatrix::from(out);
}

void clamp_variables(const VariableLayout& layout, std::vector<double>& z) {
  Variables v = layout.unflatten(z);
  if (layout.dim_S > 0) v.S = project_floor(v.S, kSClamp);
  if (layout.has_nu) v.nu = std::max(v.nu, kNuClamp);
  z = layout.flatten(v);
}

struct BlockEval {
  double lambda;              // signed extreme: lambda_max(+-M)
  std::vector<double> vec;    // corresponding unit eigenvector
};

BlockEval eval_block(const LmiConstraint& c, const std::vector<double>& z) {
  SymMatrix m = c.assemble(z);
  if (c.sense() == Sense::PSD) {
    Matrix neg = -1.0 * m.as_matrix();
    linalg::MaxEig top = linalg::max_eig(SymMatrix::from(neg));
    return {top.value, top.vector};
  }
  linalg::MaxEig top = linalg::max_eig(m);
  return {top.value, top.vector};
}

}  // namespace

std::vector<double> VariableLayout::flatten(const Variables& v) const {
  std::vector<double> z;
  z.reserve(total());
  for (std::size_t i = 0; i < dim_S; ++i)
    for (std::size_t j = 0; j <= i; ++j) z.push_back(v.S(i, j));
  for (std::size_t i = 0; i < y_rows; ++i)
    for (std::size_t j = 0; j < y_cols; ++j) z.push_back(v.Y(i, j));
  if (has_nu) z.push_back(v.nu);
  return z;
}

Variables VariableLayout::unflatten(const std::vector<double>& z) const {
  if (z.size() != total())
    throw NumericalError("layout: flattened vector has wrong dimension");
  Variables v;
  v.S = SymMatrix(dim_S);
  std::size_t k = 0;
  for (std::size_t i = 0; i < dim_S; ++i)
    for (std::size_t j = 0; j <= i; ++j) v.S.set(i, j, z[k++]);
  v.Y = Matrix(y_rows, y_cols);
  for (std::size_t i = 0; i < y_rows; ++i)
    for (std::size_t j = 0; j < y_cols; ++j) v.Y(i, j) = z[k++];
  if (has_nu) v.nu = z[k++];
  return v;
}

LmiConstraint LmiConstraint::from_builder(
    std::string name, Sense sense, const VariableLayout& layout,
    const std::function<SymMatrix(const Variables&)>& build) {
  LmiConstraint c;
  c.name_ = std::move(name);
  c.sense_ = sense;
  const std::size_t nz = layout.total();
  std::vector<double> zero(nz, 0.0);
  c.constant_ = build(layout.unflatten(zero));
  const std::size_t dim = c.constant_.dim();

  double scale = 1.0 + linalg::frobenius_norm(c.constant_.as_matrix());
  c.coeffs_.resize(nz);
  for (std::size_t k = 0; k < nz; ++k) {
    std::vector<double> unit = zero;
    unit[k] = 1.0;
    SymMatrix probed = build(layout.unflatten(unit));
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = i; j < dim; ++j) {
        double v = probed(i, j) - c.constant_(i, j);
        if (std::abs(v) > 1e-14 * scale) c.coeffs_[k].push_back({i, j, v});
      }
  }
  return c;
}

SymMatrix LmiConstraint::assemble(const std::vector<double>& z) const {
  if (z.size() != coeffs_.size())
    throw NumericalError("lmi " + name_ + ": variable dimension mismatch");
  Matrix acc = constant_.as_matrix();
  for (std::size_t k = 0; k < z.size(); ++k) {
    if (z[k] == 0.0) continue;
    for (const Triplet& t : coeffs_[k]) {
      acc(t.r, t.c) += z[k] * t.v;
      if (t.r != t.c) acc(t.c, t.r) += z[k] * t.v;
    }
  }
  return SymMatrix::from(acc);
}

double LmiConstraint::quad_form_coeff(std::size_t var, const std::vector<double>& v) const {
  double acc = 0.0;
  for (const Triplet& t : coeffs_[var]) {
    double term = t.v * v[t.r] * v[t.c];
    acc += t.r == t.c ? term : 2.0 * term;
  }
  return acc;
}

double default_epsilon(const std::vector<LmiConstraint>& constraints) {
  double worst = 0.0;
  for (const LmiConstraint& c : constraints)
    worst = std::max(worst, linalg::frobenius_norm(c.constant().as_matrix()));
  return 1e-6 * (1.0 + worst);
}

double merit(const std::vector<LmiConstraint>& constraints, const std::vector<double>& z) {
  double f = -std::numeric_limits<double>::infinity();
  for (const LmiConstraint& c : constraints) f = std::max(f, eval_block(c, z).lambda);
  return f;
}

FeasibilityResult solve_feasibility(const std::vector<LmiConstraint>& constraints,
                                    const VariableLayout& layout,
                                    const SolveOptions& options) {
  if (constraints.empty())
    throw NumericalError("solve_feasibility: no constraints");
  const double eps = options.epsilon > 0.0 ? options.epsilon : default_epsilon(constraints);

  std::vector<double> z;
  if (!options.init.empty()) {
    if (options.init.size() != layout.total())
      throw NumericalError("solve_feasibility: warm start has wrong dimension");
    z = options.init;
  } else {
    Variables init;
    init.S = SymMatrix::identity(layout.dim_S);
    init.Y = Matrix(layout.y_rows, layout.y_cols);
    init.nu = layout.has_nu ? 1.0 : 0.0;
    z = layout.flatten(init);
    Rng rng = Rng::stream(options.seed, 0);
    for (double& zi : z) zi += rng.uniform(-1e-3, 1e-3);
  }
  clamp_variables(layout, z);

  FeasibilityResult result;
  result.epsilon = eps;
  double best_f = std::numeric_limits<double>::max();
  int stagnant = 0;
  std::vector<double> grad(z.size());

  std::size_t it = 0;
  for (; it < options.max_iter; ++it) {
    double f = -std::numeric_limits<double>::infinity();
    std::size_t worst = 0;
    std::vector<double> worst_vec;
    for (std::size_t c = 0; c < constraints.size(); ++c) {
      BlockEval ev = eval_block(constraints[c], z);
      if (ev.lambda > f) {
        f = ev.lambda;
        worst = c;
        worst_vec = std::move(ev.vec);
      }
    }
    result.merit = f;
    if (f <= -eps) {
      result.status = SolveStatus::Feasible;
      break;
    }

    if (f < best_f - 1e-10 * (1.0 + std::abs(best_f))) {
      best_f = f;
      stagnant = 0;
    } else if (++stagnant >= 500 && best_f > 0.0) {
      result.status = SolveStatus::InfeasibleSuspected;
      break;
    }

    const LmiConstraint& cw = constraints[worst];
    const double sign = cw.sense() == Sense::PSD ? -1.0 : 1.0;
    double g_norm_sq = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) {
      grad[k] = sign * cw.quad_form_coeff(k, worst_vec);
      g_norm_sq += grad[k] * grad[k];
    }
    if (g_norm_sq <= 0.0) {
      // Flat direction with the target unmet: nothing further to exploit.
      if (++stagnant >= 500) {
        result.status = best_f > 0.0 ? SolveStatus::InfeasibleSuspected
                                     : SolveStatus::IterationCap;
        break;
      }
      continue;
    }
    // Polyak step toward the margin; once inside the cone, aim for twice the
    // current depth so progress stays geometric instead of crawling into -eps.
    double target = std::min(-2.0 * eps, 2.0 * f);
    double step = (f - target) / g_norm_sq;
    for (std::size_t k = 0; k < z.size(); ++k) z[k] -= step * grad[k];
    clamp_variables(layout, z);
  }
  result.iterations = it;
  result.z = z;
  for (const LmiConstraint& c : constraints) {
    BlockEval ev = eval_block(c, z);
    double extreme = c.sense() == Sense::PSD ? -ev.lambda : ev.lambda;
    bool ok = c.sense() == Sense::PSD ? extreme >= eps / 2.0 : extreme <= -eps / 2.0;
    result.extremes.push_back({c.name(), extreme, ok});
  }
  return result;
}

VerifyReport verify(const std::vector<LmiConstraint>& constraints,
                    const VariableLayout& layout, const std::vector<double>& z,
                    double epsilon) {
  VerifyReport report;
  report.certified = true;
  report.margin = std::numeric_limits<double>::infinity();
  for (const LmiConstraint& c : constraints) {
    SymMatrix m = c.assemble(z);
    double extreme, slack;
    if (c.sense() == Sense::PSD) {
      extreme = linalg::min_eigenvalue(m);
      slack = extreme;  // distance into the PSD cone
    } else {
      extreme = linalg::max_eig(m).value;
      slack = -extreme;
    }
    bool ok = slack >= epsilon / 2.0;
    report.extremes.push_back({c.name(), extreme, ok});
    report.margin = std::min(report.margin, slack);
    if (!ok && report.certified) {
      report.certified = false;
      report.failure = "block '" + c.name() + "' violates its cone by " +
                       std::to_string(epsilon / 2.0 - slack);
    }
  }
  Variables v = layout.unflatten(z);
  if (layout.dim_S > 0) {
    double smin = linalg::min_eigenvalue(v.S);
    if (smin < kSClamp * (1.0 - 1e-6) && report.certified) {
      report.certified = false;
      report.failure = "S violates its positivity clamp";
    }
  }
  if (layout.has_nu && v.nu < kNuClamp * (1.0 - 1e-6) && report.certified) {
    report.certified = false;
    report.failure = "nu violates its positivity clamp";
  }
  return report;
}

}  // namespace safeinit::sdp
