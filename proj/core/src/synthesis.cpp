#include "safeinit/synthesis.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "safeinit/csv.hpp"
#include "safeinit/errors.hpp"

namespace safeinit::synthesis {

using linalg::transpose;

bool ellipsoid_contains(const EllipsoidDomain& e, const std::vector<double>& x) {
  std::vector<double> px = linalg::matvec(e.P.as_matrix(), x);
  return linalg::dot(x, px) <= 1.0 + 1e-12;
}

InputConstraintSet box_input_constraints(std::size_t n_u, double ubar) {
  if (!(ubar > 0.0)) throw SynthesisError("box_input_constraints: ubar must be positive");
  InputConstraintSet set;
  for (std::size_t j = 0; j < n_u; ++j) {
    std::vector<double> plus(n_u, 0.0), minus(n_u, 0.0);
    plus[j] = 1.0 / ubar;
    minus[j] = -1.0 / ubar;
    set.xis.push_back(plus);
    set.xis.push_back(minus);
  }
  return set;
}

sdp::VariableLayout synthesis_layout(const sysmodel::SystemModel& model, bool free_nu) {
  sdp::VariableLayout layout;
  layout.dim_S = model.n_x();
  layout.y_rows = model.n_u();
  layout.y_cols = model.n_x();
  layout.has_nu = free_nu;
  return layout;
}

sdp::LmiConstraint build_stability_lmi(const sysmodel::SystemModel& model, double L_hat,
                                       double alpha, std::optional<double> nu_pin) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw SynthesisError("build_stability_lmi: alpha must lie in (0,1)");
  if (L_hat < 0.0) throw SynthesisError("build_stability_lmi: negative Lipschitz bound");
  const std::size_t n = model.n_x(), p = model.n_phi(), q = model.n_q();
  const std::size_t o2 = n, o3 = n + p, o4 = 2 * n + p, dim = 2 * n + p + q;
  const Matrix A = model.A, B = model.B, G = model.G, Cq = model.C_q;

  auto build = [=](const sdp::Variables& v) {
    const double nu = nu_pin ? *nu_pin : v.nu;
    const Matrix& S = v.S.as_matrix();
    Matrix asby = A * S + B * v.Y;
    Matrix scql = L_hat * (S * transpose(Cq));
    Matrix m(dim, dim);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        m(i, j) = -alpha * alpha * S(i, j);
        m(o3 + i, o3 + j) = -S(i, j);
        m(i, o3 + j) = asby(j, i);
        m(o3 + j, i) = asby(j, i);
      }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < q; ++j) {
        m(i, o4 + j) = scql(i, j);
        m(o4 + j, i) = scql(i, j);
      }
    for (std::size_t i = 0; i < p; ++i) {
      m(o2 + i, o2 + i) = -nu;
      for (std::size_t j = 0; j < n; ++j) {
        m(o2 + i, o3 + j) = nu * G(j, i);
        m(o3 + j, o2 + i) = nu * G(j, i);
      }
    }
    for (std::size_t j = 0; j < q; ++j) m(o4 + j, o4 + j) = -nu;
    return SymMatrix::from(m);
  };
  return sdp::LmiConstraint::from_builder("decay", sdp::Sense::NSD,
                                          synthesis_layout(model, !nu_pin), build);
}

std::vector<sdp::LmiConstraint> build_input_constraint_lmis(
    const sysmodel::SystemModel& model, const InputConstraintSet& constraints,
    bool free_nu) {
  const std::size_t n = model.n_x(), m_u = model.n_u();
  sdp::VariableLayout layout = synthesis_layout(model, free_nu);
  std::vector<sdp::LmiConstraint> blocks;
  for (std::size_t c = 0; c < constraints.xis.size(); ++c) {
    const std::vector<double>& xi = constraints.xis[c];
    if (xi.size() != m_u)
      throw SynthesisError("input constraint " + std::to_string(c) +
                           ": xi dimension mismatch");
    auto build = [n, m_u, xi](const sdp::Variables& v) {
      Matrix m(1 + n, 1 + n);
      m(0, 0) = 1.0;
      for (std::size_t j = 0; j < n; ++j) {
        double xiy = 0.0;
        for (std::size_t i = 0; i < m_u; ++i) xiy += xi[i] * v.Y(i, j);
        m(0, 1 + j) = xiy;
        m(1 + j, 0) = xiy;
        for (std::size_t i = 0; i < n; ++i) m(1 + i, 1 + j) = v.S(i, j);
      }
      return SymMatrix::from(m);
    };
    blocks.push_back(sdp::LmiConstraint::from_builder("input" + std::to_string(c),
                                                      sdp::Sense::PSD, layout, build));
  }
  return blocks;
}

namespace {

ControllerCertificate extract_certificate(const sysmodel::SystemModel& model,
                                          const sdp::VariableLayout& layout,
                                          const std::vector<double>& z, double alpha,
                                          double L_hat, std::optional<double> nu_pin,
                                          bool constrained, double margin) {
  sdp::Variables v = layout.unflatten(z);
  Matrix s_inv = linalg::inverse(v.S.as_matrix());
  ControllerCertificate cert;
  cert.K0 = v.Y * s_inv;
  cert.P = SymMatrix::from(s_inv);
  cert.nu = nu_pin ? *nu_pin : v.nu;
  cert.alpha = alpha;
  cert.L_hat = L_hat;
  cert.constrained = constrained;
  cert.margin = margin;
  return cert;
}

// Ball-floor block S - lambda I >= 0 appended during domain maximization.
sdp::LmiConstraint ball_floor_constraint(const sdp::VariableLayout& layout, double lambda) {
  auto build = [lambda](const sdp::Variables& v) {
    Matrix m = v.S.as_matrix();
    for (std::size_t i = 0; i < m.rows(); ++i) m(i, i) -= lambda;
    return SymMatrix::from(m);
  };
  return sdp::LmiConstraint::from_builder("ball_floor", sdp::Sense::PSD, layout, build);
}

}  // namespace

SynthesisOutcome synthesize(const sysmodel::SystemModel& model, double L_hat,
                            const SynthesisOptions& options) {
  if (!(L_hat >= 0.0)) throw SynthesisError("synthesize: invalid Lipschitz bound");
  model.validate();
  const bool free_nu = !options.nu_pin;
  const sdp::VariableLayout layout = synthesis_layout(model, free_nu);
  const bool constrained = options.input_constraints.has_value();

  std::vector<double> alphas;
  if (options.alpha)
    alphas = {*options.alpha};
  else if (!options.alpha_grid.empty())
    alphas = options.alpha_grid;
  else
    for (double a = 0.99; a >= 0.4999; a -= 0.01) alphas.push_back(a);

  std::vector<sdp::LmiConstraint> input_blocks;
  if (constrained)
    input_blocks = build_input_constraint_lmis(model, *options.input_constraints, free_nu);

  SynthesisOutcome outcome;
  for (double alpha : alphas) {
    std::vector<sdp::LmiConstraint> constraints;
    constraints.push_back(build_stability_lmi(model, L_hat, alpha, options.nu_pin));
    for (const auto& b : input_blocks) constraints.push_back(b);

    sdp::SolveOptions solve_opts = options.solve;
    if (constrained && free_nu) {
      // The decay block is jointly homogeneous in (S, Y, nu), so any
      // unconstrained solution can be shrunk until the input blocks hold
      // (K0 = Y S^-1 is scale invariant; only E_P tightens). Use that as a
      // warm start and shrink the tolerance with it.
      std::vector<sdp::LmiConstraint> decay_only{constraints.front()};
      sdp::FeasibilityResult pre =
          sdp::solve_feasibility(decay_only, layout, options.solve);
      if (pre.status == sdp::SolveStatus::Feasible) {
        sdp::Variables v = layout.unflatten(pre.z);
        Matrix s_inv = linalg::inverse(v.S.as_matrix());
        double quad_max = 0.0;
        for (const auto& xi : options.input_constraints->xis) {
          std::vector<double> ytxi(model.n_x(), 0.0);
          for (std::size_t i = 0; i < model.n_u(); ++i)
            for (std::size_t j = 0; j < model.n_x(); ++j)
              ytxi[j] += xi[i] * v.Y(i, j);
          std::vector<double> sik = linalg::matvec(s_inv, ytxi);
          quad_max = std::max(quad_max, linalg::dot(ytxi, sik));
        }
        double c = quad_max > 0.0 ? std::min(1.0, 0.8 / quad_max) : 1.0;
        solve_opts.init = pre.z;
        for (double& zi : solve_opts.init) zi *= c;
        if (solve_opts.epsilon <= 0.0)
          solve_opts.epsilon = std::max(1e-12, c * sdp::default_epsilon(constraints));
      }
    }

    sdp::FeasibilityResult res = sdp::solve_feasibility(constraints, layout, solve_opts);
    outcome.attempts.push_back({alpha, res.merit, res.status});
    if (res.status != sdp::SolveStatus::Feasible) continue;
    sdp::VerifyReport report = sdp::verify(constraints, layout, res.z, res.epsilon);
    if (!report.certified) continue;

    std::vector<double> best_z = res.z;
    double lambda_star = 0.0;
    if (options.maximize_domain) {
      auto feasible_at = [&](double lambda, std::vector<double>* z_out) {
        std::vector<sdp::LmiConstraint> cs = constraints;
        cs.push_back(ball_floor_constraint(layout, lambda));
        sdp::FeasibilityResult r = sdp::solve_feasibility(cs, layout, solve_opts);
        if (r.status != sdp::SolveStatus::Feasible) return false;
        if (!sdp::verify(cs, layout, r.z, r.epsilon).certified) return false;
        *z_out = r.z;
        return true;
      };
      double lo = 0.0, hi = 1.0;
      std::vector<double> z_cand;
      // Locate a feasible radius first (it may be far below 1), then expand
      // upward while the floor stays feasible.
      while (hi > 1e-9 && !feasible_at(hi, &z_cand)) hi *= 0.25;
      if (hi > 1e-9) {
        lo = hi;
        best_z = z_cand;
        int doublings = 0;
        while (doublings++ < 20 && feasible_at(2.0 * hi, &z_cand)) {
          hi *= 2.0;
          lo = hi;
          best_z = z_cand;
        }
        hi *= 2.0;
      }
      for (int step = 0; step < 10; ++step) {
        double mid = 0.5 * (lo + hi);
        if (feasible_at(mid, &z_cand)) {
          lo = mid;
          best_z = z_cand;
        } else {
          hi = mid;
        }
      }
      lambda_star = lo;
    }

    ControllerCertificate cert =
        extract_certificate(model, layout, best_z, alpha, L_hat, options.nu_pin,
                            constrained, report.margin);
    if (!verify_theorem1(model, cert).holds) continue;
    outcome.certificate = cert;
    outcome.ball_radius_sq = lambda_star;
    return outcome;
  }

  std::ostringstream msg;
  msg << "synthesis failed; per-alpha merits:";
  for (const AlphaAttempt& a : outcome.attempts)
    msg << " alpha=" << a.alpha << " merit=" << a.merit << ";";
  throw SynthesisError(msg.str());
}

Theorem1Report verify_theorem1(const sysmodel::SystemModel& model,
                               const ControllerCertificate& cert) {
  if (!(cert.nu > 0.0)) return {false, std::numeric_limits<double>::infinity()};
  const std::size_t n = model.n_x(), p = model.n_phi(), q = model.n_q();
  const Matrix& P = cert.P.as_matrix();
  Matrix acl = model.A + model.B * cert.K0;
  Matrix pacl = P * acl;
  Matrix psi11 = transpose(acl) * pacl;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      psi11(i, j) -= cert.alpha * cert.alpha * P(i, j);
  Matrix psi21 = transpose(model.G) * pacl;           // p x n
  Matrix psi22 = transpose(model.G) * (P * model.G);  // p x p

  Matrix t(n + p, n + p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) t(i, j) = psi11(i, j);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      t(n + i, j) = psi21(i, j);
      t(j, n + i) = psi21(i, j);
    }
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) t(n + i, n + j) = psi22(i, j);

  // Gamma^T M Gamma = blkdiag(L^2/nu C_q^T C_q, -1/nu I).
  Matrix ctc = transpose(model.C_q) * model.C_q;
  const double l2nu = cert.L_hat * cert.L_hat / cert.nu;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) t(i, j) += l2nu * ctc(i, j);
  for (std::size_t i = 0; i < p; ++i) t(n + i, n + i) -= 1.0 / cert.nu;
  (void)q;

  double margin = linalg::max_eig(SymMatrix::from(t)).value;
  return {margin <= 0.0, margin};
}

bool check_monotonicity(const sysmodel::SystemModel& model,
                        const ControllerCertificate& cert, double L_low) {
  if (L_low > cert.L_hat) throw SynthesisError("check_monotonicity: L_low exceeds L_hat");
  ControllerCertificate lowered = cert;
  lowered.L_hat = L_low;
  return verify_theorem1(model, lowered).holds;
}

LqrSolution riccati_lqr(const Matrix& A, const Matrix& B, const SymMatrix& Q,
                        const SymMatrix& R) {
  const std::size_t cap = 100000;
  Matrix P = Q.as_matrix();
  LqrSolution out;
  for (std::size_t it = 0; it < cap; ++it) {
    Matrix bpb = transpose(B) * (P * B);
    Matrix inner = R.as_matrix() + bpb;
    Matrix bpa = transpose(B) * (P * A);
    Matrix gain = linalg::solve(inner, bpa);  // (R + B'PB)^-1 B'PA
    Matrix next = Q.as_matrix() + transpose(A) * (P * A) - transpose(bpa) * gain;
    double delta = linalg::frobenius_norm(next - P);
    P = next;
    if (linalg::frobenius_norm(P) > 1e12)
      throw SynthesisError("riccati_lqr: iteration diverged; (A,B) not stabilizable");
    if (delta <= 1e-10) {
      out.iterations = it + 1;
      Matrix bpa_f = transpose(B) * (P * A);
      Matrix inner_f = R.as_matrix() + transpose(B) * (P * B);
      out.K = -1.0 * linalg::solve(inner_f, bpa_f);
      out.P = SymMatrix::from(P);
      return out;
    }
  }
  throw SynthesisError("riccati_lqr: no convergence within iteration cap");
}

namespace {

std::string join_matrix(const Matrix& m) {
  std::ostringstream os;
  for (std::size_t i = 0; i < m.rows() * m.cols(); ++i)
    os << (i ? " " : "") << csv::format_double(m.data()[i]);
  return os.str();
}

Matrix parse_matrix(const std::string& text, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  std::istringstream is(text);
  for (std::size_t i = 0; i < rows * cols; ++i)
    if (!(is >> m.data()[i]))
      throw ParseError("certificate: matrix entry count mismatch");
  return m;
}

}  // namespace

void write_certificate(const std::string& path, const ControllerCertificate& cert) {
  std::vector<std::pair<std::string, std::string>> items;
  items.emplace_back("n_x", std::to_string(cert.K0.cols()));
  items.emplace_back("n_u", std::to_string(cert.K0.rows()));
  items.emplace_back("alpha", csv::format_double(cert.alpha));
  items.emplace_back("nu", csv::format_double(cert.nu));
  items.emplace_back("L_hat", csv::format_double(cert.L_hat));
  items.emplace_back("margin", csv::format_double(cert.margin));
  items.emplace_back("constrained", cert.constrained ? "1" : "0");
  items.emplace_back("K0", join_matrix(cert.K0));
  items.emplace_back("P", join_matrix(cert.P.as_matrix()));
  csv::write_kv(path, items);
}

ControllerCertificate read_certificate(const std::string& path) {
  auto items = csv::read_kv(path);
  auto get = [&](const std::string& key) -> const std::string& {
    for (const auto& [k, v] : items)
      if (k == key) return v;
    throw ParseError("certificate: " + path + ": missing key '" + key + "'");
  };
  std::size_t n_x = std::stoul(get("n_x"));
  std::size_t n_u = std::stoul(get("n_u"));
  ControllerCertificate cert;
  cert.alpha = std::stod(get("alpha"));
  cert.nu = std::stod(get("nu"));
  cert.L_hat = std::stod(get("L_hat"));
  cert.margin = std::stod(get("margin"));
  cert.constrained = get("constrained") == "1";
  cert.K0 = parse_matrix(get("K0"), n_u, n_x);
  cert.P = SymMatrix::from(parse_matrix(get("P"), n_x, n_x));
  return cert;
}

}  // namespace safeinit::synthesis
