// Command-line front end: Lipschitz estimation, controller synthesis, the
// slope-density benchmark suite, and the two worked studies (torsional
// pendulum, random 20-state plant).

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "safeinit/adp.hpp"
#include "safeinit/csv.hpp"
#include "safeinit/errors.hpp"
#include "safeinit/experiments.hpp"
#include "safeinit/lipschitz.hpp"
#include "safeinit/rng.hpp"
#include "safeinit/sdp.hpp"
#include "safeinit/synthesis.hpp"
#include "safeinit/sysmodel.hpp"

namespace fs = std::filesystem;
using namespace safeinit;
using linalg::Matrix;
using linalg::SymMatrix;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitCertification = 2;
constexpr int kExitParse = 3;

std::string join_rowmajor(const Matrix& m) {
  std::ostringstream os;
  for (std::size_t i = 0; i < m.rows() * m.cols(); ++i)
    os << (i ? " " : "") << csv::format_double(m.data()[i]);
  return os.str();
}

Matrix parse_rowmajor(const std::string& text, std::size_t rows, std::size_t cols,
                      const std::string& what) {
  Matrix m(rows, cols);
  std::istringstream is(text);
  for (std::size_t i = 0; i < rows * cols; ++i)
    if (!(is >> m.data()[i])) throw ParseError("model: short matrix data for " + what);
  return m;
}

void write_model(const std::string& path, const sysmodel::SystemModel& model) {
  csv::write_kv(path, {{"n_x", std::to_string(model.n_x())},
                       {"n_u", std::to_string(model.n_u())},
                       {"n_phi", std::to_string(model.n_phi())},
                       {"n_q", std::to_string(model.n_q())},
                       {"A", join_rowmajor(model.A)},
                       {"B", join_rowmajor(model.B)},
                       {"G", join_rowmajor(model.G)},
                       {"C_q", join_rowmajor(model.C_q)}});
}

sysmodel::SystemModel read_model(const std::string& path) {
  auto items = csv::read_kv(path);
  auto get = [&](const std::string& key) -> const std::string& {
    for (const auto& [k, v] : items)
      if (k == key) return v;
    throw ParseError("model: " + path + ": missing key '" + key + "'");
  };
  std::size_t n_x = std::stoul(get("n_x")), n_u = std::stoul(get("n_u"));
  std::size_t n_phi = std::stoul(get("n_phi")), n_q = std::stoul(get("n_q"));
  sysmodel::SystemModel model;
  model.A = parse_rowmajor(get("A"), n_x, n_x, "A");
  model.B = parse_rowmajor(get("B"), n_x, n_u, "B");
  model.G = parse_rowmajor(get("G"), n_x, n_phi, "G");
  model.C_q = parse_rowmajor(get("C_q"), n_q, n_x, "C_q");
  model.validate();
  return model;
}

lipschitz::Kernel parse_kernel(const std::string& name) {
  if (name == "gaussian") return lipschitz::Kernel::Gaussian;
  if (name == "epanechnikov") return lipschitz::Kernel::Epanechnikov;
  throw ParseError("unknown kernel '" + name + "' (expected gaussian|epanechnikov)");
}

void write_estimate(const std::string& path, const lipschitz::LipschitzEstimate& est) {
  csv::write_kv(path,
                {{"L_hat", csv::format_double(est.L_hat)},
                 {"beta", csv::format_double(est.beta)},
                 {"kernel", est.kernel == lipschitz::Kernel::Gaussian ? "gaussian"
                                                                      : "epanechnikov"},
                 {"bandwidth", csv::format_double(est.bandwidth)},
                 {"n_slopes", std::to_string(est.n_slopes)},
                 {"bandwidth_fallback", est.bandwidth_fallback ? "1" : "0"}});
}

void write_kde_curve(const std::string& path, const std::vector<double>& slopes,
                     const lipschitz::LipschitzEstimate& est) {
  lipschitz::KdeModel kde(slopes, est.kernel, est.bandwidth,
                          lipschitz::SupportMode::Positive);
  double hi = 1.5 * kde.max_sample() + 3.0 * est.bandwidth;
  csv::Table t;
  t.header = {"ell", "density"};
  for (int i = 0; i < 512; ++i) {
    double ell = hi * static_cast<double>(i) / 511.0;
    t.rows.push_back({ell, kde.evaluate(ell)});
  }
  csv::write(path, t);
}

void write_certificate_report(const std::string& path,
                              const sysmodel::SystemModel& model,
                              const synthesis::SynthesisOutcome& outcome) {
  const auto& cert = outcome.certificate;
  synthesis::Theorem1Report thm = synthesis::verify_theorem1(model, cert);
  std::vector<std::pair<std::string, std::string>> items = {
      {"alpha", csv::format_double(cert.alpha)},
      {"lmi_margin", csv::format_double(cert.margin)},
      {"decay_condition_margin", csv::format_double(thm.margin)},
      {"decay_condition_holds", thm.holds ? "1" : "0"},
      {"spectral_radius_closed_loop",
       csv::format_double(linalg::spectral_radius(model.A + model.B * cert.K0))},
      {"ball_radius_sq", csv::format_double(outcome.ball_radius_sq)}};
  for (const auto& a : outcome.attempts) {
    std::ostringstream key;
    key << "attempt_alpha_" << a.alpha;
    items.emplace_back(key.str(), csv::format_double(a.merit));
  }
  csv::write_kv(path, items);
}

void write_trajectory(const std::string& path, const sysmodel::Trajectory& traj,
                      const sysmodel::CostFunction& cost) {
  csv::Table t;
  t.header = {"t"};
  std::size_t n_x = traj.states.empty() ? 0 : traj.states.front().size();
  std::size_t n_u = traj.inputs.empty() ? 0 : traj.inputs.front().size();
  for (std::size_t i = 1; i <= n_x; ++i) t.header.push_back("x" + std::to_string(i));
  for (std::size_t i = 1; i <= n_u; ++i) t.header.push_back("u" + std::to_string(i));
  t.header.push_back("cost_cum");
  double acc = 0.0;
  for (std::size_t k = 0; k < traj.inputs.size(); ++k) {
    acc += cost(traj.states[k], traj.inputs[k]);
    std::vector<double> row{static_cast<double>(k)};
    row.insert(row.end(), traj.states[k].begin(), traj.states[k].end());
    row.insert(row.end(), traj.inputs[k].begin(), traj.inputs[k].end());
    row.push_back(acc);
    t.rows.push_back(std::move(row));
  }
  csv::write(path, t);
}

struct EstimateArgs {
  std::string data, model, out;
  double beta = 0.01;
  std::string kernel = "epanechnikov";
  double bandwidth = 0.0;  // 0: automatic
  std::size_t max_pairs = 50000;
  std::uint64_t seed = 0;
};

int cmd_estimate(const EstimateArgs& args) {
  sysmodel::SystemModel model = read_model(args.model);
  sysmodel::Dataset data =
      sysmodel::read_dataset_csv(args.data, model.n_x(), model.n_u());
  sysmodel::PhiSamples phis = sysmodel::extract_phi_samples(model, data);

  lipschitz::EstimationConfig config;
  config.beta = args.beta;
  config.kernel = parse_kernel(args.kernel);
  if (args.bandwidth > 0.0) config.bandwidth = args.bandwidth;
  config.max_pairs = args.max_pairs;
  config.seed = args.seed;
  lipschitz::LipschitzEstimate est = lipschitz::estimate_lipschitz(phis, config);

  fs::create_directories(args.out);
  write_estimate(args.out + "/estimate.txt", est);
  lipschitz::SlopeSamples slopes =
      lipschitz::pairwise_underestimates(phis, args.max_pairs, args.seed);
  write_kde_curve(args.out + "/kde_curve.csv", slopes.values, est);
  std::printf("L_hat = %.6f (beta = %g, bandwidth = %.6f)\n", est.L_hat, est.beta,
              est.bandwidth);
  return kExitOk;
}

struct SynthesizeArgs {
  std::string model, out;
  double lhat = 0.0;
  double alpha = 0.0;  // 0: descending grid
  double nu = 0.0;     // 0: free
  double ubar = 0.0;   // 0: unconstrained
  bool maximize_domain = false;
  std::uint64_t seed = 0;
};

int cmd_synthesize(const SynthesizeArgs& args) {
  sysmodel::SystemModel model = read_model(args.model);
  synthesis::SynthesisOptions opts;
  if (args.alpha > 0.0) opts.alpha = args.alpha;
  if (args.nu > 0.0) opts.nu_pin = args.nu;
  if (args.ubar > 0.0)
    opts.input_constraints = synthesis::box_input_constraints(model.n_u(), args.ubar);
  opts.maximize_domain = args.maximize_domain;
  opts.solve.seed = args.seed;

  fs::create_directories(args.out);
  try {
    synthesis::SynthesisOutcome outcome = synthesis::synthesize(model, args.lhat, opts);
    synthesis::write_certificate(args.out + "/certificate.txt", outcome.certificate);
    write_certificate_report(args.out + "/verify_report.txt", model, outcome);
    std::printf("certified: alpha = %.4f margin = %.3e\n", outcome.certificate.alpha,
                outcome.certificate.margin);
  } catch (const SynthesisError& e) {
    csv::write_kv(args.out + "/failure_report.txt", {{"error", e.what()}});
    std::fprintf(stderr, "synthesis failed: %s\n", e.what());
    return kExitCertification;
  }
  return kExitOk;
}

struct BenchArgs {
  std::string functions = "all";
  std::string out;
  std::size_t runs = 100;
  std::vector<std::size_t> ns{100, 500};
  std::vector<double> betas{1e-2, 1e-4};
  std::uint64_t seed = 0;
};

int cmd_bench(const BenchArgs& args) {
  std::vector<lipschitz::BenchmarkFunction> fns = lipschitz::benchmark_functions();
  if (args.functions != "all") {
    std::vector<lipschitz::BenchmarkFunction> keep;
    std::stringstream ss(args.functions);
    std::string name;
    while (std::getline(ss, name, ',')) {
      bool found = false;
      for (const auto& f : fns)
        if (f.name == name) {
          keep.push_back(f);
          found = true;
        }
      if (!found) throw ParseError("unknown benchmark function '" + name + "'");
    }
    fns = keep;
  }
  lipschitz::BenchmarkResult result =
      lipschitz::benchmark_suite(fns, args.ns, args.betas, args.runs, args.seed);

  fs::create_directories(args.out);
  {
    csv::Table t;
    t.header = {"function", "n", "beta", "run", "elapsed_s", "L_hat"};
    // Function column is an index into the alphabetical order of selected names.
    for (const auto& r : result.runs) {
      double fidx = 0;
      for (std::size_t i = 0; i < fns.size(); ++i)
        if (fns[i].name == r.function) fidx = static_cast<double>(i);
      t.rows.push_back({fidx, static_cast<double>(r.n), r.beta,
                        static_cast<double>(r.run), r.elapsed_s, r.L_hat});
    }
    csv::write(args.out + "/runs.csv", t);
  }
  {
    csv::Table t;
    t.header = {"function", "n",       "beta",           "mean_L_hat",
                "stdev_L_hat", "mean_elapsed_s", "overestimate_fraction"};
    for (const auto& s : result.summary) {
      double fidx = 0;
      for (std::size_t i = 0; i < fns.size(); ++i)
        if (fns[i].name == s.function) fidx = static_cast<double>(i);
      t.rows.push_back({fidx, static_cast<double>(s.n), s.beta, s.mean_L_hat,
                        s.stdev_L_hat, s.mean_elapsed_s, s.overestimate_fraction});
      std::printf("%-28s n=%4zu beta=%g  L_hat = %.4f +- %.4f  over = %.0f%%\n",
                  s.function.c_str(), s.n, s.beta, s.mean_L_hat, s.stdev_L_hat,
                  100.0 * s.overestimate_fraction);
    }
    csv::write(args.out + "/summary.csv", t);
  }
  return kExitOk;
}

struct PendulumArgs {
  std::string mode = "collect";
  std::string out;
  std::uint64_t seed = 0;
  double beta = 0.01;
  double ubar = 1.0;
};

sysmodel::Policy linear_policy(const Matrix& K) {
  return [K](const std::vector<double>& x) { return linalg::matvec(K, x); };
}

int cmd_pendulum(const PendulumArgs& args) {
  experiments::PendulumSetup setup = experiments::pendulum_setup();
  fs::create_directories(args.out);

  if (args.mode == "collect") {
    sysmodel::Dataset data = experiments::collect_pendulum_dataset(setup, args.seed);
    write_model(args.out + "/model.txt", setup.model);
    sysmodel::write_dataset_csv(args.out + "/dataset.csv", data, setup.model.n_x(),
                                setup.model.n_u());
    std::printf("wrote %zu transitions\n", data.transitions.size());
    return kExitOk;
  }

  sysmodel::Dataset data = experiments::collect_pendulum_dataset(setup, args.seed);
  sysmodel::PhiSamples phis = sysmodel::extract_phi_samples(setup.model, data);
  adp::BasisSet basis = adp::pendulum_basis();
  const double pi_half = std::acos(-1.0) / 2.0;

  auto estimate_at = [&](double beta) {
    lipschitz::EstimationConfig cfg = experiments::pendulum_estimation_config(args.seed);
    cfg.beta = beta;
    return lipschitz::estimate_lipschitz(phis, cfg);
  };
  auto synthesize_with = [&](double lhat, bool constrained) {
    synthesis::SynthesisOptions opts;
    opts.alpha = 0.95;
    opts.solve.seed = args.seed;
    if (constrained)
      opts.input_constraints =
          synthesis::box_input_constraints(setup.model.n_u(), args.ubar);
    return synthesis::synthesize(setup.model, lhat, opts);
  };

  if (args.mode == "unconstrained-pi") {
    adp::StageCost cost = experiments::pendulum_cost_unconstrained();
    adp::LearnConfig cfg;
    cfg.gamma = 0.95;
    cfg.eta = 1e-4;
    cfg.eps_ac = 1e-5;
    cfg.max_iterations = 30;
    cfg.sweeps = 10;
    cfg.sweep_steps = 100;
    cfg.eval_passes = 100;
    cfg.seed = args.seed;

    struct Variant {
      std::string name;
      synthesis::ControllerCertificate cert;
      std::vector<double> omega0;  // empty: from P
    };
    std::vector<Variant> variants;
    {
      auto est = estimate_at(0.1);
      variants.push_back({"lipschitz_beta_0.1",
                          synthesize_with(est.L_hat, false).certificate, {}});
    }
    {
      auto est = estimate_at(0.001);
      variants.push_back({"lipschitz_beta_0.001",
                          synthesize_with(est.L_hat, false).certificate, {}});
    }
    {
      // Riccati design that ignores the nonlinearity entirely.
      synthesis::LqrSolution lqr = synthesis::riccati_lqr(
          setup.model.A, setup.model.B, SymMatrix::identity(2),
          SymMatrix::from(0.5 * Matrix::identity(1)));
      synthesis::ControllerCertificate cert;
      cert.K0 = lqr.K;
      cert.P = lqr.P;
      cert.nu = 1.0;
      cert.alpha = 0.95;
      cert.L_hat = 0.0;
      variants.push_back({"riccati_ignore_nonlinearity", cert, {}});
    }
    {
      // Random small-weight initialization, near-zero initial gain.
      synthesis::ControllerCertificate cert;
      cert.K0 = Matrix(1, 2);
      cert.P = SymMatrix::identity(2);
      cert.nu = 1.0;
      cert.alpha = 0.95;
      Rng rng = Rng::stream(args.seed, 17);
      std::vector<double> omega0(basis.dim());
      for (double& w : omega0) w = 0.1 * rng.normal();
      variants.push_back({"random_small_weights", cert, omega0});
    }

    csv::Table cmp;
    cmp.header = {"t"};
    std::vector<std::vector<double>> cost_columns;
    for (const Variant& v : variants) {
      cmp.header.push_back("cost_" + v.name);
      adp::LearnConfig vcfg = cfg;
      vcfg.omega0 = v.omega0;
      // Probe within each variant's certified region E_P, as in the
      // constrained study; rollouts far outside it are not covered by the
      // certificate and the quartic basis terms dominate there.
      vcfg.probe_radius = 0.8 / std::sqrt(linalg::max_eig(v.cert.P).value);
      try {
        adp::LearnResult lr = adp::run_policy_iteration(setup.model, setup.oracle,
                                                        v.cert, basis, cost, vcfg);
        adp::write_training_log(args.out + "/training_" + v.name + ".csv", lr);
      } catch (const LearningError& e) {
        // Uncertified baselines may destabilize mid-training; record the abort
        // and keep the comparison going.
        std::ofstream note(args.out + "/training_" + v.name + ".aborted.txt");
        note << e.what() << "\n";
      }

      // Initial-policy trajectory from (pi/2, 0) with the quadratic
      // comparison cost of the study.
      sysmodel::Policy policy =
          v.omega0.empty() ? linear_policy(v.cert.K0)
                           : adp::make_greedy_policy(basis, v.omega0, setup.model,
                                                     cost.R, cfg.gamma, setup.oracle);
      sysmodel::Trajectory traj;
      try {
        traj = sysmodel::simulate_closed_loop(setup.model, setup.oracle, policy,
                                              {pi_half, 0.0}, 500);
      } catch (const LearningError&) {
        // The greedy improvement itself diverged; treat as a diverged rollout.
        traj.states = {{pi_half, 0.0}};
        traj.diverged = true;
      }
      auto qcost = [](const std::vector<double>& x, const std::vector<double>& u) {
        return x[0] * x[0] + x[1] * x[1] + 0.5 * u[0] * u[0];
      };
      write_trajectory(args.out + "/trajectory_" + v.name + ".csv", traj, qcost);
      std::vector<double> cum;
      double acc = 0.0;
      for (std::size_t k = 0; k < traj.inputs.size(); ++k) {
        acc += qcost(traj.states[k], traj.inputs[k]);
        cum.push_back(acc);
      }
      cost_columns.push_back(std::move(cum));
    }
    // Diverged baselines yield short columns; pad with infinity so the
    // comparison table keeps the full horizon.
    std::size_t horizon = 0;
    for (const auto& c : cost_columns) horizon = std::max(horizon, c.size());
    for (std::size_t t = 0; t < horizon; ++t) {
      std::vector<double> row{static_cast<double>(t)};
      for (const auto& c : cost_columns)
        row.push_back(t < c.size() ? c[t]
                                   : std::numeric_limits<double>::infinity());
      cmp.rows.push_back(std::move(row));
    }
    csv::write(args.out + "/cost_comparison.csv", cmp);
    return kExitOk;
  }

  if (args.mode == "constrained-pi" || args.mode == "vi") {
    auto est = estimate_at(args.beta);
    synthesis::SynthesisOutcome outcome = synthesize_with(est.L_hat, true);
    const auto& cert = outcome.certificate;
    synthesis::write_certificate(args.out + "/certificate.txt", cert);

    adp::StageCost cost = experiments::pendulum_cost_constrained(args.ubar);
    adp::LearnConfig cfg;
    cfg.gamma = 0.95;
    cfg.eta = 1e-4;
    cfg.eps_ac = 1e-6;
    cfg.max_iterations = 30;
    cfg.sweeps = 10;
    cfg.sweep_steps = 100;
    cfg.eval_passes = 100;
    cfg.seed = args.seed;
    cfg.ubar = args.ubar;
    // Evaluation sweeps start inside E_P so the certified linear policy of
    // the first iteration respects the input bound.
    double lam_max = linalg::max_eig(cert.P).value;
    cfg.probe_radius = 0.8 / std::sqrt(lam_max);

    adp::LearnResult lr =
        args.mode == "vi"
            ? adp::run_value_iteration(setup.model, setup.oracle, cert, basis, cost, cfg)
            : adp::run_policy_iteration(setup.model, setup.oracle, cert, basis, cost, cfg);
    adp::write_training_log(args.out + "/training_log.csv", lr);

    // Closed-loop runs from the boundary of E_P under the learned policy.
    sysmodel::Policy policy = adp::make_greedy_policy(
        basis, lr.omega, setup.model, cost.R, cfg.gamma, setup.oracle, args.ubar);
    auto points = experiments::ellipsoid_boundary_points(cert.P, 10, args.seed);
    csv::Table t;
    t.header = {"point", "t", "x_norm", "u"};
    for (std::size_t p = 0; p < points.size(); ++p) {
      auto traj =
          sysmodel::simulate_closed_loop(setup.model, setup.oracle, policy, points[p], 500);
      for (std::size_t k = 0; k < traj.inputs.size(); ++k)
        t.rows.push_back({static_cast<double>(p), static_cast<double>(k),
                          linalg::norm2(traj.states[k]), traj.inputs[k][0]});
    }
    csv::write(args.out + "/trajectories.csv", t);
    return kExitOk;
  }

  throw ParseError("unknown pendulum mode '" + args.mode + "'");
}

struct Linear20Args {
  std::string out;
  std::uint64_t seed = 0;
};

int cmd_linear20(const Linear20Args& args) {
  experiments::Linear20Setup setup = experiments::linear20_setup(args.seed);
  fs::create_directories(args.out);
  write_model(args.out + "/model.txt", setup.model);

  sysmodel::Dataset data = experiments::collect_linear20_dataset(setup, args.seed);
  sysmodel::write_dataset_csv(args.out + "/dataset.csv", data, 20, 10);
  sysmodel::PhiSamples phis = sysmodel::extract_phi_samples(setup.model, data);
  lipschitz::LipschitzEstimate est =
      lipschitz::estimate_lipschitz(phis, experiments::linear20_estimation_config(args.seed));
  write_estimate(args.out + "/estimate.txt", est);
  std::printf("L_hat = %.4f (true %.4f)\n", est.L_hat, setup.L_star);

  synthesis::SynthesisOptions opts;
  opts.alpha = 0.95;
  opts.solve.seed = args.seed;
  synthesis::SynthesisOutcome outcome = synthesis::synthesize(setup.model, est.L_hat, opts);
  synthesis::write_certificate(args.out + "/certificate.txt", outcome.certificate);
  write_certificate_report(args.out + "/verify_report.txt", setup.model, outcome);

  adp::BasisSet basis = adp::quadratic_basis(20);
  adp::StageCost cost;
  cost.kind = adp::StageCost::Kind::Quadratic;
  cost.Q = SymMatrix::from(5.0 * Matrix::identity(20));
  cost.R = SymMatrix::from(2.0 * Matrix::identity(10));
  adp::LearnConfig cfg;
  cfg.gamma = 0.95;
  cfg.eta = 0.1;
  cfg.eps_ac = 1e-7;
  cfg.max_iterations = 150;
  cfg.sweeps = 60;
  cfg.sweep_steps = 25;
  cfg.eval_passes = 60;
  cfg.probe_radius = 1.5;
  cfg.seed = args.seed;
  adp::LearnResult lr =
      adp::run_policy_iteration(setup.model, setup.oracle, outcome.certificate, basis,
                                cost, cfg);
  adp::write_training_log(args.out + "/training_log.csv", lr);
  std::printf("PI converged = %d after %zu iterations\n", lr.converged ? 1 : 0,
              lr.iterations);

  sysmodel::Policy policy =
      adp::make_greedy_policy(basis, lr.omega, setup.model, cost.R, cfg.gamma,
                              setup.oracle);
  Rng rng = Rng::stream(args.seed, 5);
  csv::Table t;
  t.header = {"ic", "final_norm", "diverged"};
  for (int k = 0; k < 100; ++k) {
    std::vector<double> x0(20);
    for (double& v : x0) v = rng.normal() * std::sqrt(2.0);
    auto traj = sysmodel::simulate_closed_loop(setup.model, setup.oracle, policy, x0, 500);
    t.rows.push_back({static_cast<double>(k),
                      traj.diverged ? -1.0 : linalg::norm2(traj.states.back()),
                      traj.diverged ? 1.0 : 0.0});
  }
  csv::write(args.out + "/convergence.csv", t);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data-driven Lipschitz estimation, certified controller synthesis, "
               "and safely initialized approximate dynamic programming"};
  app.set_config("--config", "", "Flat key = value configuration file with sections");
  app.require_subcommand(1);

  EstimateArgs est;
  CLI::App* c_est = app.add_subcommand("estimate", "Estimate a Lipschitz constant");
  c_est->add_option("--data", est.data, "Transition dataset CSV")->required();
  c_est->add_option("--model", est.model, "System model file")->required();
  c_est->add_option("--beta", est.beta, "Density threshold");
  c_est->add_option("--kernel", est.kernel, "gaussian|epanechnikov");
  c_est->add_option("--bandwidth", est.bandwidth, "Bandwidth override (0: automatic)");
  c_est->add_option("--max-pairs", est.max_pairs, "Slope subsample cap");
  c_est->add_option("--seed", est.seed, "Seed")->required();
  c_est->add_option("--out", est.out, "Output directory")->required();

  SynthesizeArgs syn;
  CLI::App* c_syn = app.add_subcommand("synthesize", "Synthesize a certified gain");
  c_syn->add_option("--model", syn.model, "System model file")->required();
  c_syn->add_option("--lhat", syn.lhat, "Lipschitz bound")->required();
  c_syn->add_option("--alpha", syn.alpha, "Fixed decay rate (0: grid)");
  c_syn->add_option("--nu", syn.nu, "Pin the multiplier (0: free)");
  c_syn->add_option("--ubar", syn.ubar, "Symmetric input bound (0: none)");
  c_syn->add_flag("--maximize-domain", syn.maximize_domain, "Maximize the ball in E_P");
  c_syn->add_option("--seed", syn.seed, "Seed");
  c_syn->add_option("--out", syn.out, "Output directory")->required();

  BenchArgs bench;
  CLI::App* c_bench = app.add_subcommand("bench", "Slope-density benchmark suite");
  c_bench->add_option("--functions", bench.functions, "all or comma-separated names");
  c_bench->add_option("--runs", bench.runs, "Monte Carlo runs per cell");
  c_bench->add_option("--ns", bench.ns, "Sample sizes");
  c_bench->add_option("--betas", bench.betas, "Density thresholds");
  c_bench->add_option("--seed", bench.seed, "Master seed")->required();
  c_bench->add_option("--out", bench.out, "Output directory")->required();

  PendulumArgs pend;
  CLI::App* c_pend = app.add_subcommand("pendulum", "Torsional pendulum study");
  c_pend->add_option("--mode", pend.mode,
                     "collect|unconstrained-pi|constrained-pi|vi");
  c_pend->add_option("--seed", pend.seed, "Seed")->required();
  c_pend->add_option("--beta", pend.beta, "Density threshold");
  c_pend->add_option("--ubar", pend.ubar, "Input bound for constrained modes");
  c_pend->add_option("--out", pend.out, "Output directory")->required();

  Linear20Args lin;
  CLI::App* c_lin = app.add_subcommand("linear20", "Random 20-state plant study");
  c_lin->add_option("--seed", lin.seed, "Seed")->required();
  c_lin->add_option("--out", lin.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitParse;
  }

  try {
    if (*c_est) return cmd_estimate(est);
    if (*c_syn) return cmd_synthesize(syn);
    if (*c_bench) return cmd_bench(bench);
    if (*c_pend) return cmd_pendulum(pend);
    if (*c_lin) return cmd_linear20(lin);
  } catch (const ParseError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return kExitParse;
  } catch (const SynthesisError& e) {
    std::fprintf(stderr, "certification failure: %s\n", e.what());
    return kExitCertification;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitOk;
}
