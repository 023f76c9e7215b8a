#include "safeinit/lipschitz.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "safeinit/errors.hpp"
#include "safeinit/rng.hpp"

namespace safeinit::lipschitz {

namespace {

constexpr double kSqrt2Pi = 2.5066282746310002;
constexpr double kLogClamp = 1e-12;  // slope floor before log transform
// Canonical bandwidth ratio delta(Epanechnikov)/delta(Gaussian); converts a
// Gaussian-scale bandwidth into the equivalent Epanechnikov one.
constexpr double kEpaCanonical = 2.214;
// Shrink applied to the plug-in bandwidth: the support estimate pushes past
// the largest slope by roughly a kernel-tail width, and the raw plug-in value
// oversmooths that edge.
constexpr double kPlugInShrink = 0.86;

double kernel_value(Kernel k, double u) {
  if (k == Kernel::Gaussian) return std::exp(-0.5 * u * u) / kSqrt2Pi;
  double a = std::abs(u);
  return a <= 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
}

// Self-convolution (K*K), needed by the least-squares CV score.
double kernel_conv(Kernel k, double u) {
  if (k == Kernel::Gaussian) return std::exp(-0.25 * u * u) / (kSqrt2Pi * std::sqrt(2.0));
  double a = std::abs(u);
  if (a > 2.0) return 0.0;
  double d = 2.0 - a;
  return (3.0 / 160.0) * d * d * d * (u * u + 6.0 * a + 4.0);
}

double kernel_cutoff(Kernel k, double h) {
  return k == Kernel::Epanechnikov ? h : 10.0 * h;
}

double stdev(const std::vector<double>& x) {
  double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  double acc = 0.0;
  for (double v : x) acc += (v - mean) * (v - mean);
  return std::sqrt(acc / static_cast<double>(x.size()));
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
  double pos = p * static_cast<double>(sorted.size() - 1);
  std::size_t lo = static_cast<std::size_t>(pos);
  std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

std::vector<double> subsample(const std::vector<double>& x, std::size_t cap, Rng& rng) {
  if (x.size() <= cap) return x;
  std::vector<double> pool = x;
  // Partial Fisher-Yates: the first `cap` entries end up a uniform subsample.
  for (std::size_t i = 0; i < cap; ++i) {
    std::size_t j = i + rng.below(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(cap);
  return pool;
}

std::vector<double> log_transform(const std::vector<double>& x) {
  std::vector<double> out;
  out.reserve(x.size());
  for (double v : x) out.push_back(std::log(std::max(v, kLogClamp)));
  return out;
}

double lscv_score(const std::vector<double>& x, Kernel k, double h) {
  const std::size_t n = x.size();
  const double nn = static_cast<double>(n);
  double conv_sum = nn * kernel_conv(k, 0.0);  // diagonal terms
  double loo_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double u = (x[i] - x[j]) / h;
      conv_sum += 2.0 * kernel_conv(k, u);
      loo_sum += 2.0 * kernel_value(k, u);
    }
  return conv_sum / (nn * nn * h) - 2.0 * loo_sum / (nn * (nn - 1.0) * h);
}

}  // namespace

SlopeSamples pairwise_underestimates(const sysmodel::PhiSamples& samples,
                                     std::size_t max_pairs, std::uint64_t seed) {
  const std::size_t n = samples.q.size();
  if (n < 2 || samples.phi.size() != n)
    throw EstimationError("pairwise_underestimates: need at least 2 samples");
  SlopeSamples out;
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = j + 1; k < n; ++k) {
      double dq = 0.0;
      for (std::size_t d = 0; d < samples.q[j].size(); ++d) {
        double diff = samples.q[j][d] - samples.q[k][d];
        dq += diff * diff;
      }
      dq = std::sqrt(dq);
      if (dq <= 1e-12) {
        ++out.degenerate_pairs_skipped;
        continue;
      }
      double dphi = 0.0;
      for (std::size_t d = 0; d < samples.phi[j].size(); ++d) {
        double diff = samples.phi[j][d] - samples.phi[k][d];
        dphi += diff * diff;
      }
      out.values.push_back(std::sqrt(dphi) / dq);
    }
  if (out.values.empty())
    throw EstimationError("pairwise_underestimates: all pairs degenerate");
  if (out.values.size() > max_pairs) {
    Rng rng = Rng::stream(seed, 0);
    out.values = subsample(out.values, max_pairs, rng);
  }
  return out;
}

KdeModel::KdeModel(std::vector<double> samples, Kernel kernel, double bandwidth,
                   SupportMode mode)
    : samples_(std::move(samples)), kernel_(kernel), bandwidth_(bandwidth), mode_(mode) {
  if (samples_.empty()) throw EstimationError("kde: empty sample set");
  if (!(bandwidth_ > 0.0)) throw EstimationError("kde: bandwidth must be positive");
  fit_samples_ = mode_ == SupportMode::Positive ? log_transform(samples_) : samples_;
  std::sort(fit_samples_.begin(), fit_samples_.end());
  max_sample_ = *std::max_element(samples_.begin(), samples_.end());
}

double KdeModel::evaluate(double at) const {
  double t = at;
  if (mode_ == SupportMode::Positive) {
    if (at <= 0.0) return 0.0;
    t = std::log(at);
  }
  const double r = kernel_cutoff(kernel_, bandwidth_);
  auto lo = std::lower_bound(fit_samples_.begin(), fit_samples_.end(), t - r);
  auto hi = std::upper_bound(lo, fit_samples_.end(), t + r);
  double sum = 0.0;
  for (auto it = lo; it != hi; ++it) sum += kernel_value(kernel_, (t - *it) / bandwidth_);
  double dens = sum / (static_cast<double>(fit_samples_.size()) * bandwidth_);
  if (mode_ == SupportMode::Positive) dens /= at;  // Jacobian of the log map
  return dens;
}

double KdeModel::max_density() const {
  // The 1-d KDE peaks near a sample point; scanning the samples is enough
  // for the confidence-level sanity check.
  double best = 0.0;
  for (double s : samples_) best = std::max(best, evaluate(s));
  return best;
}

double silverman_bandwidth(const std::vector<double>& samples) {
  if (samples.empty()) throw EstimationError("silverman_bandwidth: empty sample set");
  return 1.06 * stdev(samples) * std::pow(static_cast<double>(samples.size()), -0.2);
}

double sheather_jones_bandwidth(const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n < 5) throw EstimationError("sheather_jones_bandwidth: need at least 5 samples");
  const double nn = static_cast<double>(n);
  std::vector<double> sorted = x;
  std::sort(sorted.begin(), sorted.end());
  double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  double lambda = std::min(stdev(x), iqr / 1.34);
  if (!(lambda > 0.0)) return 0.0;  // degenerate; caller falls back

  // Stage 1: normal-scale psi_8, pilot bandwidth g1, kernel functional psi_6.
  double psi8 = 105.0 / (32.0 * std::sqrt(M_PI) * std::pow(lambda, 9.0));
  double g1 = std::pow(30.0 / (kSqrt2Pi * psi8 * nn), 1.0 / 9.0);
  double sum6 = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) {
        sum6 += -15.0 / kSqrt2Pi;
        continue;
      }
      double d = (x[i] - x[j]) / g1;
      double d2 = d * d;
      sum6 += (((d2 - 15.0) * d2 + 45.0) * d2 - 15.0) * std::exp(-0.5 * d2) / kSqrt2Pi;
    }
  double psi6 = sum6 / (nn * (nn - 1.0) * std::pow(g1, 7.0));
  if (!(psi6 < 0.0)) return 1.06 * lambda * std::pow(nn, -0.2);

  // Stage 2: pilot g2 from psi_6, curvature functional psi_4, final bandwidth.
  double g2 = std::pow(-6.0 / (kSqrt2Pi * psi6 * nn), 1.0 / 7.0);
  double sum4 = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) {
        sum4 += 3.0 / kSqrt2Pi;
        continue;
      }
      double d = (x[i] - x[j]) / g2;
      double d2 = d * d;
      sum4 += ((d2 - 6.0) * d2 + 3.0) * std::exp(-0.5 * d2) / kSqrt2Pi;
    }
  double psi4 = sum4 / (nn * (nn - 1.0) * std::pow(g2, 5.0));
  if (!(psi4 > 0.0)) return 1.06 * lambda * std::pow(nn, -0.2);
  return std::pow(1.0 / (2.0 * std::sqrt(M_PI) * psi4 * nn), 0.2);
}

BandwidthChoice select_bandwidth(const std::vector<double>& samples, Kernel kernel,
                                 SupportMode mode, std::size_t cv_cap,
                                 std::uint64_t seed) {
  if (samples.size() < 5)
    throw EstimationError("select_bandwidth: need at least 5 samples");
  std::vector<double> x =
      mode == SupportMode::Positive ? log_transform(samples) : samples;
  Rng rng = Rng::stream(seed, 0);
  x = subsample(x, cv_cap, rng);

  double silver = silverman_bandwidth(x);
  if (!(silver > 0.0)) {
    // All samples equal: any bandwidth gives the same (degenerate) fit.
    double scale = std::abs(x.front());
    return {1e-3 * (1.0 + scale), true};
  }

  const int grid_n = 30;
  double best_h = silver;
  double best_score = 0.0, min_score = 0.0, max_score = 0.0;
  for (int i = 0; i < grid_n; ++i) {
    double t = static_cast<double>(i) / (grid_n - 1);
    double h = silver * std::exp(std::log(0.05) + t * (std::log(2.0) - std::log(0.05)));
    double score = lscv_score(x, kernel, h);
    if (i == 0 || score < best_score) {
      best_score = score;
      best_h = h;
    }
    min_score = i == 0 ? score : std::min(min_score, score);
    max_score = i == 0 ? score : std::max(max_score, score);
  }
  if (max_score - min_score < 1e-12) return {silver, true};
  return {best_h, false};
}

SupportEstimate estimate_support(const KdeModel& kde, double beta) {
  if (!(beta > 0.0)) throw EstimationError("estimate_support: beta must be positive");
  const double h = kde.bandwidth();
  const double upper = kde.max_sample() * 1.5 + 3.0 * h;
  const int grid_n = 4096;
  int last = -1;
  for (int i = grid_n - 1; i >= 0; --i) {
    double l = upper * static_cast<double>(i) / (grid_n - 1);
    if (kde.evaluate(l) >= beta) {
      last = i;
      break;
    }
  }
  if (last < 0) {
    if (beta > kde.max_density() * (1.0 + 1e-12))
      throw EstimationError("estimate_support: confidence level exceeds peak density");
    // Width-zero level set: the grid can straddle the peak, so report it.
    double best_l = kde.samples().front(), best_d = 0.0;
    for (double s : kde.samples()) {
      double d = kde.evaluate(s);
      if (d > best_d) {
        best_d = d;
        best_l = s;
      }
    }
    return {beta, best_l};
  }
  double lo = upper * static_cast<double>(last) / (grid_n - 1);
  if (last == grid_n - 1) return {beta, lo};
  double hi = upper * static_cast<double>(last + 1) / (grid_n - 1);
  for (int it = 0; it < 60; ++it) {
    double mid = 0.5 * (lo + hi);
    if (kde.evaluate(mid) >= beta)
      lo = mid;
    else
      hi = mid;
  }
  return {beta, lo};
}

LipschitzEstimate estimate_lipschitz(const sysmodel::PhiSamples& samples,
                                     const EstimationConfig& config) {
  SlopeSamples slopes = pairwise_underestimates(samples, config.max_pairs, config.seed);

  double h;
  bool fallback = false;
  if (config.bandwidth) {
    h = *config.bandwidth;
    if (!(h > 0.0)) throw EstimationError("estimate_lipschitz: bandwidth must be positive");
  } else if (config.rule == BandwidthRule::CrossValidation) {
    BandwidthChoice choice =
        select_bandwidth(slopes.values, config.kernel, config.support_mode, 800,
                         config.seed);
    h = choice.value;
    fallback = choice.fallback;
  } else {
    std::vector<double> x = config.support_mode == SupportMode::Positive
                                ? log_transform(slopes.values)
                                : slopes.values;
    Rng rng = Rng::stream(config.seed, 1);
    x = subsample(x, 800, rng);
    double sj = sheather_jones_bandwidth(x);
    if (!(sj > 0.0)) {
      sj = silverman_bandwidth(x);
      fallback = true;
    }
    if (!(sj > 0.0)) {
      sj = 1e-3 * (1.0 + std::abs(x.front()));
      fallback = true;
    }
    h = kPlugInShrink * sj;
    if (config.kernel == Kernel::Epanechnikov) h *= kEpaCanonical;
  }

  KdeModel kde(slopes.values, config.kernel, h, config.support_mode);
  SupportEstimate support = estimate_support(kde, config.beta);
  return {support.L_hat, config.beta, config.kernel, h, slopes.values.size(), fallback};
}

std::vector<BenchmarkFunction> benchmark_functions() {
  return {
      {"phi1", [](double x) { return std::abs(std::cos(M_PI * x)); }, -M_PI, M_PI, 3.141},
      {"phi2", [](double x) { return x - x * x * x / 3.0; }, -1.0, 1.0, 1.0},
      {"phi3", [](double x) { return std::sin(x) + std::sin(2.0 * x / 3.0); }, 3.1, 20.4,
       1.667},
      {"phi5",
       [](double x) {
         return std::max(1.0 - 3.0 * std::sin(x), std::exp(-std::sin(x)));
       },
       -10.0, 10.0, 3.0},
  };
}

BenchmarkResult benchmark_suite(const std::vector<BenchmarkFunction>& functions,
                                const std::vector<std::size_t>& ns,
                                const std::vector<double>& betas, std::size_t runs,
                                std::uint64_t master_seed) {
  BenchmarkResult result;
  std::uint64_t stream_index = 0;
  for (const BenchmarkFunction& fn : functions)
    for (std::size_t n : ns)
      for (double beta : betas) {
        double sum = 0.0, sum_sq = 0.0, time_sum = 0.0;
        std::size_t over = 0;
        for (std::size_t run = 0; run < runs; ++run) {
          Rng rng = Rng::stream(master_seed, stream_index++);
          sysmodel::PhiSamples samples;
          samples.q.reserve(n);
          samples.phi.reserve(n);
          for (std::size_t i = 0; i < n; ++i) {
            double x = rng.uniform(fn.domain_lo, fn.domain_hi);
            samples.q.push_back({x});
            samples.phi.push_back({fn.f(x)});
          }
          EstimationConfig config;
          config.beta = beta;
          config.seed = rng.next_u64();
          auto t0 = std::chrono::steady_clock::now();
          LipschitzEstimate est = estimate_lipschitz(samples, config);
          auto t1 = std::chrono::steady_clock::now();
          double elapsed = std::chrono::duration<double>(t1 - t0).count();
          result.runs.push_back({fn.name, n, beta, run, elapsed, est.L_hat});
          sum += est.L_hat;
          sum_sq += est.L_hat * est.L_hat;
          time_sum += elapsed;
          if (est.L_hat > fn.true_lipschitz) ++over;
        }
        double rn = static_cast<double>(runs);
        double mean = sum / rn;
        double var = std::max(0.0, sum_sq / rn - mean * mean);
        result.summary.push_back({fn.name, n, beta, mean, std::sqrt(var), time_sum / rn,
                                  static_cast<double>(over) / rn});
      }
  return result;
}

std::vector<ConvergencePoint> convergence_check(const BenchmarkFunction& fn,
                                                const std::vector<std::size_t>& n_grid,
                                                std::size_t runs_per_n,
                                                std::uint64_t master_seed) {
  std::vector<ConvergencePoint> points;
  std::uint64_t stream_index = 0;
  for (std::size_t n : n_grid) {
    std::vector<double> maxima;
    for (std::size_t run = 0; run < runs_per_n; ++run) {
      Rng rng = Rng::stream(master_seed, stream_index++);
      sysmodel::PhiSamples samples;
      for (std::size_t i = 0; i < n; ++i) {
        double x = rng.uniform(fn.domain_lo, fn.domain_hi);
        samples.q.push_back({x});
        samples.phi.push_back({fn.f(x)});
      }
      SlopeSamples slopes = pairwise_underestimates(samples, 50000, rng.next_u64());
      maxima.push_back(*std::max_element(slopes.values.begin(), slopes.values.end()));
    }
    std::sort(maxima.begin(), maxima.end());
    double median = runs_per_n % 2 == 1
                        ? maxima[runs_per_n / 2]
                        : 0.5 * (maxima[runs_per_n / 2 - 1] + maxima[runs_per_n / 2]);
    points.push_back({n, median});
  }
  return points;
}

}  // namespace safeinit::lipschitz
