#include "ampdet/state_evolution.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "ampdet/rng.hpp"

namespace ampdet {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// First MSE term, common to all four formulas:
//   int a Q(g) g^(-gamma) lambda g^2 tau^2 / (g^2 + tau^2) dg.
// It is the Wiener MSE when both g and the activity are known.
double mse_wiener_term(double tau, const LargeScaleDist& dist, double lambda,
                       const QuadratureSpec& quad) {
  const double tau2 = tau * tau;
  const auto f = [&](double u) {
    const double g = std::exp(u);
    const double g2 = g * g;
    return std::pow(g, 3.0 - dist.gamma) * q_factor(g, dist) / (g2 + tau2);
  };
  const QuadResult r = integrate_adaptive(f, std::log(quad.g_lo), std::log(quad.g_hi),
                                          quad.rel_tol, quad.abs_tol, quad.max_subdivisions, 32);
  if (!r.converged) throw QuadratureError("mse: Wiener term did not converge", r.error);
  return dist.a * lambda * tau2 * r.value;
}

// log of the posterior-variance excess mu_m(s) - nu_m(s)^2 / xi_m(s),
// nonnegative by Cauchy-Schwarz; clamped at zero when roundoff flips it.
double log_variance_excess(const SharedLsfEvaluator& shared, double s, double lambda) {
  const SharedLsfEvaluator::Logs logs = shared.eval(s);
  if (logs.mu == kNegInf) return kNegInf;
  const double lxi = shared.log_xi(s, lambda);
  const double d = 2.0 * logs.nu - lxi - logs.mu;
  if (d >= 0.0) return kNegInf;
  const double one_minus = -std::expm1(d);
  if (one_minus <= 0.0) return kNegInf;
  return logs.mu + std::log(one_minus);
}

// Second MSE term of the statistics-only denoiser:
//   int a lambda s^m / Gamma(m+1) * (mu_m - nu_m^2/xi_m) ds,
// integrated over v = ln s with the peak factored out and the range cut
// where the integrand falls 1e-14 below its peak.
double mse_stat_excess_term(double tau, int m, const LargeScaleDist& dist, double lambda,
                            const QuadratureSpec& quad) {
  const SharedLsfEvaluator shared(dist, quad, tau, m, 96);
  const double s_lo = 1e-10 * tau * tau;
  const double s_hi = 150.0 * (quad.g_hi * quad.g_hi + tau * tau);
  const double v_lo = std::log(s_lo);
  const double v_hi = std::log(s_hi);

  const auto log_integrand = [&](double v) {
    const double s = std::exp(v);
    const double lex = log_variance_excess(shared, s, lambda);
    if (lex == kNegInf) return kNegInf;
    return (m + 1.0) * v + lex;
  };

  const int scan = 400;
  std::vector<double> lv(scan);
  double peak = kNegInf;
  for (int i = 0; i < scan; ++i) {
    lv[i] = log_integrand(v_lo + (v_hi - v_lo) * i / (scan - 1));
    peak = std::max(peak, lv[i]);
  }
  if (peak == kNegInf) return 0.0;

  const double cutoff = peak + std::log(1e-14);
  int i_lo = 0, i_hi = scan - 1;
  while (i_lo + 1 < scan && lv[i_lo] < cutoff && lv[i_lo + 1] < cutoff) ++i_lo;
  while (i_hi > 1 && lv[i_hi] < cutoff && lv[i_hi - 1] < cutoff) --i_hi;
  const double a = v_lo + (v_hi - v_lo) * std::max(0, i_lo - 1) / (scan - 1);
  const double b = v_lo + (v_hi - v_lo) * std::min(scan - 1, i_hi + 1) / (scan - 1);

  const auto scaled = [&](double v) {
    const double l = log_integrand(v);
    return l == kNegInf ? 0.0 : std::exp(l - peak);
  };
  const QuadResult r =
      integrate_adaptive(scaled, a, b, 1e-8, quad.abs_tol, quad.max_subdivisions, 48);
  if (!r.converged) throw QuadratureError("mse: excess term did not converge", r.error);
  return dist.a * lambda * std::exp(peak - std::lgamma(m + 1.0)) * r.value;
}

// Second MSE term of the known-g denoiser:
//   int a lambda Q(g) g^(4-gamma) / (g^2+tau^2) * (1 - varphi_m(g^2/tau^2)/Gamma(m+1)) dg.
double mse_known_excess_term(double tau, int m, const LargeScaleDist& dist, double lambda,
                             const QuadratureSpec& quad) {
  const double tau2 = tau * tau;
  const auto f = [&](double u) {
    const double g = std::exp(u);
    const double g2 = g * g;
    const double comp = varphi_complement(g2 / tau2, m, lambda);
    if (comp <= 0.0) return 0.0;
    return std::pow(g, 5.0 - dist.gamma) * q_factor(g, dist) / (g2 + tau2) * comp;
  };
  const QuadResult r = integrate_adaptive(f, std::log(quad.g_lo), std::log(quad.g_hi), 1e-8,
                                          quad.abs_tol, quad.max_subdivisions, 48);
  if (!r.converged) throw QuadratureError("mse: known-g excess term did not converge", r.error);
  return dist.a * lambda * r.value;
}

}  // namespace

double mse_stat(double tau, const LargeScaleDist& dist, double lambda,
                const QuadratureSpec& quad) {
  return mse_mmv(tau, 1, FadingKnowledge::stat_g, dist, lambda, quad);
}

double mse_known_g(double tau, const LargeScaleDist& dist, double lambda,
                   const QuadratureSpec& quad) {
  return mse_mmv(tau, 1, FadingKnowledge::known_g, dist, lambda, quad);
}

double mse_mmv(double tau, int m, FadingKnowledge knowledge, const LargeScaleDist& dist,
               double lambda, const QuadratureSpec& quad) {
  if (!(tau > 0.0)) throw std::invalid_argument("mse: tau must be positive");
  if (m < 1) throw std::invalid_argument("mse: m must be >= 1");
  if (lambda <= 0.0) return 0.0;
  const double wiener = mse_wiener_term(tau, dist, lambda, quad);
  const double excess = knowledge == FadingKnowledge::stat_g
                            ? mse_stat_excess_term(tau, m, dist, lambda, quad)
                            : mse_known_excess_term(tau, m, dist, lambda, quad);
  return wiener + excess;
}

double default_se_tau0(double sigma_w, int n, int l, double lambda, double e_g2) {
  return std::sqrt(sigma_w * sigma_w +
                   lambda * e_g2 * static_cast<double>(n) / static_cast<double>(l));
}

SeTrace se_recursion(double sigma_w, int n, int l, const std::function<double(double)>& mse_fn,
                     double tau0, const SeStop& stop) {
  if (!(tau0 > 0.0)) throw std::invalid_argument("se_recursion: tau0 must be positive");
  SeTrace trace;
  trace.taus.push_back(tau0);
  const double ratio = static_cast<double>(n) / static_cast<double>(l);
  double tau = tau0;
  for (int t = 0; t < stop.max_iter; ++t) {
    const double next = std::sqrt(sigma_w * sigma_w + ratio * mse_fn(tau));
    trace.taus.push_back(next);
    const double delta = std::abs(next - tau);
    tau = next;
    if (delta < stop.rel_tol * tau) {
      trace.converged = true;
      break;
    }
  }
  trace.tau_inf = tau;

  trace.monotone_after_first = true;
  for (size_t i = 2; i + 1 < trace.taus.size(); ++i) {
    const double d1 = trace.taus[i] - trace.taus[i - 1];
    const double d2 = trace.taus[i + 1] - trace.taus[i];
    if (d1 * d2 < 0.0) {
      trace.monotone_after_first = false;
      break;
    }
  }
  return trace;
}

MonteCarloMse mse_monte_carlo(
    const std::function<std::complex<double>(std::complex<double>)>& denoiser, double tau,
    long draws, std::uint64_t seed, double lambda, const LsfCdf& prior) {
  if (draws < 1) throw std::invalid_argument("mse_monte_carlo: draws must be >= 1");
  RngStream activity(seed, 100);
  RngStream fading(seed, 101);
  RngStream lsf(seed, 102);
  RngStream noise(seed, 103);

  double sum = 0.0, sumsq = 0.0;
  for (long i = 0; i < draws; ++i) {
    std::complex<double> x{0.0, 0.0};
    const bool active = activity.uniform() < lambda;
    if (active) x = prior.quantile(lsf.uniform()) * fading.cgaussian();
    const std::complex<double> xt = x + tau * noise.cgaussian();
    const double err = std::norm(denoiser(xt) - x);
    sum += err;
    sumsq += err * err;
  }
  MonteCarloMse out;
  const double n = static_cast<double>(draws);
  out.mse = sum / n;
  const double var = std::max(0.0, sumsq / n - out.mse * out.mse);
  out.std_err = std::sqrt(var / n);
  return out;
}

MonteCarloMse mse_monte_carlo_rows(
    const std::function<Eigen::RowVectorXcd(const Eigen::RowVectorXcd&)>& denoiser, int m,
    double tau, long draws, std::uint64_t seed, double lambda, const LsfCdf& prior) {
  if (draws < 1) throw std::invalid_argument("mse_monte_carlo_rows: draws must be >= 1");
  RngStream activity(seed, 100);
  RngStream fading(seed, 101);
  RngStream lsf(seed, 102);
  RngStream noise(seed, 103);

  double sum = 0.0, sumsq = 0.0;
  Eigen::RowVectorXcd x(m), xt(m);
  for (long i = 0; i < draws; ++i) {
    const bool active = activity.uniform() < lambda;
    const double g = active ? prior.quantile(lsf.uniform()) : 0.0;
    for (int j = 0; j < m; ++j) {
      x[j] = active ? g * fading.cgaussian() : std::complex<double>{0.0, 0.0};
      xt[j] = x[j] + tau * noise.cgaussian();
    }
    const double err = (denoiser(xt) - x).squaredNorm();
    sum += err;
    sumsq += err * err;
  }
  MonteCarloMse out;
  const double n = static_cast<double>(draws);
  out.mse = sum / n;
  const double var = std::max(0.0, sumsq / n - out.mse * out.mse);
  out.std_err = std::sqrt(var / n);
  return out;
}

}  // namespace ampdet
