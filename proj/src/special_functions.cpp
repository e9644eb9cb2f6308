#include "ampdet/special_functions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ampdet {

namespace {

constexpr double kSqrtPi = 1.7724538509055160273;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_q_factor(double log_g, const LargeScaleDist& dist) {
  const double x = dist.b * log_g + dist.c;
  if (x < 25.0) return std::log(0.5 * kSqrtPi * std::erfc(x));
  // Asymptotic tail; erfc underflows past ~26.6.
  return -x * x - std::log(2.0 * x);
}

double log_g2_plus_t2(double log_g, double tau2) {
  const double g2 = std::exp(2.0 * log_g);
  if (g2 > tau2) return 2.0 * log_g + std::log1p(tau2 / g2);
  return std::log(tau2) + std::log1p(g2 / tau2);
}

// log of int g^p Q(g) (g^2+tau^2)^(-k) exp(-s/(g^2+tau^2)) dg over the
// window, integrated adaptively in u = ln g with the peak factored out.
double log_family_integral(double s, double p, double k, double tau, const LargeScaleDist& dist,
                           const QuadratureSpec& quad, const char* what) {
  if (!quad.valid()) throw std::invalid_argument("log_family_integral: invalid quadrature spec");
  const double tau2 = tau * tau;
  const double u_lo = std::log(quad.g_lo);
  const double u_hi = std::log(quad.g_hi);

  const auto log_integrand = [&](double u) {
    const double lg2t2 = log_g2_plus_t2(u, tau2);
    return (p + 1.0) * u + log_q_factor(u, dist) - k * lg2t2 - s * std::exp(-lg2t2);
  };

  double peak = kNegInf;
  const int scan = 257;
  for (int i = 0; i < scan; ++i) {
    const double u = u_lo + (u_hi - u_lo) * i / (scan - 1);
    peak = std::max(peak, log_integrand(u));
  }
  if (peak == kNegInf) return kNegInf;

  const auto scaled = [&](double u) { return std::exp(log_integrand(u) - peak); };
  const QuadResult r = integrate_adaptive(scaled, u_lo, u_hi, quad.rel_tol, quad.abs_tol,
                                          quad.max_subdivisions, 32);
  if (!r.converged)
    throw QuadratureError(std::string(what) + ": quadrature did not converge", r.error);
  if (r.value <= 0.0) return kNegInf;
  return peak + std::log(r.value);
}

double log_point_mass(double s, int i, double tau, double lambda, const LargeScaleDist& dist) {
  if (lambda >= 1.0) return kNegInf;
  if (lambda <= 0.0) return std::numeric_limits<double>::infinity();
  return std::log1p(-lambda) - std::log(lambda) - std::log(dist.a) -
         2.0 * i * std::log(tau) - s / (tau * tau);
}

double stable_sigmoid(double x) {
  // 1 / (1 + exp(-x))
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct LaguerreRule {
  std::vector<double> x, w;
};

const LaguerreRule& laguerre_rule(int order) {
  static LaguerreRule r64, r128;
  LaguerreRule& r = order <= 64 ? r64 : r128;
  if (r.x.empty()) gauss_laguerre(order <= 64 ? 64 : 128, r.x, r.w);
  return r;
}

double varphi_laguerre(double s, int i, double q0, int order) {
  const LaguerreRule& rule = laguerre_rule(order);
  double sum = 0.0;
  for (size_t k = 0; k < rule.x.size(); ++k) {
    const double t = rule.x[k];
    sum += rule.w[k] * std::pow(t, i) * stable_sigmoid(s * t - q0);
  }
  return sum;
}

}  // namespace

double log_nu(double s, int i, double tau, const LargeScaleDist& dist,
              const QuadratureSpec& quad) {
  return log_family_integral(s, 2.0 - dist.gamma, i + 1.0, tau, dist, quad, "nu");
}

double log_mu(double s, int i, double tau, const LargeScaleDist& dist,
              const QuadratureSpec& quad) {
  return log_family_integral(s, 4.0 - dist.gamma, i + 2.0, tau, dist, quad, "mu");
}

double log_xi_integral(double s, int i, double tau, const LargeScaleDist& dist,
                       const QuadratureSpec& quad) {
  return log_family_integral(s, -dist.gamma, static_cast<double>(i), tau, dist, quad, "xi");
}

double log_xi(double s, int i, double tau, double lambda, const LargeScaleDist& dist,
              const QuadratureSpec& quad) {
  if (lambda <= 0.0) return std::numeric_limits<double>::infinity();
  const double lpm = log_point_mass(s, i, tau, lambda, dist);
  return log_sum_exp(lpm, log_xi_integral(s, i, tau, dist, quad));
}

double nu(double s, int i, double tau, const LargeScaleDist& dist, const QuadratureSpec& quad) {
  return std::exp(log_nu(s, i, tau, dist, quad));
}

double xi(double s, int i, double tau, double lambda, const LargeScaleDist& dist,
          const QuadratureSpec& quad) {
  return std::exp(log_xi(s, i, tau, lambda, dist, quad));
}

double mu(double s, int i, double tau, const LargeScaleDist& dist, const QuadratureSpec& quad) {
  return std::exp(log_mu(s, i, tau, dist, quad));
}

double varphi(double s, int i, double lambda) {
  if (s <= 0.0) throw std::invalid_argument("varphi: s must be positive");
  if (lambda <= 0.0 || lambda > 1.0) throw std::invalid_argument("varphi: lambda in (0, 1]");
  const double gamma_i1 = std::tgamma(i + 1.0);
  if (lambda >= 1.0) return gamma_i1;

  const double q0 = std::log1p(-lambda) - std::log(lambda) + i * std::log1p(s);
  const double coarse = varphi_laguerre(s, i, q0, 64);
  const double fine = varphi_laguerre(s, i, q0, 128);
  if (fine > 0 && std::abs(fine - coarse) <= 1e-9 * fine) return fine;

  // Sharp sigmoid transition: the fixed rules disagree. Route through the
  // complement when it is small, otherwise integrate directly over the
  // region the sigmoid actually occupies.
  const double comp = varphi_complement(s, i, lambda);
  if (comp < 0.9) return gamma_i1 * (1.0 - comp);

  const double t_star = q0 > 0 ? q0 / s : 0.0;
  const double t_up = 60.0 + 10.0 * i + t_star;
  const auto f = [&](double t) {
    return std::pow(t, i) * std::exp(-t) * stable_sigmoid(s * t - q0);
  };
  const QuadResult r = integrate_adaptive(f, 0.0, t_up, 1e-10, 1e-300, 4000, 128);
  if (!r.converged) throw QuadratureError("varphi: quadrature did not converge", r.error);
  return r.value;
}

double varphi_complement(double s, int i, double lambda) {
  if (s <= 0.0) throw std::invalid_argument("varphi_complement: s must be positive");
  if (lambda <= 0.0 || lambda > 1.0)
    throw std::invalid_argument("varphi_complement: lambda in (0, 1]");
  if (lambda >= 1.0) return 0.0;

  const double q0 = std::log1p(-lambda) - std::log(lambda) + i * std::log1p(s);
  // Integrand t^i exp(-t) sigmoid(q0 - s t) / Gamma(i+1): negligible both
  // beyond the exp(-t) range and beyond the sigmoid cutoff.
  double t_up = 60.0 + 10.0 * i;
  const double t_sig = (q0 + 50.0 + 10.0 * i) / s;
  if (t_sig <= 0.0) {
    t_up = std::min(t_up, (60.0 + 10.0 * i) / (1.0 + s));
  } else {
    t_up = std::min(t_up, t_sig);
  }
  const double log_gamma_i1 = std::lgamma(i + 1.0);
  const auto f = [&](double t) {
    if (t <= 0.0) return 0.0;
    return std::exp(i * std::log(t) - t - log_gamma_i1) * stable_sigmoid(q0 - s * t);
  };
  const QuadResult r = integrate_adaptive(f, 0.0, t_up, 1e-10, 1e-300, 4000, 96);
  if (!r.converged)
    throw QuadratureError("varphi_complement: quadrature did not converge", r.error);
  return std::min(1.0, std::max(0.0, r.value));
}

namespace detail {

double reg_lower_gamma_series(int m, double x) {
  if (x <= 0.0) return 0.0;
  double sum = 1.0;
  double term = 1.0;
  for (int k = 1; k < 10000; ++k) {
    term *= x / (m + k);
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return std::exp(m * std::log(x) - x - std::lgamma(m + 1.0)) * sum;
}

double reg_lower_gamma_contfrac(int m, double x) {
  if (x <= 0.0) return 0.0;
  // Modified Lentz evaluation of the upper-gamma continued fraction.
  const double tiny = 1e-300;
  double b = x + 1.0 - m;
  double c = 1.0 / tiny;
  double d = 1.0 / (b == 0.0 ? tiny : b);
  double h = d;
  for (int k = 1; k < 10000; ++k) {
    const double an = -static_cast<double>(k) * (k - m);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  const double q = std::exp(-x + m * std::log(x) - std::lgamma(static_cast<double>(m))) * h;
  return 1.0 - q;
}

}  // namespace detail

double reg_lower_gamma(int m, double x) {
  if (m < 1) throw std::invalid_argument("reg_lower_gamma: m must be a positive integer");
  if (x <= 0.0) return 0.0;
  if (x < m + 1.0) return detail::reg_lower_gamma_series(m, x);
  return detail::reg_lower_gamma_contfrac(m, x);
}

SharedLsfEvaluator::SharedLsfEvaluator(const LargeScaleDist& dist, const QuadratureSpec& quad,
                                       double tau, int i, int panels, int order)
    : tau_(tau), index_(i), log_a_(std::log(dist.a)) {
  if (!quad.valid()) throw std::invalid_argument("SharedLsfEvaluator: invalid quadrature spec");
  if (!(tau > 0.0)) throw std::invalid_argument("SharedLsfEvaluator: tau must be positive");
  log_pm_prefactor_base_ = -2.0 * i * std::log(tau);

  std::vector<double> u, w;
  composite_gauss_legendre(std::log(quad.g_lo), std::log(quad.g_hi), panels, order, u, w);
  const size_t n = u.size();
  log_base_.resize(n);
  rho_xi_.resize(n);
  rho_mu_.resize(n);
  decay_.resize(n);
  const double tau2 = tau * tau;
  for (size_t q = 0; q < n; ++q) {
    const double lg2t2 = log_g2_plus_t2(u[q], tau2);
    // nu integrand prefactor in the u domain (jacobian folded into +1).
    log_base_[q] = std::log(w[q]) + (3.0 - dist.gamma) * u[q] + log_q_factor(u[q], dist) -
                   (i + 1.0) * lg2t2;
    rho_xi_[q] = std::exp(lg2t2 - 2.0 * u[q]);
    rho_mu_[q] = std::exp(2.0 * u[q] - lg2t2);
    decay_[q] = std::exp(-lg2t2);
  }
}

SharedLsfEvaluator::Logs SharedLsfEvaluator::eval(double s) const {
  const size_t n = log_base_.size();
  double peak = kNegInf;
  for (size_t q = 0; q < n; ++q) {
    const double t = log_base_[q] - s * decay_[q];
    if (t > peak) peak = t;
  }
  Logs out{kNegInf, kNegInf, kNegInf};
  if (peak == kNegInf) return out;
  double sum_nu = 0.0, sum_xi = 0.0, sum_mu = 0.0;
  for (size_t q = 0; q < n; ++q) {
    const double e = std::exp(log_base_[q] - s * decay_[q] - peak);
    sum_nu += e;
    sum_xi += e * rho_xi_[q];
    sum_mu += e * rho_mu_[q];
  }
  if (sum_nu > 0) out.nu = peak + std::log(sum_nu);
  if (sum_xi > 0) out.xi_integral = peak + std::log(sum_xi);
  if (sum_mu > 0) out.mu = peak + std::log(sum_mu);
  return out;
}

double SharedLsfEvaluator::log_xi(double s, double lambda) const {
  if (lambda <= 0.0) return std::numeric_limits<double>::infinity();
  const double integral = eval(s).xi_integral;
  if (lambda >= 1.0) return integral;
  const double lpm = std::log1p(-lambda) - std::log(lambda) - log_a_ + log_pm_prefactor_base_ -
                     s / (tau_ * tau_);
  return log_sum_exp(lpm, integral);
}

namespace {

// Fritsch-Carlson monotone cubic slopes.
std::vector<double> pchip_slopes(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = x.size();
  std::vector<double> d(n, 0.0);
  if (n < 2) return d;
  std::vector<double> h(n - 1), delta(n - 1);
  for (size_t i = 0; i + 1 < n; ++i) {
    h[i] = x[i + 1] - x[i];
    delta[i] = (y[i + 1] - y[i]) / h[i];
  }
  if (n == 2) {
    d[0] = d[1] = delta[0];
    return d;
  }
  for (size_t i = 1; i + 1 < n; ++i) {
    if (delta[i - 1] * delta[i] <= 0.0) {
      d[i] = 0.0;
    } else {
      const double w1 = 2.0 * h[i] + h[i - 1];
      const double w2 = h[i] + 2.0 * h[i - 1];
      d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
    }
  }
  // Shape-preserving one-sided endpoint slopes.
  const auto endpoint = [](double h0, double h1, double d0, double d1) {
    double s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (s * d0 <= 0.0)
      s = 0.0;
    else if (d0 * d1 <= 0.0 && std::abs(s) > 3.0 * std::abs(d0))
      s = 3.0 * d0;
    return s;
  };
  d[0] = endpoint(h[0], h[1], delta[0], delta[1]);
  d[n - 1] = endpoint(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
  return d;
}

}  // namespace

double DenoiserTable::lookup(double s) const { return lookup(s, nullptr); }

double DenoiserTable::lookup(double s, double* deriv) const {
  if (deriv) *deriv = 0.0;
  if (grid.empty()) return 0.0;
  if (s <= grid.front()) return ratio.front();
  if (s >= grid.back()) return ratio.back();
  const auto it = std::upper_bound(grid.begin(), grid.end(), s);
  const size_t i = static_cast<size_t>(it - grid.begin()) - 1;
  const double h = grid[i + 1] - grid[i];
  const double t = (s - grid[i]) / h;
  const double t2 = t * t;
  const double t3 = t2 * t;
  const double h00 = 2 * t3 - 3 * t2 + 1;
  const double h10 = t3 - 2 * t2 + t;
  const double h01 = -2 * t3 + 3 * t2;
  const double h11 = t3 - t2;
  const double value =
      h00 * ratio[i] + h10 * h * slope[i] + h01 * ratio[i + 1] + h11 * h * slope[i + 1];
  if (deriv) {
    const double dh00 = (6 * t2 - 6 * t) / h;
    const double dh10 = 3 * t2 - 4 * t + 1;
    const double dh01 = (-6 * t2 + 6 * t) / h;
    const double dh11 = 3 * t2 - 2 * t;
    *deriv = dh00 * ratio[i] + dh10 * slope[i] + dh01 * ratio[i + 1] + dh11 * slope[i + 1];
  }
  return value;
}

DenoiserTable build_denoiser_table(double tau, int m, const LargeScaleDist& dist, double lambda,
                                   const QuadratureSpec& quad) {
  if (!(tau > 0.0)) throw std::invalid_argument("build_denoiser_table: tau must be positive");
  DenoiserTable table;
  table.tau = tau;
  table.m = m;
  table.lambda = lambda;
  table.s_max = 40.0 * (quad.g_hi * quad.g_hi + tau * tau);

  if (lambda <= 0.0) {
    table.grid = {0.0, table.s_max};
    table.ratio = {0.0, 0.0};
    table.slope = {0.0, 0.0};
    return table;
  }

  const int knots = 2048;
  table.grid.resize(knots + 1);
  table.grid[0] = 0.0;
  const double s_min = 1e-8 * tau * tau;
  const double step = std::log(table.s_max / s_min) / (knots - 1);
  for (int k = 0; k < knots; ++k) table.grid[k + 1] = s_min * std::exp(step * k);

  const SharedLsfEvaluator shared(dist, quad, tau, m);
  table.ratio.resize(knots + 1);
  for (int k = 0; k <= knots; ++k) {
    const double s = table.grid[k];
    const double r = std::exp(shared.eval(s).nu - shared.log_xi(s, lambda));
    table.ratio[k] = std::clamp(r, 0.0, 1.0 - 1e-15);
  }
  table.slope = pchip_slopes(table.grid, table.ratio);
  return table;
}

}  // namespace ampdet
