#include "ampdet/detection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "ampdet/special_functions.hpp"

namespace ampdet {

namespace {

double llr_stat_norm2(double s, double tau, int m, const LargeScaleDist& dist,
                      const QuadratureSpec& quad) {
  // log integral a tau^(2m) g^(-gamma) Q (g^2+tau^2)^(-m) exp(s Delta) dg,
  // with exp(s/tau^2) factored out of the integrand.
  const double t2 = tau * tau;
  return s / t2 + std::log(dist.a) + m * std::log(t2) +
         log_xi_integral(s, m, tau, dist, quad);
}

double llr_known_norm2(double s, double g, double tau, int m) {
  const double g2 = g * g;
  const double t2 = tau * tau;
  const double delta = 1.0 / t2 - 1.0 / (g2 + t2);
  return m * (std::log(t2) - std::log(g2 + t2)) + s * delta;
}

}  // namespace

bool decide(double statistic, double threshold) { return statistic > threshold; }

double llr_stat_smv(std::complex<double> xt, double tau, const LargeScaleDist& dist,
                    const QuadratureSpec& quad) {
  return llr_stat_norm2(std::norm(xt), tau, 1, dist, quad);
}

double llr_known_g_smv(std::complex<double> xt, double g, double tau) {
  return llr_known_norm2(std::norm(xt), g, tau, 1);
}

double llr_stat_mmv(const Eigen::RowVectorXcd& rt, double tau, const LargeScaleDist& dist,
                    const QuadratureSpec& quad) {
  return llr_stat_norm2(rt.squaredNorm(), tau, static_cast<int>(rt.size()), dist, quad);
}

double llr_known_g_mmv(const Eigen::RowVectorXcd& rt, double g, double tau) {
  return llr_known_norm2(rt.squaredNorm(), g, tau, static_cast<int>(rt.size()));
}

double llr_ampmmv(const Eigen::RowVectorXcd& xt_row, double g, double tau) {
  return llr_known_norm2(xt_row.squaredNorm(), g, tau, static_cast<int>(xt_row.size()));
}

double pf_analytic(double l, double tau, int m) {
  if (l < 0.0) throw std::invalid_argument("pf_analytic: l must be nonnegative");
  const double y = l * l / (tau * tau);
  if (m == 1) return std::exp(-y);
  return 1.0 - reg_lower_gamma(m, y);
}

double pm_analytic_known_g(double l, double g, double tau, int m) {
  if (l < 0.0) throw std::invalid_argument("pm_analytic_known_g: l must be nonnegative");
  const double scale = g * g + tau * tau;
  if (m == 1) return -std::expm1(-l * l / scale);
  return reg_lower_gamma(m, l * l / scale);
}

double pm_analytic_stat(double l, double tau, int m, const LargeScaleDist& dist,
                        const QuadratureSpec& quad) {
  if (l < 0.0) throw std::invalid_argument("pm_analytic_stat: l must be nonnegative");
  if (l == 0.0) return 0.0;
  const double t2 = tau * tau;
  const double l2 = l * l;
  const auto f = [&](double u) {
    const double g = std::exp(u);
    const double cdf = reg_lower_gamma(m, l2 / (g * g + t2));
    return std::pow(g, 1.0 - dist.gamma) * q_factor(g, dist) * cdf;
  };
  const QuadResult r = integrate_adaptive(f, std::log(quad.g_lo), std::log(quad.g_hi), 1e-10,
                                          quad.abs_tol, quad.max_subdivisions, 32);
  if (!r.converged) throw QuadratureError("pm_analytic_stat: did not converge", r.error);
  return std::clamp(dist.a * r.value, 0.0, 1.0);
}

double pm_average_known_g(double l, double tau, int m, const LargeScaleDist& dist,
                          const QuadratureSpec& quad) {
  if (l < 0.0) throw std::invalid_argument("pm_average_known_g: l must be nonnegative");
  if (l == 0.0) return 0.0;
  const auto f = [&](double u) {
    const double g = std::exp(u);
    return std::pow(g, 1.0 - dist.gamma) * q_factor(g, dist) *
           pm_analytic_known_g(l, g, tau, m);
  };
  const QuadResult r = integrate_adaptive(f, std::log(quad.g_lo), std::log(quad.g_hi), 1e-10,
                                          quad.abs_tol, quad.max_subdivisions, 32);
  if (!r.converged) throw QuadratureError("pm_average_known_g: did not converge", r.error);
  return std::clamp(dist.a * r.value, 0.0, 1.0);
}

double threshold_for_pf(double target_pf, double tau, int m) {
  if (!(target_pf > 0.0 && target_pf <= 1.0))
    throw std::invalid_argument("threshold_for_pf: target in (0, 1]");
  if (target_pf >= 1.0) return 0.0;
  if (m == 1) return tau * std::sqrt(-std::log(target_pf));
  // Invert the chi-square tail: find y with P(m, y) = 1 - target.
  const double want = 1.0 - target_pf;
  double lo = 0.0, hi = 1.0;
  while (reg_lower_gamma(m, hi) < want) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (reg_lower_gamma(m, mid) < want)
      lo = mid;
    else
      hi = mid;
  }
  return tau * std::sqrt(0.5 * (lo + hi));
}

double equal_error_threshold(double tau, int m, FadingKnowledge knowledge,
                             const LargeScaleDist& dist, const QuadratureSpec& quad) {
  const auto pm = [&](double l) {
    return knowledge == FadingKnowledge::stat_g ? pm_analytic_stat(l, tau, m, dist, quad)
                                                : pm_average_known_g(l, tau, m, dist, quad);
  };
  const auto h = [&](double l) { return pf_analytic(l, tau, m) - pm(l); };

  double lo = 0.0;
  double hi = tau;
  while (h(hi) > 0.0) {
    hi *= 2.0;
    if (hi > 1e12 * tau) throw std::runtime_error("equal_error_threshold: no crossing found");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (h(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-14 * hi) break;
  }
  return 0.5 * (lo + hi);
}

EmpiricalRates empirical_rates(const std::vector<std::uint8_t>& decisions,
                               const std::vector<std::uint8_t>& truth) {
  if (decisions.size() != truth.size())
    throw std::invalid_argument("empirical_rates: length mismatch");
  EmpiricalRates rates;
  for (size_t i = 0; i < truth.size(); ++i) {
    if (truth[i]) {
      ++rates.n_active;
      if (!decisions[i]) ++rates.misses;
    } else {
      ++rates.n_inactive;
      if (decisions[i]) ++rates.false_alarms;
    }
  }
  if (rates.n_inactive > 0)
    rates.pf = static_cast<double>(rates.false_alarms) / rates.n_inactive;
  if (rates.n_active > 0) rates.pm = static_cast<double>(rates.misses) / rates.n_active;
  return rates;
}

Interval wilson_interval(long successes, long trials, double z) {
  Interval iv;
  if (trials <= 0) return iv;
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  iv.lo = std::max(0.0, center - half);
  iv.hi = std::min(1.0, center + half);
  return iv;
}

void DetectionReport::to_csv(std::ostream& out) const {
  out << "# mode=" << (knowledge == FadingKnowledge::stat_g ? "stat_g" : "known_g")
      << " m=" << m << " tau=";
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%.17g\n", tau);
  out << buf;
  out << "l,pf_analytic,pm_analytic,pf_emp,pm_emp,pf_lo,pf_hi,pm_lo,pm_hi,n_inactive,n_active\n";
  for (size_t i = 0; i < thresholds.size(); ++i) {
    const Interval pf_iv = wilson_interval(false_alarms[i], n_inactive[i]);
    const Interval pm_iv = wilson_interval(misses[i], n_active[i]);
    const double pf_emp =
        n_inactive[i] > 0 ? static_cast<double>(false_alarms[i]) / n_inactive[i] : -1.0;
    const double pm_emp = n_active[i] > 0 ? static_cast<double>(misses[i]) / n_active[i] : -1.0;
    std::snprintf(buf, sizeof(buf),
                  "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%ld,%ld\n",
                  thresholds[i], pf_analytic[i], pm_analytic[i], pf_emp, pm_emp, pf_iv.lo,
                  pf_iv.hi, pm_iv.lo, pm_iv.hi, n_inactive[i], n_active[i]);
    out << buf;
  }
}

DetectionReport DetectionReport::from_csv(std::istream& in) {
  DetectionReport report;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# mode=", 0) != 0)
    throw std::runtime_error("DetectionReport: bad header");
  {
    char mode[32] = {0};
    if (std::sscanf(line.c_str(), "# mode=%31s m=%d tau=%lg", mode, &report.m, &report.tau) != 3)
      throw std::runtime_error("DetectionReport: malformed header");
    report.knowledge =
        std::string(mode) == "known_g" ? FadingKnowledge::known_g : FadingKnowledge::stat_g;
  }
  if (!std::getline(in, line)) throw std::runtime_error("DetectionReport: missing column row");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double l, pfa, pma, pfe, pme, plo, phi, mlo, mhi;
    long ni, na;
    if (std::sscanf(line.c_str(), "%lg,%lg,%lg,%lg,%lg,%lg,%lg,%lg,%lg,%ld,%ld", &l, &pfa, &pma,
                    &pfe, &pme, &plo, &phi, &mlo, &mhi, &ni, &na) != 11)
      throw std::runtime_error("DetectionReport: malformed row");
    report.thresholds.push_back(l);
    report.pf_analytic.push_back(pfa);
    report.pm_analytic.push_back(pma);
    report.n_inactive.push_back(ni);
    report.n_active.push_back(na);
    report.false_alarms.push_back(ni > 0 && pfe >= 0 ? std::lround(pfe * ni) : 0);
    report.misses.push_back(na > 0 && pme >= 0 ? std::lround(pme * na) : 0);
  }
  return report;
}

}  // namespace ampdet
