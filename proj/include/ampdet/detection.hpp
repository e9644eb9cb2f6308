#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "ampdet/channel_model.hpp"
#include "ampdet/state_evolution.hpp"

namespace ampdet {

// All likelihood-ratio tests here are monotone in the magnitude (or row
// norm) of the matched-filter variable, so detection reduces to comparing
// that statistic against a threshold l: active iff statistic > l, which
// makes Pf(l) = exp(-l^2/tau^2) at M = 1.
bool decide(double statistic, double threshold);

double llr_stat_smv(std::complex<double> xt, double tau, const LargeScaleDist& dist,
                    const QuadratureSpec& quad);
double llr_known_g_smv(std::complex<double> xt, double g, double tau);
double llr_stat_mmv(const Eigen::RowVectorXcd& rt, double tau, const LargeScaleDist& dist,
                    const QuadratureSpec& quad);
double llr_known_g_mmv(const Eigen::RowVectorXcd& rt, double g, double tau);
// Final decision statistic of the parallel per-antenna algorithm: the
// known-g MMV ratio applied to the per-stage matched-filter outputs.
double llr_ampmmv(const Eigen::RowVectorXcd& xt_row, double g, double tau);

// False-alarm probability at threshold l: exp(-l^2/tau^2) for M = 1 and
// the regularized upper gamma tail for M >= 1.
double pf_analytic(double l, double tau, int m);

// Missed-detection probability of a user with known fading amplitude g.
double pm_analytic_known_g(double l, double g, double tau, int m);

// Missed-detection probability averaged over the fading distribution
// (statistics-only detector).
double pm_analytic_stat(double l, double tau, int m, const LargeScaleDist& dist,
                        const QuadratureSpec& quad);

// Large-N limit of the average missed-detection probability when a common
// threshold is used with per-user known fading.
double pm_average_known_g(double l, double tau, int m, const LargeScaleDist& dist,
                          const QuadratureSpec& quad);

double threshold_for_pf(double target_pf, double tau, int m);

// Threshold at which Pf equals the (average) Pm for the given mode.
double equal_error_threshold(double tau, int m, FadingKnowledge knowledge,
                             const LargeScaleDist& dist, const QuadratureSpec& quad);

struct EmpiricalRates {
  long n_inactive = 0;
  long n_active = 0;
  long false_alarms = 0;
  long misses = 0;
  std::optional<double> pf;  // empty when there were no inactive users
  std::optional<double> pm;  // empty when there were no active users
};

EmpiricalRates empirical_rates(const std::vector<std::uint8_t>& decisions,
                               const std::vector<std::uint8_t>& truth);

// Wilson score interval for a binomial proportion.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};
Interval wilson_interval(long successes, long trials, double z = 3.0);

struct DetectionReport {
  FadingKnowledge knowledge = FadingKnowledge::stat_g;
  int m = 1;
  double tau = 0.0;
  std::vector<double> thresholds;
  std::vector<double> pf_analytic;
  std::vector<double> pm_analytic;
  std::vector<long> false_alarms;
  std::vector<long> misses;
  std::vector<long> n_inactive;
  std::vector<long> n_active;

  void to_csv(std::ostream& out) const;
  static DetectionReport from_csv(std::istream& in);
};

}  // namespace ampdet
