#pragma once

#include <vector>

#include "ampdet/channel_model.hpp"
#include "ampdet/quadrature.hpp"

namespace ampdet {

// Integral families over the large-scale fading amplitude, for noise level
// tau and positive integer index i:
//
//   nu_i(s) = int g^(2-gamma) Q(g) (g^2+tau^2)^(-i-1) exp(-s/(g^2+tau^2)) dg
//   xi_i(s) = (1-lambda)/(lambda a tau^(2i)) exp(-s/tau^2)
//           + int g^(-gamma)  Q(g) (g^2+tau^2)^(-i)   exp(-s/(g^2+tau^2)) dg
//   mu_i(s) = int g^(4-gamma) Q(g) (g^2+tau^2)^(-i-2) exp(-s/(g^2+tau^2)) dg
//
// All values are produced in log-space; exponential factors never touch
// denormal range even when s/tau^2 is astronomically large.

double log_nu(double s, int i, double tau, const LargeScaleDist& dist, const QuadratureSpec& quad);
double log_mu(double s, int i, double tau, const LargeScaleDist& dist, const QuadratureSpec& quad);
// The g-integral part of xi_i (no point-mass term).
double log_xi_integral(double s, int i, double tau, const LargeScaleDist& dist,
                       const QuadratureSpec& quad);
double log_xi(double s, int i, double tau, double lambda, const LargeScaleDist& dist,
              const QuadratureSpec& quad);

double nu(double s, int i, double tau, const LargeScaleDist& dist, const QuadratureSpec& quad);
double xi(double s, int i, double tau, double lambda, const LargeScaleDist& dist,
          const QuadratureSpec& quad);
double mu(double s, int i, double tau, const LargeScaleDist& dist, const QuadratureSpec& quad);

// varphi_i(s) = int t^i exp(-t) / (1 + (1-lambda)(1+s)^i exp(-s t)/lambda) dt,
// evaluated with a Gauss-Laguerre rule, escalating the order and falling back
// to adaptive panels when the sigmoid transition is too sharp for the rule.
double varphi(double s, int i, double lambda);

// 1 - varphi_i(s)/Gamma(i+1), computed directly as its own integral. For
// large s the complement decays like 1/s and would drown in roundoff if
// formed by subtraction.
double varphi_complement(double s, int i, double lambda);

// Regularized lower incomplete gamma P(m, x) for integer m >= 1; the CDF of
// a sum of m unit-rate exponentials.
double reg_lower_gamma(int m, double x);

namespace detail {
// The two independent evaluation routes behind reg_lower_gamma.
double reg_lower_gamma_series(int m, double x);
double reg_lower_gamma_contfrac(int m, double x);
}  // namespace detail

// Shared-node evaluator: a fixed composite Gauss-Legendre rule in u = ln g,
// with per-node prefactors cached so that nu_i, the xi_i integral, and mu_i
// at any s cost a single pass of exponentials. Used by the denoiser tables
// and the MSE integrals, where thousands of s values share one (tau, i).
class SharedLsfEvaluator {
 public:
  SharedLsfEvaluator(const LargeScaleDist& dist, const QuadratureSpec& quad, double tau, int i,
                     int panels = 64, int order = 12);

  struct Logs {
    double nu;
    double xi_integral;
    double mu;
  };
  Logs eval(double s) const;

  // log xi_i(s) with the point-mass term folded in.
  double log_xi(double s, double lambda) const;

  double tau() const { return tau_; }
  int index() const { return index_; }

 private:
  double tau_;
  int index_;
  double log_a_;
  double log_pm_prefactor_base_;  // -2 i ln tau
  std::vector<double> log_base_;  // log of the nu integrand prefactor (incl. weight)
  std::vector<double> rho_xi_;    // (g^2+tau^2)/g^2
  std::vector<double> rho_mu_;    // g^2/(g^2+tau^2)
  std::vector<double> decay_;     // 1/(g^2+tau^2), ascending
};

// Lookup table of the vector-denoiser shrinkage ratio nu_m(s)/xi_m(s) on a
// log-spaced grid in s = squared input norm, with monotone cubic
// interpolation and endpoint clamping. Rebuilt when tau drifts.
struct DenoiserTable {
  double tau = 0.0;
  int m = 1;
  double lambda = 0.0;
  double s_max = 0.0;
  std::vector<double> grid;   // knots, grid[0] == 0
  std::vector<double> ratio;  // shrinkage factor in [0, 1)
  std::vector<double> slope;  // interpolant derivatives at knots

  double lookup(double s) const;
  // Shrinkage factor and its derivative d ratio / d s.
  double lookup(double s, double* deriv) const;
};

DenoiserTable build_denoiser_table(double tau, int m, const LargeScaleDist& dist, double lambda,
                                   const QuadratureSpec& quad);

}  // namespace ampdet
