#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "ampdet/channel_model.hpp"
#include "ampdet/special_functions.hpp"

namespace ampdet {

enum class FadingKnowledge { stat_g, known_g };

// Trace of the scalar recursion tau_{t+1}^2 = sigma_w^2 + (N/L) MSE(tau_t).
struct SeTrace {
  std::vector<double> taus;
  bool converged = false;
  double tau_inf = 0.0;
  bool monotone_after_first = false;  // recorded, not assumed
  FadingKnowledge knowledge = FadingKnowledge::stat_g;
  int m = 1;
};

struct SeStop {
  int max_iter = 200;
  double rel_tol = 1e-8;
};

// Per-coordinate MSE of the MMSE denoisers at effective noise level tau.
double mse_stat(double tau, const LargeScaleDist& dist, double lambda,
                const QuadratureSpec& quad);
double mse_known_g(double tau, const LargeScaleDist& dist, double lambda,
                   const QuadratureSpec& quad);
double mse_mmv(double tau, int m, FadingKnowledge knowledge, const LargeScaleDist& dist,
               double lambda, const QuadratureSpec& quad);

// Starting point matching z^0 = y: the matched-filter noise level
// sigma_w^2 + (N/L) lambda E[g^2], with E[g^2] over the quadrature window.
double default_se_tau0(double sigma_w, int n, int l, double lambda, double e_g2);

SeTrace se_recursion(double sigma_w, int n, int l, const std::function<double(double)>& mse_fn,
                     double tau0, const SeStop& stop = {});

struct MonteCarloMse {
  double mse = 0.0;
  double std_err = 0.0;
};

// Sample-mean estimate of E |eta(X + tau V) - X|^2 under the activity/fading
// prior, with g drawn by inverse CDF over the quadrature window so that the
// sampled prior matches the analytic integrals exactly.
MonteCarloMse mse_monte_carlo(
    const std::function<std::complex<double>(std::complex<double>)>& denoiser, double tau,
    long draws, std::uint64_t seed, double lambda, const LsfCdf& prior);

// Row variant: the error is the full squared row norm (M tau^2 for the
// identity denoiser), i.e. M times the per-coordinate MSE.
MonteCarloMse mse_monte_carlo_rows(
    const std::function<Eigen::RowVectorXcd(const Eigen::RowVectorXcd&)>& denoiser, int m,
    double tau, long draws, std::uint64_t seed, double lambda, const LsfCdf& prior);

}  // namespace ampdet
