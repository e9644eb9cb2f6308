#pragma once

#include <Eigen/Dense>
#include <complex>
#include <optional>
#include <vector>

#include "ampdet/channel_model.hpp"
#include "ampdet/special_functions.hpp"

namespace ampdet {

// Per-iteration state of the single-antenna recursion: estimate x_t,
// residual z_t, and the empirical noise-level estimate
// tau_hat = ||z_t||_2 / sqrt(L).
struct AmpState {
  Eigen::VectorXcd x;
  Eigen::VectorXcd z;
  double tau_hat = 0.0;
  int iter = 0;
};

struct StopRule {
  int max_iter = 50;
  double rel_tol = 1e-6;
};

// Denoiser selection plus the prior it needs. The soft-threshold denoiser
// follows the schedule theta_t = kappa * tau_hat_t; `identity` is a test
// hook with eta(x) = x.
struct DenoiserKind {
  enum class Tag { mmse_stat, mmse_known_g, soft_threshold, identity };

  Tag tag = Tag::identity;
  double lambda = 0.0;
  LargeScaleDist dist{};
  QuadratureSpec quad{};
  Eigen::VectorXd lsf;  // per-user g_n, required for mmse_known_g
  double soft_kappa = 1.0;

  static DenoiserKind mmse_stat(double lambda, const LargeScaleDist& dist,
                                const QuadratureSpec& quad);
  static DenoiserKind mmse_known_g(double lambda, Eigen::VectorXd lsf);
  static DenoiserKind soft_threshold(double kappa);
  static DenoiserKind identity();
};

// Rebuilds the shrinkage table only when tau has drifted by more than 0.1%
// relative (or the prior changed); AMP iterations near convergence reuse it.
class DenoiserTableCache {
 public:
  const DenoiserTable& get(double tau, int m, const LargeScaleDist& dist, double lambda,
                           const QuadratureSpec& quad);

 private:
  std::optional<DenoiserTable> table_;
};

// Pointwise denoisers. All have the form eta(x) = x * f(|x|^2) with real f,
// so the Onsager derivative is f(s) + s f'(s) evaluated at s = |x|^2.
std::complex<double> mmse_denoise_stat(std::complex<double> xt, double tau,
                                       const DenoiserTable& table);
std::complex<double> mmse_denoise_known_g(std::complex<double> xt, double g, double tau,
                                          double lambda);
std::complex<double> soft_threshold(std::complex<double> xt, double theta);

double mmse_denoise_stat_deriv(std::complex<double> xt, const DenoiserTable& table);
double mmse_denoise_known_g_deriv(std::complex<double> xt, double g, double tau, double lambda);
double soft_threshold_deriv(std::complex<double> xt, double theta);

// Empirical average of the denoiser derivative over all entries; the scale
// factor of the Onsager correction (N/L) z_t <eta'>.
double denoiser_divergence(const DenoiserKind& kind, const Eigen::VectorXcd& xt, double tau,
                           const DenoiserTable* table = nullptr);

AmpState amp_step(const Eigen::MatrixXcd& pilots, const Eigen::VectorXcd& y,
                  const AmpState& state, const DenoiserKind& kind,
                  DenoiserTableCache* cache = nullptr);

struct AmpResult {
  AmpState state;
  Eigen::VectorXcd x_tilde;  // matched-filter variable S^H z + x at the final state
  std::vector<double> tau_trace;
  bool converged = false;
};

AmpResult run_amp(const Eigen::MatrixXcd& pilots, const Eigen::VectorXcd& y,
                  const DenoiserKind& kind, const StopRule& stop = {});

}  // namespace ampdet
