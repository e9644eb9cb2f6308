#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ampdet/channel_model.hpp"
#include "ampdet/smv_amp.hpp"
#include "ampdet/special_functions.hpp"

namespace ampdet {

// State of the vector-denoiser recursion. The effective noise covariance
// stays a scaled identity throughout, so only the scalar
// tau_hat = ||Z||_F / sqrt(L M) is tracked.
struct VectorAmpState {
  Eigen::MatrixXcd x;  // N x M estimate
  Eigen::MatrixXcd z;  // L x M residual
  double tau_hat = 0.0;
  int iter = 0;
};

// Activity beliefs exchanged between the per-antenna stages of the parallel
// algorithm; entries live in [eps, 1 - eps].
struct MmvBeliefs {
  Eigen::MatrixXd pi_in;   // N x M, messages into each stage
  Eigen::MatrixXd pi_out;  // N x M, messages out of each stage
};

inline constexpr double kBeliefEps = 1e-12;

// Row denoisers eta(r) = r * f(||r||^2).
Eigen::RowVectorXcd vector_denoise_stat(const Eigen::RowVectorXcd& rt, double tau,
                                        const DenoiserTable& table);
Eigen::RowVectorXcd vector_denoise_known_g(const Eigen::RowVectorXcd& rt, double g, double tau,
                                           double lambda);

// General-covariance conditional means; Sigma must be Hermitian positive
// definite. These reduce to the row denoisers above at Sigma = tau^2 I.
Eigen::RowVectorXcd vector_denoise_general_known_g(const Eigen::RowVectorXcd& rt,
                                                   const Eigen::MatrixXcd& sigma, double g,
                                                   double lambda);
Eigen::RowVectorXcd vector_denoise_general_stat(const Eigen::RowVectorXcd& rt,
                                                const Eigen::MatrixXcd& sigma,
                                                const LargeScaleDist& dist, double lambda,
                                                const QuadratureSpec& quad);

// M x M Jacobian of the row denoiser, f I + f' r^H r, averaged over rows.
Eigen::MatrixXcd vector_denoiser_jacobian_mean(const DenoiserKind& kind,
                                               const Eigen::MatrixXcd& xt, double tau,
                                               const DenoiserTable* table = nullptr);

VectorAmpState vamp_step(const Eigen::MatrixXcd& pilots, const Eigen::MatrixXcd& y,
                         const VectorAmpState& state, const DenoiserKind& kind,
                         DenoiserTableCache* cache = nullptr);

struct VampResult {
  VectorAmpState state;
  Eigen::MatrixXcd x_tilde;  // S^H Z + X at the final state
  std::vector<double> tau_trace;
  bool converged = false;
};

VampResult run_vamp(const Eigen::MatrixXcd& pilots, const Eigen::MatrixXcd& y,
                    const DenoiserKind& kind, const StopRule& stop = {});

// (into)-phase: fuse the other stages' outgoing beliefs with the prior.
Eigen::MatrixXd ampmmv_into_phase(const Eigen::MatrixXd& pi_out, double lambda);

// (within)-phase denoiser: the known-g MMSE denoiser with the prior
// replaced by the incoming belief.
std::complex<double> ampmmv_within_denoise(std::complex<double> xt, double g, double tau,
                                           double pi_in);

// (out)-phase: posterior activity probability per user and stage from the
// final matched-filter outputs.
Eigen::MatrixXd ampmmv_out_phase(const Eigen::MatrixXcd& xt_final, const Eigen::VectorXd& lsf,
                                 const Eigen::VectorXd& tau_per_stage);

struct AmpMmvSchedule {
  int outer = 5;   // I
  int inner = 25;  // T
};

struct AmpMmvResult {
  Eigen::MatrixXcd x;        // N x M estimate assembled from the stages
  Eigen::MatrixXcd x_tilde;  // per-stage matched-filter outputs, N x M
  MmvBeliefs beliefs;
  Eigen::VectorXd tau_final;             // per-stage final tau_hat
  std::vector<Eigen::VectorXd> tau_trace;  // per outer round
  bool converged = false;
};

AmpMmvResult run_parallel_ampmmv(const Eigen::MatrixXcd& pilots, const Eigen::MatrixXcd& y,
                                 const Eigen::VectorXd& lsf, double lambda,
                                 const AmpMmvSchedule& schedule = {});

}  // namespace ampdet
