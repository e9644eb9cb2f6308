#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ampdet/smv_amp.hpp"

namespace ampdet {

struct CosampConfig {
  int sparsity_k = 1;
  int max_iter = 20;
  double ls_tol = 1e-12;        // rank tolerance of the least-squares solves
  double residual_tol = 1e-10;  // stop when ||v|| falls below this
};

struct CosampResult {
  Eigen::VectorXcd x;
  std::vector<int> support;  // indices of the final k-sparse estimate
  double residual_norm = 0.0;
  bool converged = false;
  bool ill_conditioned = false;  // a least-squares solve was rank deficient
};

// Greedy support pursuit: merge the 2k largest matched-filter entries with
// the previous support, least-squares on the merged support, prune to the k
// largest, and keep the update only if the residual improved.
CosampResult cosamp(const Eigen::MatrixXcd& pilots, const Eigen::VectorXcd& y,
                    const CosampConfig& cfg);

// Soft-thresholding AMP with theta_t = kappa * tau_hat_t; thin wrapper over
// the shared recursion.
AmpResult run_soft_amp(const Eigen::MatrixXcd& pilots, const Eigen::VectorXcd& y, double kappa,
                       const StopRule& stop = {});

}  // namespace ampdet
