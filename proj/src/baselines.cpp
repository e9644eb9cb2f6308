#include "ampdet/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ampdet {

namespace {

std::vector<int> largest_indices(const Eigen::VectorXd& mags, int k) {
  std::vector<int> idx(mags.size());
  std::iota(idx.begin(), idx.end(), 0);
  k = std::min<int>(k, static_cast<int>(idx.size()));
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(),
                    [&](int a, int b) { return mags[a] > mags[b]; });
  idx.resize(k);
  return idx;
}

}  // namespace

CosampResult cosamp(const Eigen::MatrixXcd& pilots, const Eigen::VectorXcd& y,
                    const CosampConfig& cfg) {
  const Eigen::Index l = pilots.rows();
  const Eigen::Index n = pilots.cols();
  if (y.size() != l) throw std::invalid_argument("cosamp: dimension mismatch");
  if (cfg.sparsity_k < 1 || cfg.sparsity_k > l)
    throw std::invalid_argument("cosamp: require 1 <= k <= L");

  CosampResult result;
  result.x = Eigen::VectorXcd::Zero(n);
  Eigen::VectorXcd residual = y;
  result.residual_norm = residual.norm();
  std::vector<int> support;

  for (int it = 0; it < cfg.max_iter; ++it) {
    const Eigen::VectorXd proxy = (pilots.adjoint() * residual).cwiseAbs();
    std::vector<int> merged = largest_indices(proxy, 2 * cfg.sparsity_k);
    merged.insert(merged.end(), support.begin(), support.end());
    std::sort(merged.begin(), merged.end());
    merged.erase(std::unique(merged.begin(), merged.end()), merged.end());

    Eigen::MatrixXcd sub(l, static_cast<Eigen::Index>(merged.size()));
    for (size_t j = 0; j < merged.size(); ++j) sub.col(j) = pilots.col(merged[j]);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(sub);
    qr.setThreshold(cfg.ls_tol);
    if (qr.rank() < static_cast<Eigen::Index>(merged.size())) result.ill_conditioned = true;
    const Eigen::VectorXcd coeffs = qr.solve(y);

    std::vector<int> kept = largest_indices(coeffs.cwiseAbs(), cfg.sparsity_k);
    Eigen::VectorXcd candidate = Eigen::VectorXcd::Zero(n);
    std::vector<int> cand_support;
    cand_support.reserve(kept.size());
    for (int j : kept) {
      candidate[merged[j]] = coeffs[j];
      cand_support.push_back(merged[j]);
    }

    const double cand_norm = (y - pilots * candidate).norm();
    if (cand_norm >= result.residual_norm && it > 0) break;  // accept only improvements
    result.x = std::move(candidate);
    support = std::move(cand_support);
    residual = y - pilots * result.x;
    result.residual_norm = cand_norm;
    if (result.residual_norm < cfg.residual_tol) {
      result.converged = true;
      break;
    }
  }

  std::sort(support.begin(), support.end());
  result.support = std::move(support);
  return result;
}

AmpResult run_soft_amp(const Eigen::MatrixXcd& pilots, const Eigen::VectorXcd& y, double kappa,
                       const StopRule& stop) {
  return run_amp(pilots, y, DenoiserKind::soft_threshold(kappa), stop);
}

}  // namespace ampdet
