#include "ampdet/smv_amp.hpp"

#include <cmath>
#include <stdexcept>

namespace ampdet {

namespace {

double stable_logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Shrinkage factor f and derivative f' of the known-g denoiser,
//   f(s) = w / (1 + exp(q0 - Delta s)),  w = g^2/(g^2+tau^2),
// with q0 = log((1-lambda)/lambda) + log((g^2+tau^2)/tau^2).
void known_g_factor(double s, double g, double tau, double lambda, double* f, double* df) {
  const double g2 = g * g;
  const double t2 = tau * tau;
  const double wiener = g2 / (g2 + t2);
  if (lambda <= 0.0) {
    *f = 0.0;
    if (df) *df = 0.0;
    return;
  }
  if (lambda >= 1.0) {
    *f = wiener;
    if (df) *df = 0.0;
    return;
  }
  const double delta = 1.0 / t2 - 1.0 / (g2 + t2);
  const double q = std::log1p(-lambda) - std::log(lambda) + std::log1p(g2 / t2) - delta * s;
  const double sig = stable_logistic(-q);  // 1/(1+e^q)
  *f = wiener * sig;
  if (df) *df = wiener * delta * sig * (1.0 - sig);
}

}  // namespace

DenoiserKind DenoiserKind::mmse_stat(double lambda, const LargeScaleDist& dist,
                                     const QuadratureSpec& quad) {
  DenoiserKind kind;
  kind.tag = Tag::mmse_stat;
  kind.lambda = lambda;
  kind.dist = dist;
  kind.quad = quad;
  return kind;
}

DenoiserKind DenoiserKind::mmse_known_g(double lambda, Eigen::VectorXd lsf) {
  DenoiserKind kind;
  kind.tag = Tag::mmse_known_g;
  kind.lambda = lambda;
  kind.lsf = std::move(lsf);
  return kind;
}

DenoiserKind DenoiserKind::soft_threshold(double kappa) {
  DenoiserKind kind;
  kind.tag = Tag::soft_threshold;
  kind.soft_kappa = kappa;
  return kind;
}

DenoiserKind DenoiserKind::identity() { return DenoiserKind{}; }

const DenoiserTable& DenoiserTableCache::get(double tau, int m, const LargeScaleDist& dist,
                                             double lambda, const QuadratureSpec& quad) {
  if (!table_ || table_->m != m || table_->lambda != lambda ||
      std::abs(table_->tau - tau) > 1e-3 * table_->tau) {
    table_ = build_denoiser_table(tau, m, dist, lambda, quad);
  }
  return *table_;
}

std::complex<double> mmse_denoise_stat(std::complex<double> xt, double tau,
                                       const DenoiserTable& table) {
  (void)tau;  // the table is built for its tau; kept in the signature for clarity
  return xt * table.lookup(std::norm(xt));
}

double mmse_denoise_stat_deriv(std::complex<double> xt, const DenoiserTable& table) {
  const double s = std::norm(xt);
  double df = 0.0;
  const double f = table.lookup(s, &df);
  return f + s * df;
}

std::complex<double> mmse_denoise_known_g(std::complex<double> xt, double g, double tau,
                                          double lambda) {
  double f = 0.0;
  known_g_factor(std::norm(xt), g, tau, lambda, &f, nullptr);
  return xt * f;
}

double mmse_denoise_known_g_deriv(std::complex<double> xt, double g, double tau, double lambda) {
  const double s = std::norm(xt);
  double f = 0.0, df = 0.0;
  known_g_factor(s, g, tau, lambda, &f, &df);
  return f + s * df;
}

std::complex<double> soft_threshold(std::complex<double> xt, double theta) {
  const double mag = std::abs(xt);
  if (mag <= theta) return {0.0, 0.0};
  return xt * (1.0 - theta / mag);
}

double soft_threshold_deriv(std::complex<double> xt, double theta) {
  const double mag = std::abs(xt);
  if (mag <= theta) return 0.0;
  return 1.0 - 0.5 * theta / mag;
}

double denoiser_divergence(const DenoiserKind& kind, const Eigen::VectorXcd& xt, double tau,
                           const DenoiserTable* table) {
  const Eigen::Index n = xt.size();
  if (n == 0) return 0.0;
  double sum = 0.0;
  switch (kind.tag) {
    case DenoiserKind::Tag::identity:
      return 1.0;
    case DenoiserKind::Tag::soft_threshold: {
      const double theta = kind.soft_kappa * tau;
      for (Eigen::Index i = 0; i < n; ++i) sum += soft_threshold_deriv(xt[i], theta);
      break;
    }
    case DenoiserKind::Tag::mmse_known_g: {
      if (kind.lsf.size() != n)
        throw std::invalid_argument("denoiser_divergence: lsf size mismatch");
      for (Eigen::Index i = 0; i < n; ++i)
        sum += mmse_denoise_known_g_deriv(xt[i], kind.lsf[i], tau, kind.lambda);
      break;
    }
    case DenoiserKind::Tag::mmse_stat: {
      if (!table) throw std::invalid_argument("denoiser_divergence: table required");
      for (Eigen::Index i = 0; i < n; ++i) sum += mmse_denoise_stat_deriv(xt[i], *table);
      break;
    }
  }
  return sum / static_cast<double>(n);
}

AmpState amp_step(const Eigen::MatrixXcd& pilots, const Eigen::VectorXcd& y,
                  const AmpState& state, const DenoiserKind& kind, DenoiserTableCache* cache) {
  const Eigen::Index l = pilots.rows();
  const Eigen::Index n = pilots.cols();
  if (state.x.size() != n || state.z.size() != l || y.size() != l)
    throw std::invalid_argument("amp_step: dimension mismatch");

  const double tau = state.tau_hat;
  Eigen::VectorXcd xt = state.x;
  xt.noalias() += pilots.adjoint() * state.z;

  const DenoiserTable* table = nullptr;
  DenoiserTableCache local;
  if (kind.tag == DenoiserKind::Tag::mmse_stat && kind.lambda > 0.0) {
    DenoiserTableCache* use = cache ? cache : &local;
    table = &use->get(tau, 1, kind.dist, kind.lambda, kind.quad);
  }

  AmpState next;
  next.x.resize(n);
  switch (kind.tag) {
    case DenoiserKind::Tag::identity:
      next.x = xt;
      break;
    case DenoiserKind::Tag::soft_threshold: {
      const double theta = kind.soft_kappa * tau;
      for (Eigen::Index i = 0; i < n; ++i) next.x[i] = soft_threshold(xt[i], theta);
      break;
    }
    case DenoiserKind::Tag::mmse_known_g:
      if (kind.lsf.size() != n) throw std::invalid_argument("amp_step: lsf size mismatch");
      for (Eigen::Index i = 0; i < n; ++i)
        next.x[i] = mmse_denoise_known_g(xt[i], kind.lsf[i], tau, kind.lambda);
      break;
    case DenoiserKind::Tag::mmse_stat:
      if (table) {
        for (Eigen::Index i = 0; i < n; ++i) next.x[i] = mmse_denoise_stat(xt[i], tau, *table);
      } else {
        next.x.setZero();  // lambda == 0: never active
      }
      break;
  }

  double divergence = 0.0;
  if (kind.tag == DenoiserKind::Tag::mmse_stat && !table) {
    divergence = 0.0;
  } else {
    divergence = denoiser_divergence(kind, xt, tau, table);
  }

  next.z = y;
  next.z.noalias() -= pilots * next.x;
  next.z.noalias() +=
      (static_cast<double>(n) / static_cast<double>(l)) * divergence * state.z;
  next.tau_hat = next.z.norm() / std::sqrt(static_cast<double>(l));
  next.iter = state.iter + 1;
  return next;
}

AmpResult run_amp(const Eigen::MatrixXcd& pilots, const Eigen::VectorXcd& y,
                  const DenoiserKind& kind, const StopRule& stop) {
  const Eigen::Index l = pilots.rows();
  const Eigen::Index n = pilots.cols();
  if (y.size() != l) throw std::invalid_argument("run_amp: dimension mismatch");

  AmpResult result;
  AmpState state;
  state.x = Eigen::VectorXcd::Zero(n);
  state.z = y;
  state.tau_hat = y.norm() / std::sqrt(static_cast<double>(l));
  state.iter = 0;
  result.tau_trace.push_back(state.tau_hat);

  DenoiserTableCache cache;
  for (int t = 0; t < stop.max_iter; ++t) {
    AmpState next = amp_step(pilots, y, state, kind, &cache);
    result.tau_trace.push_back(next.tau_hat);
    const double prev_tau = state.tau_hat;
    state = std::move(next);
    if (prev_tau > 0.0 && std::abs(state.tau_hat - prev_tau) < stop.rel_tol * prev_tau) {
      result.converged = true;
      break;
    }
  }

  result.x_tilde = state.x;
  result.x_tilde.noalias() += pilots.adjoint() * state.z;
  result.state = std::move(state);
  return result;
}

}  // namespace ampdet
