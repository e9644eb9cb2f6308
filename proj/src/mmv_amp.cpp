#include "ampdet/mmv_amp.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ampdet {

namespace {

double stable_logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Shrinkage factor of the known-g row denoiser,
//   f(s) = w / (1 + exp(q0 - Delta s)),  w = g^2/(g^2+tau^2),
// with q0 = log((1-lambda)/lambda) + M log((g^2+tau^2)/tau^2).
void row_known_g_factor(double s, double g, double tau, double lambda, int m, double* f,
                        double* df) {
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
  const double q = std::log1p(-lambda) - std::log(lambda) + m * std::log1p(g2 / t2) - delta * s;
  const double sig = stable_logistic(-q);
  *f = wiener * sig;
  if (df) *df = wiener * delta * sig * (1.0 - sig);
}

double clamp_belief(double p) {
  return std::min(1.0 - kBeliefEps, std::max(kBeliefEps, p));
}

}  // namespace

Eigen::RowVectorXcd vector_denoise_stat(const Eigen::RowVectorXcd& rt, double tau,
                                        const DenoiserTable& table) {
  (void)tau;
  return rt * table.lookup(rt.squaredNorm());
}

Eigen::RowVectorXcd vector_denoise_known_g(const Eigen::RowVectorXcd& rt, double g, double tau,
                                           double lambda) {
  double f = 0.0;
  row_known_g_factor(rt.squaredNorm(), g, tau, lambda, static_cast<int>(rt.size()), &f, nullptr);
  return rt * f;
}

Eigen::RowVectorXcd vector_denoise_general_known_g(const Eigen::RowVectorXcd& rt,
                                                   const Eigen::MatrixXcd& sigma, double g,
                                                   double lambda) {
  const int m = static_cast<int>(rt.size());
  if (sigma.rows() != m || sigma.cols() != m)
    throw std::invalid_argument("vector_denoise_general: Sigma size mismatch");
  const Eigen::LLT<Eigen::MatrixXcd> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("vector_denoise_general: Sigma not positive definite");
  const double g2 = g * g;

  const Eigen::MatrixXcd sigma_g = sigma + g2 * Eigen::MatrixXcd::Identity(m, m);
  const Eigen::LLT<Eigen::MatrixXcd> llt_g(sigma_g);

  // Wiener-style numerator: r (g^{-2} Sigma + I)^{-1}.
  const Eigen::MatrixXcd shrink =
      (sigma / g2 + Eigen::MatrixXcd::Identity(m, m)).inverse();
  const Eigen::RowVectorXcd num = rt * shrink;

  // log |I + g^2 Sigma^{-1}| via the two Cholesky factors.
  double logdet_ratio = 0.0;
  for (int i = 0; i < m; ++i)
    logdet_ratio += 2.0 * (std::log(std::abs(llt_g.matrixL()(i, i))) -
                           std::log(std::abs(llt.matrixL()(i, i))));

  const Eigen::VectorXcd rh = rt.adjoint();
  const double qf_sigma = (rh.adjoint() * llt.solve(rh)).real().value();
  const double qf_sigma_g = (rh.adjoint() * llt_g.solve(rh)).real().value();

  if (lambda >= 1.0) return num;
  if (lambda <= 0.0) return Eigen::RowVectorXcd::Zero(m);
  const double q = std::log1p(-lambda) - std::log(lambda) + logdet_ratio -
                   (qf_sigma - qf_sigma_g);
  return num * stable_logistic(-q);
}

Eigen::RowVectorXcd vector_denoise_general_stat(const Eigen::RowVectorXcd& rt,
                                                const Eigen::MatrixXcd& sigma,
                                                const LargeScaleDist& dist, double lambda,
                                                const QuadratureSpec& quad) {
  const int m = static_cast<int>(rt.size());
  if (sigma.rows() != m || sigma.cols() != m)
    throw std::invalid_argument("vector_denoise_general: Sigma size mismatch");
  const Eigen::LLT<Eigen::MatrixXcd> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("vector_denoise_general: Sigma not positive definite");

  double logdet_sigma = 0.0;
  for (int i = 0; i < m; ++i) logdet_sigma += 2.0 * std::log(std::abs(llt.matrixL()(i, i)));
  const Eigen::VectorXcd rh = rt.adjoint();
  const double qf_sigma = (rh.adjoint() * llt.solve(rh)).real().value();

  // Quadrature nodes in u = ln g; both the numerator vector and the
  // denominator share the weight Q(g) exp(-qf)/ (g^gamma |Sigma + g^2 I|).
  std::vector<double> u, w;
  composite_gauss_legendre(std::log(quad.g_lo), std::log(quad.g_hi), 96, 12, u, w);
  const size_t nq = u.size();
  std::vector<double> log_weight(nq);
  std::vector<Eigen::RowVectorXcd> shrunk(nq);
  double peak = -std::numeric_limits<double>::infinity();
  for (size_t qn = 0; qn < nq; ++qn) {
    const double g = std::exp(u[qn]);
    const double g2 = g * g;
    const Eigen::MatrixXcd sigma_g = sigma + g2 * Eigen::MatrixXcd::Identity(m, m);
    const Eigen::LLT<Eigen::MatrixXcd> llt_g(sigma_g);
    double logdet_g = 0.0;
    for (int i = 0; i < m; ++i) logdet_g += 2.0 * std::log(std::abs(llt_g.matrixL()(i, i)));
    const double qf_g = (rh.adjoint() * llt_g.solve(rh)).real().value();
    log_weight[qn] = std::log(w[qn]) + std::log(q_factor(g, dist)) +
                     (1.0 - dist.gamma) * u[qn] - logdet_g - qf_g;
    shrunk[qn] = rt * (sigma / g2 + Eigen::MatrixXcd::Identity(m, m)).inverse();
    peak = std::max(peak, log_weight[qn]);
  }
  // Point-mass part of the denominator.
  const double log_pm = lambda < 1.0
                            ? std::log1p(-lambda) - std::log(lambda) - std::log(dist.a) -
                                  qf_sigma - logdet_sigma
                            : -std::numeric_limits<double>::infinity();
  peak = std::max(peak, log_pm);

  Eigen::RowVectorXcd num = Eigen::RowVectorXcd::Zero(m);
  double den = std::exp(log_pm - peak);
  for (size_t qn = 0; qn < nq; ++qn) {
    const double e = std::exp(log_weight[qn] - peak);
    num += e * shrunk[qn];
    den += e;
  }
  return num / den;
}

Eigen::MatrixXcd vector_denoiser_jacobian_mean(const DenoiserKind& kind,
                                               const Eigen::MatrixXcd& xt, double tau,
                                               const DenoiserTable* table) {
  const Eigen::Index n = xt.rows();
  const Eigen::Index m = xt.cols();
  Eigen::MatrixXcd jac = Eigen::MatrixXcd::Zero(m, m);
  double f_sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::RowVectorXcd row = xt.row(i);
    const double s = row.squaredNorm();
    double f = 0.0, df = 0.0;
    switch (kind.tag) {
      case DenoiserKind::Tag::identity:
        f = 1.0;
        break;
      case DenoiserKind::Tag::mmse_stat:
        if (table) f = table->lookup(s, &df);
        break;
      case DenoiserKind::Tag::mmse_known_g:
        row_known_g_factor(s, kind.lsf[i], tau, kind.lambda, static_cast<int>(m), &f, &df);
        break;
      case DenoiserKind::Tag::soft_threshold:
        throw std::invalid_argument("vector denoiser: soft threshold is scalar-only");
    }
    f_sum += f;
    if (df != 0.0) jac.noalias() += df * (row.adjoint() * row);
  }
  jac /= static_cast<double>(n);
  jac += (f_sum / static_cast<double>(n)) * Eigen::MatrixXcd::Identity(m, m);
  return jac;
}

VectorAmpState vamp_step(const Eigen::MatrixXcd& pilots, const Eigen::MatrixXcd& y,
                         const VectorAmpState& state, const DenoiserKind& kind,
                         DenoiserTableCache* cache) {
  const Eigen::Index l = pilots.rows();
  const Eigen::Index n = pilots.cols();
  const Eigen::Index m = y.cols();
  if (state.x.rows() != n || state.x.cols() != m || state.z.rows() != l || state.z.cols() != m)
    throw std::invalid_argument("vamp_step: dimension mismatch");

  const double tau = state.tau_hat;
  Eigen::MatrixXcd xt = state.x;
  xt.noalias() += pilots.adjoint() * state.z;

  const DenoiserTable* table = nullptr;
  DenoiserTableCache local;
  if (kind.tag == DenoiserKind::Tag::mmse_stat && kind.lambda > 0.0) {
    DenoiserTableCache* use = cache ? cache : &local;
    table = &use->get(tau, static_cast<int>(m), kind.dist, kind.lambda, kind.quad);
  }

  VectorAmpState next;
  next.x.resize(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::RowVectorXcd row = xt.row(i);
    switch (kind.tag) {
      case DenoiserKind::Tag::identity:
        next.x.row(i) = row;
        break;
      case DenoiserKind::Tag::mmse_stat:
        next.x.row(i) = table ? vector_denoise_stat(row, tau, *table)
                              : Eigen::RowVectorXcd::Zero(m).eval();
        break;
      case DenoiserKind::Tag::mmse_known_g:
        next.x.row(i) = vector_denoise_known_g(row, kind.lsf[i], tau, kind.lambda);
        break;
      case DenoiserKind::Tag::soft_threshold:
        throw std::invalid_argument("vamp_step: soft threshold is scalar-only");
    }
  }

  Eigen::MatrixXcd jac;
  if (kind.tag == DenoiserKind::Tag::mmse_stat && !table) {
    jac = Eigen::MatrixXcd::Zero(m, m);
  } else {
    jac = vector_denoiser_jacobian_mean(kind, xt, tau, table);
  }

  next.z = y;
  next.z.noalias() -= pilots * next.x;
  next.z.noalias() += (static_cast<double>(n) / static_cast<double>(l)) * (state.z * jac);
  next.tau_hat = next.z.norm() / std::sqrt(static_cast<double>(l * m));
  next.iter = state.iter + 1;
  return next;
}

VampResult run_vamp(const Eigen::MatrixXcd& pilots, const Eigen::MatrixXcd& y,
                    const DenoiserKind& kind, const StopRule& stop) {
  const Eigen::Index l = pilots.rows();
  const Eigen::Index n = pilots.cols();
  const Eigen::Index m = y.cols();
  if (y.rows() != l) throw std::invalid_argument("run_vamp: dimension mismatch");

  VampResult result;
  VectorAmpState state;
  state.x = Eigen::MatrixXcd::Zero(n, m);
  state.z = y;
  state.tau_hat = y.norm() / std::sqrt(static_cast<double>(l * m));
  state.iter = 0;
  result.tau_trace.push_back(state.tau_hat);

  DenoiserTableCache cache;
  for (int t = 0; t < stop.max_iter; ++t) {
    VectorAmpState next = vamp_step(pilots, y, state, kind, &cache);
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

Eigen::MatrixXd ampmmv_into_phase(const Eigen::MatrixXd& pi_out, double lambda) {
  const Eigen::Index n = pi_out.rows();
  const Eigen::Index m = pi_out.cols();
  Eigen::MatrixXd pi_in(n, m);
  const double log_lambda = std::log(lambda);
  const double log_1m_lambda = std::log1p(-lambda);
  for (Eigen::Index i = 0; i < n; ++i) {
    double sum_log_p = 0.0, sum_log_q = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      const double p = clamp_belief(pi_out(i, j));
      sum_log_p += std::log(p);
      sum_log_q += std::log1p(-p);
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      const double p = clamp_belief(pi_out(i, j));
      const double lx = log_lambda + sum_log_p - std::log(p);
      const double ly = log_1m_lambda + sum_log_q - std::log1p(-p);
      pi_in(i, j) = clamp_belief(stable_logistic(lx - ly));
    }
  }
  return pi_in;
}

std::complex<double> ampmmv_within_denoise(std::complex<double> xt, double g, double tau,
                                           double pi_in) {
  return mmse_denoise_known_g(xt, g, tau, pi_in);
}

Eigen::MatrixXd ampmmv_out_phase(const Eigen::MatrixXcd& xt_final, const Eigen::VectorXd& lsf,
                                 const Eigen::VectorXd& tau_per_stage) {
  const Eigen::Index n = xt_final.rows();
  const Eigen::Index m = xt_final.cols();
  if (lsf.size() != n || tau_per_stage.size() != m)
    throw std::invalid_argument("ampmmv_out_phase: dimension mismatch");
  Eigen::MatrixXd pi_out(n, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const double t2 = tau_per_stage[j] * tau_per_stage[j];
    for (Eigen::Index i = 0; i < n; ++i) {
      const double g2 = lsf[i] * lsf[i];
      const double delta = 1.0 / t2 - 1.0 / (g2 + t2);
      const double q = std::log1p(g2 / t2) - delta * std::norm(xt_final(i, j));
      pi_out(i, j) = clamp_belief(stable_logistic(-q));
    }
  }
  return pi_out;
}

AmpMmvResult run_parallel_ampmmv(const Eigen::MatrixXcd& pilots, const Eigen::MatrixXcd& y,
                                 const Eigen::VectorXd& lsf, double lambda,
                                 const AmpMmvSchedule& schedule) {
  const Eigen::Index l = pilots.rows();
  const Eigen::Index n = pilots.cols();
  const Eigen::Index m = y.cols();
  if (y.rows() != l || lsf.size() != n)
    throw std::invalid_argument("run_parallel_ampmmv: dimension mismatch");

  AmpMmvResult result;
  result.x = Eigen::MatrixXcd::Zero(n, m);
  result.x_tilde = Eigen::MatrixXcd::Zero(n, m);
  result.beliefs.pi_out = Eigen::MatrixXd::Constant(n, m, 0.5);
  result.beliefs.pi_in = Eigen::MatrixXd::Constant(n, m, lambda);
  result.tau_final = Eigen::VectorXd::Zero(m);
  if (schedule.outer <= 0) return result;

  const double sqrt_l = std::sqrt(static_cast<double>(l));
  for (int round = 0; round < schedule.outer; ++round) {
    result.beliefs.pi_in = ampmmv_into_phase(result.beliefs.pi_out, lambda);

    Eigen::VectorXd tau_round(m);
    bool all_converged = true;
    for (Eigen::Index j = 0; j < m; ++j) {
      // Fresh SMV stage per Algorithm line: c^0 = 0, z^0 = y_m.
      Eigen::VectorXcd c = Eigen::VectorXcd::Zero(n);
      Eigen::VectorXcd z = y.col(j);
      double tau = z.norm() / sqrt_l;
      double last_rel_change = 1.0;
      Eigen::VectorXcd xt(n);
      for (int t = 0; t < schedule.inner; ++t) {
        xt = c;
        xt.noalias() += pilots.adjoint() * z;
        double div_sum = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          const double pi = result.beliefs.pi_in(i, j);
          c[i] = mmse_denoise_known_g(xt[i], lsf[i], tau, pi);
          div_sum += mmse_denoise_known_g_deriv(xt[i], lsf[i], tau, pi);
        }
        const double divergence = div_sum / static_cast<double>(n);
        Eigen::VectorXcd z_next = y.col(j);
        z_next.noalias() -= pilots * c;
        z_next.noalias() +=
            (static_cast<double>(n) / static_cast<double>(l)) * divergence * z;
        const double tau_next = z_next.norm() / sqrt_l;
        last_rel_change = std::abs(tau_next - tau) / std::max(tau, 1e-300);
        z = std::move(z_next);
        tau = tau_next;
      }
      xt = c;
      xt.noalias() += pilots.adjoint() * z;
      result.x.col(j) = c;
      result.x_tilde.col(j) = xt;
      tau_round[j] = tau;
      if (last_rel_change >= 1e-6) all_converged = false;
    }
    result.tau_final = tau_round;
    result.tau_trace.push_back(tau_round);
    result.beliefs.pi_out = ampmmv_out_phase(result.x_tilde, lsf, tau_round);
    result.converged = all_converged;
  }
  return result;
}

}  // namespace ampdet
