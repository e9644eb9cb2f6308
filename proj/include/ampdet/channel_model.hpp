#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "ampdet/quadrature.hpp"

namespace ampdet {

// Full scenario parameterization of the single-cell uplink: N users in a
// disk of radius R, each active with probability lambda, pilot length L,
// M receive antennas, log-distance path loss plus log-normal shadowing.
struct CellConfig {
  int num_users = 0;            // N
  int pilot_len = 0;            // L
  int num_antennas = 1;         // M
  double activity_prob = 0.0;   // lambda
  double cell_radius_m = 0.0;   // R
  double pathloss_alpha_db = 0.0;
  double pathloss_beta_db = 0.0;   // dB per decade of distance
  double shadow_sigma_db = 0.0;    // sigma_SF
  double tx_power_dbm = 0.0;
  double noise_psd_dbm_hz = 0.0;
  double bandwidth_hz = 0.0;

  bool valid() const;
};

// Constants of the large-scale fading amplitude density
//   p_G(g) = a * g^(-gamma) * Q(g),  Q(g) = integral_{b ln g + c}^{inf} exp(-s^2) ds,
// induced by uniform user positions, log-distance path loss, and log-normal
// shadowing. b < 0, so Q is nondecreasing in g.
struct LargeScaleDist {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double gamma = 0.0;
};

// One sampled realization of the cell. `channels` holds the effective
// signal matrix X: row n is the (scaled Rayleigh) channel of user n when
// active and identically zero otherwise.
struct Scene {
  CellConfig cfg;
  std::uint64_t seed = 0;
  std::vector<std::uint8_t> activity;  // a_n
  Eigen::VectorXd lsf;                 // g_n, linear amplitude
  Eigen::MatrixXcd channels;           // X, N x M
  Eigen::MatrixXcd pilots;             // S, L x N
  Eigen::MatrixXcd received;           // Y, L x M
  double noise_var = 0.0;              // sigma_w^2, normalized by tx power
};

enum class ActivityModel {
  bernoulli,    // i.i.d. Bernoulli(lambda) per user
  fixed_count,  // exactly ceil(lambda * N) active users, uniformly chosen
};

LargeScaleDist derive_lsf_constants(const CellConfig& cfg);

// Q(g) evaluated as (sqrt(pi)/2) * erfc(b ln g + c).
double q_factor(double g, const LargeScaleDist& dist);

double pdf_g(double g, const LargeScaleDist& dist);

// Noise power over the signal bandwidth, normalized by the transmit power.
double noise_variance(const CellConfig& cfg);

// Default tolerances and g-window derived from the cell geometry; see
// QuadratureSpec for the window convention.
QuadratureSpec default_quadrature(const CellConfig& cfg);

Scene sample_scene(const CellConfig& cfg, std::uint64_t seed,
                   ActivityModel activity_model = ActivityModel::bernoulli);

// Tabulated CDF of p_G over the quadrature window; supports evaluation and
// inverse-CDF sampling (used by Monte Carlo oracles and goodness-of-fit
// checks).
class LsfCdf {
 public:
  LsfCdf(const LargeScaleDist& dist, const QuadratureSpec& quad, int grid_size = 4096);
  double cdf(double g) const;
  double quantile(double p) const;
  // Truncated-window moment E[g^2]; the untruncated moment does not exist
  // for gamma < 3, so all signal-power bookkeeping uses this value.
  double second_moment() const { return second_moment_; }

 private:
  std::vector<double> log_g_;
  std::vector<double> cum_;
  double second_moment_ = 0.0;
};

// Plain-text scene serialization: a header with the CellConfig and seed
// followed by CSV blocks for activity, g, X, S, Y. Complex entries are
// stored as re,im column pairs at full precision.
void save_scene(const Scene& scene, std::ostream& out);
Scene load_scene(std::istream& in);

}  // namespace ampdet
