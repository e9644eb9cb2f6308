#include "ampdet/channel_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "ampdet/rng.hpp"

namespace ampdet {

namespace {

constexpr double kSqrtPi = 1.7724538509055160273;
constexpr double kLn10 = 2.3025850929940456840;

// Stream ids for the per-component counter-based draws.
enum StreamId : std::uint64_t {
  kPositions = 1,
  kShadowing = 2,
  kRayleigh = 3,
  kActivity = 4,
  kPilots = 5,
  kNoise = 6,
};

}  // namespace

bool CellConfig::valid() const {
  return num_users >= 1 && pilot_len >= 1 && num_antennas >= 1 && activity_prob >= 0.0 &&
         activity_prob <= 1.0 && cell_radius_m > 0.0 && pathloss_beta_db > 0.0 &&
         shadow_sigma_db > 0.0 && bandwidth_hz > 0.0;
}

LargeScaleDist derive_lsf_constants(const CellConfig& cfg) {
  if (!cfg.valid()) throw std::invalid_argument("derive_lsf_constants: invalid CellConfig");
  const double alpha = cfg.pathloss_alpha_db;
  const double beta = cfg.pathloss_beta_db;
  const double sigma = cfg.shadow_sigma_db;
  const double radius = cfg.cell_radius_m;

  LargeScaleDist dist;
  dist.gamma = 40.0 / beta + 1.0;
  dist.a = 40.0 / (radius * radius * beta * kSqrtPi) *
           std::exp(2.0 * kLn10 * kLn10 * sigma * sigma / (beta * beta) -
                    2.0 * kLn10 * alpha / beta);
  dist.b = -10.0 * std::sqrt(2.0) / (kLn10 * sigma);
  dist.c = (-alpha - beta * std::log10(radius)) / (std::sqrt(2.0) * sigma) -
           20.0 / (beta * dist.b);
  return dist;
}

double q_factor(double g, const LargeScaleDist& dist) {
  return 0.5 * kSqrtPi * std::erfc(dist.b * std::log(g) + dist.c);
}

double pdf_g(double g, const LargeScaleDist& dist) {
  return dist.a * std::pow(g, -dist.gamma) * q_factor(g, dist);
}

double noise_variance(const CellConfig& cfg) {
  const double total_noise_dbm = cfg.noise_psd_dbm_hz + 10.0 * std::log10(cfg.bandwidth_hz);
  return std::pow(10.0, (total_noise_dbm - cfg.tx_power_dbm) / 10.0);
}

QuadratureSpec default_quadrature(const CellConfig& cfg) {
  QuadratureSpec quad;
  // Window endpoints: attenuation of a cell-edge user with +6 sigma of
  // shadowing down to a 0.1 m user with -6 sigma.
  const double span = 6.0 * cfg.shadow_sigma_db;
  const double loss_max =
      cfg.pathloss_alpha_db + cfg.pathloss_beta_db * std::log10(cfg.cell_radius_m) + span;
  const double loss_min = cfg.pathloss_alpha_db + cfg.pathloss_beta_db * std::log10(0.1) - span;
  quad.g_lo = std::pow(10.0, -loss_max / 20.0);
  quad.g_hi = std::pow(10.0, -loss_min / 20.0);
  return quad;
}

Scene sample_scene(const CellConfig& cfg, std::uint64_t seed, ActivityModel activity_model) {
  if (!cfg.valid()) throw std::invalid_argument("sample_scene: invalid CellConfig");
  const int n = cfg.num_users;
  const int l = cfg.pilot_len;
  const int m = cfg.num_antennas;

  Scene scene;
  scene.cfg = cfg;
  scene.seed = seed;
  scene.noise_var = noise_variance(cfg);

  // Positions -> distances -> path loss.
  RngStream pos(seed, kPositions);
  Eigen::VectorXd dist_m(n);
  for (int i = 0; i < n; ++i) {
    double d = 0.0;
    do {
      d = cfg.cell_radius_m * std::sqrt(pos.uniform());
    } while (d == 0.0);
    dist_m[i] = d;
  }

  RngStream shadow(seed, kShadowing);
  scene.lsf.resize(n);
  for (int i = 0; i < n; ++i) {
    const double loss_db = cfg.pathloss_alpha_db + cfg.pathloss_beta_db * std::log10(dist_m[i]) +
                           cfg.shadow_sigma_db * shadow.gaussian();
    scene.lsf[i] = std::pow(10.0, -loss_db / 20.0);
  }

  RngStream activity(seed, kActivity);
  scene.activity.assign(n, 0);
  if (activity_model == ActivityModel::bernoulli) {
    for (int i = 0; i < n; ++i) scene.activity[i] = activity.uniform() < cfg.activity_prob ? 1 : 0;
  } else {
    const int k = static_cast<int>(std::ceil(cfg.activity_prob * n));
    // Partial Fisher-Yates over user indices.
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    for (int i = 0; i < k && i < n; ++i) {
      const int j = i + static_cast<int>(activity.uniform() * (n - i));
      std::swap(idx[i], idx[std::min(j, n - 1)]);
      scene.activity[idx[i]] = 1;
    }
  }

  RngStream fading(seed, kRayleigh);
  scene.channels.setZero(n, m);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      const std::complex<double> h = scene.lsf[i] * fading.cgaussian();
      if (scene.activity[i]) scene.channels(i, j) = h;
    }
  }

  RngStream pilots(seed, kPilots);
  const double pilot_scale = 1.0 / std::sqrt(static_cast<double>(l));
  scene.pilots.resize(l, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < l; ++i) scene.pilots(i, j) = pilot_scale * pilots.cgaussian();

  RngStream noise(seed, kNoise);
  const double noise_scale = std::sqrt(scene.noise_var);
  scene.received.resize(l, m);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < l; ++i) scene.received(i, j) = noise_scale * noise.cgaussian();
  scene.received.noalias() += scene.pilots * scene.channels;

  return scene;
}

LsfCdf::LsfCdf(const LargeScaleDist& dist, const QuadratureSpec& quad, int grid_size) {
  if (!quad.valid()) throw std::invalid_argument("LsfCdf: invalid quadrature window");
  const double u_lo = std::log(quad.g_lo);
  const double u_hi = std::log(quad.g_hi);
  log_g_.resize(grid_size);
  cum_.assign(grid_size, 0.0);
  std::vector<double> density(grid_size);
  for (int i = 0; i < grid_size; ++i) {
    const double u = u_lo + (u_hi - u_lo) * i / (grid_size - 1);
    const double g = std::exp(u);
    log_g_[i] = u;
    density[i] = pdf_g(g, dist) * g;  // du-domain density
  }
  double m2 = 0.0;
  for (int i = 1; i < grid_size; ++i) {
    const double du = log_g_[i] - log_g_[i - 1];
    cum_[i] = cum_[i - 1] + 0.5 * du * (density[i] + density[i - 1]);
    const double g1 = std::exp(log_g_[i - 1]);
    const double g2 = std::exp(log_g_[i]);
    m2 += 0.5 * du * (density[i] * g2 * g2 + density[i - 1] * g1 * g1);
  }
  const double total = cum_.back();
  for (double& v : cum_) v /= total;
  second_moment_ = m2 / total;
}

double LsfCdf::cdf(double g) const {
  const double u = std::log(g);
  if (u <= log_g_.front()) return 0.0;
  if (u >= log_g_.back()) return 1.0;
  const auto it = std::upper_bound(log_g_.begin(), log_g_.end(), u);
  const size_t i = static_cast<size_t>(it - log_g_.begin());
  const double t = (u - log_g_[i - 1]) / (log_g_[i] - log_g_[i - 1]);
  return cum_[i - 1] + t * (cum_[i] - cum_[i - 1]);
}

double LsfCdf::quantile(double p) const {
  p = std::clamp(p, 0.0, 1.0);
  const auto it = std::upper_bound(cum_.begin(), cum_.end(), p);
  if (it == cum_.begin()) return std::exp(log_g_.front());
  if (it == cum_.end()) return std::exp(log_g_.back());
  const size_t i = static_cast<size_t>(it - cum_.begin());
  const double denom = cum_[i] - cum_[i - 1];
  const double t = denom > 0 ? (p - cum_[i - 1]) / denom : 0.0;
  return std::exp(log_g_[i - 1] + t * (log_g_[i] - log_g_[i - 1]));
}

namespace {

void write_matrix_block(std::ostream& out, const char* name, const Eigen::MatrixXcd& mat) {
  out << "[" << name << "]\n";
  char buf[64];
  for (Eigen::Index i = 0; i < mat.rows(); ++i) {
    for (Eigen::Index j = 0; j < mat.cols(); ++j) {
      if (j) out << ',';
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g", mat(i, j).real(), mat(i, j).imag());
      out << buf;
    }
    out << '\n';
  }
}

Eigen::MatrixXcd read_matrix_block(std::istream& in, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXcd mat(rows, cols);
  std::string line;
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (!std::getline(in, line)) throw std::runtime_error("scene: truncated matrix block");
    std::stringstream ss(line);
    std::string cell;
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (!std::getline(ss, cell, ',')) throw std::runtime_error("scene: short matrix row");
      const double re = std::strtod(cell.c_str(), nullptr);
      if (!std::getline(ss, cell, ',')) throw std::runtime_error("scene: short matrix row");
      const double im = std::strtod(cell.c_str(), nullptr);
      mat(i, j) = {re, im};
    }
  }
  return mat;
}

std::string expect_header(std::istream& in, const std::string& tag) {
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line == tag) return line;
    throw std::runtime_error("scene: expected block " + tag + ", got " + line);
  }
  throw std::runtime_error("scene: missing block " + tag);
}

}  // namespace

void save_scene(const Scene& scene, std::ostream& out) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "# ampdet scene v1\n"
                "N=%d L=%d M=%d lambda=%.17g R=%.17g alpha=%.17g beta=%.17g sigma_sf=%.17g "
                "tx_power_dbm=%.17g noise_psd_dbm_hz=%.17g bandwidth_hz=%.17g seed=%llu "
                "noise_var=%.17g\n",
                scene.cfg.num_users, scene.cfg.pilot_len, scene.cfg.num_antennas,
                scene.cfg.activity_prob, scene.cfg.cell_radius_m, scene.cfg.pathloss_alpha_db,
                scene.cfg.pathloss_beta_db, scene.cfg.shadow_sigma_db, scene.cfg.tx_power_dbm,
                scene.cfg.noise_psd_dbm_hz, scene.cfg.bandwidth_hz,
                static_cast<unsigned long long>(scene.seed), scene.noise_var);
  out << buf;

  out << "[activity]\n";
  for (int i = 0; i < scene.cfg.num_users; ++i) {
    if (i) out << ',';
    out << int(scene.activity[i]);
  }
  out << '\n';

  out << "[lsf]\n";
  for (int i = 0; i < scene.cfg.num_users; ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g\n", scene.lsf[i]);
    out << buf;
  }

  write_matrix_block(out, "X", scene.channels);
  write_matrix_block(out, "S", scene.pilots);
  write_matrix_block(out, "Y", scene.received);
}

Scene load_scene(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ampdet scene", 0) != 0)
    throw std::runtime_error("scene: bad magic line");
  if (!std::getline(in, line)) throw std::runtime_error("scene: missing header");

  Scene scene;
  unsigned long long seed = 0;
  const int fields = std::sscanf(
      line.c_str(),
      "N=%d L=%d M=%d lambda=%lg R=%lg alpha=%lg beta=%lg sigma_sf=%lg tx_power_dbm=%lg "
      "noise_psd_dbm_hz=%lg bandwidth_hz=%lg seed=%llu noise_var=%lg",
      &scene.cfg.num_users, &scene.cfg.pilot_len, &scene.cfg.num_antennas,
      &scene.cfg.activity_prob, &scene.cfg.cell_radius_m, &scene.cfg.pathloss_alpha_db,
      &scene.cfg.pathloss_beta_db, &scene.cfg.shadow_sigma_db, &scene.cfg.tx_power_dbm,
      &scene.cfg.noise_psd_dbm_hz, &scene.cfg.bandwidth_hz, &seed, &scene.noise_var);
  if (fields != 13) throw std::runtime_error("scene: malformed header");
  scene.seed = seed;

  const int n = scene.cfg.num_users;
  expect_header(in, "[activity]");
  if (!std::getline(in, line)) throw std::runtime_error("scene: missing activity row");
  {
    std::stringstream ss(line);
    std::string cell;
    scene.activity.assign(n, 0);
    for (int i = 0; i < n; ++i) {
      if (!std::getline(ss, cell, ',')) throw std::runtime_error("scene: short activity row");
      scene.activity[i] = cell == "1" ? 1 : 0;
    }
  }

  expect_header(in, "[lsf]");
  scene.lsf.resize(n);
  for (int i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw std::runtime_error("scene: truncated lsf block");
    scene.lsf[i] = std::strtod(line.c_str(), nullptr);
  }

  expect_header(in, "[X]");
  scene.channels = read_matrix_block(in, n, scene.cfg.num_antennas);
  expect_header(in, "[S]");
  scene.pilots = read_matrix_block(in, scene.cfg.pilot_len, n);
  expect_header(in, "[Y]");
  scene.received = read_matrix_block(in, scene.cfg.pilot_len, scene.cfg.num_antennas);
  return scene;
}

}  // namespace ampdet
