#include "ampdet/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace ampdet {

namespace {

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t power_idx, std::uint64_t trial) {
  return mix64(mix64(seed ^ 0x7e0ddeed00000000ULL) + (power_idx << 32) + trial);
}

bool is_vector_mode(Algorithm a) {
  return a == Algorithm::vamp_stat || a == Algorithm::vamp_known_g ||
         a == Algorithm::parallel_ampmmv;
}

bool is_known_g_mode(Algorithm a) {
  return a == Algorithm::amp_mmse_known_g || a == Algorithm::vamp_known_g ||
         a == Algorithm::parallel_ampmmv;
}

struct TrialOutcome {
  std::vector<double> statistic;       // per-user magnitude / row norm
  std::vector<std::uint8_t> truth;     // activity
  std::vector<std::uint8_t> decision;  // cosamp only
  double tau_hat = 0.0;
};

TrialOutcome run_trial(const ExperimentSpec& spec, const CellConfig& cfg,
                       const LargeScaleDist& dist, const QuadratureSpec& quad,
                       std::uint64_t scene_seed, double kappa) {
  const Scene scene = sample_scene(
      cfg, scene_seed,
      spec.fixed_support ? ActivityModel::fixed_count : ActivityModel::bernoulli);
  const int n = cfg.num_users;

  TrialOutcome out;
  out.truth = scene.activity;
  out.statistic.resize(n);

  switch (spec.algorithm) {
    case Algorithm::amp_mmse_stat: {
      const auto r = run_amp(scene.pilots, scene.received.col(0),
                             DenoiserKind::mmse_stat(cfg.activity_prob, dist, quad), spec.stop);
      for (int i = 0; i < n; ++i) out.statistic[i] = std::abs(r.x_tilde[i]);
      out.tau_hat = r.state.tau_hat;
      break;
    }
    case Algorithm::amp_mmse_known_g: {
      const auto r = run_amp(scene.pilots, scene.received.col(0),
                             DenoiserKind::mmse_known_g(cfg.activity_prob, scene.lsf), spec.stop);
      for (int i = 0; i < n; ++i) out.statistic[i] = std::abs(r.x_tilde[i]);
      out.tau_hat = r.state.tau_hat;
      break;
    }
    case Algorithm::amp_soft: {
      const auto r = run_soft_amp(scene.pilots, scene.received.col(0), kappa, spec.stop);
      for (int i = 0; i < n; ++i) out.statistic[i] = std::abs(r.x_tilde[i]);
      out.tau_hat = r.state.tau_hat;
      break;
    }
    case Algorithm::vamp_stat: {
      const auto r = run_vamp(scene.pilots, scene.received,
                              DenoiserKind::mmse_stat(cfg.activity_prob, dist, quad), spec.stop);
      for (int i = 0; i < n; ++i) out.statistic[i] = r.x_tilde.row(i).norm();
      out.tau_hat = r.state.tau_hat;
      break;
    }
    case Algorithm::vamp_known_g: {
      const auto r = run_vamp(scene.pilots, scene.received,
                              DenoiserKind::mmse_known_g(cfg.activity_prob, scene.lsf), spec.stop);
      for (int i = 0; i < n; ++i) out.statistic[i] = r.x_tilde.row(i).norm();
      out.tau_hat = r.state.tau_hat;
      break;
    }
    case Algorithm::parallel_ampmmv: {
      const auto r = run_parallel_ampmmv(scene.pilots, scene.received, scene.lsf,
                                         cfg.activity_prob, spec.schedule);
      for (int i = 0; i < n; ++i) out.statistic[i] = r.x_tilde.row(i).norm();
      out.tau_hat = r.tau_final.size() > 0
                        ? std::sqrt(r.tau_final.array().square().mean())
                        : 0.0;
      break;
    }
    case Algorithm::cosamp: {
      long active = 0;
      for (int i = 0; i < n; ++i) active += scene.activity[i];
      out.decision.assign(n, 0);
      if (active > 0) {
        CosampConfig cc;
        cc.sparsity_k = static_cast<int>(std::min<long>(active, cfg.pilot_len));
        const auto r = cosamp(scene.pilots, scene.received.col(0), cc);
        for (int idx : r.support) out.decision[idx] = 1;
        out.tau_hat = r.residual_norm / std::sqrt(static_cast<double>(cfg.pilot_len));
      }
      for (int i = 0; i < n; ++i) out.statistic[i] = out.decision[i];
      break;
    }
  }
  return out;
}

struct Accumulator {
  std::vector<long> hist_inactive;  // index: #thresholds below the statistic
  std::vector<long> hist_active;
  long n_inactive = 0;
  long n_active = 0;
  long false_alarms_point = 0;  // cosamp membership decisions
  long misses_point = 0;
  long failed = 0;
  long done = 0;
};

void accumulate_trial(const TrialOutcome& t, const std::vector<double>& thresholds,
                      bool point_mode, Accumulator& acc) {
  const size_t p = thresholds.size();
  for (size_t i = 0; i < t.truth.size(); ++i) {
    if (point_mode) {
      if (t.truth[i]) {
        ++acc.n_active;
        if (!t.decision[i]) ++acc.misses_point;
      } else {
        ++acc.n_inactive;
        if (t.decision[i]) ++acc.false_alarms_point;
      }
      continue;
    }
    const size_t idx = static_cast<size_t>(
        std::lower_bound(thresholds.begin(), thresholds.end(), t.statistic[i]) -
        thresholds.begin());
    if (t.truth[i]) {
      ++acc.n_active;
      ++acc.hist_active[idx];
    } else {
      ++acc.n_inactive;
      ++acc.hist_inactive[idx];
    }
  }
  (void)p;
}

double empirical_equal_error(const DetectionReport& report) {
  const size_t p = report.thresholds.size();
  if (p == 0) return -1.0;
  double best = -1.0;
  double best_gap = std::numeric_limits<double>::infinity();
  double prev_d = 0.0, prev_pf = 0.0, prev_pm = 0.0;
  for (size_t i = 0; i < p; ++i) {
    if (report.n_inactive[i] <= 0 || report.n_active[i] <= 0) continue;
    const double pf = static_cast<double>(report.false_alarms[i]) / report.n_inactive[i];
    const double pm = static_cast<double>(report.misses[i]) / report.n_active[i];
    const double d = pf - pm;
    if (i > 0 && prev_d > 0.0 && d <= 0.0) {
      const double t = prev_d / (prev_d - d);
      return prev_pf + t * (pf - prev_pf);
    }
    if (std::abs(d) < best_gap) {
      best_gap = std::abs(d);
      best = 0.5 * (pf + pm);
    }
    prev_d = d;
    prev_pf = pf;
    prev_pm = pm;
  }
  return best;
}

double interpolate_pm_empirical(const DetectionReport& report, double l) {
  const size_t p = report.thresholds.size();
  for (size_t i = 0; i + 1 < p; ++i) {
    if (report.thresholds[i] <= l && l <= report.thresholds[i + 1]) {
      if (report.n_active[i] <= 0) return -1.0;
      const double pm0 = static_cast<double>(report.misses[i]) / report.n_active[i];
      const double pm1 = static_cast<double>(report.misses[i + 1]) / report.n_active[i + 1];
      const double t = (l - report.thresholds[i]) /
                       (report.thresholds[i + 1] - report.thresholds[i]);
      return pm0 + t * (pm1 - pm0);
    }
  }
  return -1.0;
}

std::string power_tag(double power_dbm) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", power_dbm);
  std::string s(buf);
  for (char& c : s)
    if (c == '.') c = '_';
  return s;
}

}  // namespace

const char* algorithm_name(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::amp_mmse_stat: return "amp_mmse_stat";
    case Algorithm::amp_mmse_known_g: return "amp_mmse_known_g";
    case Algorithm::amp_soft: return "amp_soft";
    case Algorithm::cosamp: return "cosamp";
    case Algorithm::vamp_stat: return "vamp_stat";
    case Algorithm::vamp_known_g: return "vamp_known_g";
    case Algorithm::parallel_ampmmv: return "parallel_ampmmv";
  }
  return "unknown";
}

Algorithm algorithm_from_name(const std::string& name) {
  for (Algorithm a :
       {Algorithm::amp_mmse_stat, Algorithm::amp_mmse_known_g, Algorithm::amp_soft,
        Algorithm::cosamp, Algorithm::vamp_stat, Algorithm::vamp_known_g,
        Algorithm::parallel_ampmmv}) {
    if (name == algorithm_name(a)) return a;
  }
  throw std::invalid_argument("unknown algorithm: " + name);
}

bool ExperimentSpec::valid() const {
  return cell.valid() && trials >= 1 && !power_sweep_dbm.empty() && roc_points >= 2 &&
         workers >= 1;
}

ExperimentResult run_experiment(const ExperimentSpec& spec_in) {
  ExperimentSpec spec = spec_in;
  if (!spec.valid()) throw std::invalid_argument("run_experiment: invalid spec");
  if (spec.label.empty()) spec.label = algorithm_name(spec.algorithm);
  if (spec.kappa_grid.empty()) {
    for (int i = 0; i < 10; ++i)
      spec.kappa_grid.push_back(0.8 * std::pow(4.0 / 0.8, i / 9.0));
  }

  std::filesystem::create_directories(spec.output_path);
  ExperimentResult result;
  result.spec = spec;

  for (size_t pi = 0; pi < spec.power_sweep_dbm.size(); ++pi) {
    CellConfig cfg = spec.cell;
    cfg.tx_power_dbm = spec.power_sweep_dbm[pi];
    const LargeScaleDist dist = derive_lsf_constants(cfg);
    const QuadratureSpec quad = default_quadrature(cfg);
    const int m = is_vector_mode(spec.algorithm) ? cfg.num_antennas : 1;
    const bool point_mode = spec.algorithm == Algorithm::cosamp;

    PowerRunResult pr;
    pr.power_dbm = cfg.tx_power_dbm;
    pr.sigma_w = std::sqrt(noise_variance(cfg));

    // Soft-threshold schedule: grid-search kappa on pilot trials when the
    // spec does not pin it.
    double kappa = spec.soft_kappa;
    if (spec.algorithm == Algorithm::amp_soft && kappa <= 0.0) {
      const int pilot_trials = std::max(2, spec.trials / 10);
      double best_rate = std::numeric_limits<double>::infinity();
      for (double cand : spec.kappa_grid) {
        long fa = 0, miss = 0, n_in = 0, n_ac = 0;
        std::vector<std::pair<double, bool>> stats;
        for (int t = 0; t < pilot_trials; ++t) {
          const TrialOutcome out = run_trial(
              spec, cfg, dist, quad, derive_seed(spec.seed ^ 0xa11b00, pi, t), cand);
          for (size_t i = 0; i < out.truth.size(); ++i)
            stats.emplace_back(out.statistic[i], out.truth[i] != 0);
        }
        // Equal-error rate of the pooled statistics via a sweep.
        std::sort(stats.begin(), stats.end());
        for (const auto& [s, act] : stats) (act ? n_ac : n_in) += 1;
        fa = n_in;  // at threshold below the smallest statistic
        miss = 0;
        double rate = 1.0;
        for (const auto& [s, act] : stats) {
          if (act)
            ++miss;
          else
            --fa;
          const double pf = n_in > 0 ? static_cast<double>(fa) / n_in : 0.0;
          const double pm = n_ac > 0 ? static_cast<double>(miss) / n_ac : 0.0;
          if (pf <= pm) {
            rate = 0.5 * (pf + pm);
            break;
          }
        }
        if (rate < best_rate) {
          best_rate = rate;
          kappa = cand;
        }
      }
      pr.best_kappa = kappa;
    } else if (spec.algorithm == Algorithm::amp_soft) {
      pr.best_kappa = kappa;
    }

    // Noise level for the analytic curves: the SE fixed point for the MMSE
    // modes, a pilot-trial empirical estimate otherwise.
    const FadingKnowledge knowledge =
        is_known_g_mode(spec.algorithm) ? FadingKnowledge::known_g : FadingKnowledge::stat_g;
    if (spec.analytic_tau_override > 0.0) {
      pr.tau_analytic = spec.analytic_tau_override;
      pr.tau_from_se = false;
    } else if (spec.algorithm == Algorithm::amp_soft || point_mode) {
      const TrialOutcome pilot =
          run_trial(spec, cfg, dist, quad, derive_seed(spec.seed ^ 0x9110f, pi, 0), kappa);
      pr.tau_analytic = pilot.tau_hat > 0 ? pilot.tau_hat : pr.sigma_w;
      pr.tau_from_se = false;
    } else {
      const LsfCdf cdf(dist, quad);
      const double tau0 = default_se_tau0(pr.sigma_w, cfg.num_users, cfg.pilot_len,
                                          cfg.activity_prob, cdf.second_moment());
      const auto mse_fn = [&](double tau) {
        return mse_mmv(tau, m, knowledge, dist, cfg.activity_prob, quad);
      };
      const SeTrace trace = se_recursion(pr.sigma_w, cfg.num_users, cfg.pilot_len, mse_fn, tau0);
      pr.tau_analytic = trace.tau_inf;
      pr.tau_from_se = true;
    }

    // Threshold grid spanning analytic Pf in [1e-5, 1].
    std::vector<double> thresholds;
    if (!point_mode) {
      thresholds.reserve(spec.roc_points);
      for (int i = 0; i < spec.roc_points; ++i) {
        const double pf = std::pow(10.0, -5.0 * i / (spec.roc_points - 1.0));
        thresholds.push_back(threshold_for_pf(pf, pr.tau_analytic, m));
      }
      std::sort(thresholds.begin(), thresholds.end());
    }

    // Trial sweep.
    Accumulator total;
    total.hist_inactive.assign(thresholds.size() + 1, 0);
    total.hist_active.assign(thresholds.size() + 1, 0);
    std::vector<double> tau_by_trial(spec.trials, 0.0);
    std::vector<std::string> failures;
    std::mutex fail_mutex;

    const int workers = std::min(spec.workers, spec.trials);
    std::vector<Accumulator> partial(workers);
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      partial[w].hist_inactive.assign(thresholds.size() + 1, 0);
      partial[w].hist_active.assign(thresholds.size() + 1, 0);
      pool.emplace_back([&, w]() {
        for (int t = w; t < spec.trials; t += workers) {
          try {
            const TrialOutcome out =
                run_trial(spec, cfg, dist, quad, derive_seed(spec.seed, pi, t), kappa);
            accumulate_trial(out, thresholds, point_mode, partial[w]);
            tau_by_trial[t] = out.tau_hat;
            ++partial[w].done;
          } catch (const std::exception& e) {
            ++partial[w].failed;
            std::lock_guard<std::mutex> lock(fail_mutex);
            if (failures.size() < 16) failures.push_back(e.what());
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    for (const Accumulator& p : partial) {
      for (size_t i = 0; i < total.hist_inactive.size(); ++i) {
        total.hist_inactive[i] += p.hist_inactive[i];
        total.hist_active[i] += p.hist_active[i];
      }
      total.n_inactive += p.n_inactive;
      total.n_active += p.n_active;
      total.false_alarms_point += p.false_alarms_point;
      total.misses_point += p.misses_point;
      total.done += p.done;
      total.failed += p.failed;
    }
    pr.trials_done = total.done;
    pr.trials_failed = total.failed;
    for (const std::string& f : failures)
      std::cerr << "[" << spec.label << " p=" << cfg.tx_power_dbm << "] trial failed: " << f
                << "\n";

    double tau_sum = 0.0;
    for (double t : tau_by_trial) tau_sum += t;
    pr.tau_hat_mean = total.done > 0 ? tau_sum / total.done : 0.0;

    if (point_mode) {
      pr.operating_point.n_inactive = total.n_inactive;
      pr.operating_point.n_active = total.n_active;
      pr.operating_point.false_alarms = total.false_alarms_point;
      pr.operating_point.misses = total.misses_point;
      if (total.n_inactive > 0)
        pr.operating_point.pf =
            static_cast<double>(total.false_alarms_point) / total.n_inactive;
      if (total.n_active > 0)
        pr.operating_point.pm = static_cast<double>(total.misses_point) / total.n_active;

      char buf[256];
      std::ofstream out(spec.output_path + "/" + spec.label + "_p" +
                        power_tag(cfg.tx_power_dbm) + "_point.csv");
      out << "pf_emp,pm_emp,false_alarms,misses,n_inactive,n_active\n";
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%ld,%ld,%ld,%ld\n",
                    pr.operating_point.pf.value_or(-1.0), pr.operating_point.pm.value_or(-1.0),
                    total.false_alarms_point, total.misses_point, total.n_inactive,
                    total.n_active);
      out << buf;
    } else {
      DetectionReport& report = pr.report;
      report.knowledge = knowledge;
      report.m = m;
      report.tau = pr.tau_analytic;
      const size_t p = thresholds.size();
      report.thresholds = thresholds;
      report.pf_analytic.resize(p);
      report.pm_analytic.resize(p);
      report.false_alarms.resize(p);
      report.misses.resize(p);
      report.n_inactive.assign(p, total.n_inactive);
      report.n_active.assign(p, total.n_active);

      long suffix = 0;
      std::vector<long> fa(p + 1, 0);
      for (size_t i = p + 1; i-- > 0;) {
        fa[i] = suffix;
        suffix += total.hist_inactive[i];
        fa[i] = suffix - total.hist_inactive[i];
      }
      // fa[i] counts inactive users whose statistic exceeds threshold i:
      // those with idx > i.
      for (size_t i = 0; i < p; ++i) {
        long alarms = 0;
        for (size_t v = i + 1; v <= p; ++v) alarms += total.hist_inactive[v];
        report.false_alarms[i] = alarms;
        long missed = 0;
        for (size_t v = 0; v <= i; ++v) missed += total.hist_active[v];
        report.misses[i] = missed;
        report.pf_analytic[i] = pf_analytic(thresholds[i], pr.tau_analytic, m);
        report.pm_analytic[i] =
            knowledge == FadingKnowledge::stat_g
                ? pm_analytic_stat(thresholds[i], pr.tau_analytic, m, dist, quad)
                : pm_average_known_g(thresholds[i], pr.tau_analytic, m, dist, quad);
      }

      pr.equal_error_analytic = -1.0;
      try {
        const double l_eq = equal_error_threshold(pr.tau_analytic, m, knowledge, dist, quad);
        pr.equal_error_analytic = pf_analytic(l_eq, pr.tau_analytic, m);
      } catch (const std::exception&) {
      }
      pr.equal_error_empirical = empirical_equal_error(report);

      pr.threshold_at_target_pf = threshold_for_pf(spec.target_pf, pr.tau_analytic, m);
      pr.pm_at_target_pf_analytic =
          knowledge == FadingKnowledge::stat_g
              ? pm_analytic_stat(pr.threshold_at_target_pf, pr.tau_analytic, m, dist, quad)
              : pm_average_known_g(pr.threshold_at_target_pf, pr.tau_analytic, m, dist, quad);
      pr.pm_at_target_pf_empirical = interpolate_pm_empirical(report, pr.threshold_at_target_pf);

      std::ofstream out(spec.output_path + "/" + spec.label + "_p" +
                        power_tag(cfg.tx_power_dbm) + "_roc.csv");
      report.to_csv(out);
    }

    result.powers.push_back(std::move(pr));
  }

  // Summary CSV, one row per power.
  std::ofstream summary(spec.output_path + "/" + spec.label + "_summary.csv");
  summary << "label,algorithm,power_dbm,sigma_w,tau_analytic,tau_from_se,tau_hat_mean,"
             "equal_error_analytic,equal_error_empirical,l_at_target_pf,"
             "pm_at_target_pf_analytic,pm_at_target_pf_empirical,best_kappa,trials,failures,"
             "pf_point,pm_point\n";
  for (const PowerRunResult& pr : result.powers) {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "%s,%s,%.17g,%.17g,%.17g,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%ld,%ld,"
                  "%.17g,%.17g\n",
                  spec.label.c_str(), algorithm_name(spec.algorithm), pr.power_dbm, pr.sigma_w,
                  pr.tau_analytic, pr.tau_from_se ? 1 : 0, pr.tau_hat_mean,
                  pr.equal_error_analytic, pr.equal_error_empirical, pr.threshold_at_target_pf,
                  pr.pm_at_target_pf_analytic, pr.pm_at_target_pf_empirical, pr.best_kappa,
                  pr.trials_done, pr.trials_failed, pr.operating_point.pf.value_or(-1.0),
                  pr.operating_point.pm.value_or(-1.0));
    summary << buf;
  }

  return result;
}

namespace {

bool is_rate_figure(const std::string& preset) {
  return preset.rfind("fig4", 0) == 0 || preset.rfind("fig6", 0) == 0;
}

void emit_roc_figure(std::ofstream& out, const std::string& label,
                     const std::vector<PowerRunResult>& powers) {
  char buf[512];
  for (const PowerRunResult& pr : powers) {
    if (pr.report.thresholds.empty()) {
      if (pr.operating_point.n_inactive + pr.operating_point.n_active > 0) {
        std::snprintf(buf, sizeof(buf), "%s,%.17g,-1,-1,-1,%.17g,%.17g\n", label.c_str(),
                      pr.power_dbm, pr.operating_point.pf.value_or(-1.0),
                      pr.operating_point.pm.value_or(-1.0));
        out << buf;
      }
      continue;
    }
    const DetectionReport& r = pr.report;
    for (size_t i = 0; i < r.thresholds.size(); ++i) {
      const double pf_emp =
          r.n_inactive[i] > 0 ? static_cast<double>(r.false_alarms[i]) / r.n_inactive[i] : -1.0;
      const double pm_emp =
          r.n_active[i] > 0 ? static_cast<double>(r.misses[i]) / r.n_active[i] : -1.0;
      std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", label.c_str(),
                    pr.power_dbm, r.thresholds[i], r.pf_analytic[i], r.pm_analytic[i], pf_emp,
                    pm_emp);
      out << buf;
    }
  }
}

}  // namespace

std::string emit_plotdata(const std::string& preset, const std::vector<ExperimentResult>& results,
                          const std::string& output_dir) {
  if (results.empty()) throw std::runtime_error("emit_plotdata: no results");
  std::filesystem::create_directories(output_dir);
  const std::string path = output_dir + "/" + preset + ".csv";
  std::ofstream out(path);
  if (is_rate_figure(preset)) {
    out << "series,power_dbm,equal_error_analytic,equal_error_empirical\n";
    char buf[256];
    for (const ExperimentResult& r : results) {
      for (const PowerRunResult& pr : r.powers) {
        std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g\n", r.spec.label.c_str(),
                      pr.power_dbm, pr.equal_error_analytic, pr.equal_error_empirical);
        out << buf;
      }
    }
  } else {
    out << "series,power_dbm,l,pf_analytic,pm_analytic,pf_emp,pm_emp\n";
    for (const ExperimentResult& r : results) emit_roc_figure(out, r.spec.label, r.powers);
  }

  // Human-readable summary alongside.
  std::ofstream table(output_dir + "/" + preset + "_summary.txt");
  table << "series  power_dbm  tau_analytic  tau_hat_mean  eq_err_analytic  eq_err_empirical\n";
  char buf[256];
  for (const ExperimentResult& r : results) {
    for (const PowerRunResult& pr : r.powers) {
      std::snprintf(buf, sizeof(buf), "%-20s %8.4g %12.5g %12.5g %12.5g %12.5g\n",
                    r.spec.label.c_str(), pr.power_dbm, pr.tau_analytic, pr.tau_hat_mean,
                    pr.equal_error_analytic, pr.equal_error_empirical);
      table << buf;
    }
  }
  return path;
}

std::string emit_plotdata_from_files(const std::string& preset, const std::string& output_dir) {
  const std::string manifest_path = output_dir + "/" + preset + "_manifest.csv";
  std::ifstream manifest(manifest_path);
  if (!manifest) throw std::runtime_error("emit_plotdata: missing manifest " + manifest_path);

  std::map<std::string, ExperimentResult> by_label;
  std::vector<std::string> order;
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string label, power_str, kind, path;
    if (!std::getline(ss, label, ',') || !std::getline(ss, power_str, ',') ||
        !std::getline(ss, kind, ',') || !std::getline(ss, path, ','))
      throw std::runtime_error("emit_plotdata: malformed manifest row: " + line);

    auto it = by_label.find(label);
    if (it == by_label.end()) {
      by_label[label].spec.label = label;
      order.push_back(label);
      it = by_label.find(label);
    }
    PowerRunResult pr;
    pr.power_dbm = std::strtod(power_str.c_str(), nullptr);
    if (kind == "roc") {
      std::ifstream in(path);
      if (!in) throw std::runtime_error("emit_plotdata: missing input " + path);
      pr.report = DetectionReport::from_csv(in);
      pr.tau_analytic = pr.report.tau;
      pr.equal_error_empirical = empirical_equal_error(pr.report);
      pr.equal_error_analytic = -1.0;
    } else if (kind == "point") {
      std::ifstream in(path);
      if (!in) throw std::runtime_error("emit_plotdata: missing input " + path);
      std::string header, row;
      std::getline(in, header);
      std::getline(in, row);
      double pf, pm;
      long fa, miss, ni, na;
      if (std::sscanf(row.c_str(), "%lg,%lg,%ld,%ld,%ld,%ld", &pf, &pm, &fa, &miss, &ni, &na) !=
          6)
        throw std::runtime_error("emit_plotdata: malformed point file " + path);
      pr.operating_point.false_alarms = fa;
      pr.operating_point.misses = miss;
      pr.operating_point.n_inactive = ni;
      pr.operating_point.n_active = na;
      if (ni > 0) pr.operating_point.pf = pf;
      if (na > 0) pr.operating_point.pm = pm;
    } else if (kind == "summary") {
      std::ifstream in(path);
      if (!in) throw std::runtime_error("emit_plotdata: missing input " + path);
      std::string header;
      std::getline(in, header);
      std::string row;
      ExperimentResult& res = it->second;
      res.powers.clear();
      while (std::getline(in, row)) {
        if (row.empty()) continue;
        PowerRunResult spr;
        char lbl[128], alg[64];
        int from_se = 0;
        long trials = 0, failures = 0;
        double pf_pt, pm_pt;
        if (std::sscanf(row.c_str(),
                        "%127[^,],%63[^,],%lg,%lg,%lg,%d,%lg,%lg,%lg,%lg,%lg,%lg,%lg,%ld,%ld,%lg,"
                        "%lg",
                        lbl, alg, &spr.power_dbm, &spr.sigma_w, &spr.tau_analytic, &from_se,
                        &spr.tau_hat_mean, &spr.equal_error_analytic, &spr.equal_error_empirical,
                        &spr.threshold_at_target_pf, &spr.pm_at_target_pf_analytic,
                        &spr.pm_at_target_pf_empirical, &spr.best_kappa, &trials, &failures,
                        &pf_pt, &pm_pt) != 17)
          throw std::runtime_error("emit_plotdata: malformed summary row in " + path);
        spr.tau_from_se = from_se != 0;
        spr.trials_done = trials;
        spr.trials_failed = failures;
        res.powers.push_back(spr);
      }
      continue;
    } else {
      throw std::runtime_error("emit_plotdata: unknown manifest kind " + kind);
    }
    it->second.powers.push_back(std::move(pr));
  }

  std::vector<ExperimentResult> results;
  for (const std::string& label : order) results.push_back(std::move(by_label[label]));
  if (results.empty()) throw std::runtime_error("emit_plotdata: empty manifest");
  return emit_plotdata(preset, results, output_dir);
}

CellConfig desk_cell() {
  CellConfig cfg;
  cfg.num_users = 1000;
  cfg.pilot_len = 200;
  cfg.num_antennas = 1;
  cfg.activity_prob = 0.05;
  cfg.cell_radius_m = 1000.0;
  cfg.pathloss_alpha_db = 15.3;
  cfg.pathloss_beta_db = 37.6;
  cfg.shadow_sigma_db = 8.0;
  cfg.tx_power_dbm = 15.0;
  cfg.noise_psd_dbm_hz = -169.0;
  cfg.bandwidth_hz = 1e7;
  return cfg;
}

PresetRun make_preset(const std::string& name, const std::string& output_dir, std::uint64_t seed,
                      int trials_override, int workers) {
  PresetRun preset;
  preset.name = name;

  const bool paper = name.size() > 6 && name.substr(name.size() - 5) == "paper";
  CellConfig base = desk_cell();
  if (paper) {
    base.num_users = 4000;
    base.pilot_len = 800;
  }

  const auto spec_for = [&](Algorithm a, const CellConfig& cell, std::vector<double> powers,
                            int trials, const std::string& label) {
    ExperimentSpec s;
    s.cell = cell;
    s.algorithm = a;
    s.trials = trials_override > 0 ? trials_override : trials;
    s.seed = seed;
    s.power_sweep_dbm = std::move(powers);
    s.output_path = output_dir;
    s.label = label;
    s.workers = workers;
    s.fixed_support = paper;
    return s;
  };

  const int roc_trials = paper ? 25 : 220;
  const int cmp_trials = paper ? 15 : 100;
  const int rate_trials = paper ? 10 : 60;

  if (name.rfind("fig1", 0) == 0) {
    preset.specs.push_back(
        spec_for(Algorithm::amp_mmse_stat, base, {5, 15, 25}, roc_trials, "mmse_stat"));
  } else if (name.rfind("fig2", 0) == 0) {
    preset.specs.push_back(
        spec_for(Algorithm::amp_mmse_known_g, base, {5, 15, 25}, roc_trials, "mmse_known_g"));
    preset.specs.push_back(
        spec_for(Algorithm::amp_mmse_stat, base, {5, 15, 25}, roc_trials, "mmse_stat"));
  } else if (name.rfind("fig3", 0) == 0) {
    preset.specs.push_back(
        spec_for(Algorithm::amp_mmse_stat, base, {15}, cmp_trials, "mmse_stat"));
    preset.specs.push_back(spec_for(Algorithm::amp_soft, base, {15}, cmp_trials, "soft"));
    preset.specs.push_back(spec_for(Algorithm::cosamp, base, {15}, cmp_trials, "cosamp"));
  } else if (name.rfind("fig4", 0) == 0) {
    const std::vector<int> pilot_lens = paper ? std::vector<int>{400, 800}
                                              : std::vector<int>{100, 200};
    for (int l : pilot_lens) {
      CellConfig cell = base;
      cell.pilot_len = l;
      preset.specs.push_back(spec_for(Algorithm::amp_mmse_stat, cell, {5, 10, 15, 20, 25},
                                      rate_trials, "mmse_L" + std::to_string(l)));
      preset.specs.push_back(spec_for(Algorithm::amp_soft, cell, {5, 10, 15, 20, 25}, rate_trials,
                                      "soft_L" + std::to_string(l)));
    }
  } else if (name.rfind("fig5", 0) == 0) {
    for (int m : {1, 2, 4}) {
      CellConfig cell = base;
      cell.num_antennas = m;
      preset.specs.push_back(spec_for(Algorithm::vamp_known_g, cell, {10}, cmp_trials,
                                      "vamp_M" + std::to_string(m)));
      preset.specs.push_back(spec_for(Algorithm::parallel_ampmmv, cell, {10}, cmp_trials,
                                      "ampmmv_M" + std::to_string(m)));
    }
  } else if (name.rfind("fig6", 0) == 0) {
    const std::vector<int> pilot_lens = paper ? std::vector<int>{300, 600}
                                              : std::vector<int>{100, 200};
    for (int l : pilot_lens) {
      for (int m : {1, 2, 4}) {
        CellConfig cell = base;
        cell.pilot_len = l;
        cell.num_antennas = m;
        preset.specs.push_back(spec_for(Algorithm::vamp_known_g, cell, {5, 15, 25}, rate_trials,
                                        "vamp_L" + std::to_string(l) + "_M" + std::to_string(m)));
      }
    }
  } else {
    throw std::invalid_argument("unknown preset: " + name);
  }
  return preset;
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!key.empty()) kv[key] = value;
  }
  return kv;
}

namespace {

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (!cell.empty()) out.push_back(std::strtod(cell.c_str(), nullptr));
  }
  return out;
}

}  // namespace

void apply_config(ExperimentSpec& spec, const std::map<std::string, std::string>& kv) {
  const auto get = [&](const char* key) -> const std::string* {
    const auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  if (const auto* v = get("N")) spec.cell.num_users = std::stoi(*v);
  if (const auto* v = get("L")) spec.cell.pilot_len = std::stoi(*v);
  if (const auto* v = get("M")) spec.cell.num_antennas = std::stoi(*v);
  if (const auto* v = get("lambda")) spec.cell.activity_prob = std::strtod(v->c_str(), nullptr);
  if (const auto* v = get("R")) spec.cell.cell_radius_m = std::strtod(v->c_str(), nullptr);
  if (const auto* v = get("alpha")) spec.cell.pathloss_alpha_db = std::strtod(v->c_str(), nullptr);
  if (const auto* v = get("beta")) spec.cell.pathloss_beta_db = std::strtod(v->c_str(), nullptr);
  if (const auto* v = get("sigma_sf")) spec.cell.shadow_sigma_db = std::strtod(v->c_str(), nullptr);
  if (const auto* v = get("noise_psd")) spec.cell.noise_psd_dbm_hz = std::strtod(v->c_str(), nullptr);
  if (const auto* v = get("bandwidth")) spec.cell.bandwidth_hz = std::strtod(v->c_str(), nullptr);
  if (const auto* v = get("algorithm")) spec.algorithm = algorithm_from_name(*v);
  if (const auto* v = get("trials")) spec.trials = std::stoi(*v);
  if (const auto* v = get("seed")) spec.seed = std::stoull(*v);
  if (const auto* v = get("powers")) spec.power_sweep_dbm = parse_double_list(*v);
  if (const auto* v = get("threshold_mode")) {
    if (*v == "roc_sweep")
      spec.threshold_mode = ThresholdMode::roc_sweep;
    else if (*v == "target_pf")
      spec.threshold_mode = ThresholdMode::target_pf;
    else if (*v == "equal_error")
      spec.threshold_mode = ThresholdMode::equal_error;
    else
      throw std::invalid_argument("unknown threshold_mode: " + *v);
  }
  if (const auto* v = get("target_pf")) spec.target_pf = std::strtod(v->c_str(), nullptr);
  if (const auto* v = get("output")) spec.output_path = *v;
  if (const auto* v = get("label")) spec.label = *v;
  if (const auto* v = get("workers")) spec.workers = std::stoi(*v);
  if (const auto* v = get("fixed_support")) spec.fixed_support = *v == "1" || *v == "true";
  if (const auto* v = get("kappa")) spec.soft_kappa = std::strtod(v->c_str(), nullptr);
  if (const auto* v = get("kappa_grid")) spec.kappa_grid = parse_double_list(*v);
  if (const auto* v = get("max_iter")) spec.stop.max_iter = std::stoi(*v);
  if (const auto* v = get("rel_tol")) spec.stop.rel_tol = std::strtod(v->c_str(), nullptr);
  if (const auto* v = get("outer")) spec.schedule.outer = std::stoi(*v);
  if (const auto* v = get("inner")) spec.schedule.inner = std::stoi(*v);
  if (const auto* v = get("tau_override"))
    spec.analytic_tau_override = std::strtod(v->c_str(), nullptr);
  if (const auto* v = get("roc_points")) spec.roc_points = std::stoi(*v);
}

}  // namespace ampdet
