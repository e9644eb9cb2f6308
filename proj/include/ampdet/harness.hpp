#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ampdet/baselines.hpp"
#include "ampdet/channel_model.hpp"
#include "ampdet/detection.hpp"
#include "ampdet/mmv_amp.hpp"
#include "ampdet/smv_amp.hpp"
#include "ampdet/state_evolution.hpp"

namespace ampdet {

enum class Algorithm {
  amp_mmse_stat,
  amp_mmse_known_g,
  amp_soft,
  cosamp,
  vamp_stat,
  vamp_known_g,
  parallel_ampmmv,
};

const char* algorithm_name(Algorithm algorithm);
Algorithm algorithm_from_name(const std::string& name);

enum class ThresholdMode { roc_sweep, target_pf, equal_error };

struct ExperimentSpec {
  CellConfig cell;
  Algorithm algorithm = Algorithm::amp_mmse_stat;
  int trials = 1;
  std::uint64_t seed = 1;
  std::vector<double> power_sweep_dbm = {15.0};
  ThresholdMode threshold_mode = ThresholdMode::roc_sweep;
  double target_pf = 0.1;
  std::string output_path = "out";
  std::string label;  // series label; defaults to the algorithm name
  int workers = 1;
  bool fixed_support = false;
  double soft_kappa = 0.0;          // 0: grid-search over kappa_grid
  std::vector<double> kappa_grid;   // defaults to 10 log-spaced points in [0.8, 4]
  StopRule stop;
  AmpMmvSchedule schedule;
  double analytic_tau_override = 0.0;  // 0: SE fixed point (or pilot trial)
  int roc_points = 200;

  bool valid() const;
};

struct PowerRunResult {
  double power_dbm = 0.0;
  double sigma_w = 0.0;
  double tau_analytic = 0.0;
  bool tau_from_se = false;  // false: pilot-trial empirical estimate
  double tau_hat_mean = 0.0;
  DetectionReport report;           // empty for cosamp
  EmpiricalRates operating_point;   // cosamp support membership
  double equal_error_analytic = -1.0;
  double equal_error_empirical = -1.0;
  double threshold_at_target_pf = -1.0;
  double pm_at_target_pf_analytic = -1.0;
  double pm_at_target_pf_empirical = -1.0;
  double best_kappa = 0.0;  // amp_soft
  long trials_done = 0;
  long trials_failed = 0;
};

struct ExperimentResult {
  ExperimentSpec spec;
  std::vector<PowerRunResult> powers;
};

// Runs the trial sweep for every power, aggregates empirical false-alarm and
// missed-detection counts against a fixed threshold grid, computes the
// analytic curves at the state-evolution noise level, and writes one ROC (or
// operating-point) CSV per power plus a summary CSV. Deterministic per seed.
ExperimentResult run_experiment(const ExperimentSpec& spec);

// Per-figure data emission from completed experiments. Writes
// <output_dir>/<preset>.csv with a documented schema and returns its path.
std::string emit_plotdata(const std::string& preset, const std::vector<ExperimentResult>& results,
                          const std::string& output_dir);

// Rebuilds the figure data from the CSVs a previous `run` wrote, using the
// manifest file; exercises the CSV readers end to end.
std::string emit_plotdata_from_files(const std::string& preset, const std::string& output_dir);

struct PresetRun {
  std::string name;
  std::vector<ExperimentSpec> specs;
};

// fig{1..6}-desk and fig{1..6}-paper presets.
PresetRun make_preset(const std::string& name, const std::string& output_dir, std::uint64_t seed,
                      int trials_override = 0, int workers = 1);

// Flat key=value configuration files; '#' starts a comment.
std::map<std::string, std::string> parse_config_file(const std::string& path);
void apply_config(ExperimentSpec& spec, const std::map<std::string, std::string>& kv);

// Paper-default cell parameters (desk scale).
CellConfig desk_cell();

}  // namespace ampdet
