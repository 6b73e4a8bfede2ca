#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pslab/synthetic_nc.hpp"

namespace pslab {

enum class SyntheticMode { off, alignment_only, full };

struct ExperimentConfig {
  std::string setup = "setup1";
  std::vector<Index> n_list;
  int n_replicates = 100;
  std::vector<Tuner> tuners = {Tuner::cv, Tuner::max_smd, Tuner::mean_smd};
  std::vector<WeightScheme> schemes = {WeightScheme::IPW};
  Basis basis = Basis::raw;  // setup2 forces hal
  int k_synthetic = 100;
  SyntheticMode synthetic_mode = SyntheticMode::off;
  std::uint64_t master_seed = 1;
  int parallelism = 1;
  int n_folds = 10;
  int n_lambda = 100;
  double lambda_min_ratio = 1e-4;
  bool target_sum_printed = false;  // printed Step-3 formula vs textual intent
  BasisSpec basis_spec;

  void validate_and_normalize();
};

// TOML-style key = value text; '#' comments, optional [section] headers.
ExperimentConfig load_config(const std::string& path);
std::string config_echo(const ExperimentConfig& cfg);

struct AnalysisResult {
  AnalysisSpec spec;
  bool ok = false;
  std::string error;
  double estimate = 0.0, se = 0.0, ci_low = 0.0, ci_high = 0.0;
  double chosen_lambda = 0.0;
  Index chosen_index = 0;
  double max_weight = 0.0;
  bool lambda_below_cv = false;
  bool has_synth = false;
  double synth_mean_bias = 0.0, synth_mean_pct = 0.0, synth_sd = 0.0;
  int synth_k_ok = 0;
};

struct ReplicateResult {
  Index n = 0;
  int rep = 0;
  std::uint64_t seed = 0;
  double unadjusted = 0.0;
  double lambda_cv = 0.0;
  std::vector<AnalysisResult> analyses;
  bool has_alignment = false;
  double align_slope = 0.0, align_r2 = 0.0;
  // per-covariate balance dump, populated for replicate 0 only
  Eigen::VectorXd smd_unadjusted, smd_weighted_cv_ipw;
};

ReplicateResult run_replicate(const ExperimentConfig& cfg, Index n, int rep,
                              std::uint64_t rep_seed);

struct MetricsRow {
  std::string setup;
  Index n = 0;
  std::string tuner, scheme, basis;
  int n_replicates_ok = 0;
  double bias = 0.0, bias_mc_se = 0.0, percent_bias = 0.0, sd = 0.0;
  double coverage95 = 0.0;
  bool has_coverage = true;
  double frac_lambda_below_cv = 0.0;
  bool has_synth = false;
  double mean_synthetic_bias = 0.0, mean_synthetic_percent_bias = 0.0,
         sd_synthetic_bias = 0.0;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<MetricsRow> table;
  std::vector<ReplicateResult> replicates;  // all, in (scenario, rep) order
  double wall_seconds = 0.0;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);

std::vector<MetricsRow> aggregate(const ExperimentConfig& cfg,
                                  const std::vector<ReplicateResult>& reps);

void emit_results(const ExperimentResult& result, const std::string& out_dir);

}  // namespace pslab
