#include "pslab/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "pslab/rng.hpp"
#include "pslab/simulation.hpp"

namespace pslab {

void ExperimentConfig::validate_and_normalize() {
  if (setup != "setup1" && setup != "setup2")
    throw std::invalid_argument("config: setup must be setup1 or setup2");
  if (n_list.empty()) throw std::invalid_argument("config: n_list is empty");
  if (n_replicates < 1)
    throw std::invalid_argument("config: n_replicates must be >= 1");
  if (tuners.empty()) throw std::invalid_argument("config: tuners is empty");
  if (schemes.empty()) throw std::invalid_argument("config: schemes is empty");
  if (parallelism < 1) parallelism = 1;
  if (setup == "setup2") basis = Basis::hal;
  if (synthetic_mode != SyntheticMode::off && k_synthetic < 1)
    throw std::invalid_argument(
        "config: k_synthetic must be >= 1 when synthetic_mode is not off");
}

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw std::invalid_argument("config: cannot open '" + path + "'");
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty() || line.front() == '[') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                  " is not key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    try {
      if (key == "setup") {
        cfg.setup = val;
      } else if (key == "n_list") {
        cfg.n_list.clear();
        for (const auto& t : split_list(val))
          cfg.n_list.push_back(static_cast<Index>(std::stoll(t)));
      } else if (key == "n_replicates") {
        cfg.n_replicates = std::stoi(val);
      } else if (key == "tuners") {
        cfg.tuners.clear();
        for (const auto& t : split_list(val)) cfg.tuners.push_back(parse_tuner(t));
      } else if (key == "schemes") {
        cfg.schemes.clear();
        for (const auto& t : split_list(val))
          cfg.schemes.push_back(parse_scheme(t));
      } else if (key == "basis") {
        cfg.basis = parse_basis(val);
      } else if (key == "k_synthetic") {
        cfg.k_synthetic = std::stoi(val);
      } else if (key == "synthetic_mode") {
        if (val == "off")
          cfg.synthetic_mode = SyntheticMode::off;
        else if (val == "alignment_only")
          cfg.synthetic_mode = SyntheticMode::alignment_only;
        else if (val == "full")
          cfg.synthetic_mode = SyntheticMode::full;
        else
          throw std::invalid_argument("bad synthetic_mode '" + val + "'");
      } else if (key == "master_seed") {
        cfg.master_seed = std::stoull(val);
      } else if (key == "parallelism") {
        cfg.parallelism = std::stoi(val);
      } else if (key == "n_folds") {
        cfg.n_folds = std::stoi(val);
      } else if (key == "n_lambda") {
        cfg.n_lambda = std::stoi(val);
      } else if (key == "lambda_min_ratio") {
        cfg.lambda_min_ratio = std::stod(val);
      } else if (key == "target_sum_formula") {
        if (val == "text")
          cfg.target_sum_printed = false;
        else if (val == "printed")
          cfg.target_sum_printed = true;
        else
          throw std::invalid_argument("bad target_sum_formula '" + val + "'");
      } else if (key == "hal_max_degree") {
        cfg.basis_spec.max_degree = std::stoi(val);
      } else if (key == "hal_knots_per_cov") {
        cfg.basis_spec.knots_per_cov = std::stoi(val);
      } else if (key == "hal_knot_rule") {
        if (val == "all_observed")
          cfg.basis_spec.knot_rule = KnotRule::all_observed;
        else if (val == "quantile")
          cfg.basis_spec.knot_rule = KnotRule::quantile;
        else
          throw std::invalid_argument("bad hal_knot_rule '" + val + "'");
      } else {
        throw std::invalid_argument("unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument&) {
      throw;
    } catch (const std::exception& e) {
      throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                  ": " + e.what());
    }
  }
  cfg.validate_and_normalize();
  return cfg;
}

std::string config_echo(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "setup = " << cfg.setup << '\n';
  out << "n_list = ";
  for (std::size_t i = 0; i < cfg.n_list.size(); ++i)
    out << (i ? ", " : "") << cfg.n_list[i];
  out << '\n';
  out << "n_replicates = " << cfg.n_replicates << '\n';
  out << "tuners = ";
  for (std::size_t i = 0; i < cfg.tuners.size(); ++i)
    out << (i ? ", " : "") << tuner_name(cfg.tuners[i]);
  out << '\n';
  out << "schemes = ";
  for (std::size_t i = 0; i < cfg.schemes.size(); ++i)
    out << (i ? ", " : "") << scheme_name(cfg.schemes[i]);
  out << '\n';
  out << "basis = " << basis_name(cfg.basis) << '\n';
  out << "k_synthetic = " << cfg.k_synthetic << '\n';
  out << "synthetic_mode = "
      << (cfg.synthetic_mode == SyntheticMode::off
              ? "off"
              : cfg.synthetic_mode == SyntheticMode::alignment_only
                    ? "alignment_only"
                    : "full")
      << '\n';
  out << "master_seed = " << cfg.master_seed << '\n';
  out << "parallelism = " << cfg.parallelism << '\n';
  out << "n_folds = " << cfg.n_folds << '\n';
  out << "n_lambda = " << cfg.n_lambda << '\n';
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", cfg.lambda_min_ratio);
  out << "lambda_min_ratio = " << buf << '\n';
  out << "target_sum_formula = " << (cfg.target_sum_printed ? "printed" : "text")
      << '\n';
  out << "hal_max_degree = " << cfg.basis_spec.max_degree << '\n';
  out << "hal_knots_per_cov = " << cfg.basis_spec.knots_per_cov << '\n';
  out << "hal_knot_rule = "
      << (cfg.basis_spec.knot_rule == KnotRule::quantile ? "quantile"
                                                         : "all_observed")
      << '\n';
  return out.str();
}

namespace {

// least-squares slope and R^2 of y on x
std::pair<double, double> regress(const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& y) {
  const double xm = x.mean();
  const double ym = y.mean();
  const double sxx = (x.array() - xm).square().sum();
  const double sxy = ((x.array() - xm) * (y.array() - ym)).sum();
  const double syy = (y.array() - ym).square().sum();
  if (sxx == 0.0 || syy == 0.0) return {0.0, 0.0};
  const double slope = sxy / sxx;
  const double r2 = (sxy * sxy) / (sxx * syy);
  return {slope, r2};
}

}  // namespace

ReplicateResult run_replicate(const ExperimentConfig& cfg, Index n, int rep,
                              std::uint64_t rep_seed) {
  ReplicateResult res;
  res.n = n;
  res.rep = rep;
  res.seed = rep_seed;

  const std::uint64_t seed_data = derive_seed(rep_seed, 1);
  const std::uint64_t seed_folds = derive_seed(rep_seed, 2);
  const std::uint64_t seed_synth = derive_seed(rep_seed, 3);

  Dataset ds;
  if (cfg.setup == "setup1") {
    Setup1Config sc;
    sc.n = n;
    sc.seed = seed_data;
    ds = generate_setup1(sc).first;
  } else {
    Setup2Config sc;
    sc.n = n;
    sc.seed = seed_data;
    ds = generate_setup2(sc).first;
  }

  // design over which the lasso runs; balance columns are the same matrix
  Dataset wds;
  BasisExpansion expansion;
  if (cfg.basis == Basis::hal) {
    expansion = expand_basis(ds, cfg.basis_spec);
    wds.y = ds.y;
    wds.a = ds.a;
    wds.x = expansion.w;
    wds.col_kind.assign(expansion.w.cols(), ColKind::binary);
  } else {
    wds = ds;
  }

  const FoldAssignment folds = assign_folds(wds, cfg.n_folds, seed_folds);
  const auto grid =
      make_lambda_grid(lambda_max(wds), cfg.n_lambda, cfg.lambda_min_ratio);
  SolverOptions solver;
  const LassoPath path = fit_path(wds, grid, folds, solver);
  res.lambda_cv = path.lambdas[path.lambda_cv_index];
  res.unadjusted =
      weighted_mean_difference(ds.y, ds.a, Eigen::VectorXd::Ones(ds.n()))
          .estimate;

  for (Tuner tuner : cfg.tuners) {
    for (WeightScheme scheme : cfg.schemes) {
      AnalysisResult ar;
      ar.spec = {tuner, scheme, cfg.basis};
      try {
        Index idx;
        if (tuner == Tuner::cv) {
          idx = path.lambda_cv_index;
        } else {
          const BalanceCriterion crit = tuner == Tuner::max_smd
                                            ? BalanceCriterion::max_smd
                                            : BalanceCriterion::mean_smd;
          idx = tune_by_balance(path, wds, scheme, crit, wds.x, wds.col_kind)
                    .chosen_index;
        }
        const WeightedEstimate est = estimate_effect(path, idx, wds, scheme);
        ar.ok = true;
        ar.estimate = est.estimate;
        ar.se = est.se;
        ar.ci_low = est.ci_low;
        ar.ci_high = est.ci_high;
        ar.max_weight = est.max_weight;
        ar.chosen_index = idx;
        ar.chosen_lambda = path.lambdas[idx];
        ar.lambda_below_cv = ar.chosen_lambda < res.lambda_cv;
      } catch (const std::exception& e) {
        ar.ok = false;
        ar.error = e.what();
      }
      res.analyses.push_back(std::move(ar));
    }
  }

  const bool want_synth =
      cfg.synthetic_mode != SyntheticMode::off && cfg.k_synthetic > 0;
  if (want_synth) {
    // Algorithm 1: reference PS from the CV-tuned full-data fit
    const Eigen::VectorXd fitted =
        predict(path.fits[path.lambda_cv_index], wds.x);
    const Dataset ds_u = subset_unexposed(ds);
    const Index nu = ds_u.n();
    Eigen::VectorXd theta(nu);
    {
      Index k = 0;
      for (Index i = 0; i < ds.n(); ++i)
        if (ds.a[i] == 0.0) theta[k++] = logit(fitted[i]);
    }
    const double target_sum =
        cfg.target_sum_printed
            ? (static_cast<double>(nu) / ds.n()) * nu
            : (static_cast<double>(ds.n() - nu) / ds.n()) * nu;
    const SyntheticAssignmentModel model = make_assignment_model(
        theta, target_sum, path.lambdas[path.lambda_cv_index]);
    const std::vector<SyntheticCohort> cohorts =
        generate_cohorts(ds_u, model, cfg.k_synthetic, ds.n(), seed_synth);

    if (cfg.synthetic_mode == SyntheticMode::full) {
      std::vector<AnalysisSpec> specs;
      for (const AnalysisResult& ar : res.analyses) specs.push_back(ar.spec);
      PipelineConfig pipe;
      pipe.n_folds = cfg.n_folds;
      pipe.n_lambda = cfg.n_lambda;
      pipe.lambda_min_ratio = cfg.lambda_min_ratio;
      pipe.basis_spec = cfg.basis_spec;
      const SyntheticBiasReport report =
          run_bias_detection(cohorts, ds_u, specs, pipe);
      for (std::size_t a = 0; a < res.analyses.size(); ++a) {
        res.analyses[a].has_synth = true;
        res.analyses[a].synth_mean_bias = report.analyses[a].mean_bias;
        res.analyses[a].synth_mean_pct = report.analyses[a].mean_percent_bias;
        res.analyses[a].synth_sd = report.analyses[a].sd_bias;
        res.analyses[a].synth_k_ok = report.analyses[a].k_ok;
      }
    }

    if (rep == 0) {
      // alignment of covariate differences: exposure groups vs synthetic
      // groups in the unexposed, averaged over cohorts
      const Eigen::MatrixXd& cols_full = wds.x;
      Eigen::MatrixXd cols_u;
      if (cfg.basis == Basis::hal)
        cols_u = transform_new(expansion, ds_u.x);
      else
        cols_u = ds_u.x;
      const Index K = cols_full.cols();
      Eigen::VectorXd d1(K);
      {
        double c1 = 0.0, c0 = 0.0;
        Eigen::VectorXd s1 = Eigen::VectorXd::Zero(K),
                        s0 = Eigen::VectorXd::Zero(K);
        for (Index i = 0; i < ds.n(); ++i) {
          if (ds.a[i] == 1.0) {
            s1 += cols_full.row(i).transpose();
            c1 += 1.0;
          } else {
            s0 += cols_full.row(i).transpose();
            c0 += 1.0;
          }
        }
        d1 = s1 / c1 - s0 / c0;
      }
      const Eigen::VectorXd d2 = synthetic_column_differences(cohorts, cols_u);
      const auto [slope, r2] = regress(d1, d2);
      res.has_alignment = true;
      res.align_slope = slope;
      res.align_r2 = r2;
    }
  }

  if (rep == 0) {
    const Eigen::VectorXd unit = Eigen::VectorXd::Ones(ds.n());
    res.smd_unadjusted =
        balance_report(wds.x, wds.col_kind, wds.a, unit).smd;
    const Eigen::VectorXd w_cv = compute_weights(
        path.oof_pred.col(path.lambda_cv_index), wds.a, WeightScheme::IPW);
    res.smd_weighted_cv_ipw =
        balance_report(wds.x, wds.col_kind, wds.a, w_cv).smd;
  }
  return res;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in;
  cfg.validate_and_normalize();
  const auto t0 = std::chrono::steady_clock::now();

  struct Job {
    std::size_t scen;
    int rep;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t s = 0; s < cfg.n_list.size(); ++s) {
    const std::uint64_t scen_seed = derive_seed(cfg.master_seed, s);
    for (int r = 0; r < cfg.n_replicates; ++r)
      jobs.push_back({s, r, derive_seed(scen_seed, static_cast<std::uint64_t>(r))});
  }

  ExperimentResult result;
  result.config = cfg;
  result.replicates.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errs(jobs.size());
  const auto worker = [&] {
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= jobs.size()) return;
      try {
        result.replicates[j] = run_replicate(cfg, cfg.n_list[jobs[j].scen],
                                             jobs[j].rep, jobs[j].seed);
      } catch (...) {
        errs[j] = std::current_exception();
      }
    }
  };
  const int nt = std::min<int>(cfg.parallelism, static_cast<int>(jobs.size()));
  if (nt > 1) {
    std::vector<std::thread> pool;
    for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  } else {
    worker();
  }
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);

  result.table = aggregate(cfg, result.replicates);
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return result;
}

std::vector<MetricsRow> aggregate(const ExperimentConfig& cfg,
                                  const std::vector<ReplicateResult>& reps) {
  std::vector<MetricsRow> table;
  for (Index n : cfg.n_list) {
    std::vector<const ReplicateResult*> scen;
    for (const auto& r : reps)
      if (r.n == n) scen.push_back(&r);
    if (scen.empty()) continue;

    // unadjusted baseline row
    {
      MetricsRow row;
      row.setup = cfg.setup;
      row.n = n;
      row.tuner = "none";
      row.scheme = "unadjusted";
      row.basis = basis_name(cfg.basis);
      double s = 0.0;
      for (const auto* r : scen) s += r->unadjusted;
      row.n_replicates_ok = static_cast<int>(scen.size());
      row.bias = s / scen.size();
      double v = 0.0;
      for (const auto* r : scen)
        v += (r->unadjusted - row.bias) * (r->unadjusted - row.bias);
      row.sd = scen.size() > 1 ? std::sqrt(v / (scen.size() - 1)) : 0.0;
      row.bias_mc_se = row.sd / std::sqrt(static_cast<double>(scen.size()));
      row.percent_bias = 100.0;
      row.has_coverage = false;
      table.push_back(row);
    }

    std::size_t cell = 0;
    for (Tuner tuner : cfg.tuners) {
      for (WeightScheme scheme : cfg.schemes) {
        MetricsRow row;
        row.setup = cfg.setup;
        row.n = n;
        row.tuner = tuner_name(tuner);
        row.scheme = scheme_name(scheme);
        row.basis = basis_name(cfg.basis);
        double s = 0.0, su = 0.0;
        std::vector<double> ests;
        int covered = 0, below = 0;
        double synth_b = 0.0, synth_p = 0.0, synth_sd = 0.0;
        int synth_n = 0;
        for (const auto* r : scen) {
          const AnalysisResult& ar = r->analyses[cell];
          if (!ar.ok) continue;
          ests.push_back(ar.estimate);
          s += ar.estimate;
          su += r->unadjusted;
          if (ar.ci_low <= 0.0 && 0.0 <= ar.ci_high) ++covered;
          if (ar.lambda_below_cv) ++below;
          if (ar.has_synth) {
            synth_b += ar.synth_mean_bias;
            synth_p += ar.synth_mean_pct;
            synth_sd += ar.synth_sd;
            ++synth_n;
          }
        }
        row.n_replicates_ok = static_cast<int>(ests.size());
        if (!ests.empty()) {
          row.bias = s / ests.size();
          double v = 0.0;
          for (double e : ests) v += (e - row.bias) * (e - row.bias);
          row.sd = ests.size() > 1 ? std::sqrt(v / (ests.size() - 1)) : 0.0;
          row.bias_mc_se = row.sd / std::sqrt(static_cast<double>(ests.size()));
          const double mu = su / ests.size();
          row.percent_bias = mu != 0.0 ? 100.0 * row.bias / mu : 0.0;
          row.coverage95 =
              static_cast<double>(covered) / static_cast<double>(ests.size());
          row.frac_lambda_below_cv =
              static_cast<double>(below) / static_cast<double>(ests.size());
        }
        if (synth_n > 0) {
          row.has_synth = true;
          row.mean_synthetic_bias = synth_b / synth_n;
          row.mean_synthetic_percent_bias = synth_p / synth_n;
          row.sd_synthetic_bias = synth_sd / synth_n;
        }
        table.push_back(row);
        ++cell;
      }
    }
  }
  return table;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void emit_results(const ExperimentResult& result, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const ExperimentConfig& cfg = result.config;

  {
    std::ofstream out(fs::path(out_dir) / "metrics.csv");
    if (!out) throw std::runtime_error("cannot write metrics.csv");
    out << "setup,n,tuner,scheme,basis,n_replicates_ok,bias,bias_mc_se,"
           "percent_bias,sd,coverage95,frac_lambda_below_cv,"
           "mean_synthetic_bias,mean_synthetic_percent_bias,sd_synthetic_bias\n";
    for (const MetricsRow& row : result.table) {
      out << row.setup << ',' << row.n << ',' << row.tuner << ',' << row.scheme
          << ',' << row.basis << ',' << row.n_replicates_ok << ','
          << fmt(row.bias) << ',' << fmt(row.bias_mc_se) << ','
          << fmt(row.percent_bias) << ',' << fmt(row.sd) << ',';
      if (row.has_coverage) out << fmt(row.coverage95);
      out << ',' << fmt(row.frac_lambda_below_cv) << ',';
      if (row.has_synth)
        out << fmt(row.mean_synthetic_bias) << ','
            << fmt(row.mean_synthetic_percent_bias) << ','
            << fmt(row.sd_synthetic_bias);
      else
        out << ",,";
      out << '\n';
    }
  }

  {
    std::ofstream out(fs::path(out_dir) / "balance_smd.csv");
    if (!out) throw std::runtime_error("cannot write balance_smd.csv");
    out << "setup,n,covariate,smd_unadjusted,smd_weighted\n";
    for (const ReplicateResult& r : result.replicates) {
      if (r.rep != 0 || r.smd_unadjusted.size() == 0) continue;
      for (Index k = 0; k < r.smd_unadjusted.size(); ++k)
        out << cfg.setup << ',' << r.n << ',' << (k + 1) << ','
            << fmt(r.smd_unadjusted[k]) << ',' << fmt(r.smd_weighted_cv_ipw[k])
            << '\n';
    }
  }

  {
    std::ofstream out(fs::path(out_dir) / "alignment.csv");
    if (!out) throw std::runtime_error("cannot write alignment.csv");
    out << "setup,n,slope,r2\n";
    for (const ReplicateResult& r : result.replicates) {
      if (!r.has_alignment) continue;
      out << cfg.setup << ',' << r.n << ',' << fmt(r.align_slope) << ','
          << fmt(r.align_r2) << '\n';
    }
  }

  {
    nlohmann::json meta;
    meta["config"] = config_echo(cfg);
    meta["master_seed"] = cfg.master_seed;
    nlohmann::json scen = nlohmann::json::array();
    for (std::size_t s = 0; s < cfg.n_list.size(); ++s) {
      nlohmann::json e;
      e["n"] = cfg.n_list[s];
      e["seed"] = derive_seed(cfg.master_seed, s);
      scen.push_back(e);
    }
    meta["scenario_seeds"] = scen;
    meta["wall_seconds"] = result.wall_seconds;
    meta["version"] = "pslab 0.1.0";
    std::ofstream out(fs::path(out_dir) / "run_meta.json");
    if (!out) throw std::runtime_error("cannot write run_meta.json");
    out << meta.dump(2) << '\n';
  }
}

}  // namespace pslab
