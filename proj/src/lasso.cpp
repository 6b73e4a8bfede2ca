#include "pslab/lasso.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "pslab/rng.hpp"

namespace pslab {

Problem Problem::from_parts(const Eigen::MatrixXd& x, const Eigen::VectorXd& a,
                            const std::vector<ColKind>& kind) {
  Problem pr;
  pr.n = x.rows();
  pr.d = x.cols();
  pr.a = a;
  pr.center = Eigen::VectorXd::Zero(pr.d);
  pr.scale = Eigen::VectorXd::Ones(pr.d);
  pr.z = x;
  for (Index j = 0; j < pr.d; ++j) {
    if (kind[j] == ColKind::binary) continue;
    const double mean = pr.z.col(j).mean();
    const double var = (pr.z.col(j).array() - mean).square().sum() /
                       static_cast<double>(pr.n);
    const double sd = std::sqrt(var);
    pr.center[j] = mean;
    if (sd > 0.0) {
      pr.scale[j] = sd;
      pr.z.col(j) = (pr.z.col(j).array() - mean) / sd;
    } else {
      pr.z.col(j).setZero();  // constant column carries no signal
    }
  }
  pr.support.resize(pr.d);
  for (Index j = 0; j < pr.d; ++j) {
    if (kind[j] != ColKind::binary) continue;
    std::vector<int> idx;
    for (Index i = 0; i < pr.n; ++i)
      if (pr.z(i, j) == 1.0) idx.push_back(static_cast<int>(i));
    if (2 * idx.size() <= static_cast<std::size_t>(pr.n))
      pr.support[j] = std::move(idx);
  }
  return pr;
}

Problem Problem::from_dataset(const Dataset& ds) {
  return from_parts(ds.x, ds.a, ds.col_kind);
}

double lambda_max(const Problem& pr) {
  Index n1 = 0;
  for (Index i = 0; i < pr.n; ++i) n1 += (pr.a[i] == 1.0) ? 1 : 0;
  if (n1 == 0 || n1 == pr.n)
    throw std::invalid_argument("lambda_max: constant exposure column");
  const double abar = pr.a.mean();
  const Eigen::VectorXd r = pr.a.array() - abar;
  const Eigen::VectorXd g = pr.z.transpose() * r / static_cast<double>(pr.n);
  return g.cwiseAbs().maxCoeff();
}

double lambda_max(const Dataset& ds) {
  return lambda_max(Problem::from_dataset(ds));
}

std::vector<double> make_lambda_grid(double lmax, int L, double ratio) {
  if (!(lmax > 0.0)) throw std::invalid_argument("lambda grid: lmax must be > 0");
  if (L < 2) throw std::invalid_argument("lambda grid: need L >= 2");
  if (!(ratio > 0.0 && ratio < 1.0))
    throw std::invalid_argument("lambda grid: ratio must be in (0,1)");
  std::vector<double> grid(L);
  const double step = std::log(ratio) / static_cast<double>(L - 1);
  for (int l = 0; l < L; ++l) grid[l] = lmax * std::exp(step * l);
  grid[0] = lmax;
  grid[L - 1] = lmax * ratio;
  return grid;
}

double binomial_deviance(double a, double p, double clip) {
  const double q = std::clamp(p, clip, 1.0 - clip);
  return -2.0 * (a * std::log(q) + (1.0 - a) * std::log(1.0 - q));
}

double objective(const Problem& pr, double intercept_std,
                 const Eigen::VectorXd& coefs_std, double lambda,
                 double prob_clip) {
  const Eigen::VectorXd eta =
      (pr.z * coefs_std).array() + intercept_std;
  double nll = 0.0;
  for (Index i = 0; i < pr.n; ++i)
    nll += binomial_deviance(pr.a[i], expit(eta[i]), prob_clip);
  return 0.5 * nll / static_cast<double>(pr.n) +
         lambda * coefs_std.lpNorm<1>();
}

Eigen::VectorXd loss_gradient(const Problem& pr, double intercept_std,
                              const Eigen::VectorXd& coefs_std,
                              double* intercept_grad) {
  Eigen::VectorXd eta = (pr.z * coefs_std).array() + intercept_std;
  Eigen::VectorXd resid(pr.n);
  for (Index i = 0; i < pr.n; ++i) resid[i] = expit(eta[i]) - pr.a[i];
  if (intercept_grad) *intercept_grad = resid.mean();
  return pr.z.transpose() * resid / static_cast<double>(pr.n);
}

bool kkt_satisfied(const Problem& pr, const LassoFit& fit, double tol) {
  double g0 = 0.0;
  const Eigen::VectorXd g =
      loss_gradient(pr, fit.intercept_std, fit.coefs_std, &g0);
  if (std::abs(g0) > tol) return false;
  for (Index j = 0; j < pr.d; ++j) {
    const double b = fit.coefs_std[j];
    if (b == 0.0) {
      if (std::abs(g[j]) > fit.lambda + tol) return false;
    } else {
      if (std::abs(g[j] + fit.lambda * (b > 0.0 ? 1.0 : -1.0)) > tol)
        return false;
    }
  }
  return true;
}

namespace {

inline bool outerchange_stall(double prev_obj, double obj) {
  return std::abs(prev_obj - obj) <= 1e-10 * (1.0 + std::abs(obj));
}

inline double soft_threshold(double u, double lambda) {
  if (u > lambda) return u - lambda;
  if (u < -lambda) return u + lambda;
  return 0.0;
}

// IRLS with cyclic coordinate descent restricted to `active`.
// Returns the number of coordinate passes consumed.
int irls_on_active(const Problem& pr, double lambda,
                   const std::vector<Index>& active, double& b0,
                   Eigen::VectorXd& beta, Eigen::VectorXd& eta,
                   const SolverOptions& opt, double tol, int pass_budget) {
  const double n = static_cast<double>(pr.n);
  const double wmin = 1e-10;
  int passes = 0;
  Eigen::VectorXd w(pr.n), rho(pr.n);
  Eigen::VectorXd h(pr.d);
  double prev_obj = std::numeric_limits<double>::infinity();

  for (int irls = 0; irls < opt.max_irls && passes < pass_budget; ++irls) {
    double outer_change = 0.0;
    double nll = 0.0;
    for (Index i = 0; i < pr.n; ++i) {
      double p = expit(eta[i]);
      p = std::clamp(p, opt.prob_clip, 1.0 - opt.prob_clip);
      w[i] = std::max(p * (1.0 - p), wmin);
      rho[i] = pr.a[i] - p;
      nll -= pr.a[i] * std::log(p) + (1.0 - pr.a[i]) * std::log(1.0 - p);
    }
    // the quadratic model is only zigzagging once the objective stalls
    double obj = nll / n;
    for (Index j : active) obj += lambda * std::abs(beta[j]);
    if (irls > 0 && outerchange_stall(prev_obj, obj)) break;
    prev_obj = obj;

    const Eigen::VectorXd rho0 = rho;
    const double h0 = w.mean();
    for (Index j : active) {
      const auto& sup = pr.support[j];
      if (!sup.empty()) {
        double s = 0.0;
        for (int i : sup) s += w[i];
        h[j] = s / n;
      } else {
        h[j] = pr.z.col(j).cwiseProduct(w).dot(pr.z.col(j)) / n;
      }
    }

    // inner CD on the fixed quadratic approximation
    for (;;) {
      double max_change = 0.0;
      {
        const double delta = rho.mean() / h0;
        if (delta != 0.0) {
          b0 += delta;
          rho -= delta * w;
          max_change = std::max(max_change, std::abs(delta));
        }
      }
      for (Index j : active) {
        if (h[j] <= 0.0) continue;
        const auto& sup = pr.support[j];
        double dot;
        if (!sup.empty()) {
          dot = 0.0;
          for (int i : sup) dot += rho[i];
        } else {
          dot = pr.z.col(j).dot(rho);
        }
        const double u = h[j] * beta[j] + dot / n;
        const double nb = soft_threshold(u, lambda) / h[j];
        const double delta = nb - beta[j];
        if (delta != 0.0) {
          beta[j] = nb;
          if (!sup.empty()) {
            for (int i : sup) rho[i] -= delta * w[i];
          } else {
            rho.array() -= delta * w.array() * pr.z.col(j).array();
          }
          max_change = std::max(max_change, std::abs(delta));
        }
      }
      ++passes;
      outer_change = std::max(outer_change, max_change);
      if (max_change < tol || passes >= pass_budget) break;
    }
    // eta consistent with the updated coefficients: rho = w*(ystar - eta)
    eta.array() += (rho0 - rho).array() / w.array();
    if (outer_change < tol) break;
  }
  return passes;
}

}  // namespace

LassoFit fit_at_lambda(const Problem& pr, double lambda, const LassoFit* warm,
                       const SolverOptions& opt) {
  if (lambda < 0.0) throw std::invalid_argument("fit_at_lambda: lambda < 0");
  if (pr.support.size() != static_cast<std::size_t>(pr.d))
    throw std::invalid_argument(
        "fit_at_lambda: problem not built via from_parts/from_dataset");
  const double n = static_cast<double>(pr.n);

  LassoFit fit;
  fit.lambda = lambda;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(pr.d);
  double b0;
  if (warm && warm->coefs_std.size() == pr.d) {
    beta = warm->coefs_std;
    b0 = warm->intercept_std;
  } else {
    const double abar = pr.a.mean();
    b0 = logit(std::clamp(abar, 1e-12, 1.0 - 1e-12));
  }
  Eigen::VectorXd eta = (pr.z * beta).array() + b0;

  std::vector<Index> active;
  std::vector<char> in_active(pr.d, 0);
  for (Index j = 0; j < pr.d; ++j)
    if (beta[j] != 0.0) {
      active.push_back(j);
      in_active[j] = 1;
    }

  int passes = 0;
  int stalled = 0;
  bool kkt_ok = false;
  // descend with a loose tolerance first; the KKT certificate below drives
  // the final tightening, so most of the path costs only cheap passes
  double work_tol = std::max(opt.tol_coef, 1e-4);
  while (passes < opt.max_passes) {
    passes += irls_on_active(pr, lambda, active, b0, beta, eta, opt, work_tol,
                             opt.max_passes - passes);
    // full sweep: admit coordinates violating the stationarity bound
    Eigen::VectorXd resid(pr.n);
    for (Index i = 0; i < pr.n; ++i) resid[i] = expit(eta[i]) - pr.a[i];
    Eigen::VectorXd g(pr.d);
    for (Index j = 0; j < pr.d; ++j) {
      const auto& sup = pr.support[j];
      if (!sup.empty()) {
        double s = 0.0;
        for (int i : sup) s += resid[i];
        g[j] = s / n;
      } else {
        g[j] = pr.z.col(j).dot(resid) / n;
      }
    }
    bool added = false;
    for (Index j = 0; j < pr.d; ++j) {
      if (in_active[j]) continue;
      if (std::abs(g[j]) > lambda + 0.5 * opt.kkt_tol) {
        active.push_back(j);
        in_active[j] = 1;
        added = true;
      }
    }
    if (!added) {
      kkt_ok = true;
      for (Index j : active) {
        const double b = beta[j];
        const double cond = (b == 0.0)
                                ? std::abs(g[j]) - lambda
                                : std::abs(g[j] + lambda * (b > 0.0 ? 1.0 : -1.0));
        if (cond > opt.kkt_tol) {
          kkt_ok = false;
          break;
        }
      }
      if (std::abs(resid.mean()) > opt.kkt_tol) kkt_ok = false;
      if (kkt_ok) break;
      if (!opt.kkt_polish) break;
      if (work_tol > opt.tol_coef) {
        work_tol = std::max(opt.tol_coef, work_tol * 1e-2);
      } else if (++stalled > 5) {
        break;  // no new coordinates and no progress
      }
    } else {
      stalled = 0;
    }
  }

  fit.intercept_std = b0;
  fit.coefs_std = beta;
  fit.n_iter = passes;
  fit.converged = kkt_ok && passes < opt.max_passes;
  fit.separation_warning = eta.cwiseAbs().maxCoeff() > 30.0;

  // map back to the original covariate scale
  fit.coefs = beta.cwiseQuotient(pr.scale);
  fit.intercept = b0 - fit.coefs.dot(pr.center);
  fit.n_nonzero = 0;
  for (Index j = 0; j < pr.d; ++j)
    if (fit.coefs_std[j] != 0.0) ++fit.n_nonzero;
  return fit;
}

LassoFit fit_at_lambda(const Dataset& ds, double lambda, const LassoFit* warm,
                       const SolverOptions& opt) {
  return fit_at_lambda(Problem::from_dataset(ds), lambda, warm, opt);
}

double predict(const LassoFit& fit,
               const Eigen::Ref<const Eigen::RowVectorXd>& x_row) {
  if (x_row.size() != fit.coefs.size())
    throw std::invalid_argument("predict: dimension mismatch");
  return expit(fit.intercept + x_row.dot(fit.coefs.transpose()));
}

Eigen::VectorXd predict(const LassoFit& fit, const Eigen::MatrixXd& x) {
  if (x.cols() != fit.coefs.size())
    throw std::invalid_argument("predict: dimension mismatch");
  Eigen::VectorXd eta = (x * fit.coefs).array() + fit.intercept;
  for (Index i = 0; i < eta.size(); ++i) eta[i] = expit(eta[i]);
  return eta;
}

namespace {

// Warm-started descent along a decreasing lambda sequence.
std::vector<LassoFit> fit_sequence(const Problem& pr,
                                   const std::vector<double>& grid,
                                   const SolverOptions& opt) {
  std::vector<LassoFit> fits;
  fits.reserve(grid.size());
  const LassoFit* warm = nullptr;
  for (double lam : grid) {
    fits.push_back(fit_at_lambda(pr, lam, warm, opt));
    warm = &fits.back();
  }
  return fits;
}

}  // namespace

LassoPath fit_path(const Dataset& ds, const std::vector<double>& grid,
                   const FoldAssignment& folds, const SolverOptions& opt,
                   int n_threads) {
  if (grid.size() < 1) throw std::invalid_argument("fit_path: empty grid");
  for (std::size_t l = 1; l < grid.size(); ++l)
    if (!(grid[l] < grid[l - 1]))
      throw std::invalid_argument("fit_path: grid must be strictly decreasing");
  if (static_cast<Index>(folds.fold_of.size()) != ds.n())
    throw std::invalid_argument("fit_path: folds inconsistent with dataset");

  const Problem pr = Problem::from_dataset(ds);
  const double lmax = lambda_max(pr);
  if (grid[0] < lmax * (1.0 - 1e-10))
    throw std::invalid_argument("fit_path: grid must start at lambda_max");

  const int L = static_cast<int>(grid.size());
  const int K = folds.n_folds;
  LassoPath path;
  path.lambdas = grid;
  path.fits = fit_sequence(pr, grid, opt);
  path.oof_pred.resize(ds.n(), L);

  std::vector<std::vector<Index>> fold_rows(K);
  for (Index i = 0; i < ds.n(); ++i)
    fold_rows[folds.fold_of[i]].push_back(i);
  for (int f = 0; f < K; ++f)
    if (fold_rows[f].empty())
      throw std::invalid_argument("fit_path: empty fold " + std::to_string(f));

  Eigen::MatrixXd fold_dev(K, L);  // per-fold mean held-out deviance

  const auto run_fold = [&](int f) {
    std::vector<Index> train;
    train.reserve(ds.n());
    for (Index i = 0; i < ds.n(); ++i)
      if (folds.fold_of[i] != f) train.push_back(i);
    const Dataset sub = subset_rows(ds, train);
    Index n1 = sub.n_exposed();
    if (n1 == 0 || n1 == sub.n())
      throw std::invalid_argument("fit_path: fold " + std::to_string(f) +
                                  " training set missing an exposure class");
    const Problem spr = Problem::from_dataset(sub);
    // clamp the head of the grid so the first fold fit is the null model
    std::vector<double> fgrid = grid;
    fgrid[0] = std::max(fgrid[0], lambda_max(spr));
    if (fgrid.size() > 1 && fgrid[0] <= fgrid[1])
      fgrid[0] = fgrid[1] * (1.0 + 1e-9);
    SolverOptions fold_opt = opt;
    fold_opt.kkt_polish = opt.polish_fold_fits;
    const std::vector<LassoFit> ffits = fit_sequence(spr, fgrid, fold_opt);
    const std::vector<Index>& held = fold_rows[f];
    for (int l = 0; l < L; ++l) {
      double dev = 0.0;
      for (Index i : held) {
        // clamp into the open interval so downstream weights stay finite
        const double p = std::clamp(
            predict(ffits[l], Eigen::Ref<const Eigen::RowVectorXd>(ds.x.row(i))),
            opt.prob_clip, 1.0 - opt.prob_clip);
        path.oof_pred(i, l) = p;
        dev += binomial_deviance(ds.a[i], p, opt.prob_clip);
      }
      fold_dev(f, l) = dev / static_cast<double>(held.size());
    }
  };

  if (n_threads > 1) {
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errs(K);
    for (int f = 0; f < K; ++f)
      workers.emplace_back([&, f] {
        try {
          run_fold(f);
        } catch (...) {
          errs[f] = std::current_exception();
        }
      });
    for (auto& t : workers) t.join();
    for (auto& e : errs)
      if (e) std::rethrow_exception(e);
  } else {
    for (int f = 0; f < K; ++f) run_fold(f);
  }

  path.cv_deviance.resize(L);
  path.cv_se.resize(L);
  for (int l = 0; l < L; ++l) {
    double dev = 0.0;
    for (Index i = 0; i < ds.n(); ++i)
      dev += binomial_deviance(ds.a[i], path.oof_pred(i, l), opt.prob_clip);
    path.cv_deviance[l] = dev / static_cast<double>(ds.n());
    const double fm = fold_dev.col(l).mean();
    const double var =
        (fold_dev.col(l).array() - fm).square().sum() / std::max(1, K - 1);
    path.cv_se[l] = std::sqrt(var / K);
  }
  path.lambda_cv_index = 0;
  for (int l = 1; l < L; ++l)
    if (path.cv_deviance[l] < path.cv_deviance[path.lambda_cv_index])
      path.lambda_cv_index = l;  // strict: ties keep the larger lambda
  return path;
}

void export_path_csv(const LassoPath& path, const std::string& file,
                     bool dump_coefs) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write '" + file + "'");
  out << "lambda,intercept,n_nonzero,cv_deviance,cv_se";
  const Index d = path.fits.empty() ? 0 : path.fits[0].coefs.size();
  if (dump_coefs)
    for (Index j = 0; j < d; ++j) out << ",coef_" << (j + 1);
  out << '\n';
  char buf[64];
  const auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };
  for (std::size_t l = 0; l < path.lambdas.size(); ++l) {
    put(path.lambdas[l]);
    out << ',';
    put(path.fits[l].intercept);
    out << ',' << path.fits[l].n_nonzero << ',';
    put(path.cv_deviance[l]);
    out << ',';
    put(path.cv_se[l]);
    if (dump_coefs)
      for (Index j = 0; j < d; ++j) {
        out << ',';
        put(path.fits[l].coefs[j]);
      }
    out << '\n';
  }
}

}  // namespace pslab
