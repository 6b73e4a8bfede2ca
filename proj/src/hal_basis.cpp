#include "pslab/hal_basis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

namespace pslab {

namespace {

std::vector<double> distinct_sorted(const Eigen::VectorXd& col) {
  std::vector<double> v(col.data(), col.data() + col.size());
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

std::vector<double> quantile_knots(const Eigen::VectorXd& col, int k) {
  std::vector<double> sorted(col.data(), col.data() + col.size());
  std::sort(sorted.begin(), sorted.end());
  const Index n = static_cast<Index>(sorted.size());
  std::vector<double> knots;
  for (int i = 1; i <= k; ++i) {
    const double level = static_cast<double>(i) / (k + 1);
    Index idx = static_cast<Index>(std::ceil(level * n)) - 1;
    idx = std::clamp<Index>(idx, 0, n - 1);
    knots.push_back(sorted[idx]);
  }
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
  return knots;
}

}  // namespace

std::vector<std::vector<double>> enumerate_knots(
    const Dataset& ds, const BasisSpec& spec,
    std::vector<std::string>* warnings) {
  if (spec.max_degree < 1 || spec.knots_per_cov < 1)
    throw std::invalid_argument("basis spec: max_degree and knots_per_cov must be >= 1");
  std::vector<std::vector<double>> knots(ds.d());
  for (Index j = 0; j < ds.d(); ++j) {
    const Eigen::VectorXd col = ds.x.col(j);
    if ((col.array() == col[0]).all()) {
      if (warnings)
        warnings->push_back(
            "basis: constant covariate column " +
            (static_cast<std::size_t>(j) < ds.col_names.size()
                 ? ds.col_names[j]
                 : std::to_string(j + 1)) +
            " dropped from expansion");
      continue;
    }
    if (ds.col_kind[j] == ColKind::binary) {
      knots[j] = {1.0};
    } else if (spec.knot_rule == KnotRule::all_observed) {
      knots[j] = distinct_sorted(col);
    } else {
      knots[j] = quantile_knots(col, spec.knots_per_cov);
    }
  }
  return knots;
}

BasisExpansion expand_basis(const Dataset& ds, const BasisSpec& spec,
                            std::vector<std::string>* warnings) {
  if (ds.d() < 1) throw std::invalid_argument("expand_basis: no covariates");
  const auto knots = enumerate_knots(ds, spec, warnings);
  const Index n = ds.n();

  // enumerate candidate terms degree-major; covariate tuples and knot
  // tuples in ascending lexicographic order
  std::vector<BasisTerm> candidates;
  std::vector<Index> usable;
  for (Index j = 0; j < ds.d(); ++j)
    if (!knots[j].empty()) usable.push_back(j);

  std::size_t candidate_count = 0;
  const int max_deg = std::min<int>(spec.max_degree,
                                    static_cast<int>(usable.size()));
  std::vector<Index> combo;
  const auto count_combo = [&](const std::vector<Index>& c) {
    std::size_t prod = 1;
    for (Index j : c) prod *= knots[j].size();
    candidate_count += prod;
  };
  // pass 1: count, to reject runaway expansions before materializing
  const auto for_each_combo = [&](int degree, auto&& visit) {
    std::vector<Index> cur;
    const auto rec = [&](auto&& self, std::size_t start) -> void {
      if (static_cast<int>(cur.size()) == degree) {
        visit(cur);
        return;
      }
      for (std::size_t k = start; k < usable.size(); ++k) {
        cur.push_back(usable[k]);
        self(self, k + 1);
        cur.pop_back();
      }
    };
    rec(rec, 0);
  };
  for (int degree = 1; degree <= max_deg; ++degree)
    for_each_combo(degree, count_combo);
  if (static_cast<Index>(candidate_count) > spec.column_cap)
    throw std::invalid_argument(
        "expand_basis: expansion would produce " +
        std::to_string(candidate_count) + " columns (column_cap " +
        std::to_string(spec.column_cap) +
        "); use the quantile knot rule, fewer knots, or a lower degree");

  const auto emit_terms = [&](const std::vector<Index>& c) {
    std::vector<std::size_t> pos(c.size(), 0);
    for (;;) {
      BasisTerm term;
      for (std::size_t k = 0; k < c.size(); ++k)
        term.factors.emplace_back(c[k], knots[c[k]][pos[k]]);
      candidates.push_back(std::move(term));
      // odometer over knot tuples, last factor fastest
      std::size_t k = c.size();
      while (k > 0) {
        --k;
        if (++pos[k] < knots[c[k]].size()) break;
        pos[k] = 0;
        if (k == 0) return;
      }
    }
  };
  for (int degree = 1; degree <= max_deg; ++degree)
    for_each_combo(degree, emit_terms);

  // materialize columns, dropping constants and duplicates
  BasisExpansion exp;
  exp.source_dims = ds.d();
  std::vector<Eigen::VectorXd> kept;
  std::unordered_map<std::size_t, std::vector<Index>> by_hash;
  Eigen::VectorXd col(n);
  for (const BasisTerm& term : candidates) {
    std::size_t ones = 0;
    for (Index i = 0; i < n; ++i) {
      double v = 1.0;
      for (const auto& [j, knot] : term.factors)
        if (!(ds.x(i, j) >= knot)) {
          v = 0.0;
          break;
        }
      col[i] = v;
      ones += (v == 1.0);
    }
    if (spec.dedupe) {
      if (ones == 0 || ones == static_cast<std::size_t>(n)) continue;
      std::size_t h = ones;
      for (Index i = 0; i < n; ++i)
        h = h * 1099511628211ULL + static_cast<std::size_t>(col[i]) + 1;
      bool dup = false;
      for (Index idx : by_hash[h])
        if (kept[idx] == col) {
          dup = true;
          break;
        }
      if (dup) continue;
      by_hash[h].push_back(static_cast<Index>(kept.size()));
    }
    kept.push_back(col);
    exp.terms.push_back(term);
  }

  exp.w.resize(n, static_cast<Index>(kept.size()));
  for (Index m = 0; m < exp.w.cols(); ++m) exp.w.col(m) = kept[m];
  return exp;
}

Eigen::MatrixXd transform_new(const BasisExpansion& expansion,
                              const Eigen::MatrixXd& x_new) {
  if (x_new.cols() != expansion.source_dims)
    throw std::invalid_argument("transform_new: dimension mismatch");
  const Index n = x_new.rows();
  const Index m = static_cast<Index>(expansion.terms.size());
  Eigen::MatrixXd w(n, m);
  for (Index c = 0; c < m; ++c) {
    const BasisTerm& term = expansion.terms[c];
    for (Index i = 0; i < n; ++i) {
      double v = 1.0;
      for (const auto& [j, knot] : term.factors)
        if (!(x_new(i, j) >= knot)) {
          v = 0.0;
          break;
        }
      w(i, c) = v;
    }
  }
  return w;
}

void export_terms_csv(const BasisExpansion& expansion,
                      const std::string& file) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write '" + file + "'");
  out << "term_id,degree,spec\n";
  char buf[64];
  for (std::size_t t = 0; t < expansion.terms.size(); ++t) {
    const BasisTerm& term = expansion.terms[t];
    out << t << ',' << term.degree() << ',';
    for (std::size_t f = 0; f < term.factors.size(); ++f) {
      if (f) out << ';';
      std::snprintf(buf, sizeof buf, "%lld:%.17g",
                    static_cast<long long>(term.factors[f].first + 1),
                    term.factors[f].second);
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace pslab
