#include "pslab/dataset.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "pslab/rng.hpp"

namespace pslab {

Index Dataset::n_exposed() const {
  Index c = 0;
  for (Index i = 0; i < n(); ++i) c += (a[i] == 1.0) ? 1 : 0;
  return c;
}

void Dataset::validate() const {
  if (a.size() != n() || x.rows() != n())
    throw std::invalid_argument("dataset: inconsistent row counts");
  if (static_cast<Index>(col_kind.size()) != d())
    throw std::invalid_argument("dataset: col_kind size mismatch");
  Index n1 = 0;
  for (Index i = 0; i < n(); ++i) {
    if (a[i] != 0.0 && a[i] != 1.0)
      throw std::invalid_argument("dataset: exposure not binary at row " +
                                  std::to_string(i + 1));
    n1 += (a[i] == 1.0) ? 1 : 0;
  }
  if (n1 == 0 || n1 == n())
    throw std::invalid_argument(
        "dataset: need at least one exposed and one unexposed unit");
  for (Index j = 0; j < d(); ++j) {
    if (col_kind[j] != ColKind::binary) continue;
    for (Index i = 0; i < n(); ++i) {
      const double v = x(i, j);
      if (v != 0.0 && v != 1.0)
        throw std::invalid_argument("dataset: binary-tagged column " +
                                    std::to_string(j) + " has value " +
                                    std::to_string(v) + " at row " +
                                    std::to_string(i + 1));
    }
  }
}

ColKind infer_kind(const Eigen::VectorXd& col) {
  for (Index i = 0; i < col.size(); ++i)
    if (col[i] != 0.0 && col[i] != 1.0) return ColKind::continuous;
  return ColKind::binary;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_cell(const std::string& cell, std::size_t row,
                  const std::string& col) {
  const std::string t = trim(cell);
  if (t.empty())
    throw std::invalid_argument("csv: missing value at row " +
                                std::to_string(row) + ", column '" + col +
                                "'");
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end == t.c_str() || *end != '\0' || errno == ERANGE)
    throw std::invalid_argument("csv: non-numeric cell '" + t + "' at row " +
                                std::to_string(row) + ", column '" + col +
                                "'");
  return v;
}

}  // namespace

Dataset load_csv(const std::string& path, const std::string& outcome_col,
                 const std::string& exposure_col) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("csv: cannot open file '" + path + "'");

  std::string line;
  if (!std::getline(in, line))
    throw std::invalid_argument("csv: empty file '" + path + "'");
  std::vector<std::string> header = split_line(line);
  for (auto& h : header) h = trim(h);

  std::unordered_map<std::string, int> seen;
  for (const auto& h : header) {
    if (++seen[h] > 1)
      throw std::invalid_argument("csv: duplicate column name '" + h + "'");
  }
  const auto find_col = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw std::invalid_argument("csv: column '" + name + "' not found");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t yi = find_col(outcome_col);
  const std::size_t ai = find_col(exposure_col);
  if (yi == ai)
    throw std::invalid_argument("csv: outcome and exposure name the same column");

  std::vector<std::string> cov_names;
  std::vector<std::size_t> cov_idx;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j == yi || j == ai) continue;
    cov_names.push_back(header[j]);
    cov_idx.push_back(j);
  }

  std::vector<double> yv, av;
  std::vector<std::vector<double>> xv(cov_idx.size());
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_line(line);
    if (cells.size() != header.size())
      throw std::invalid_argument("csv: row " + std::to_string(row) + " has " +
                                  std::to_string(cells.size()) +
                                  " cells, expected " +
                                  std::to_string(header.size()));
    yv.push_back(parse_cell(cells[yi], row, header[yi]));
    const double aval = parse_cell(cells[ai], row, header[ai]);
    if (aval != 0.0 && aval != 1.0)
      throw std::invalid_argument("csv: exposure not binary at row " +
                                  std::to_string(row));
    av.push_back(aval);
    for (std::size_t k = 0; k < cov_idx.size(); ++k)
      xv[k].push_back(parse_cell(cells[cov_idx[k]], row, header[cov_idx[k]]));
  }
  if (yv.empty()) throw std::invalid_argument("csv: no data rows in '" + path + "'");

  Dataset ds;
  const Index n = static_cast<Index>(yv.size());
  const Index d = static_cast<Index>(cov_idx.size());
  ds.y = Eigen::Map<Eigen::VectorXd>(yv.data(), n);
  ds.a = Eigen::Map<Eigen::VectorXd>(av.data(), n);
  ds.x.resize(n, d);
  for (Index j = 0; j < d; ++j)
    ds.x.col(j) = Eigen::Map<Eigen::VectorXd>(xv[j].data(), n);
  ds.col_names = cov_names;
  ds.col_kind.resize(d);
  for (Index j = 0; j < d; ++j) ds.col_kind[j] = infer_kind(ds.x.col(j));
  ds.validate();
  return ds;
}

void write_csv(const Dataset& ds, const std::string& path,
               const std::string& outcome_name,
               const std::string& exposure_name) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("csv: cannot write file '" + path + "'");
  out << outcome_name << ',' << exposure_name;
  for (Index j = 0; j < ds.d(); ++j) {
    out << ',';
    out << (static_cast<std::size_t>(j) < ds.col_names.size()
                ? ds.col_names[j]
                : "X" + std::to_string(j + 1));
  }
  out << '\n';
  char buf[64];
  const auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };
  for (Index i = 0; i < ds.n(); ++i) {
    put(ds.y[i]);
    out << ',';
    put(ds.a[i]);
    for (Index j = 0; j < ds.d(); ++j) {
      out << ',';
      put(ds.x(i, j));
    }
    out << '\n';
  }
}

FoldAssignment assign_folds(const Dataset& ds, int n_folds,
                            std::uint64_t seed) {
  if (n_folds < 2) throw std::invalid_argument("assign_folds: n_folds must be >= 2");
  const Index n1 = ds.n_exposed();
  const Index n0 = ds.n() - n1;
  if (n_folds > std::min(n1, n0))
    throw std::invalid_argument(
        "assign_folds: n_folds exceeds the smaller exposure class (" +
        std::to_string(std::min(n1, n0)) + ")");

  std::vector<Index> exposed, unexposed;
  for (Index i = 0; i < ds.n(); ++i)
    (ds.a[i] == 1.0 ? exposed : unexposed).push_back(i);

  Rng rng(derive_seed(seed, 0x5f0cULL));
  const auto shuffle = [&](std::vector<Index>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = rng.uniform_index(i);
      std::swap(v[i - 1], v[j]);
    }
  };
  shuffle(exposed);
  shuffle(unexposed);

  FoldAssignment fa;
  fa.n_folds = n_folds;
  fa.seed = seed;
  fa.fold_of.assign(ds.n(), 0);
  // round-robin deal within each stratum: per-fold counts differ by at most 1
  for (std::size_t k = 0; k < exposed.size(); ++k)
    fa.fold_of[exposed[k]] = static_cast<int>(k % n_folds);
  for (std::size_t k = 0; k < unexposed.size(); ++k)
    fa.fold_of[unexposed[k]] = static_cast<int>(k % n_folds);
  return fa;
}

Dataset subset_rows(const Dataset& ds, const std::vector<Index>& rows) {
  Dataset out;
  const Index m = static_cast<Index>(rows.size());
  out.y.resize(m);
  out.a.resize(m);
  out.x.resize(m, ds.d());
  for (Index i = 0; i < m; ++i) {
    out.y[i] = ds.y[rows[i]];
    out.a[i] = ds.a[rows[i]];
    out.x.row(i) = ds.x.row(rows[i]);
  }
  out.col_kind = ds.col_kind;
  out.col_names = ds.col_names;
  return out;
}

Dataset subset_unexposed(const Dataset& ds) {
  std::vector<Index> rows;
  for (Index i = 0; i < ds.n(); ++i)
    if (ds.a[i] == 0.0) rows.push_back(i);
  if (rows.empty())
    throw std::invalid_argument("subset_unexposed: no unexposed units");
  return subset_rows(ds, rows);
}

}  // namespace pslab
