#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace pslab {

using Index = Eigen::Index;

enum class ColKind { binary, continuous };

// Immutable after construction; all operations return fresh objects.
struct Dataset {
  Eigen::VectorXd y;                 // outcome, binary 0/1 or continuous
  Eigen::VectorXd a;                 // exposure, 0/1
  Eigen::MatrixXd x;                 // n x d covariates
  std::vector<ColKind> col_kind;     // per covariate column
  std::vector<std::string> col_names;

  Index n() const { return y.size(); }
  Index d() const { return x.cols(); }
  Index n_exposed() const;
  Index n_unexposed() const { return n() - n_exposed(); }

  // Enforces the type invariants: a in {0,1} with both classes present,
  // binary-tagged columns in {0,1}, consistent shapes.
  void validate() const;
};

// Infers ColKind by exact membership of all values in {0,1}.
ColKind infer_kind(const Eigen::VectorXd& col);

Dataset load_csv(const std::string& path, const std::string& outcome_col,
                 const std::string& exposure_col);

void write_csv(const Dataset& ds, const std::string& path,
               const std::string& outcome_name = "Y",
               const std::string& exposure_name = "A");

struct FoldAssignment {
  std::vector<int> fold_of;  // size n, values in [0, n_folds)
  int n_folds = 0;
  std::uint64_t seed = 0;
};

// Exposure-stratified, deterministic in (n, a, n_folds, seed).
FoldAssignment assign_folds(const Dataset& ds, int n_folds,
                            std::uint64_t seed);

Dataset subset_unexposed(const Dataset& ds);
Dataset subset_rows(const Dataset& ds, const std::vector<Index>& rows);

}  // namespace pslab
