#pragma once

#include <string>
#include <vector>

#include "realmlp/types.hpp"

namespace realmlp {

// ---- per-split metrics ----------------------------------------------------

/// Fraction of mismatched labels (100% - accuracy, as a fraction).
double classification_error(const std::vector<int>& y_true,
                            const std::vector<int>& y_pred);

/// RMSE / population standard deviation of the evaluation targets
/// (equals sqrt(1 - R^2)). The overload takes an explicit denominator for
/// the whole-dataset-std convention.
double nrmse(const VectorXd& y_true, const VectorXd& y_pred);
double nrmse(const VectorXd& y_true, const VectorXd& y_pred, double std_dev);

/// Binary AUROC with midrank treatment of tied scores (ties count half).
double binary_auroc(const VectorXd& scores, const std::vector<char>& positive);

/// Macro one-vs-rest AUROC: unweighted mean over classes present with both
/// positives and negatives.
double auroc_ovr(const std::vector<int>& y_true, const MatrixXd& probs);

// ---- aggregation ------------------------------------------------------------

/// errors(i, j): error of dataset i on split j; weights sum to 1.
struct ErrorMatrix {
  MatrixXd errors;
  VectorXd weights;

  Index n_datasets() const { return errors.rows(); }
  Index n_splits() const { return errors.cols(); }
  void validate() const;
};

ErrorMatrix make_error_matrix(MatrixXd errors);  // uniform weights
ErrorMatrix make_error_matrix(MatrixXd errors, VectorXd weights);

/// Shifted geometric mean error:
/// exp(sum_i (w_i / N_splits) sum_j log(err_ij + eps)).
double sgm(const ErrorMatrix& errors, double eps = 0.01);

enum class AggregateKind { arithmetic, mean_rank, normalized };

/// Cross-method aggregates; all matrices must share shape and weights.
/// mean_rank uses average ranks for ties; normalized rescales each
/// (dataset, split) cell to best = 0, worst = 1 (all-equal cells become 0).
std::vector<double> aggregate_alt(const std::vector<ErrorMatrix>& methods,
                                  AggregateKind kind);

/// w_i proportional to 1 / |group(i)|, normalized to sum 1.
VectorXd group_weights(const std::vector<int>& group_sizes);
/// Same, from a group label per dataset.
VectorXd group_weights_from_labels(const std::vector<std::string>& groups);

// ---- confidence intervals ---------------------------------------------------

struct CIResult {
  double point = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;
};

/// Regularized incomplete beta function I_x(a, b).
double incomplete_beta(double a, double b, double x);

/// Student-t quantile via bisection on the incomplete beta inverse;
/// accurate to well below 1e-10.
double student_t_quantile(double p, double dof);

/// Two-sided t confidence interval for the mean of z (unknown variance).
CIResult ci_mean_t(const std::vector<double>& z, double level = 0.95);

/// CI for the SGM: per-split aggregates Z_j = sum_i w_i log(err_ij + eps),
/// t-interval on mean(Z), endpoints exponentiated.
CIResult ci_sgm(const ErrorMatrix& errors, double eps = 0.01,
                double level = 0.95);

/// CI for the error increase 100 (SGM_A / SGM_B - 1), built from per-split
/// log-error differences.
CIResult ci_ratio(const ErrorMatrix& a, const ErrorMatrix& b,
                  double eps = 0.01, double level = 0.95);

/// Pairwise win percentages: entry (A, B) is the weighted share of
/// (dataset, split) cells where A's error is lower; ties count half.
/// Entries are percentages; (A,B) + (B,A) = 100 and the diagonal is 50.
MatrixXd winrate_matrix(const std::vector<ErrorMatrix>& methods);

// ---- benchmark result files -------------------------------------------------

/// Parsed `method,dataset,split,error` table with optional `dataset,group`
/// weighting; the (method x dataset x split) grid must be complete.
struct BenchTable {
  std::vector<std::string> methods;
  std::vector<std::string> datasets;
  Index n_splits = 0;
  std::vector<ErrorMatrix> per_method;
};

BenchTable load_bench_table(const std::string& errors_csv_path,
                            const std::string& groups_csv_path = "");
BenchTable parse_bench_table(const std::string& errors_csv,
                             const std::string& groups_csv = "");

}  // namespace realmlp
