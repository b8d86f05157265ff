#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "realmlp/dataio.hpp"
#include "realmlp/types.hpp"

namespace realmlp {

/// Odd, strictly increasing map bounding its output to (-3, 3).
template <class Scalar>
Scalar smooth_clip(Scalar x) {
  const Scalar t = x / Scalar(3);
  return x / std::sqrt(Scalar(1) + t * t);
}

/// p-quantile of an ascending-sorted range by linear interpolation between
/// order statistics (position p*(n-1)).
double quantile_sorted(const std::vector<double>& sorted, double p);

/// Per-column robust scaling statistics: quantiles of the training values
/// and the scale factor s (IQR rule, min-max fallback, 0 for constants).
struct FittedColumnScaler {
  double q0 = 0.0;
  double q1_4 = 0.0;
  double q1_2 = 0.0;
  double q3_4 = 0.0;
  double q1 = 0.0;
  double s = 0.0;
};

FittedColumnScaler fit_column_scaler(std::vector<double> values);

/// smooth_clip(s * (x - median)); non-finite inputs are clamped to the
/// training min/max first.
double transform_column(const FittedColumnScaler& scaler, double x);

enum class CatRoute { binary, onehot, embed };

struct CatPlanEntry {
  CatRoute route = CatRoute::binary;
  // distinct non-missing codes observed on train rows, ascending
  std::vector<int> train_codes;

  int train_cardinality() const { return static_cast<int>(train_codes.size()); }
  /// embed route: dense index in [1, K] for known codes, 0 for missing/unseen.
  int dense_index(int code) const;
};

struct OutputColumnInfo {
  Index source_column = 0;  // index into schema feature columns (see kind)
  bool from_numeric = false;
  bool embed_eligible = false;  // original numeric columns only
};

struct PreprocessedBatch {
  MatrixXd x;                          // rows x output width, values in (-3,3)
  std::vector<OutputColumnInfo> info;  // per output column
  Eigen::MatrixXi cat_codes;           // rows x n embed-routed columns, 0-based
                                       // dense indices (0 = missing/unseen)
  std::vector<int> cat_cardinalities;  // K per embed-routed column
};

/// One-hot / binary / embedding routing plus per-output-column robust
/// scalers, fitted on train rows only.
struct FittedPreprocessor {
  int max_onehot = 8;  // "unlimited" encoded as a large sentinel
  std::vector<CatPlanEntry> cat_plan;       // per categorical column
  std::vector<FittedColumnScaler> scalers;  // per output column
  std::vector<OutputColumnInfo> columns;    // layout of the output matrix
  std::vector<int> embed_routed;            // categorical column indices
  std::vector<int> embed_cardinalities;     // K per routed column

  Index output_width() const { return static_cast<Index>(columns.size()); }
};

inline constexpr int kUnlimitedOneHot = std::numeric_limits<int>::max();

FittedPreprocessor fit_preprocessor(const Dataset& dataset,
                                    const IndexList& train_rows,
                                    int max_onehot = 8);

PreprocessedBatch apply_preprocessor(const FittedPreprocessor& fitted,
                                     const Dataset& dataset,
                                     const IndexList& rows);

}  // namespace realmlp
