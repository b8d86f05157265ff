#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "realmlp/bench.hpp"
#include "realmlp/config.hpp"
#include "realmlp/dataio.hpp"
#include "realmlp/model.hpp"
#include "realmlp/train.hpp"

namespace realmlp {

/// Preprocess rows and encode targets for one model (standardized targets
/// for regression).
EncodedData<double> encode_for_model(const RealMLPModel<double>& model,
                                     const Dataset& dataset,
                                     const IndexList& rows);

struct FitOutcome {
  RealMLPModel<double> model;
  TrainRecord record;
};

/// Full RealMLP fit: preprocessor on the train rows, target standardizer on
/// train+validation, seeded initialization, AdamW training with best-epoch
/// revert (or a pinned snapshot epoch).
FitOutcome fit_realmlp(const Dataset& dataset, const IndexList& train_rows,
                       const IndexList& val_rows, const ModelConfig& config,
                       std::uint64_t seed,
                       std::optional<int> pin_epoch = std::nullopt);

/// Class probabilities (classification; rows sum to 1).
MatrixXd predict_proba(const RealMLPModel<double>& model,
                       const Dataset& dataset, const IndexList& rows);

/// Regression predictions, un-standardized and (if configured) clipped to
/// the training target range.
VectorXd predict_values(const RealMLPModel<double>& model,
                        const Dataset& dataset, const IndexList& rows);

std::vector<int> predict_labels(const RealMLPModel<double>& model,
                                const Dataset& dataset, const IndexList& rows);

enum class EvalMetric { err, nrmse, auc_ovr, ce };

EvalMetric eval_metric_from_string(const std::string& s);
std::string to_string(EvalMetric m);

/// Evaluates one metric on the given rows (targets required).
double evaluate_model(const RealMLPModel<double>& model, const Dataset& dataset,
                      const IndexList& rows, EvalMetric metric);

IndexList all_rows(const Dataset& dataset);

}  // namespace realmlp
