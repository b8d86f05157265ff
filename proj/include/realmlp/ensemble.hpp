#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "realmlp/config.hpp"
#include "realmlp/dataio.hpp"
#include "realmlp/pipeline.hpp"
#include "realmlp/types.hpp"

namespace realmlp {
namespace ensemble {

/// k equal-size disjoint validation subsets of the train+validation pool;
/// surplus rows (n mod k) stay unassigned.
struct FoldPlan {
  std::vector<IndexList> folds;
  IndexList unassigned;
  bool stratified = false;
  std::uint64_t seed = 0;
};

/// Stratification keeps per-class fold counts within +-1 of each other
/// (classification labels required when stratify is set).
FoldPlan make_folds(const IndexList& pool, int k, std::uint64_t seed,
                    bool stratify, const VectorXi* labels = nullptr);

/// Last of the tied best epochs on one validation-metric curve.
int select_epoch_individual(const std::vector<double>& curve);

/// Joint stopping: argmin over t of the sum of all fold curves (curves are
/// truncated to the shortest); one shared epoch for every member.
int select_epoch_joint(const std::vector<std::vector<double>>& curves);

/// Plain prediction average over members.
MatrixXd average_predictions(const std::vector<MatrixXd>& member_preds);

struct EnsembleConfig {
  int members = 5;          // M
  bool refitting = false;   // bagging otherwise
  bool joint_stopping = false;
  int k_folds = 5;
};

struct EnsembleOutcome {
  std::vector<RealMLPModel<double>> models;
  std::vector<int> chosen_epochs;                // t_i* per member
  FoldPlan folds;
  std::vector<std::vector<double>> fold_curves;  // bagged validation curves
  std::vector<IndexList> bagged_train_rows;      // per bagged model
};

/// App-style bagging/refitting: bagged members train on pool minus their
/// fold (validating on it); refitted members train on the whole pool with
/// epochs pinned from the bagged curves. Member seeds are derived from
/// `seed` and the member index.
EnsembleOutcome run_ensemble(const Dataset& dataset, const IndexList& pool,
                             const ModelConfig& config,
                             const EnsembleConfig& spec, std::uint64_t seed,
                             int jobs = 1);

MatrixXd predict_ensemble_proba(const EnsembleOutcome& ens,
                                const Dataset& dataset, const IndexList& rows);
VectorXd predict_ensemble_values(const EnsembleOutcome& ens,
                                 const Dataset& dataset, const IndexList& rows);

struct GreedyResult {
  std::vector<double> weights;  // per candidate, non-negative, sum 1
  std::vector<int> picks;       // the best prefix of greedy selections
  double val_error = 0.0;
};

/// With-replacement greedy ensemble selection: each step adds the candidate
/// minimizing the validation error of the averaged predictions; returns the
/// best prefix's counts normalized to weights. The result's validation error
/// never exceeds the best single candidate's.
GreedyResult greedy_selection(
    const std::vector<MatrixXd>& val_predictions,
    const std::function<double(const MatrixXd&)>& error_of, int steps = 40);

}  // namespace ensemble
}  // namespace realmlp
