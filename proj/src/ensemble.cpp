#include "realmlp/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "realmlp/parallel.hpp"
#include "realmlp/rng.hpp"

namespace realmlp {
namespace ensemble {

FoldPlan make_folds(const IndexList& pool, int k, std::uint64_t seed,
                    bool stratify, const VectorXi* labels) {
  if (k < 1) throw ContractError("make_folds: k must be >= 1");
  const Index n = static_cast<Index>(pool.size());
  if (n < k) throw ContractError("make_folds: fewer rows than folds");
  if (stratify && labels == nullptr)
    throw ContractError("make_folds: stratification needs labels");

  RngStream rng(seed, rng_purpose::folds);

  // deal order: shuffled rows, grouped by class (in shuffled class order)
  // when stratified. Round-robin dealing of the first k*m entries gives
  // exact fold sizes and per-class counts within +-1.
  IndexList order = pool;
  rng.shuffle(order);
  if (stratify) {
    std::map<int, IndexList> by_class;
    for (Index row : order) by_class[(*labels)[row]].push_back(row);
    std::vector<int> class_order;
    class_order.reserve(by_class.size());
    for (const auto& [label, rows] : by_class) class_order.push_back(label);
    rng.shuffle(class_order);
    order.clear();
    for (int label : class_order)
      for (Index row : by_class[label]) order.push_back(row);
  }

  const Index m = n / k;
  FoldPlan plan;
  plan.seed = seed;
  plan.stratified = stratify;
  plan.folds.assign(static_cast<std::size_t>(k), {});
  for (Index pos = 0; pos < static_cast<Index>(k) * m; ++pos)
    plan.folds[static_cast<std::size_t>(pos % k)].push_back(
        order[static_cast<std::size_t>(pos)]);
  plan.unassigned.assign(order.begin() + static_cast<Index>(k) * m,
                         order.end());
  return plan;
}

int select_epoch_individual(const std::vector<double>& curve) {
  if (curve.empty()) throw ContractError("select_epoch: empty curve");
  int best = 0;
  for (std::size_t t = 1; t < curve.size(); ++t)
    if (curve[t] <= curve[static_cast<std::size_t>(best)])
      best = static_cast<int>(t);
  return best;
}

int select_epoch_joint(const std::vector<std::vector<double>>& curves) {
  if (curves.empty()) throw ContractError("select_epoch_joint: no curves");
  std::size_t len = curves[0].size();
  for (const auto& c : curves) len = std::min(len, c.size());
  if (len == 0) throw ContractError("select_epoch_joint: empty curve");
  std::vector<double> total(len, 0.0);
  for (const auto& c : curves)
    for (std::size_t t = 0; t < len; ++t) total[t] += c[t];
  return select_epoch_individual(total);
}

MatrixXd average_predictions(const std::vector<MatrixXd>& member_preds) {
  if (member_preds.empty())
    throw ContractError("average_predictions: no members");
  MatrixXd sum = member_preds[0];
  for (std::size_t i = 1; i < member_preds.size(); ++i) {
    if (member_preds[i].rows() != sum.rows() ||
        member_preds[i].cols() != sum.cols())
      throw ContractError("average_predictions: shape mismatch");
    sum += member_preds[i];
  }
  return sum / static_cast<double>(member_preds.size());
}

namespace {

std::vector<double> val_curve(const TrainRecord& record) {
  std::vector<double> curve;
  curve.reserve(record.epochs.size());
  for (const auto& e : record.epochs) curve.push_back(e.val_metric);
  return curve;
}

}  // namespace

EnsembleOutcome run_ensemble(const Dataset& dataset, const IndexList& pool,
                             const ModelConfig& config,
                             const EnsembleConfig& spec, std::uint64_t seed,
                             int jobs) {
  if (spec.members < 1 || spec.members > spec.k_folds)
    throw ContractError("run_ensemble: members must be in [1, k_folds]");
  const bool classification = config.task == Task::classification;

  VectorXi labels;
  if (classification) {
    labels = dataset.class_targets;
  }
  EnsembleOutcome out;
  out.folds = make_folds(pool, spec.k_folds, seed, classification,
                         classification ? &labels : nullptr);

  // bagged models: needed for their validation curves (all folds when joint
  // stopping) and as the ensemble members in bagging mode
  const int n_bagged = (spec.joint_stopping || spec.members == spec.k_folds)
                           ? spec.k_folds
                           : spec.members;
  std::vector<FitOutcome> bagged(static_cast<std::size_t>(n_bagged));
  std::vector<IndexList> train_rows(static_cast<std::size_t>(n_bagged));
  for (int i = 0; i < n_bagged; ++i) {
    IndexList rows;
    for (int j = 0; j < spec.k_folds; ++j)
      if (j != i)
        rows.insert(rows.end(), out.folds.folds[static_cast<std::size_t>(j)].begin(),
                    out.folds.folds[static_cast<std::size_t>(j)].end());
    // surplus rows join every bagged training set
    rows.insert(rows.end(), out.folds.unassigned.begin(),
                out.folds.unassigned.end());
    train_rows[static_cast<std::size_t>(i)] = std::move(rows);
  }
  parallel_for(n_bagged, jobs, [&](int i) {
    bagged[static_cast<std::size_t>(i)] = fit_realmlp(
        dataset, train_rows[static_cast<std::size_t>(i)],
        out.folds.folds[static_cast<std::size_t>(i)], config,
        derive_seed(seed, "member", static_cast<std::uint64_t>(i)));
  });
  out.bagged_train_rows = train_rows;
  for (const auto& fit : bagged)
    out.fold_curves.push_back(val_curve(fit.record));

  // chosen epochs from the bagged curves
  std::vector<int> chosen(static_cast<std::size_t>(spec.members));
  if (spec.joint_stopping) {
    const int shared = select_epoch_joint(out.fold_curves);
    std::fill(chosen.begin(), chosen.end(), shared);
  } else {
    for (int i = 0; i < spec.members; ++i)
      chosen[static_cast<std::size_t>(i)] =
          select_epoch_individual(out.fold_curves[static_cast<std::size_t>(i)]);
  }
  out.chosen_epochs = chosen;

  out.models.resize(static_cast<std::size_t>(spec.members));
  parallel_for(spec.members, jobs, [&](int i) {
    const int target = chosen[static_cast<std::size_t>(i)];
    if (spec.refitting) {
      // refit on the full pool with a distinct seed, pinned to t_i*
      FitOutcome fit =
          fit_realmlp(dataset, pool, {}, config,
                      derive_seed(seed, "refit", static_cast<std::uint64_t>(i)),
                      target);
      out.models[static_cast<std::size_t>(i)] = std::move(fit.model);
    } else if (bagged[static_cast<std::size_t>(i)].record.best_epoch == target) {
      out.models[static_cast<std::size_t>(i)] =
          std::move(bagged[static_cast<std::size_t>(i)].model);
    } else {
      // deterministic retrain of the same member, snapshotting at t*
      FitOutcome fit = fit_realmlp(
          dataset, train_rows[static_cast<std::size_t>(i)],
          out.folds.folds[static_cast<std::size_t>(i)], config,
          derive_seed(seed, "member", static_cast<std::uint64_t>(i)), target);
      out.models[static_cast<std::size_t>(i)] = std::move(fit.model);
    }
  });
  return out;
}

MatrixXd predict_ensemble_proba(const EnsembleOutcome& ens,
                                const Dataset& dataset, const IndexList& rows) {
  std::vector<MatrixXd> preds;
  preds.reserve(ens.models.size());
  for (const auto& m : ens.models)
    preds.push_back(predict_proba(m, dataset, rows));
  return average_predictions(preds);
}

VectorXd predict_ensemble_values(const EnsembleOutcome& ens,
                                 const Dataset& dataset, const IndexList& rows) {
  std::vector<MatrixXd> preds;
  preds.reserve(ens.models.size());
  for (const auto& m : ens.models)
    preds.push_back(predict_values(m, dataset, rows));
  return average_predictions(preds).col(0);
}

GreedyResult greedy_selection(
    const std::vector<MatrixXd>& val_predictions,
    const std::function<double(const MatrixXd&)>& error_of, int steps) {
  if (val_predictions.empty())
    throw ContractError("greedy_selection: no candidates");
  if (steps < 1) throw ContractError("greedy_selection: steps must be >= 1");
  const std::size_t k = val_predictions.size();

  MatrixXd sum = MatrixXd::Zero(val_predictions[0].rows(),
                                val_predictions[0].cols());
  std::vector<int> picks;
  std::vector<int> best_prefix;
  double best_error = std::numeric_limits<double>::infinity();

  for (int step = 0; step < steps; ++step) {
    int pick = -1;
    double pick_error = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      const MatrixXd avg =
          (sum + val_predictions[c]) / static_cast<double>(step + 1);
      const double err = error_of(avg);
      if (err < pick_error) {
        pick_error = err;
        pick = static_cast<int>(c);
      }
    }
    sum += val_predictions[static_cast<std::size_t>(pick)];
    picks.push_back(pick);
    if (pick_error < best_error) {
      best_error = pick_error;
      best_prefix = picks;
    }
  }

  GreedyResult result;
  result.picks = best_prefix;
  result.val_error = best_error;
  result.weights.assign(k, 0.0);
  for (int p : best_prefix)
    result.weights[static_cast<std::size_t>(p)] +=
        1.0 / static_cast<double>(best_prefix.size());
  return result;
}

}  // namespace ensemble
}  // namespace realmlp
