#include "realmlp/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "realmlp/rng.hpp"

namespace realmlp {

IndexList all_rows(const Dataset& dataset) {
  IndexList rows(static_cast<std::size_t>(dataset.n_rows));
  for (Index i = 0; i < dataset.n_rows; ++i)
    rows[static_cast<std::size_t>(i)] = i;
  return rows;
}

EncodedData<double> encode_for_model(const RealMLPModel<double>& model,
                                     const Dataset& dataset,
                                     const IndexList& rows) {
  EncodedData<double> data;
  PreprocessedBatch batch =
      apply_preprocessor(model.preprocessor, dataset, rows);
  data.x = std::move(batch.x);
  data.codes = std::move(batch.cat_codes);
  if (model.config.task == Task::classification) {
    data.labels.reserve(rows.size());
    for (Index r : rows) data.labels.push_back(dataset.class_targets[r]);
  } else {
    VectorXd raw(static_cast<Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
      raw[static_cast<Index>(i)] = dataset.real_targets[rows[i]];
    data.targets = apply_standardizer(model.standardizer, raw);
  }
  return data;
}

FitOutcome fit_realmlp(const Dataset& dataset, const IndexList& train_rows,
                       const IndexList& val_rows, const ModelConfig& config,
                       std::uint64_t seed, std::optional<int> pin_epoch) {
  if (dataset.schema.task != config.task)
    throw ContractError("fit: config task does not match dataset task");
  if (!dataset.has_targets)
    throw ContractError("fit: dataset has no targets");

  FittedPreprocessor fp =
      fit_preprocessor(dataset, train_rows, config.max_onehot);

  const bool classification = config.task == Task::classification;
  const int output_width = classification ? dataset.class_count() : 1;

  RngStream init_rng(seed, rng_purpose::init);
  RealMLPModel<double> model =
      build_model<double>(config, std::move(fp), output_width, init_rng);
  model.target_labels = dataset.target_labels;

  if (!classification) {
    IndexList pool = train_rows;
    pool.insert(pool.end(), val_rows.begin(), val_rows.end());
    model.standardizer = fit_target_standardizer(dataset.real_targets, pool);
    double lo = dataset.real_targets[train_rows.front()];
    double hi = lo;
    for (Index r : train_rows) {
      lo = std::min(lo, dataset.real_targets[r]);
      hi = std::max(hi, dataset.real_targets[r]);
    }
    model.clip_lo = lo;
    model.clip_hi = hi;
  }

  if (config.init == InitScheme::data_dependent) {
    IndexList sample = train_rows;
    if (static_cast<Index>(sample.size()) > config.init_sample_cap) {
      RngStream sample_rng(seed, rng_purpose::init_sample);
      sample_rng.shuffle(sample);
      sample.resize(static_cast<std::size_t>(config.init_sample_cap));
    }
    PreprocessedBatch init_batch =
        apply_preprocessor(model.preprocessor, dataset, sample);
    init_data_dependent(init_batch.x, init_batch.cat_codes, init_rng, model);
  } else {
    init_simple(init_rng, model);
  }

  const EncodedData<double> train = encode_for_model(model, dataset, train_rows);
  EncodedData<double> val;
  if (!val_rows.empty()) val = encode_for_model(model, dataset, val_rows);

  FitOutcome out{std::move(model), {}};
  out.record = train_model(out.model, train, val, seed, pin_epoch);
  return out;
}

MatrixXd predict_proba(const RealMLPModel<double>& model,
                       const Dataset& dataset, const IndexList& rows) {
  if (model.config.task != Task::classification)
    throw ContractError("predict_proba: not a classification model");
  const EncodedData<double> data = encode_for_model(model, dataset, rows);
  return softmax_rows(forward_eval(model, data.x, data.codes));
}

VectorXd predict_values(const RealMLPModel<double>& model,
                        const Dataset& dataset, const IndexList& rows) {
  if (model.config.task != Task::regression)
    throw ContractError("predict_values: not a regression model");
  const EncodedData<double> data = encode_for_model(model, dataset, rows);
  VectorXd out =
      invert_standardizer(model.standardizer,
                          forward_eval(model, data.x, data.codes).col(0));
  if (model.config.output_clip)
    out = out.cwiseMax(model.clip_lo).cwiseMin(model.clip_hi);
  return out;
}

std::vector<int> predict_labels(const RealMLPModel<double>& model,
                                const Dataset& dataset, const IndexList& rows) {
  const MatrixXd probs = predict_proba(model, dataset, rows);
  std::vector<int> labels(static_cast<std::size_t>(probs.rows()));
  for (Index r = 0; r < probs.rows(); ++r) {
    Index best = 0;
    probs.row(r).maxCoeff(&best);
    labels[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return labels;
}

EvalMetric eval_metric_from_string(const std::string& s) {
  if (s == "err") return EvalMetric::err;
  if (s == "nrmse") return EvalMetric::nrmse;
  if (s == "auc-ovr") return EvalMetric::auc_ovr;
  if (s == "ce") return EvalMetric::ce;
  throw ContractError("unknown metric: " + s);
}

std::string to_string(EvalMetric m) {
  switch (m) {
    case EvalMetric::err: return "err";
    case EvalMetric::nrmse: return "nrmse";
    case EvalMetric::auc_ovr: return "auc-ovr";
    case EvalMetric::ce: return "ce";
  }
  return "err";
}

double evaluate_model(const RealMLPModel<double>& model, const Dataset& dataset,
                      const IndexList& rows, EvalMetric metric) {
  if (!dataset.has_targets)
    throw ContractError("evaluate: dataset has no usable targets");
  const bool classification = model.config.task == Task::classification;
  switch (metric) {
    case EvalMetric::err: {
      if (!classification)
        throw ContractError("metric err needs a classification model");
      std::vector<int> truth;
      truth.reserve(rows.size());
      for (Index r : rows) truth.push_back(dataset.class_targets[r]);
      return classification_error(truth, predict_labels(model, dataset, rows));
    }
    case EvalMetric::nrmse: {
      if (classification)
        throw ContractError("metric nrmse needs a regression model");
      VectorXd truth(static_cast<Index>(rows.size()));
      for (std::size_t i = 0; i < rows.size(); ++i)
        truth[static_cast<Index>(i)] = dataset.real_targets[rows[i]];
      return nrmse(truth, predict_values(model, dataset, rows));
    }
    case EvalMetric::auc_ovr: {
      if (!classification)
        throw ContractError("metric auc-ovr needs a classification model");
      std::vector<int> truth;
      truth.reserve(rows.size());
      for (Index r : rows) truth.push_back(dataset.class_targets[r]);
      return 1.0 - auroc_ovr(truth, predict_proba(model, dataset, rows));
    }
    case EvalMetric::ce: {
      if (!classification)
        throw ContractError("metric ce needs a classification model");
      const MatrixXd probs = predict_proba(model, dataset, rows);
      double total = 0.0;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const double p =
            probs(static_cast<Index>(i), dataset.class_targets[rows[i]]);
        total += -std::log(std::max(p, 1e-300));
      }
      return total / static_cast<double>(rows.size());
    }
  }
  return 0.0;
}

}  // namespace realmlp
