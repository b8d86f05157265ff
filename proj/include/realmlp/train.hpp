#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "realmlp/model.hpp"
#include "realmlp/optimizer.hpp"
#include "realmlp/schedule.hpp"

namespace realmlp {

/// Preprocessed inputs plus encoded targets (class labels, or standardized
/// regression targets).
template <class Scalar>
struct EncodedData {
  Mat<Scalar> x;
  Eigen::MatrixXi codes;
  std::vector<int> labels;
  Vec<Scalar> targets;

  Index rows() const { return x.rows(); }
};

struct EpochStats {
  double train_loss = 0.0;
  double val_metric = std::numeric_limits<double>::quiet_NaN();
};

struct TrainRecord {
  std::vector<EpochStats> epochs;
  int best_epoch = -1;  // 0-based epoch the parameters were reverted to
  double best_metric = std::numeric_limits<double>::quiet_NaN();
  bool aborted = false;
  std::string abort_reason;
};

/// Validation value of the configured stopping metric, in evaluation mode.
template <class Scalar>
double stopping_metric(const RealMLPModel<Scalar>& model,
                       const EncodedData<Scalar>& data, StopMetric metric) {
  const Mat<Scalar> out = forward_eval(model, data.x, data.codes);
  const Index n = out.rows();
  switch (metric) {
    case StopMetric::class_error: {
      Index wrong = 0;
      for (Index r = 0; r < n; ++r) {
        Index best = 0;
        out.row(r).maxCoeff(&best);
        wrong += (static_cast<int>(best) !=
                  data.labels[static_cast<std::size_t>(r)]);
      }
      return static_cast<double>(wrong) / static_cast<double>(n);
    }
    case StopMetric::rmse: {
      const auto diff = out.col(0) - data.targets;
      return std::sqrt(static_cast<double>(diff.squaredNorm()) /
                       static_cast<double>(n));
    }
    case StopMetric::cross_entropy: {
      double total = 0.0;
      for (Index r = 0; r < n; ++r) {
        const Scalar m = out.row(r).maxCoeff();
        const Scalar lse =
            m + std::log((out.row(r).array() - m).exp().sum());
        total += static_cast<double>(
            lse - out(r, data.labels[static_cast<std::size_t>(r)]));
      }
      return total / static_cast<double>(n);
    }
  }
  return 0.0;
}

namespace detail {

inline double group_lr_factor(const ModelConfig& cfg, ParamGroup g) {
  switch (g) {
    case ParamGroup::weight: return 1.0;
    case ParamGroup::bias: return cfg.lr_factor_bias;
    case ParamGroup::scaling: return cfg.lr_factor_scaling;
    case ParamGroup::num_emb: return cfg.lr_factor_num_emb;
    case ParamGroup::cat_emb: return 1.0;
    case ParamGroup::act_alpha: return cfg.lr_factor_alpha;
  }
  return 1.0;
}

inline double group_wd_factor(const ModelConfig& cfg, ParamGroup g) {
  return g == ParamGroup::bias ? cfg.wd_factor_bias : 1.0;
}

}  // namespace detail

/// AdamW training with scheduled hyperparameters and last-best-epoch revert.
/// With `pin_epoch` set, parameters are snapshotted at that epoch instead of
/// at the running validation best (used for refitting ensembles, where no
/// validation set exists).
template <class Scalar>
TrainRecord train_model(RealMLPModel<Scalar>& model,
                        const EncodedData<Scalar>& train,
                        const EncodedData<Scalar>& val, std::uint64_t seed,
                        std::optional<int> pin_epoch = std::nullopt) {
  const ModelConfig& cfg = model.config;
  const Index n = train.rows();
  if (n == 0) throw ContractError("train_model: empty training data");
  if (val.rows() == 0 && !pin_epoch)
    throw ContractError("train_model: no validation data and no pinned epoch");
  if (pin_epoch && (*pin_epoch < 0 || *pin_epoch >= cfg.epochs))
    throw ContractError("train_model: pinned epoch " +
                        std::to_string(*pin_epoch) + " outside [0, " +
                        std::to_string(cfg.epochs) + ")");

  const long bpe = (n + cfg.batch_size - 1) / cfg.batch_size;
  const long total_iters = static_cast<long>(cfg.epochs) * bpe;
  const bool classification = cfg.task == Task::classification;

  std::vector<Mat<Scalar>*> param_ptrs;
  std::vector<StepRates> rates(model.params.entries.size());
  std::vector<double> lr_factors, wd_factors;
  for (auto& e : model.params.entries) {
    param_ptrs.push_back(&e.value);
    lr_factors.push_back(detail::group_lr_factor(cfg, e.group));
    wd_factors.push_back(detail::group_wd_factor(cfg, e.group));
  }
  AdamW<Scalar> adam({cfg.beta1, cfg.beta2, cfg.adam_eps});
  adam.register_params(param_ptrs);

  RngStream shuffle_rng(seed, rng_purpose::shuffle);
  RngStream dropout_rng(seed, rng_purpose::dropout);

  TrainRecord record;
  std::vector<Mat<Scalar>> best = model.params.snapshot();
  bool have_best = false;

  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

  long iter = 0;
  for (int epoch = 0; epoch < cfg.epochs && !record.aborted; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    for (long b = 0; b < bpe && !record.aborted; ++b, ++iter) {
      const Index begin = static_cast<Index>(b) * cfg.batch_size;
      const Index size = std::min<Index>(cfg.batch_size, n - begin);

      Mat<Scalar> bx(size, train.x.cols());
      Eigen::MatrixXi bcodes(size, train.codes.cols());
      std::vector<int> blabels(classification ? static_cast<std::size_t>(size) : 0);
      Mat<Scalar> btargets(classification ? 0 : size, classification ? 0 : 1);
      for (Index r = 0; r < size; ++r) {
        const Index src = order[static_cast<std::size_t>(begin + r)];
        bx.row(r) = train.x.row(src);
        if (train.codes.cols() > 0) bcodes.row(r) = train.codes.row(src);
        if (classification)
          blabels[static_cast<std::size_t>(r)] =
              train.labels[static_cast<std::size_t>(src)];
        else
          btargets(r, 0) = train.targets[src];
      }

      const double t = static_cast<double>(iter) / static_cast<double>(total_iters);
      const double lr_t = cfg.learning_rate * schedule_value(cfg.lr_schedule, t);
      const double wd_t = cfg.weight_decay * schedule_value(cfg.wd_schedule, t);
      const double p_t = cfg.dropout * schedule_value(cfg.dropout_schedule, t);

      Tape<Scalar> tape;
      auto fg = forward_graph(model, tape, bx, bcodes, /*train_mode=*/true,
                              static_cast<Scalar>(p_t), &dropout_rng,
                              /*track_grads=*/true);
      const int loss =
          classification
              ? tape.softmax_cross_entropy(
                    fg.output, blabels,
                    static_cast<Scalar>(cfg.label_smoothing))
              : tape.mse(fg.output, btargets);
      const double loss_value = static_cast<double>(tape.value(loss)(0, 0));
      if (!std::isfinite(loss_value)) {
        record.aborted = true;
        record.abort_reason = "non-finite loss at epoch " +
                              std::to_string(epoch) + ", iteration " +
                              std::to_string(iter);
        break;
      }
      tape.backward(loss);

      std::vector<Mat<Scalar>> grads;
      grads.reserve(fg.param_ids.size());
      bool finite = true;
      for (int id : fg.param_ids) {
        grads.push_back(tape.grad(id));
        finite = finite && grads.back().allFinite();
      }
      if (!finite) {
        record.aborted = true;
        record.abort_reason = "non-finite gradient at epoch " +
                              std::to_string(epoch) + ", iteration " +
                              std::to_string(iter);
        break;
      }
      loss_sum += loss_value * static_cast<double>(size);

      for (std::size_t i = 0; i < rates.size(); ++i)
        rates[i] = {lr_t * lr_factors[i], wd_t * wd_factors[i]};
      adam.step(param_ptrs, grads, rates);
    }
    if (record.aborted) break;

    EpochStats stats;
    stats.train_loss = loss_sum / static_cast<double>(n);
    if (val.rows() > 0)
      stats.val_metric = stopping_metric(model, val, cfg.stop_metric);
    record.epochs.push_back(stats);

    if (pin_epoch) {
      if (epoch == *pin_epoch) {
        best = model.params.snapshot();
        record.best_epoch = epoch;
        record.best_metric = stats.val_metric;
        have_best = true;
      }
    } else {
      const bool better =
          !have_best ||
          (cfg.tie_break == TieBreak::last
               ? stats.val_metric <= record.best_metric
               : stats.val_metric < record.best_metric);
      if (better && std::isfinite(stats.val_metric)) {
        best = model.params.snapshot();
        record.best_epoch = epoch;
        record.best_metric = stats.val_metric;
        have_best = true;
      }
    }
  }

  model.params.restore(best);
  return record;
}

}  // namespace realmlp
