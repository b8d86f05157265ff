#pragma once

#include <cmath>
#include <vector>

#include "realmlp/types.hpp"

namespace realmlp {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
};

/// Per-parameter step inputs: the effective learning rate and weight decay
/// for this parameter's group at the current iteration.
struct StepRates {
  double lr = 0.0;
  double wd = 0.0;
};

/// AdamW with decoupled weight decay in the PyTorch form
/// theta <- theta - lr * wd * theta, applied before the Adam update.
template <class Scalar>
class AdamW {
 public:
  explicit AdamW(AdamConfig cfg) : cfg_(cfg) {}

  void register_params(const std::vector<Mat<Scalar>*>& params) {
    states_.clear();
    states_.reserve(params.size());
    for (auto* p : params)
      states_.push_back({Mat<Scalar>::Zero(p->rows(), p->cols()),
                         Mat<Scalar>::Zero(p->rows(), p->cols())});
  }

  long step_count() const { return step_; }

  void step(const std::vector<Mat<Scalar>*>& params,
            const std::vector<Mat<Scalar>>& grads,
            const std::vector<StepRates>& rates) {
    if (params.size() != states_.size() || grads.size() != states_.size() ||
        rates.size() != states_.size())
      throw ContractError("adamw: parameter/gradient/rate count mismatch");
    ++step_;
    const Scalar b1 = static_cast<Scalar>(cfg_.beta1);
    const Scalar b2 = static_cast<Scalar>(cfg_.beta2);
    const Scalar bc1 =
        Scalar(1) - static_cast<Scalar>(std::pow(cfg_.beta1, step_));
    const Scalar bc2 =
        Scalar(1) - static_cast<Scalar>(std::pow(cfg_.beta2, step_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& st = states_[i];
      auto& p = *params[i];
      const auto& g = grads[i];
      const Scalar lr = static_cast<Scalar>(rates[i].lr);
      const Scalar wd = static_cast<Scalar>(rates[i].wd);
      st.m = b1 * st.m + (Scalar(1) - b1) * g;
      st.v = b2 * st.v + (Scalar(1) - b2) * g.cwiseProduct(g);
      if (wd != Scalar(0)) p *= (Scalar(1) - lr * wd);
      if (lr != Scalar(0)) {
        const Mat<Scalar> mhat = st.m / bc1;
        const Mat<Scalar> vhat = st.v / bc2;
        p -= lr * (mhat.array() /
                   (vhat.array().sqrt() + static_cast<Scalar>(cfg_.eps)))
                      .matrix();
      }
    }
  }

 private:
  struct State {
    Mat<Scalar> m, v;
  };
  AdamConfig cfg_;
  std::vector<State> states_;
  long step_ = 0;
};

}  // namespace realmlp
