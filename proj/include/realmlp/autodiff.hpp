#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "realmlp/types.hpp"

namespace realmlp {

namespace act {

inline constexpr double kSeluLambda = 1.0507009873554805;
inline constexpr double kSeluAlpha = 1.6732632423543772;

template <class S>
S selu(S x) {
  return x > S(0) ? S(kSeluLambda) * x
                  : S(kSeluLambda) * S(kSeluAlpha) * std::expm1(x);
}

template <class S>
S selu_grad(S x) {
  return x > S(0) ? S(kSeluLambda)
                  : S(kSeluLambda) * S(kSeluAlpha) * std::exp(x);
}

template <class S>
S softplus(S x) {
  return std::log1p(std::exp(-std::abs(x))) + std::max(x, S(0));
}

template <class S>
S mish(S x) {
  return x * std::tanh(softplus(x));
}

template <class S>
S mish_grad(S x) {
  const S t = std::tanh(softplus(x));
  const S sig = S(1) / (S(1) + std::exp(-x));
  return t + x * (S(1) - t * t) * sig;
}

template <class S>
S relu(S x) {
  return x > S(0) ? x : S(0);
}

template <class S>
S relu_grad(S x) {
  return x > S(0) ? S(1) : S(0);
}

enum class Kind { selu, mish, relu };

template <class S>
S eval(Kind k, S x) {
  switch (k) {
    case Kind::selu: return selu(x);
    case Kind::mish: return mish(x);
    case Kind::relu: return relu(x);
  }
  return x;
}

template <class S>
S grad(Kind k, S x) {
  switch (k) {
    case Kind::selu: return selu_grad(x);
    case Kind::mish: return mish_grad(x);
    case Kind::relu: return relu_grad(x);
  }
  return S(1);
}

}  // namespace act

/// Reverse-mode tape over dense matrices, covering exactly the operation set
/// the RealMLP forward pass needs. Nodes are referenced by insertion index;
/// backward() replays pull closures in reverse recording order, accumulating
/// gradients additively into every node that requires them.
template <class Scalar>
class Tape {
 public:
  using M = Mat<Scalar>;
  using NodeId = int;

  NodeId constant(M value) { return push(std::move(value), false, nullptr); }

  /// Parameter leaf: value is copied in, gradient is available after backward.
  NodeId leaf(const M& value) { return push(value, true, nullptr); }

  const M& value(NodeId id) const { return nodes_[check(id)].value; }

  const M& grad(NodeId id) const {
    const auto& n = nodes_[check(id)];
    if (!n.needs_grad)
      throw ContractError("tape: node does not track gradients");
    return n.grad;
  }

  // ---- operations ------------------------------------------------------

  NodeId matmul(NodeId a, NodeId b) {
    const M& A = value(a);
    const M& B = value(b);
    if (A.cols() != B.rows())
      throw ContractError("matmul: inner dimensions " + shape_str(a) + " x " +
                          shape_str(b));
    return push(A * B, needs(a) || needs(b),
                [a, b](Tape& t, const M& g) {
                  t.accumulate(a, g * t.value(b).transpose());
                  t.accumulate(b, t.value(a).transpose() * g);
                });
  }

  /// a * b^T without materializing the transpose.
  NodeId matmul_nt(NodeId a, NodeId b) {
    const M& A = value(a);
    const M& B = value(b);
    if (A.cols() != B.cols())
      throw ContractError("matmul_nt: inner dimensions " + shape_str(a) +
                          " x " + shape_str(b) + "^T");
    return push(A * B.transpose(), needs(a) || needs(b),
                [a, b](Tape& t, const M& g) {
                  t.accumulate(a, g * t.value(b));
                  t.accumulate(b, g.transpose() * t.value(a));
                });
  }

  NodeId add(NodeId a, NodeId b) {
    require_same_shape(a, b, "add");
    return push(value(a) + value(b), needs(a) || needs(b),
                [a, b](Tape& t, const M& g) {
                  t.accumulate(a, g);
                  t.accumulate(b, g);
                });
  }

  /// Broadcast-add a 1 x d row (e.g. a bias) to every row of x.
  NodeId add_rowvec(NodeId x, NodeId row) {
    const M& X = value(x);
    const M& R = value(row);
    if (R.rows() != 1 || R.cols() != X.cols())
      throw ContractError("add_rowvec: expected 1x" +
                          std::to_string(X.cols()) + ", got " +
                          shape_str(row));
    M out = X;
    out.rowwise() += R.row(0);
    return push(std::move(out), needs(x) || needs(row),
                [x, row](Tape& t, const M& g) {
                  t.accumulate(x, g);
                  t.accumulate(row, g.colwise().sum());
                });
  }

  NodeId multiply(NodeId a, NodeId b) {
    require_same_shape(a, b, "multiply");
    return push(value(a).cwiseProduct(value(b)), needs(a) || needs(b),
                [a, b](Tape& t, const M& g) {
                  t.accumulate(a, g.cwiseProduct(t.value(b)));
                  t.accumulate(b, g.cwiseProduct(t.value(a)));
                });
  }

  NodeId scale(NodeId x, Scalar c) {
    return push(value(x) * c, needs(x), [x, c](Tape& t, const M& g) {
      t.accumulate(x, g * c);
    });
  }

  /// Per-column learnable scaling: out(r, c) = x(r, c) * s(0, c).
  NodeId scale_cols(NodeId x, NodeId s) {
    const M& X = value(x);
    const M& S = value(s);
    if (S.rows() != 1 || S.cols() != X.cols())
      throw ContractError("scale_cols: expected 1x" +
                          std::to_string(X.cols()) + ", got " + shape_str(s));
    M out = X.array().rowwise() * S.row(0).array();
    return push(std::move(out), needs(x) || needs(s),
                [x, s](Tape& t, const M& g) {
                  t.accumulate(
                      x, (g.array().rowwise() * t.value(s).row(0).array()));
                  t.accumulate(
                      s, (g.cwiseProduct(t.value(x))).colwise().sum());
                });
  }

  NodeId cos(NodeId x) {
    return push(value(x).array().cos().matrix(), needs(x),
                [x](Tape& t, const M& g) {
                  t.accumulate(
                      x, (-t.value(x).array().sin() * g.array()).matrix());
                });
  }

  NodeId sin(NodeId x) {
    return push(value(x).array().sin().matrix(), needs(x),
                [x](Tape& t, const M& g) {
                  t.accumulate(
                      x, (t.value(x).array().cos() * g.array()).matrix());
                });
  }

  NodeId activation(NodeId x, act::Kind kind) {
    const M& X = value(x);
    M out = X.unaryExpr([kind](Scalar v) { return act::eval(kind, v); });
    return push(std::move(out), needs(x), [x, kind](Tape& t, const M& g) {
      const M& xv = t.value(x);
      t.accumulate(x, g.cwiseProduct(xv.unaryExpr([kind](Scalar v) {
        return act::grad(kind, v);
      })));
    });
  }

  /// Parametric activation (1-alpha) x + alpha sigma(x) with one learnable
  /// alpha per column (neuron); alpha is a 1 x d row.
  NodeId parametric_activation(NodeId x, NodeId alpha, act::Kind kind) {
    const M& X = value(x);
    const M& A = value(alpha);
    if (A.rows() != 1 || A.cols() != X.cols())
      throw ContractError("parametric_activation: alpha must be 1x" +
                          std::to_string(X.cols()) + ", got " +
                          shape_str(alpha));
    M sig = X.unaryExpr([kind](Scalar v) { return act::eval(kind, v); });
    M out(X.rows(), X.cols());
    for (Index c = 0; c < X.cols(); ++c)
      out.col(c) = (Scalar(1) - A(0, c)) * X.col(c) + A(0, c) * sig.col(c);
    return push(std::move(out), needs(x) || needs(alpha),
                [x, alpha, kind](Tape& t, const M& g) {
                  const M& xv = t.value(x);
                  const M& av = t.value(alpha);
                  M sig = xv.unaryExpr(
                      [kind](Scalar v) { return act::eval(kind, v); });
                  if (t.needs(x)) {
                    M gx(xv.rows(), xv.cols());
                    for (Index c = 0; c < xv.cols(); ++c) {
                      const Scalar a = av(0, c);
                      gx.col(c) = g.col(c).cwiseProduct(
                          xv.col(c)
                              .unaryExpr([kind, a](Scalar v) {
                                return (Scalar(1) - a) +
                                       a * act::grad(kind, v);
                              })
                              .eval());
                    }
                    t.accumulate(x, gx);
                  }
                  if (t.needs(alpha))
                    t.accumulate(alpha,
                                 g.cwiseProduct(sig - xv).colwise().sum());
                });
  }

  NodeId concat_cols(const std::vector<NodeId>& parts) {
    if (parts.empty()) throw ContractError("concat_cols: no inputs");
    const Index rows = value(parts[0]).rows();
    Index width = 0;
    bool any_grad = false;
    for (NodeId p : parts) {
      if (value(p).rows() != rows)
        throw ContractError("concat_cols: row mismatch");
      width += value(p).cols();
      any_grad = any_grad || needs(p);
    }
    M out(rows, width);
    Index at = 0;
    for (NodeId p : parts) {
      out.middleCols(at, value(p).cols()) = value(p);
      at += value(p).cols();
    }
    return push(std::move(out), any_grad,
                [parts](Tape& t, const M& g) {
                  Index at = 0;
                  for (NodeId p : parts) {
                    const Index w = t.value(p).cols();
                    t.accumulate(p, g.middleCols(at, w));
                    at += w;
                  }
                });
  }

  /// Embedding lookup: out.row(r) = table.row(indices[r]).
  NodeId gather_rows(NodeId table, std::vector<int> indices) {
    const M& T = value(table);
    for (int i : indices)
      if (i < 0 || i >= T.rows())
        throw ContractError("gather_rows: index out of range");
    M out(static_cast<Index>(indices.size()), T.cols());
    for (std::size_t r = 0; r < indices.size(); ++r)
      out.row(static_cast<Index>(r)) = T.row(indices[r]);
    return push(std::move(out), needs(table),
                [table, idx = std::move(indices)](Tape& t, const M& g) {
                  M gt = M::Zero(t.value(table).rows(), t.value(table).cols());
                  for (std::size_t r = 0; r < idx.size(); ++r)
                    gt.row(idx[r]) += g.row(static_cast<Index>(r));
                  t.accumulate(table, gt);
                });
  }

  /// Inverted dropout with an explicit 0/1 mask: out = x .* mask / keep.
  /// The mask is a constant; keep = 1 - p. With keep == 1 this is exactly
  /// the identity.
  NodeId dropout(NodeId x, M mask, Scalar keep) {
    require_shape_eq(value(x), mask, "dropout mask");
    if (!(keep > Scalar(0)))
      throw ContractError("dropout: keep probability must be positive");
    M out = value(x).cwiseProduct(mask) / keep;
    return push(std::move(out), needs(x),
                [x, m = std::move(mask), keep](Tape& t, const M& g) {
                  t.accumulate(x, g.cwiseProduct(m) / keep);
                });
  }

  /// Mean softmax cross-entropy against q = (1-eps) onehot + eps/K.
  NodeId softmax_cross_entropy(NodeId logits, std::vector<int> labels,
                               Scalar eps) {
    const M& Z = value(logits);
    const Index b = Z.rows();
    const Index k = Z.cols();
    if (static_cast<Index>(labels.size()) != b)
      throw ContractError("softmax_cross_entropy: label count mismatch");
    for (int y : labels)
      if (y < 0 || y >= k)
        throw ContractError("softmax_cross_entropy: label out of range");
    Scalar loss = 0;
    M probs(b, k);
    for (Index r = 0; r < b; ++r) {
      const Scalar m = Z.row(r).maxCoeff();
      const auto shifted = (Z.row(r).array() - m).eval();
      const Scalar lse = m + std::log(shifted.exp().sum());
      probs.row(r) = (Z.row(r).array() - lse).exp();
      loss += lse - (Scalar(1) - eps) * Z(r, labels[static_cast<std::size_t>(r)]) -
              eps / Scalar(k) * Z.row(r).sum();
    }
    loss /= Scalar(b);
    M out(1, 1);
    out(0, 0) = loss;
    return push(std::move(out), needs(logits),
                [logits, lab = std::move(labels), eps,
                 p = std::move(probs)](Tape& t, const M& g) {
                  const Index b = p.rows();
                  const Index k = p.cols();
                  M gz = p;
                  for (Index r = 0; r < b; ++r) {
                    gz(r, lab[static_cast<std::size_t>(r)]) -= Scalar(1) - eps;
                    gz.row(r).array() -= eps / Scalar(k);
                  }
                  t.accumulate(logits, gz * (g(0, 0) / Scalar(b)));
                });
  }

  /// Mean-over-rows squared error (columns summed within a row).
  NodeId mse(NodeId pred, M target) {
    require_shape_eq(value(pred), target, "mse target");
    const Index b = target.rows();
    const M diff = value(pred) - target;
    M out(1, 1);
    out(0, 0) = diff.squaredNorm() / Scalar(b);
    return push(std::move(out), needs(pred),
                [pred, tgt = std::move(target)](Tape& t, const M& g) {
                  const Index b = tgt.rows();
                  t.accumulate(pred, (t.value(pred) - tgt) *
                                         (Scalar(2) * g(0, 0) / Scalar(b)));
                });
  }

  // ---- reverse pass ------------------------------------------------------

  /// Seeds d(loss)/d(loss) = 1 and pulls gradients to every tracked node.
  void backward(NodeId loss) {
    auto& ln = nodes_[check(loss)];
    if (ln.value.size() != 1)
      throw ContractError("backward: loss must be a scalar node");
    if (!std::isfinite(static_cast<double>(ln.value(0, 0))))
      throw ContractError("backward: non-finite loss");
    for (auto& n : nodes_)
      if (n.needs_grad) n.grad = M::Zero(n.value.rows(), n.value.cols());
    ln.grad = M::Constant(1, 1, Scalar(1));
    for (NodeId i = loss; i >= 0; --i) {
      auto& n = nodes_[static_cast<std::size_t>(i)];
      if (n.needs_grad && n.pull) n.pull(*this, n.grad);
    }
  }

  bool needs(NodeId id) const { return nodes_[check(id)].needs_grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    M value;
    M grad;
    bool needs_grad = false;
    std::function<void(Tape&, const M&)> pull;
  };

  std::vector<Node> nodes_;

  std::size_t check(NodeId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
      throw ContractError("tape: invalid node id");
    return static_cast<std::size_t>(id);
  }

  NodeId push(M value, bool needs_grad,
              std::function<void(Tape&, const M&)> pull) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    n.pull = needs_grad ? std::move(pull) : nullptr;
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  void accumulate(NodeId id, const M& g) {
    auto& n = nodes_[check(id)];
    if (!n.needs_grad) return;
    n.grad += g;
  }

  std::string shape_str(NodeId id) const {
    const M& v = nodes_[check(id)].value;
    return std::to_string(v.rows()) + "x" + std::to_string(v.cols());
  }

  static void require_shape_eq(const M& a, const M& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
      throw ContractError(std::string(what) + ": shape mismatch");
  }

  void require_same_shape(NodeId a, NodeId b, const char* what) {
    require_shape_eq(value(a), value(b), what);
  }
};

/// Max relative error between tape gradients and central finite differences
/// with step h, over every element of every parameter in `params`.
/// `build(tape, param_ids)` must construct the loss from fresh leaves.
template <class Scalar, class BuildFn>
Scalar grad_check(std::vector<Mat<Scalar>*> params, BuildFn build,
                  Scalar h = Scalar(1e-5)) {
  using M = Mat<Scalar>;

  auto eval_loss = [&](bool with_grads, std::vector<M>* grads) -> Scalar {
    Tape<Scalar> tape;
    std::vector<int> ids;
    ids.reserve(params.size());
    for (auto* p : params)
      ids.push_back(with_grads ? tape.leaf(*p) : tape.constant(*p));
    const int loss = build(tape, ids);
    const Scalar v = tape.value(loss)(0, 0);
    if (!std::isfinite(static_cast<double>(v)))
      throw ContractError("grad_check: non-finite loss");
    if (with_grads) {
      tape.backward(loss);
      grads->clear();
      for (int id : ids) grads->push_back(tape.grad(id));
    }
    return v;
  };

  std::vector<M> analytic;
  eval_loss(true, &analytic);

  Scalar max_rel = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    M& p = *params[k];
    for (Index i = 0; i < p.rows(); ++i) {
      for (Index j = 0; j < p.cols(); ++j) {
        const Scalar saved = p(i, j);
        p(i, j) = saved + h;
        const Scalar up = eval_loss(false, nullptr);
        p(i, j) = saved - h;
        const Scalar dn = eval_loss(false, nullptr);
        p(i, j) = saved;
        const Scalar cd = (up - dn) / (2 * h);
        const Scalar rel = std::abs(analytic[k](i, j) - cd) /
                           std::max(Scalar(1), std::abs(cd));
        max_rel = std::max(max_rel, rel);
      }
    }
  }
  return max_rel;
}

}  // namespace realmlp
