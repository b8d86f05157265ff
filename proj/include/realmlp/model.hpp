#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "realmlp/autodiff.hpp"
#include "realmlp/config.hpp"
#include "realmlp/dataio.hpp"
#include "realmlp/preprocess.hpp"
#include "realmlp/rng.hpp"
#include "realmlp/types.hpp"

namespace realmlp {

/// Optimizer grouping: every parameter belongs to exactly one group, which
/// carries its learning-rate and weight-decay factors.
enum class ParamGroup { weight, bias, scaling, num_emb, cat_emb, act_alpha };

inline std::string to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::weight: return "weight";
    case ParamGroup::bias: return "bias";
    case ParamGroup::scaling: return "scaling";
    case ParamGroup::num_emb: return "num_emb";
    case ParamGroup::cat_emb: return "cat_emb";
    case ParamGroup::act_alpha: return "act_alpha";
  }
  return "weight";
}

template <class Scalar>
struct ParameterStore {
  struct Entry {
    std::string name;
    ParamGroup group;
    Mat<Scalar> value;
  };
  std::vector<Entry> entries;

  int add(std::string name, ParamGroup group, Mat<Scalar> value) {
    entries.push_back({std::move(name), group, std::move(value)});
    return static_cast<int>(entries.size()) - 1;
  }
  Mat<Scalar>& operator[](int i) { return entries[static_cast<std::size_t>(i)].value; }
  const Mat<Scalar>& operator[](int i) const {
    return entries[static_cast<std::size_t>(i)].value;
  }
  std::vector<Mat<Scalar>> snapshot() const {
    std::vector<Mat<Scalar>> vals;
    vals.reserve(entries.size());
    for (const auto& e : entries) vals.push_back(e.value);
    return vals;
  }
  void restore(const std::vector<Mat<Scalar>>& vals) {
    for (std::size_t i = 0; i < entries.size(); ++i)
      entries[i].value = vals[i];
  }
};

/// RealMLP: [num./cat. embeddings] -> learnable scaling ->
/// (NTP linear -> activation -> dropout) x hidden -> NTP linear.
template <class Scalar>
struct RealMLPModel {
  ModelConfig config;
  FittedPreprocessor preprocessor;
  TargetStandardizer standardizer;  // regression
  double clip_lo = 0.0, clip_hi = 0.0;  // raw-space train target range
  int output_width = 1;  // K for classification (2 for binary), 1 for regression
  std::vector<std::string> target_labels;

  ParameterStore<Scalar> params;

  struct FeatureEmbedding {
    int w1 = -1, b1 = -1, w2 = -1, b2 = -1;  // b1 unused for PL/PLR
  };
  std::vector<Index> numeric_cols;  // preprocessed columns routed to num emb
  std::vector<FeatureEmbedding> num_emb;  // parallel to numeric_cols
  std::vector<int> cat_tables;            // per embed-routed column
  int scaling = -1;
  std::vector<int> lin_w, lin_b;  // one pair per linear layer
  std::vector<Index> layer_in_dims;
  std::vector<int> alphas;  // per hidden activation (parametric only)
  Index feature_width = 0;
};

/// PBLD map for one scalar feature: (x, W2 cos(2 pi w1 x + b1) + b2).
/// The first output component is exactly x.
template <class Scalar>
Vec<Scalar> pbld_embed(Scalar x, const RowVec<Scalar>& w1,
                       const RowVec<Scalar>& b1, const Mat<Scalar>& w2,
                       const RowVec<Scalar>& b2) {
  const auto periodic =
      (Scalar(2) * Scalar(std::numbers::pi) * w1.array() * x + b1.array())
          .cos()
          .matrix();
  Vec<Scalar> out(w2.rows() + 1);
  out(0) = x;
  out.tail(w2.rows()) = w2 * periodic.transpose() + b2.transpose();
  return out;
}

/// Allocates all parameters and draws the embedding/scaling initialization.
/// Linear layers start at zero; run init_data_dependent or init_simple next.
template <class Scalar>
RealMLPModel<Scalar> build_model(const ModelConfig& config,
                                 FittedPreprocessor preprocessor,
                                 int output_width, RngStream& rng) {
  RealMLPModel<Scalar> model;
  model.config = config;
  model.preprocessor = std::move(preprocessor);
  model.output_width = output_width;

  const auto& fp = model.preprocessor;
  const bool embed_numerics = config.num_embeddings != NumEmbeddingKind::none;
  if (embed_numerics) {
    for (Index c = 0; c < fp.output_width(); ++c)
      if (fp.columns[static_cast<std::size_t>(c)].embed_eligible)
        model.numeric_cols.push_back(c);
  }

  const int emb_dim = config.emb_dim;
  const int hid = config.emb_hidden_dim;
  Index width = fp.output_width();
  width += static_cast<Index>(model.numeric_cols.size()) * (emb_dim - 1);
  width += static_cast<Index>(fp.embed_routed.size()) * config.cat_emb_dim;
  if (width == 0) throw ContractError("build_model: zero input width");
  model.feature_width = width;

  // numerical embedding parameters, drawn per feature in column order
  for (std::size_t i = 0; i < model.numeric_cols.size(); ++i) {
    typename RealMLPModel<Scalar>::FeatureEmbedding e;
    const std::string base = "num_emb." + std::to_string(i) + ".";
    if (config.num_embeddings == NumEmbeddingKind::pbld) {
      Mat<Scalar> w1(1, hid), b1(1, hid), w2(emb_dim - 1, hid),
          b2(1, emb_dim - 1);
      for (Index c = 0; c < hid; ++c)
        w1(0, c) = static_cast<Scalar>(rng.normal(0.0, config.emb_init_std));
      for (Index c = 0; c < hid; ++c)
        b1(0, c) = static_cast<Scalar>(
            rng.uniform(-std::numbers::pi, std::numbers::pi));
      const double bound = 1.0 / std::sqrt(static_cast<double>(hid));
      for (Index r = 0; r < w2.rows(); ++r)
        for (Index c = 0; c < w2.cols(); ++c)
          w2(r, c) = static_cast<Scalar>(rng.uniform(-bound, bound));
      for (Index c = 0; c < b2.cols(); ++c)
        b2(0, c) = static_cast<Scalar>(rng.uniform(-bound, bound));
      e.w1 = model.params.add(base + "w1", ParamGroup::num_emb, std::move(w1));
      e.b1 = model.params.add(base + "b1", ParamGroup::num_emb, std::move(b1));
      e.w2 = model.params.add(base + "w2", ParamGroup::num_emb, std::move(w2));
      e.b2 = model.params.add(base + "b2", ParamGroup::num_emb, std::move(b2));
    } else {
      // PL / PLR: cos and sin of hid/2 frequencies, then a linear map
      if (hid % 2 != 0)
        throw ContractError("pl embeddings need an even hidden dimension");
      Mat<Scalar> w1(1, hid / 2), w2(emb_dim, hid), b2(1, emb_dim);
      for (Index c = 0; c < w1.cols(); ++c)
        w1(0, c) = static_cast<Scalar>(rng.normal(0.0, config.emb_init_std));
      const double bound = 1.0 / std::sqrt(static_cast<double>(hid));
      for (Index r = 0; r < w2.rows(); ++r)
        for (Index c = 0; c < w2.cols(); ++c)
          w2(r, c) = static_cast<Scalar>(rng.uniform(-bound, bound));
      for (Index c = 0; c < b2.cols(); ++c)
        b2(0, c) = static_cast<Scalar>(rng.uniform(-bound, bound));
      e.w1 = model.params.add(base + "w1", ParamGroup::num_emb, std::move(w1));
      e.w2 = model.params.add(base + "w2", ParamGroup::num_emb, std::move(w2));
      e.b2 = model.params.add(base + "b2", ParamGroup::num_emb, std::move(b2));
    }
    model.num_emb.push_back(e);
  }

  // categorical embedding tables, row 0 reserved for missing/unseen
  for (std::size_t j = 0; j < fp.embed_routed.size(); ++j) {
    const int k = fp.embed_cardinalities[j];
    Mat<Scalar> table(k + 1, config.cat_emb_dim);
    for (Index r = 0; r < table.rows(); ++r)
      for (Index c = 0; c < table.cols(); ++c)
        table(r, c) = static_cast<Scalar>(rng.normal());
    model.cat_tables.push_back(model.params.add(
        "cat_emb." + std::to_string(j), ParamGroup::cat_emb, std::move(table)));
  }

  if (config.scaling_layer)
    model.scaling = model.params.add("scaling", ParamGroup::scaling,
                                     Mat<Scalar>::Ones(1, width));

  // NTP linear layers; zero until an init scheme runs
  Index d_in = width;
  std::vector<Index> dims;
  for (int h : config.hidden_sizes) dims.push_back(h);
  dims.push_back(output_width);
  for (std::size_t l = 0; l < dims.size(); ++l) {
    const Index d_out = dims[l];
    model.layer_in_dims.push_back(d_in);
    model.lin_w.push_back(model.params.add("linear." + std::to_string(l) + ".w",
                                           ParamGroup::weight,
                                           Mat<Scalar>::Zero(d_out, d_in)));
    model.lin_b.push_back(model.params.add("linear." + std::to_string(l) + ".b",
                                           ParamGroup::bias,
                                           Mat<Scalar>::Zero(1, d_out)));
    if (config.parametric_activation && l + 1 < dims.size())
      model.alphas.push_back(model.params.add(
          "alpha." + std::to_string(l), ParamGroup::act_alpha,
          Mat<Scalar>::Ones(1, d_out)));
    d_in = d_out;
  }
  return model;
}

namespace detail {

template <class Scalar>
void apply_activation_inplace(Mat<Scalar>& z, act::Kind kind,
                              const Mat<Scalar>* alpha) {
  if (alpha == nullptr) {
    z = z.unaryExpr([kind](Scalar v) { return act::eval(kind, v); });
    return;
  }
  for (Index c = 0; c < z.cols(); ++c) {
    const Scalar a = (*alpha)(0, c);
    z.col(c) = z.col(c).unaryExpr([kind, a](Scalar v) {
      return (Scalar(1) - a) * v + a * act::eval(kind, v);
    });
  }
}

}  // namespace detail

/// Tape forward pass. `param_ids` (parallel to model.params.entries) receives
/// the leaf/constant node of every parameter; dropout masks are drawn from
/// `dropout_rng` only in train mode with p > 0.
template <class Scalar>
struct ForwardGraph {
  typename Tape<Scalar>::NodeId output = -1;
  std::vector<int> param_ids;
};

template <class Scalar>
ForwardGraph<Scalar> forward_graph(const RealMLPModel<Scalar>& model,
                                   Tape<Scalar>& tape, const Mat<Scalar>& x,
                                   const Eigen::MatrixXi& cat_codes,
                                   bool train_mode, Scalar dropout_p,
                                   RngStream* dropout_rng,
                                   bool track_grads) {
  ForwardGraph<Scalar> fg;
  fg.param_ids.reserve(model.params.entries.size());
  for (const auto& e : model.params.entries)
    fg.param_ids.push_back(track_grads ? tape.leaf(e.value)
                                       : tape.constant(e.value));

  const Scalar two_pi = Scalar(2) * Scalar(std::numbers::pi);
  std::vector<int> parts;
  if (model.numeric_cols.empty() && model.cat_tables.empty()) {
    parts.push_back(tape.constant(x));
  } else {
    // walk the preprocessed columns, replacing embed-routed numerics with
    // their embeddings and batching contiguous passthrough columns
    std::size_t next_emb = 0;
    Index c = 0;
    const Index width = x.cols();
    while (c < width) {
      if (next_emb < model.numeric_cols.size() &&
          model.numeric_cols[next_emb] == c) {
        const auto& e = model.num_emb[next_emb];
        const int xcol = tape.constant(x.col(c));
        if (model.config.num_embeddings == NumEmbeddingKind::pbld) {
          int u = tape.matmul(xcol, fg.param_ids[static_cast<std::size_t>(e.w1)]);
          u = tape.scale(u, two_pi);
          u = tape.add_rowvec(u, fg.param_ids[static_cast<std::size_t>(e.b1)]);
          int per = tape.cos(u);
          int lin = tape.matmul_nt(per, fg.param_ids[static_cast<std::size_t>(e.w2)]);
          lin = tape.add_rowvec(lin, fg.param_ids[static_cast<std::size_t>(e.b2)]);
          parts.push_back(tape.concat_cols({xcol, lin}));
        } else {
          int u = tape.matmul(xcol, fg.param_ids[static_cast<std::size_t>(e.w1)]);
          u = tape.scale(u, two_pi);
          int per = tape.concat_cols({tape.cos(u), tape.sin(u)});
          int lin = tape.matmul_nt(per, fg.param_ids[static_cast<std::size_t>(e.w2)]);
          lin = tape.add_rowvec(lin, fg.param_ids[static_cast<std::size_t>(e.b2)]);
          if (model.config.num_embeddings == NumEmbeddingKind::plr)
            lin = tape.activation(lin, act::Kind::relu);
          parts.push_back(lin);
        }
        ++next_emb;
        ++c;
      } else {
        const Index stop = next_emb < model.numeric_cols.size()
                               ? model.numeric_cols[next_emb]
                               : width;
        parts.push_back(tape.constant(x.middleCols(c, stop - c)));
        c = stop;
      }
    }
    for (std::size_t j = 0; j < model.cat_tables.size(); ++j) {
      std::vector<int> idx(static_cast<std::size_t>(cat_codes.rows()));
      for (Index r = 0; r < cat_codes.rows(); ++r)
        idx[static_cast<std::size_t>(r)] = cat_codes(r, static_cast<Index>(j));
      parts.push_back(tape.gather_rows(
          fg.param_ids[static_cast<std::size_t>(model.cat_tables[j])],
          std::move(idx)));
    }
  }
  int cur = parts.size() == 1 ? parts[0] : tape.concat_cols(parts);

  if (model.scaling >= 0)
    cur = tape.scale_cols(cur, fg.param_ids[static_cast<std::size_t>(model.scaling)]);

  const auto layers = model.lin_w.size();
  for (std::size_t l = 0; l < layers; ++l) {
    const Scalar ntp =
        Scalar(1) / std::sqrt(static_cast<Scalar>(model.layer_in_dims[l]));
    int z = tape.matmul_nt(cur, fg.param_ids[static_cast<std::size_t>(model.lin_w[l])]);
    z = tape.scale(z, ntp);
    z = tape.add_rowvec(z, fg.param_ids[static_cast<std::size_t>(model.lin_b[l])]);
    if (l + 1 == layers) {
      cur = z;
      break;
    }
    if (model.config.parametric_activation)
      z = tape.parametric_activation(
          z, fg.param_ids[static_cast<std::size_t>(model.alphas[l])],
          model.config.activation);
    else
      z = tape.activation(z, model.config.activation);
    if (train_mode && dropout_p > Scalar(0)) {
      const Scalar keep = Scalar(1) - dropout_p;
      Mat<Scalar> mask(tape.value(z).rows(), tape.value(z).cols());
      for (Index r = 0; r < mask.rows(); ++r)
        for (Index cc = 0; cc < mask.cols(); ++cc)
          mask(r, cc) = dropout_rng->bernoulli(static_cast<double>(keep))
                            ? Scalar(1)
                            : Scalar(0);
      z = tape.dropout(z, std::move(mask), keep);
    }
    cur = z;
  }
  fg.output = cur;
  return fg;
}

/// Evaluation-mode forward (no dropout, no gradients): network outputs
/// (logits or standardized regression values).
template <class Scalar>
Mat<Scalar> forward_eval(const RealMLPModel<Scalar>& model,
                         const Mat<Scalar>& x,
                         const Eigen::MatrixXi& cat_codes) {
  Tape<Scalar> tape;
  auto fg = forward_graph(model, tape, x, cat_codes, /*train_mode=*/false,
                          Scalar(0), nullptr, /*track_grads=*/false);
  return tape.value(fg.output);
}

/// Embedded + scaled feature matrix, shared by the data-dependent init and
/// verified against the tape path in tests.
template <class Scalar>
Mat<Scalar> eval_features(const RealMLPModel<Scalar>& model,
                          const Mat<Scalar>& x,
                          const Eigen::MatrixXi& cat_codes) {
  const Index n = x.rows();
  Mat<Scalar> f(n, model.feature_width);
  const Scalar two_pi = Scalar(2) * Scalar(std::numbers::pi);
  Index out = 0;
  std::size_t next_emb = 0;
  for (Index c = 0; c < x.cols(); ++c) {
    if (next_emb < model.numeric_cols.size() &&
        model.numeric_cols[next_emb] == c) {
      const auto& e = model.num_emb[next_emb];
      const auto& w1 = model.params[e.w1];
      const auto& w2 = model.params[e.w2];
      const auto& b2 = model.params[e.b2];
      if (model.config.num_embeddings == NumEmbeddingKind::pbld) {
        const auto& b1 = model.params[e.b1];
        Mat<Scalar> per = ((x.col(c) * w1 * two_pi).rowwise() + b1.row(0))
                              .array()
                              .cos()
                              .matrix();
        f.col(out) = x.col(c);
        f.middleCols(out + 1, w2.rows()) =
            (per * w2.transpose()).rowwise() + b2.row(0);
        out += 1 + w2.rows();
      } else {
        Mat<Scalar> u = x.col(c) * w1 * two_pi;
        Mat<Scalar> per(n, 2 * u.cols());
        per.leftCols(u.cols()) = u.array().cos().matrix();
        per.rightCols(u.cols()) = u.array().sin().matrix();
        Mat<Scalar> lin = (per * w2.transpose()).rowwise() + b2.row(0);
        if (model.config.num_embeddings == NumEmbeddingKind::plr)
          lin = lin.cwiseMax(Scalar(0));
        f.middleCols(out, lin.cols()) = lin;
        out += lin.cols();
      }
      ++next_emb;
    } else {
      f.col(out++) = x.col(c);
    }
  }
  for (std::size_t j = 0; j < model.cat_tables.size(); ++j) {
    const auto& table = model.params[model.cat_tables[j]];
    for (Index r = 0; r < n; ++r)
      f.row(r).segment(out, table.cols()) =
          table.row(cat_codes(r, static_cast<Index>(j)));
    out += table.cols();
  }
  if (model.scaling >= 0)
    f = f.array().rowwise() * model.params[model.scaling].row(0).array();
  return f;
}

/// Data-dependent initialization: weights drawn from N(0,1) and row-rescaled
/// during one forward pass so each unit's pre-activation (excluding bias) has
/// unit empirical variance over the sample; zero-variance units are left
/// unscaled. Biases follow config.bias_init.
template <class Scalar>
void init_data_dependent(const Mat<Scalar>& x, const Eigen::MatrixXi& cat_codes,
                         RngStream& rng, RealMLPModel<Scalar>& model) {
  const Index n = x.rows();
  if (n == 0) throw ContractError("init_data_dependent: empty sample");
  for (std::size_t l = 0; l < model.lin_w.size(); ++l) {
    auto& w = model.params[model.lin_w[l]];
    for (Index r = 0; r < w.rows(); ++r)
      for (Index c = 0; c < w.cols(); ++c)
        w(r, c) = static_cast<Scalar>(rng.normal());
  }
  Mat<Scalar> cur = eval_features(model, x, cat_codes);
  for (std::size_t l = 0; l < model.lin_w.size(); ++l) {
    auto& w = model.params[model.lin_w[l]];
    auto& b = model.params[model.lin_b[l]];
    const Scalar ntp =
        Scalar(1) / std::sqrt(static_cast<Scalar>(model.layer_in_dims[l]));
    Mat<Scalar> pre = ntp * (cur * w.transpose());
    for (Index k = 0; k < pre.cols(); ++k) {
      const Scalar mean = pre.col(k).mean();
      const Scalar var =
          (pre.col(k).array() - mean).square().sum() / static_cast<Scalar>(n);
      if (var > Scalar(0)) {
        const Scalar scale = Scalar(1) / std::sqrt(var);
        w.row(k) *= scale;
        pre.col(k) *= scale;
      }
    }
    for (Index k = 0; k < pre.cols(); ++k) {
      switch (model.config.bias_init) {
        case BiasInitKind::he5_standin:
          // place the unit's kink at a uniformly drawn training point
          b(0, k) = -pre(static_cast<Index>(rng.uniform_int(0, n - 1)), k);
          break;
        case BiasInitKind::zero:
          b(0, k) = Scalar(0);
          break;
        case BiasInitKind::normal:
          b(0, k) = static_cast<Scalar>(rng.normal());
          break;
      }
    }
    if (l + 1 == model.lin_w.size()) break;
    Mat<Scalar> z = pre.rowwise() + b.row(0);
    const Mat<Scalar>* alpha =
        model.config.parametric_activation ? &model.params[model.alphas[l]]
                                           : nullptr;
    detail::apply_activation_inplace(z, model.config.activation, alpha);
    cur = std::move(z);
  }
}

/// Simple initialization: weights and biases from N(0,1), except the last
/// layer, which starts at exactly zero.
template <class Scalar>
void init_simple(RngStream& rng, RealMLPModel<Scalar>& model) {
  const std::size_t last = model.lin_w.size() - 1;
  for (std::size_t l = 0; l < model.lin_w.size(); ++l) {
    auto& w = model.params[model.lin_w[l]];
    auto& b = model.params[model.lin_b[l]];
    if (l == last) {
      w.setZero();
      b.setZero();
      continue;
    }
    for (Index r = 0; r < w.rows(); ++r)
      for (Index c = 0; c < w.cols(); ++c)
        w(r, c) = static_cast<Scalar>(rng.normal());
    for (Index c = 0; c < b.cols(); ++c)
      b(0, c) = static_cast<Scalar>(rng.normal());
  }
}

/// Row-wise softmax of logits.
template <class Scalar>
Mat<Scalar> softmax_rows(const Mat<Scalar>& logits) {
  Mat<Scalar> p(logits.rows(), logits.cols());
  for (Index r = 0; r < logits.rows(); ++r) {
    const Scalar m = logits.row(r).maxCoeff();
    p.row(r) = (logits.row(r).array() - m).exp();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

}  // namespace realmlp
