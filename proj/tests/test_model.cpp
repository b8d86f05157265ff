#include <doctest.h>

#include <cmath>
#include <numbers>

#include "realmlp/model.hpp"
#include "realmlp/pipeline.hpp"
#include "testutil.hpp"

using namespace realmlp;
using M = Mat<double>;

namespace {

struct Built {
  RealMLPModel<double> model;
  PreprocessedBatch batch;
};

Built build_on(const Dataset& ds, const ModelConfig& config,
               std::uint64_t seed = 1, int output_width = 0) {
  if (output_width == 0)
    output_width = config.task == Task::classification ? 2 : 1;
  Built b;
  auto fp = fit_preprocessor(ds, testutil::iota_rows(ds.n_rows),
                             config.max_onehot);
  RngStream rng(seed, rng_purpose::init);
  b.model = build_model<double>(config, std::move(fp), output_width, rng);
  if (config.init == InitScheme::data_dependent) {
    b.batch = apply_preprocessor(b.model.preprocessor, ds,
                                 testutil::iota_rows(ds.n_rows));
    init_data_dependent(b.batch.x, b.batch.cat_codes, rng, b.model);
  } else {
    init_simple(rng, b.model);
    b.batch = apply_preprocessor(b.model.preprocessor, ds,
                                 testutil::iota_rows(ds.n_rows));
  }
  return b;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("PBLD gives first-linear input width 4 per numeric feature") {
  const auto ds = testutil::separable_blobs(40, 3);
  MatrixXd x10(40, 10);
  for (Index c = 0; c < 10; ++c) x10.col(c) = ds.numeric.col(c % 4);
  const auto wide = testutil::make_classification(
      x10, std::vector<int>(40, 0), 2);
  const ModelConfig td = preset_config("td", Task::classification);
  auto fp = fit_preprocessor(wide, testutil::iota_rows(40), td.max_onehot);
  RngStream rng(0, rng_purpose::init);
  const auto model = build_model<double>(td, std::move(fp), 2, rng);
  CHECK(model.feature_width == 40);
  CHECK(model.layer_in_dims[0] == 40);
  CHECK(model.params[model.lin_w[0]].cols() == 40);
}

TEST_CASE("TD-S input width equals the raw transformed width") {
  const auto ds = testutil::separable_blobs(40, 3);
  const ModelConfig tds = preset_config("td-s", Task::classification);
  auto fp = fit_preprocessor(ds, testutil::iota_rows(40), tds.max_onehot);
  RngStream rng(0, rng_purpose::init);
  const auto model = build_model<double>(tds, std::move(fp), 2, rng);
  CHECK(model.feature_width == 4);
  CHECK(model.num_emb.empty());
  CHECK(model.alphas.empty());
}

TEST_CASE("binary classification uses two output neurons") {
  const auto b = build_on(testutil::separable_blobs(30, 1),
                          preset_config("td", Task::classification));
  CHECK(b.model.output_width == 2);
  CHECK(b.model.params[b.model.lin_w.back()].rows() == 2);
  const M out = forward_eval(b.model, b.batch.x, b.batch.cat_codes);
  CHECK(out.cols() == 2);
}

TEST_CASE("zero input width is rejected") {
  ModelConfig td = preset_config("td", Task::classification);
  FittedPreprocessor empty;
  RngStream rng(0, rng_purpose::init);
  CHECK_THROWS_AS(build_model<double>(td, empty, 2, rng), ContractError);
}

TEST_CASE("pbld embedding") {
  SUBCASE("all-zero learned params except b2 pass through (x, b2)") {
    RowVec<double> w1 = RowVec<double>::Zero(16);
    RowVec<double> b1 = RowVec<double>::Zero(16);
    M w2 = M::Zero(3, 16);
    RowVec<double> b2(3);
    b2 << 0.5, -1.5, 2.0;
    const Vec<double> out = pbld_embed(1.7, w1, b1, w2, b2);
    CHECK(out(0) == 1.7);
    CHECK(out(1) == 0.5);
    CHECK(out(2) == -1.5);
    CHECK(out(3) == 2.0);
  }
  SUBCASE("first component is the input for random params") {
    RngStream rng(9);
    for (int rep = 0; rep < 5; ++rep) {
      RowVec<double> w1(16), b1(16), b2(3);
      M w2(3, 16);
      for (Index i = 0; i < 16; ++i) {
        w1(i) = rng.normal();
        b1(i) = rng.normal();
      }
      for (Index r = 0; r < 3; ++r) {
        b2(r) = rng.normal();
        for (Index c = 0; c < 16; ++c) w2(r, c) = rng.normal();
      }
      const double x = rng.normal();
      CHECK(pbld_embed(x, w1, b1, w2, b2)(0) == x);
    }
  }
  SUBCASE("initialization distributions") {
    // many features -> enough draws for a 5-sigma statistical check
    RngStream rng(4);
    MatrixXd x(50, 64);
    for (Index r = 0; r < 50; ++r)
      for (Index c = 0; c < 64; ++c) x(r, c) = rng.normal();
    const auto ds = testutil::make_classification(
        x, std::vector<int>(50, 0), 2);
    const ModelConfig td = preset_config("td", Task::classification);
    auto fp = fit_preprocessor(ds, testutil::iota_rows(50), td.max_onehot);
    RngStream init(7, rng_purpose::init);
    const auto model = build_model<double>(td, std::move(fp), 2, init);
    double w1_ss = 0.0;
    Index w1_n = 0;
    for (const auto& e : model.num_emb) {
      const auto& w1 = model.params[e.w1];
      w1_ss += w1.array().square().sum();
      w1_n += w1.size();
      const auto& b1 = model.params[e.b1];
      CHECK(b1.minCoeff() >= -std::numbers::pi);
      CHECK(b1.maxCoeff() <= std::numbers::pi);
      const auto& w2 = model.params[e.w2];
      CHECK(w2.minCoeff() >= -0.25);  // U[-1/sqrt(16), 1/sqrt(16)]
      CHECK(w2.maxCoeff() <= 0.25);
    }
    // w1 ~ N(0, 0.1^2): sample variance within 5 sigma of chi-square bounds
    const double var = w1_ss / static_cast<double>(w1_n);
    const double sigma = 0.01 * std::sqrt(2.0 / static_cast<double>(w1_n));
    CHECK(std::abs(var - 0.01) < 5.0 * sigma);
  }
}

TEST_CASE("scaling layer at all-ones init is the identity") {
  const auto ds = testutil::separable_blobs(30, 5);
  const ModelConfig td = preset_config("td", Task::classification);
  auto with = build_on(ds, td, 11);
  ModelConfig no_scaling = td;
  no_scaling.scaling_layer = false;
  auto without = build_on(ds, no_scaling, 11);
  const M a = forward_eval(with.model, with.batch.x, with.batch.cat_codes);
  const M b =
      forward_eval(without.model, without.batch.x, without.batch.cat_codes);
  CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("parametric activation recovers the base at alpha=1, identity at 0") {
  RngStream rng(2);
  M x(4, 6);
  for (Index r = 0; r < 4; ++r)
    for (Index c = 0; c < 6; ++c) x(r, c) = rng.normal();
  for (auto kind : {act::Kind::selu, act::Kind::mish}) {
    Tape<double> tape;
    const int in = tape.constant(x);
    const M ones = M::Ones(1, 6);
    const M zeros = M::Zero(1, 6);
    const M with_alpha1 =
        tape.value(tape.parametric_activation(in, tape.constant(ones), kind));
    const M base = tape.value(tape.activation(in, kind));
    CHECK((with_alpha1 - base).cwiseAbs().maxCoeff() <= 1e-15);
    const M with_alpha0 =
        tape.value(tape.parametric_activation(in, tape.constant(zeros), kind));
    CHECK((with_alpha0 - x).cwiseAbs().maxCoeff() <= 1e-15);
  }
}

TEST_CASE("alpha = 0 makes the network affine") {
  const auto ds = testutil::separable_blobs(20, 6);
  ModelConfig td = preset_config("td", Task::classification);
  td.num_embeddings = NumEmbeddingKind::none;  // PBLD is nonlinear in x
  auto built = build_on(ds, td, 13);
  for (int a : built.model.alphas)
    built.model.params[a].setZero();
  // superposition: f(u + v) - f(0) = (f(u) - f(0)) + (f(v) - f(0))
  const Index d = built.batch.x.cols();
  const Eigen::MatrixXi no_codes(1, 0);
  const M u = M::Random(1, d), v = M::Random(1, d);
  const M zero = M::Zero(1, d);
  const M uv = u + v;
  const M f0 = forward_eval(built.model, zero, no_codes);
  const M fu = forward_eval(built.model, u, no_codes);
  const M fv = forward_eval(built.model, v, no_codes);
  const M fuv = forward_eval(built.model, uv, no_codes);
  CHECK(((fuv - f0) - ((fu - f0) + (fv - f0))).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("NTP linear layer matches the dense formula") {
  RngStream rng(3);
  const Index d_in = 6, d_out = 4, batch = 5;
  M x(batch, d_in), w(d_out, d_in), b(1, d_out);
  for (Index r = 0; r < batch; ++r)
    for (Index c = 0; c < d_in; ++c) x(r, c) = rng.normal();
  for (Index r = 0; r < d_out; ++r) {
    b(0, r) = rng.normal();
    for (Index c = 0; c < d_in; ++c) w(r, c) = rng.normal();
  }
  Tape<double> tape;
  const int z = tape.add_rowvec(
      tape.scale(tape.matmul_nt(tape.constant(x), tape.constant(w)),
                 1.0 / std::sqrt(static_cast<double>(d_in))),
      tape.constant(b));
  // dense oracle: z = d^(-1/2) W x + b, one sample at a time
  for (Index r = 0; r < batch; ++r) {
    const Vec<double> expect =
        (w * x.row(r).transpose()) / std::sqrt(static_cast<double>(d_in)) +
        b.transpose();
    for (Index k = 0; k < d_out; ++k)
      CHECK(tape.value(z)(r, k) == doctest::Approx(expect(k)).epsilon(1e-14));
  }

  SUBCASE("duplicating inputs and weight columns scales z - b by sqrt(2)") {
    M x2(batch, 2 * d_in), w2(d_out, 2 * d_in);
    x2 << x, x;
    w2 << w, w;
    Tape<double> t2;
    const int z1 = tape.scale(
        tape.matmul_nt(tape.constant(x), tape.constant(w)),
        1.0 / std::sqrt(static_cast<double>(d_in)));
    const int z2 = t2.scale(
        t2.matmul_nt(t2.constant(x2), t2.constant(w2)),
        1.0 / std::sqrt(static_cast<double>(2 * d_in)));
    CHECK((t2.value(z2) - std::sqrt(2.0) * tape.value(z1))
              .cwiseAbs()
              .maxCoeff() < 1e-12);
  }
}

TEST_CASE("data-dependent init rescales rows to unit pre-activation variance") {
  const auto ds = testutil::separable_blobs(60, 8);
  const auto built = build_on(ds, preset_config("td", Task::classification), 21);
  const auto& model = built.model;
  // recompute layer-by-layer and check each unit's variance
  M cur = eval_features(model, built.batch.x, built.batch.cat_codes);
  for (std::size_t l = 0; l < model.lin_w.size(); ++l) {
    const auto& w = model.params[model.lin_w[l]];
    const M pre = (cur * w.transpose()) /
                  std::sqrt(static_cast<double>(model.layer_in_dims[l]));
    for (Index k = 0; k < pre.cols(); ++k) {
      const double mean = pre.col(k).mean();
      const double var = (pre.col(k).array() - mean).square().sum() /
                         static_cast<double>(pre.rows());
      CHECK(std::abs(var - 1.0) <= 1e-6);
    }
    M z = pre.rowwise() + model.params[model.lin_b[l]].row(0);
    if (l + 1 == model.lin_w.size()) break;
    const M* alpha = model.config.parametric_activation
                         ? &model.params[model.alphas[l]]
                         : nullptr;
    detail::apply_activation_inplace(z, model.config.activation, alpha);
    cur = std::move(z);
  }
}

TEST_CASE("hand case: d_in 1, feature variance 4 rescales w = 1 to 0.5") {
  // one feature, values with population variance 4 after no preprocessing:
  // bypass the pipeline and call the initializer directly
  ModelConfig cfg = preset_config("td", Task::classification);
  cfg.num_embeddings = NumEmbeddingKind::none;
  cfg.scaling_layer = false;
  cfg.hidden_sizes = {};
  cfg.bias_init = BiasInitKind::zero;
  FittedPreprocessor fp;
  fp.columns.push_back({0, true, true});
  fp.scalers.push_back({});
  RngStream rng(0, rng_purpose::init);
  auto model = build_model<double>(cfg, fp, 1, rng);
  M x(2, 1);
  x << 2.0, -2.0;  // mean 0, variance 4
  const Eigen::MatrixXi no_codes(2, 0);
  // the initializer draws w ~ N(0,1); overdraw then force w = 1 by scaling:
  init_data_dependent(x, no_codes, rng, model);
  // after rescaling, pre-activation variance is exactly 1, so |w| = 0.5
  CHECK(std::abs(model.params[model.lin_w[0]](0, 0)) ==
        doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("zero-variance unit rows stay unscaled") {
  ModelConfig cfg = preset_config("td", Task::classification);
  cfg.num_embeddings = NumEmbeddingKind::none;
  cfg.scaling_layer = false;
  cfg.hidden_sizes = {};
  cfg.bias_init = BiasInitKind::zero;
  FittedPreprocessor fp;
  fp.columns.push_back({0, true, true});
  fp.scalers.push_back({});
  RngStream rng(5, rng_purpose::init);
  auto model = build_model<double>(cfg, fp, 1, rng);
  M x = M::Ones(4, 1);  // constant feature -> zero pre-activation variance
  const Eigen::MatrixXi no_codes(4, 0);
  init_data_dependent(x, no_codes, rng, model);
  // the row was drawn from N(0,1) and must not have been rescaled; redo the
  // draw with an identical stream to recover the value
  RngStream replay(5, rng_purpose::init);
  ModelConfig cfg2 = cfg;
  auto model2 = build_model<double>(cfg2, fp, 1, replay);
  // consume nothing else: the first normal drawn in init is the weight
  const double drawn = replay.normal();
  CHECK(model.params[model.lin_w[0]](0, 0) == drawn);
  (void)model2;
}

TEST_CASE("same seed and sample give bit-identical parameters") {
  const auto ds = testutil::separable_blobs(50, 9);
  const auto a = build_on(ds, preset_config("td", Task::classification), 77);
  const auto b = build_on(ds, preset_config("td", Task::classification), 77);
  REQUIRE(a.model.params.entries.size() == b.model.params.entries.size());
  for (std::size_t i = 0; i < a.model.params.entries.size(); ++i)
    CHECK(a.model.params.entries[i].value == b.model.params.entries[i].value);
  const auto c = build_on(ds, preset_config("td", Task::classification), 78);
  bool all_equal = true;
  for (std::size_t i = 0; i < a.model.params.entries.size(); ++i)
    all_equal =
        all_equal && a.model.params.entries[i].value == c.model.params.entries[i].value;
  CHECK_FALSE(all_equal);
}

TEST_CASE("simple init zeroes the last layer") {
  const auto ds = testutil::separable_blobs(30, 10);
  const auto built =
      build_on(ds, preset_config("td-s", Task::classification), 3);
  const auto& model = built.model;
  CHECK(model.params[model.lin_w.back()].isZero(0.0));
  CHECK(model.params[model.lin_b.back()].isZero(0.0));
  SUBCASE("logits are zero and probabilities uniform at init") {
    const M out = forward_eval(model, built.batch.x, built.batch.cat_codes);
    CHECK(out.isZero(0.0));
    const M probs = softmax_rows(out);
    CHECK((probs.array() - 0.5).abs().maxCoeff() == 0.0);
  }
  SUBCASE("hidden weights look standard normal") {
    double ss = 0.0, sum = 0.0;
    Index n = 0;
    for (std::size_t l = 0; l + 1 < model.lin_w.size(); ++l) {
      const auto& w = model.params[model.lin_w[l]];
      ss += w.array().square().sum();
      sum += w.sum();
      n += w.size();
    }
    REQUIRE(n >= 10000);
    const double mean = sum / static_cast<double>(n);
    const double var = ss / static_cast<double>(n) - mean * mean;
    CHECK(std::abs(mean) < 5.0 / std::sqrt(static_cast<double>(n)));
    CHECK(std::abs(var - 1.0) < 5.0 * std::sqrt(2.0 / static_cast<double>(n)));
  }
}

TEST_CASE("full-model gradient check at toy widths") {
  // hidden 8, 3 features, batch 5, including embeddings, scaling, alphas,
  // dropout (fixed masks) and both losses
  const Index n = 5;
  RngStream data_rng(14);
  MatrixXd x(n, 3);
  for (Index r = 0; r < n; ++r)
    for (Index c = 0; c < 3; ++c) x(r, c) = data_rng.normal();

  // he+5-style biases place each unit's kink exactly on a training point,
  // where SELU has no derivative and central differences are invalid; the
  // check therefore draws biases from N(0,1) instead.
  SUBCASE("classification graph (smoothed CE, SELU)") {
    std::vector<int> labels = {0, 1, 1, 0, 1};
    const auto ds = testutil::make_classification(x, labels, 2);
    ModelConfig cfg = preset_config("td", Task::classification);
    cfg.hidden_sizes = {8, 8, 8};
    cfg.bias_init = BiasInitKind::normal;
    auto built = build_on(ds, cfg, 15);
    const double err = testutil::model_grad_check(
        built.model, built.batch.x, built.batch.cat_codes, labels, {}, 0.15);
    CHECK(err < 1e-4);
  }

  SUBCASE("regression graph (MSE, Mish)") {
    VectorXd y(n);
    y << 0.3, -1.1, 0.7, 2.0, -0.4;
    const auto ds = testutil::make_regression(x, y);
    ModelConfig cfg = preset_config("td", Task::regression);
    cfg.hidden_sizes = {8, 8, 8};
    cfg.bias_init = BiasInitKind::normal;
    auto built = build_on(ds, cfg, 16);
    Vec<double> targets = y;
    const double err = testutil::model_grad_check(
        built.model, built.batch.x, built.batch.cat_codes, {}, targets, 0.15);
    CHECK(err < 1e-4);
  }

  SUBCASE("PL and PLR embedding variants") {
    std::vector<int> labels = {0, 1, 1, 0, 1};
    const auto ds = testutil::make_classification(x, labels, 2);
    for (auto kind : {NumEmbeddingKind::pl, NumEmbeddingKind::plr}) {
      ModelConfig cfg = preset_config("td", Task::classification);
      cfg.hidden_sizes = {8};
      cfg.num_embeddings = kind;
      cfg.bias_init = BiasInitKind::normal;
      auto built = build_on(ds, cfg, 17);
      const double err = testutil::model_grad_check(
          built.model, built.batch.x, built.batch.cat_codes, labels, {}, 0.0);
      CHECK(err < 1e-4);
    }
  }

  SUBCASE("graph with a categorical embedding table") {
    // a 9-value categorical column is routed through gather_rows
    Dataset ds = testutil::make_classification(x, {0, 1, 1, 0, 1}, 2);
    ds.schema.columns.pop_back();
    ds.schema.columns.push_back({"c", ColumnKind::categorical});
    ds.schema.columns.push_back({"y", ColumnKind::target});
    CategoricalColumn cc;
    cc.name = "c";
    cc.codes.resize(n);
    for (Index i = 0; i < n; ++i) cc.codes[i] = static_cast<int>(i + 2);
    for (int i = 0; i < 9; ++i) cc.vocab.push_back("v" + std::to_string(i));
    ds.categorical.push_back(cc);
    ModelConfig cfg = preset_config("td", Task::classification);
    cfg.hidden_sizes = {8};
    cfg.max_onehot = 2;  // force the embedding route at this cardinality
    cfg.bias_init = BiasInitKind::normal;
    auto built = build_on(ds, cfg, 18);
    REQUIRE(built.model.cat_tables.size() == 1);
    std::vector<int> labels = {0, 1, 1, 0, 1};
    const double err = testutil::model_grad_check(
        built.model, built.batch.x, built.batch.cat_codes, labels, {}, 0.15);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("plain and tape feature stacks agree") {
  // eval_features (used by the data-dependent init) must match the tape
  // forward; compare by making the network an identity read-out
  const Index n = 7;
  RngStream data_rng(31);
  MatrixXd x(n, 3);
  for (Index r = 0; r < n; ++r)
    for (Index c = 0; c < 3; ++c) x(r, c) = data_rng.normal();
  const auto ds = testutil::make_classification(
      x, std::vector<int>(static_cast<std::size_t>(n), 0), 2);
  for (auto kind : {NumEmbeddingKind::pbld, NumEmbeddingKind::pl,
                    NumEmbeddingKind::plr, NumEmbeddingKind::none}) {
    ModelConfig cfg = preset_config("td", Task::classification);
    cfg.num_embeddings = kind;
    cfg.hidden_sizes = {};
    const int width = kind == NumEmbeddingKind::none ? 3 : 3 * cfg.emb_dim;
    auto fp = fit_preprocessor(ds, testutil::iota_rows(n), cfg.max_onehot);
    RngStream rng(32, rng_purpose::init);
    auto model = build_model<double>(cfg, std::move(fp), width, rng);
    const auto batch = apply_preprocessor(model.preprocessor, ds,
                                          testutil::iota_rows(n));
    // identity read-out: W = sqrt(d) * I, b = 0
    auto& w = model.params[model.lin_w[0]];
    w = std::sqrt(static_cast<double>(model.feature_width)) *
        M::Identity(model.feature_width, model.feature_width);
    const M via_tape = forward_eval(model, batch.x, batch.cat_codes);
    const M direct = eval_features(model, batch.x, batch.cat_codes);
    CHECK((via_tape - direct).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

}  // TEST_SUITE
