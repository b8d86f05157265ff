#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "realmlp/ensemble.hpp"
#include "testutil.hpp"

using namespace realmlp;
using namespace realmlp::ensemble;

TEST_SUITE("ensemble") {

TEST_CASE("folds: n = 103 gives five folds of 20 with 3 rows unassigned") {
  IndexList pool(103);
  for (Index i = 0; i < 103; ++i) pool[static_cast<std::size_t>(i)] = i;
  const auto plan = make_folds(pool, 5, 7, /*stratify=*/false);
  REQUIRE(plan.folds.size() == 5);
  for (const auto& f : plan.folds) CHECK(f.size() == 20);
  CHECK(plan.unassigned.size() == 3);
  // folds plus unassigned partition the pool
  std::set<Index> seen;
  for (const auto& f : plan.folds)
    for (Index i : f) CHECK(seen.insert(i).second);
  for (Index i : plan.unassigned) CHECK(seen.insert(i).second);
  CHECK(seen.size() == 103);
}

TEST_CASE("stratified folds balance classes within one row") {
  VectorXi labels(100);
  IndexList pool(100);
  for (Index i = 0; i < 100; ++i) {
    pool[static_cast<std::size_t>(i)] = i;
    labels[i] = static_cast<int>(i % 2);  // 50/50 binary
  }
  const auto plan = make_folds(pool, 5, 3, true, &labels);
  for (const auto& f : plan.folds) {
    CHECK(f.size() == 20);
    int pos = 0;
    for (Index i : f) pos += labels[i];
    CHECK(std::abs(pos - 10) <= 1);
  }

  SUBCASE("per-class counts stay within +-1 across folds, 3 classes") {
    VectorXi l3(94);
    IndexList p3(94);
    for (Index i = 0; i < 94; ++i) {
      p3[static_cast<std::size_t>(i)] = i;
      l3[i] = static_cast<int>(i % 3);
    }
    const auto plan3 = make_folds(p3, 5, 11, true, &l3);
    for (int c = 0; c < 3; ++c) {
      int lo = 1 << 20, hi = -1;
      for (const auto& f : plan3.folds) {
        int count = 0;
        for (Index i : f) count += (l3[i] == c);
        lo = std::min(lo, count);
        hi = std::max(hi, count);
      }
      CHECK(hi - lo <= 1);
    }
  }
}

TEST_CASE("folds are deterministic given the seed") {
  IndexList pool(50);
  for (Index i = 0; i < 50; ++i) pool[static_cast<std::size_t>(i)] = i;
  const auto a = make_folds(pool, 5, 9, false);
  const auto b = make_folds(pool, 5, 9, false);
  for (std::size_t f = 0; f < 5; ++f) CHECK(a.folds[f] == b.folds[f]);
  const auto c = make_folds(pool, 5, 10, false);
  CHECK(a.folds[0] != c.folds[0]);
}

TEST_CASE("epoch selection") {
  SUBCASE("individual uses the last of the tied best epochs") {
    CHECK(select_epoch_individual({0.5, 0.2, 0.2, 0.3}) == 2);
    CHECK(select_epoch_individual({3, 1, 2}) == 1);
    CHECK(select_epoch_individual({1}) == 0);
  }
  SUBCASE("joint stopping minimizes the summed curves") {
    CHECK(select_epoch_joint({{3, 1, 2}, {2, 3, 1}}) == 2);  // sums 5,4,3
  }
  SUBCASE("identical curves make joint equal individual") {
    const std::vector<double> curve{0.9, 0.4, 0.6, 0.4};
    CHECK(select_epoch_joint({curve, curve, curve}) ==
          select_epoch_individual(curve));
  }
  SUBCASE("a single fold makes joint equal individual") {
    const std::vector<double> curve{0.7, 0.3, 0.5};
    CHECK(select_epoch_joint({curve}) == select_epoch_individual(curve));
  }
  SUBCASE("curves of unequal length are truncated to the shortest") {
    CHECK(select_epoch_joint({{5, 1, 0, 0}, {5, 1}}) == 1);
  }
}

TEST_CASE("prediction averaging") {
  MatrixXd a(1, 2), b(1, 2);
  a << 1, 0;
  b << 0, 1;
  SUBCASE("single member") {
    CHECK(average_predictions({a}) == a);
  }
  SUBCASE("identical members") {
    CHECK(average_predictions({a, a, a, a, a}) == a);
  }
  SUBCASE("two opposite probability vectors average to one half") {
    const MatrixXd avg = average_predictions({a, b});
    CHECK(avg(0, 0) == 0.5);
    CHECK(avg(0, 1) == 0.5);
  }
  SUBCASE("member order does not matter") {
    MatrixXd c(1, 2);
    c << 0.25, 0.75;
    const MatrixXd p = average_predictions({a, b, c});
    const MatrixXd q = average_predictions({c, a, b});
    CHECK((p - q).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("greedy selection") {
  // candidates predict on a 4-row validation set with binary labels 0,1,0,1
  const std::vector<int> labels{0, 1, 0, 1};
  auto error_of = [&](const MatrixXd& probs) {
    int wrong = 0;
    for (Index r = 0; r < probs.rows(); ++r) {
      Index best = 0;
      probs.row(r).maxCoeff(&best);
      wrong += (static_cast<int>(best) != labels[static_cast<std::size_t>(r)]);
    }
    return static_cast<double>(wrong) / static_cast<double>(probs.rows());
  };
  MatrixXd perfect(4, 2), bad(4, 2), half(4, 2);
  perfect << 0.9, 0.1, 0.1, 0.9, 0.8, 0.2, 0.2, 0.8;
  bad << 0.1, 0.9, 0.9, 0.1, 0.2, 0.8, 0.8, 0.2;
  half << 0.9, 0.1, 0.9, 0.1, 0.8, 0.2, 0.2, 0.8;

  SUBCASE("a single candidate gets weight 1") {
    const auto r = greedy_selection({half}, error_of, 40);
    CHECK(r.weights == std::vector<double>{1.0});
  }
  SUBCASE("a dominating candidate is re-picked every step") {
    const auto r = greedy_selection({bad, perfect, half}, error_of, 40);
    CHECK(r.weights[1] == doctest::Approx(1.0));
    CHECK(r.val_error == 0.0);
  }
  SUBCASE("ensemble validation error never exceeds the best single") {
    double best_single = 1e9;
    for (const auto& c : {bad, perfect, half})
      best_single = std::min(best_single, error_of(c));
    const auto r = greedy_selection({bad, half}, error_of, 40);
    double best_pair = std::min(error_of(bad), error_of(half));
    CHECK(r.val_error <= best_pair);
    // weights are a distribution
    double sum = 0;
    for (double w : r.weights) {
      CHECK(w >= 0.0);
      sum += w;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

namespace {

ModelConfig quick_config(Task task, int epochs = 5) {
  ModelConfig cfg = preset_config("td-s", task);
  cfg.hidden_sizes = {16};
  cfg.epochs = epochs;
  cfg.batch_size = 32;
  return cfg;
}

}  // namespace

TEST_CASE("bagged members never see their own validation fold") {
  const auto ds = testutil::separable_blobs(80, 51);
  IndexList pool = testutil::iota_rows(ds.n_rows);
  const auto cfg = quick_config(Task::classification);
  EnsembleConfig spec;
  spec.members = 5;
  spec.refitting = false;
  spec.joint_stopping = false;
  const auto ens = run_ensemble(ds, pool, cfg, spec, 4);
  REQUIRE(ens.models.size() == 5);
  REQUIRE(ens.fold_curves.size() == 5);
  // disjointness is structural: fold i is held out of member i's training
  // rows, which are the other folds plus the unassigned surplus
  std::set<Index> all_fold_rows;
  for (const auto& f : ens.folds.folds)
    for (Index i : f) all_fold_rows.insert(i);
  for (std::size_t i = 0; i < 5; ++i) {
    std::set<Index> fold(ens.folds.folds[i].begin(), ens.folds.folds[i].end());
    for (Index u : ens.folds.unassigned) CHECK_FALSE(fold.contains(u));
  }
}

TEST_CASE("joint stopping pins every member to the shared epoch") {
  const auto ds = testutil::separable_blobs(70, 52);
  IndexList pool = testutil::iota_rows(ds.n_rows);
  const auto cfg = quick_config(Task::classification, 4);
  EnsembleConfig spec;
  spec.members = 5;
  spec.joint_stopping = true;
  const auto ens = run_ensemble(ds, pool, cfg, spec, 6);
  const int shared = select_epoch_joint(ens.fold_curves);
  for (int t : ens.chosen_epochs) CHECK(t == shared);
}

TEST_CASE("refitting trains on the full pool with epochs from bagged curves") {
  const auto ds = testutil::smooth_regression(70, 53);
  IndexList pool = testutil::iota_rows(ds.n_rows);
  const auto cfg = quick_config(Task::regression, 4);
  EnsembleConfig spec;
  spec.members = 1;
  spec.refitting = true;
  spec.joint_stopping = false;
  const auto ens = run_ensemble(ds, pool, cfg, spec, 8);
  REQUIRE(ens.models.size() == 1);
  CHECK(ens.chosen_epochs[0] ==
        select_epoch_individual(ens.fold_curves[0]));
  // the refit model was trained on everything: its standardizer covers the
  // full pool
  VectorXd y = ds.real_targets;
  IndexList rows = pool;
  const auto st = fit_target_standardizer(y, rows);
  CHECK(ens.models[0].standardizer.mean ==
        doctest::Approx(st.mean).epsilon(1e-12));
}

TEST_CASE("M = 1 bagging equals the first bagged member's prediction") {
  const auto ds = testutil::separable_blobs(60, 54);
  IndexList pool = testutil::iota_rows(ds.n_rows);
  const auto cfg = quick_config(Task::classification, 3);
  EnsembleConfig spec;
  spec.members = 1;
  const auto ens = run_ensemble(ds, pool, cfg, spec, 12);
  REQUIRE(ens.models.size() == 1);
  const IndexList probe = {0, 1, 2, 3, 4};
  const MatrixXd direct = predict_proba(ens.models[0], ds, probe);
  const MatrixXd averaged = predict_ensemble_proba(ens, ds, probe);
  CHECK((direct - averaged).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("ensembles are deterministic given the seed") {
  const auto ds = testutil::separable_blobs(60, 55);
  IndexList pool = testutil::iota_rows(ds.n_rows);
  const auto cfg = quick_config(Task::classification, 3);
  EnsembleConfig spec;
  spec.members = 5;
  spec.joint_stopping = true;
  const auto a = run_ensemble(ds, pool, cfg, spec, 31, /*jobs=*/1);
  const auto b = run_ensemble(ds, pool, cfg, spec, 31, /*jobs=*/2);
  CHECK(a.chosen_epochs == b.chosen_epochs);
  const IndexList probe = {0, 1, 2};
  CHECK((predict_ensemble_proba(a, ds, probe) -
         predict_ensemble_proba(b, ds, probe))
            .cwiseAbs()
            .maxCoeff() == 0.0);
}

}  // TEST_SUITE
