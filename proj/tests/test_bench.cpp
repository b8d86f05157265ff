#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "realmlp/bench.hpp"
#include "realmlp/rng.hpp"

using namespace realmlp;

namespace {

ErrorMatrix random_errors(RngStream& rng, Index n, Index s) {
  MatrixXd e(n, s);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < s; ++j) e(i, j) = rng.uniform(0.0, 1.0);
  return make_error_matrix(std::move(e));
}

}  // namespace

TEST_SUITE("bench") {

TEST_CASE("classification error") {
  CHECK(classification_error({1, 0, 1}, {1, 0, 1}) == 0.0);
  CHECK(classification_error({1, 0, 1}, {0, 1, 0}) == 1.0);
  CHECK(classification_error({1, 0, 1, 1}, {1, 0, 1, 0}) == 0.25);
}

TEST_CASE("nrmse") {
  VectorXd y(3), zero(3), mean(3);
  y << 0, 1, 2;
  zero.setZero();
  mean.setConstant(1.0);
  CHECK(nrmse(y, y) == 0.0);
  CHECK(nrmse(y, mean) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(nrmse(y, zero) ==
        doctest::Approx(1.5811388300841895).epsilon(1e-14));  // sqrt(5/2)
  VectorXd flat = VectorXd::Ones(3);
  CHECK_THROWS_AS(nrmse(flat, zero), ContractError);
  // whole-dataset-std switch
  CHECK(nrmse(y, zero, 2.0) ==
        doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0).epsilon(1e-14));
}

TEST_CASE("binary auroc") {
  VectorXd s(4);
  s << 0.9, 0.8, 0.2, 0.1;
  CHECK(binary_auroc(s, {1, 1, 0, 0}) == 1.0);
  CHECK(binary_auroc(s, {0, 0, 1, 1}) == 0.0);
  VectorXd tied = VectorXd::Constant(6, 0.5);
  CHECK(binary_auroc(tied, {1, 0, 1, 0, 1, 0}) == 0.5);
}

TEST_CASE("auroc equals the pairwise oracle exactly, including ties") {
  RngStream rng(55);
  for (int rep = 0; rep < 100; ++rep) {
    const Index n = 2 + static_cast<Index>(rng.uniform_int(0, 198));
    VectorXd scores(n);
    std::vector<char> pos(static_cast<std::size_t>(n));
    bool has_pos = false, has_neg = false;
    for (Index i = 0; i < n; ++i) {
      // coarse grid scores force plenty of ties
      scores[i] = std::round(rng.uniform(0.0, 8.0)) / 8.0;
      pos[static_cast<std::size_t>(i)] = rng.bernoulli(0.4);
      has_pos = has_pos || pos[static_cast<std::size_t>(i)];
      has_neg = has_neg || !pos[static_cast<std::size_t>(i)];
    }
    if (!has_pos) pos[0] = 1;
    if (!has_neg) pos[static_cast<std::size_t>(n - 1)] = 0;
    std::vector<double> sv(scores.data(), scores.data() + n);
    CHECK(binary_auroc(scores, pos) == oracle::pairwise_auroc(sv, pos));
  }
}

TEST_CASE("macro one-vs-rest auroc") {
  MatrixXd probs(4, 3);
  probs << 0.8, 0.1, 0.1,
           0.1, 0.8, 0.1,
           0.1, 0.1, 0.8,
           0.6, 0.3, 0.1;
  CHECK(auroc_ovr({0, 1, 2, 0}, probs) == 1.0);
  MatrixXd flat = MatrixXd::Constant(4, 2, 0.5);
  CHECK(auroc_ovr({0, 1, 0, 1}, flat) == 0.5);
}

TEST_CASE("sgm worked examples") {
  SUBCASE("single entry") {
    MatrixXd e(1, 1);
    e << 0.1;
    CHECK(sgm(make_error_matrix(e), 0.01) ==
          doctest::Approx(0.11).epsilon(1e-14));
  }
  SUBCASE("two datasets, one split") {
    MatrixXd e(2, 1);
    e << 0.01, 0.04;
    CHECK(sgm(make_error_matrix(e), 0.01) ==
          doctest::Approx(0.03162277660168379).epsilon(1e-12));
  }
  SUBCASE("constant matrix gives e + eps") {
    MatrixXd e = MatrixXd::Constant(7, 4, 0.37);
    CHECK(sgm(make_error_matrix(e), 0.01) ==
          doctest::Approx(0.38).epsilon(1e-14));
  }
}

TEST_CASE("sgm equals the brute-force recomputation on random matrices") {
  RngStream rng(77);
  for (int rep = 0; rep < 50; ++rep) {
    const Index n = 1 + static_cast<Index>(rng.uniform_int(0, 12));
    const Index s = 1 + static_cast<Index>(rng.uniform_int(0, 8));
    MatrixXd e(n, s);
    VectorXd w(n);
    for (Index i = 0; i < n; ++i) {
      w[i] = rng.uniform(0.1, 2.0);
      for (Index j = 0; j < s; ++j) e(i, j) = rng.uniform(0.0, 2.0);
    }
    w /= w.sum();
    const auto em = make_error_matrix(e, w);
    std::vector<std::vector<double>> rows;
    std::vector<double> weights;
    for (Index i = 0; i < n; ++i) {
      rows.emplace_back(e.row(i).data(), e.row(i).data() + 0);
      rows.back().assign(s, 0.0);
      for (Index j = 0; j < s; ++j) rows.back()[static_cast<std::size_t>(j)] = e(i, j);
      weights.push_back(w[i]);
    }
    CHECK(sgm(em, 0.01) ==
          doctest::Approx(oracle::sgm_naive(rows, weights, 0.01)).epsilon(1e-12));
  }
}

TEST_CASE("sgm is invariant to dataset and split reordering") {
  RngStream rng(78);
  ErrorMatrix em = random_errors(rng, 6, 5);
  const double base = sgm(em, 0.01);
  MatrixXd shuffled = em.errors;
  shuffled.row(0).swap(shuffled.row(4));
  shuffled.col(1).swap(shuffled.col(3));
  VectorXd w = em.weights;
  std::swap(w[0], w[4]);
  CHECK(sgm(make_error_matrix(shuffled, w), 0.01) ==
        doctest::Approx(base).epsilon(1e-14));
}

TEST_CASE("group weights") {
  CHECK(group_weights({1, 1, 1}).isApprox(VectorXd::Constant(3, 1.0 / 3.0)));
  const VectorXd w = group_weights({2, 2, 1});
  CHECK(w[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(w[1] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(w[2] == doctest::Approx(0.5).epsilon(1e-15));
  RngStream rng(9);
  std::vector<std::string> labels;
  for (int i = 0; i < 17; ++i)
    labels.push_back("g" + std::to_string(rng.uniform_int(0, 4)));
  CHECK(group_weights_from_labels(labels).sum() ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("alternative aggregations") {
  MatrixXd a(2, 2), b(2, 2), c(2, 2);
  a << 0.1, 0.2, 0.3, 0.4;
  b << 0.2, 0.3, 0.4, 0.5;  // always worse than a
  c = b;
  SUBCASE("dominant method ranks 1 everywhere") {
    const auto ranks = aggregate_alt(
        {make_error_matrix(a), make_error_matrix(b)}, AggregateKind::mean_rank);
    CHECK(ranks[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ranks[1] == doctest::Approx(2.0).epsilon(1e-12));
  }
  SUBCASE("normalized maps best to 0 and worst to 1") {
    const auto norm = aggregate_alt(
        {make_error_matrix(a), make_error_matrix(b)}, AggregateKind::normalized);
    CHECK(norm[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(norm[1] == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("three-way tie gets the average rank 2") {
    const auto ranks = aggregate_alt(
        {make_error_matrix(b), make_error_matrix(b), make_error_matrix(c)},
        AggregateKind::mean_rank);
    CHECK(ranks[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(ranks[1] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(ranks[2] == doctest::Approx(2.0).epsilon(1e-12));
  }
  SUBCASE("all-equal cells contribute 0 to the normalized score") {
    const auto norm = aggregate_alt(
        {make_error_matrix(b), make_error_matrix(c)}, AggregateKind::normalized);
    CHECK(norm[0] == 0.0);
    CHECK(norm[1] == 0.0);
  }
  SUBCASE("arithmetic mean") {
    const auto arith =
        aggregate_alt({make_error_matrix(a)}, AggregateKind::arithmetic);
    CHECK(arith[0] == doctest::Approx(0.25).epsilon(1e-12));
  }
}

TEST_CASE("rank improves when an error drops below a competitor") {
  RngStream rng(12);
  for (int rep = 0; rep < 20; ++rep) {
    MatrixXd m0(3, 2), m1(3, 2), m2(3, 2);
    for (auto* m : {&m0, &m1, &m2})
      for (Index i = 0; i < 3; ++i)
        for (Index j = 0; j < 2; ++j)
          (*m)(i, j) = 0.1 + std::round(rng.uniform(0.0, 9.0)) / 10.0;
    auto base = aggregate_alt({make_error_matrix(m0), make_error_matrix(m1),
                               make_error_matrix(m2)},
                              AggregateKind::mean_rank);
    // drop method 0's first error strictly below every competitor
    MatrixXd better = m0;
    better(0, 0) = std::min(m1(0, 0), m2(0, 0)) - 0.05;
    if (better(0, 0) >= m0(0, 0)) continue;  // was already best
    auto after = aggregate_alt({make_error_matrix(better),
                                make_error_matrix(m1), make_error_matrix(m2)},
                               AggregateKind::mean_rank);
    CHECK(after[0] < base[0]);  // strictly better rank
  }
}

TEST_CASE("student-t quantiles match reference values to 1e-4") {
  CHECK(std::abs(student_t_quantile(0.975, 9) - 2.2621571628540993) < 1e-8);
  CHECK(std::abs(student_t_quantile(0.995, 4) - 4.604094871415897) < 1e-8);
  CHECK(std::abs(student_t_quantile(0.975, 1) - 12.706204736432095) < 1e-6);
  CHECK(std::abs(student_t_quantile(0.975, 29) - 2.045229642132703) < 1e-8);
  CHECK(std::abs(student_t_quantile(0.9, 2) - 1.8856180831641507) < 1e-8);
  CHECK(std::abs(student_t_quantile(0.6, 7) - 0.2631668613520166) < 1e-8);
  CHECK(student_t_quantile(0.5, 5) == 0.0);
  CHECK(student_t_quantile(0.025, 9) ==
        doctest::Approx(-student_t_quantile(0.975, 9)).epsilon(1e-12));
}

TEST_CASE("ci_sgm") {
  SUBCASE("identical splits give a zero-width interval at the SGM") {
    MatrixXd e(3, 4);
    for (Index j = 0; j < 4; ++j) e.col(j) << 0.1, 0.2, 0.3;
    const auto em = make_error_matrix(e);
    const auto ci = ci_sgm(em, 0.01);
    CHECK(ci.point == doctest::Approx(sgm(em, 0.01)).epsilon(1e-14));
    CHECK(ci.lower == doctest::Approx(ci.point).epsilon(1e-12));
    CHECK(ci.upper == doctest::Approx(ci.point).epsilon(1e-12));
  }
  SUBCASE("interval brackets the point estimate") {
    RngStream rng(13);
    for (int rep = 0; rep < 20; ++rep) {
      const auto em = random_errors(rng, 5, 6);
      const auto ci = ci_sgm(em, 0.01);
      CHECK(ci.lower <= ci.point);
      CHECK(ci.point <= ci.upper);
      CHECK(ci.point == doctest::Approx(sgm(em, 0.01)).epsilon(1e-12));
    }
  }
  SUBCASE("matches the t-formula on synthetic normal Z") {
    // m = 10 one-dataset splits: Z_j = log(err_j + eps)
    RngStream rng(14);
    MatrixXd e(1, 10);
    for (Index j = 0; j < 10; ++j) e(0, j) = std::exp(rng.normal()) - 0.01;
    for (Index j = 0; j < 10; ++j) e(0, j) = std::max(e(0, j), 0.0);
    const auto em = make_error_matrix(e);
    std::vector<double> z;
    for (Index j = 0; j < 10; ++j) z.push_back(std::log(e(0, j) + 0.01));
    double mean = 0;
    for (double v : z) mean += v;
    mean /= 10.0;
    double ss = 0;
    for (double v : z) ss += (v - mean) * (v - mean);
    const double half = 2.2621571628540993 * std::sqrt(ss / 9.0 / 10.0);
    const auto ci = ci_sgm(em, 0.01);
    CHECK(ci.lower == doctest::Approx(std::exp(mean - half)).epsilon(1e-4));
    CHECK(ci.upper == doctest::Approx(std::exp(mean + half)).epsilon(1e-4));
  }
}

TEST_CASE("ci_mean_t coverage is close to nominal") {
  // 4000 trials of m = 10 standard normals; the true mean 0 should fall
  // inside the 95% interval about 95% of the time
  RngStream rng(15);
  int covered = 0;
  const int trials = 4000;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> z(10);
    for (auto& v : z) v = rng.normal();
    const auto ci = ci_mean_t(z, 0.95);
    covered += (ci.lower <= 0.0 && 0.0 <= ci.upper);
  }
  const double rate = static_cast<double>(covered) / trials;
  CHECK(rate > 0.93);
  CHECK(rate < 0.97);
}

TEST_CASE("ci_ratio") {
  RngStream rng(16);
  const auto a = random_errors(rng, 4, 5);
  SUBCASE("identical methods give point 0 with zero width") {
    const auto ci = ci_ratio(a, a, 0.01);
    CHECK(ci.point == 0.0);
    CHECK(ci.lower == 0.0);
    CHECK(ci.upper == 0.0);
  }
  SUBCASE("constant log-space shift is recovered exactly") {
    ErrorMatrix b = a;
    // errB = (errA + eps) * c - eps  =>  log(errB + eps) = log(errA + eps) + log c
    const double c = 1.17;
    b.errors = ((a.errors.array() + 0.01) * c - 0.01).matrix();
    const auto ci = ci_ratio(b, a, 0.01);
    CHECK(ci.point == doctest::Approx(100.0 * (c - 1.0)).epsilon(1e-10));
    CHECK(ci.upper - ci.lower < 1e-9);  // constant shift has no variance
  }
  SUBCASE("antisymmetry of the point estimate") {
    auto b = random_errors(rng, 4, 5);
    const auto ab = ci_ratio(a, b, 0.01);
    const auto ba = ci_ratio(b, a, 0.01);
    const double r = ab.point;
    CHECK(ba.point ==
          doctest::Approx(100.0 * (1.0 / (1.0 + r / 100.0) - 1.0))
              .epsilon(1e-9));
  }
}

TEST_CASE("winrate matrix") {
  MatrixXd a(2, 2), b(2, 2);
  a << 0.1, 0.2, 0.3, 0.4;
  b << 0.2, 0.3, 0.4, 0.5;
  SUBCASE("dominant method wins 100% / 0%") {
    const auto w = winrate_matrix({make_error_matrix(a), make_error_matrix(b)});
    CHECK(w(0, 1) == 100.0);
    CHECK(w(1, 0) == 0.0);
  }
  SUBCASE("identical methods and the diagonal are 50%") {
    const auto w = winrate_matrix({make_error_matrix(a), make_error_matrix(a)});
    CHECK(w(0, 1) == 50.0);
    CHECK(w(1, 0) == 50.0);
    CHECK(w(0, 0) == 50.0);
    CHECK(w(1, 1) == 50.0);
  }
  SUBCASE("entries are complementary") {
    RngStream rng(18);
    const auto ea = random_errors(rng, 5, 3);
    ErrorMatrix eb = ea;
    eb.errors = random_errors(rng, 5, 3).errors;
    const auto w = winrate_matrix({ea, eb});
    CHECK(w(0, 1) + w(1, 0) == doctest::Approx(100.0).epsilon(1e-12));
  }
}

TEST_CASE("error matrix validation") {
  MatrixXd e(2, 2);
  e << 0.1, 0.2, 0.3, 0.4;
  VectorXd bad_w(2);
  bad_w << 0.5, 0.6;  // sums to 1.1
  CHECK_THROWS_AS(make_error_matrix(e, bad_w), ContractError);
  MatrixXd neg = e;
  neg(0, 0) = -0.1;
  CHECK_THROWS_AS(make_error_matrix(neg), ContractError);
}

TEST_CASE("bench table parsing") {
  const std::string errors =
      "method,dataset,split,error\n"
      "mlp,d1,0,0.01\n"
      "mlp,d2,0,0.04\n"
      "gbdt,d1,0,0.02\n"
      "gbdt,d2,0,0.03\n";
  const auto table = parse_bench_table(errors);
  REQUIRE(table.methods == std::vector<std::string>{"mlp", "gbdt"});
  CHECK(table.n_splits == 1);
  CHECK(sgm(table.per_method[0], 0.01) ==
        doctest::Approx(0.03162277660168379).epsilon(1e-12));

  SUBCASE("group weighting") {
    const std::string groups = "dataset,group\nd1,g1\nd2,g1\n";
    const auto weighted = parse_bench_table(errors, groups);
    CHECK(weighted.per_method[0].weights[0] ==
          doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("incomplete grids are rejected") {
    CHECK_THROWS_AS(
        parse_bench_table("method,dataset,split,error\nmlp,d1,0,0.1\n"
                          "mlp,d2,1,0.2\n"),
        ContractError);
  }
  SUBCASE("duplicate cells are rejected") {
    CHECK_THROWS_AS(
        parse_bench_table("method,dataset,split,error\nmlp,d1,0,0.1\n"
                          "mlp,d1,0,0.2\n"),
        ContractError);
  }
}

}  // TEST_SUITE
