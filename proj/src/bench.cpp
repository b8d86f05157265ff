#include "realmlp/bench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace realmlp {

double classification_error(const std::vector<int>& y_true,
                            const std::vector<int>& y_pred) {
  if (y_true.empty() || y_true.size() != y_pred.size())
    throw ContractError("classification_error: size mismatch");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i)
    wrong += (y_true[i] != y_pred[i]);
  return static_cast<double>(wrong) / static_cast<double>(y_true.size());
}

double nrmse(const VectorXd& y_true, const VectorXd& y_pred, double std_dev) {
  if (y_true.size() == 0 || y_true.size() != y_pred.size())
    throw ContractError("nrmse: size mismatch");
  if (!(std_dev > 0)) throw ContractError("nrmse: non-positive target std");
  const double mse = (y_true - y_pred).squaredNorm() /
                     static_cast<double>(y_true.size());
  return std::sqrt(mse) / std_dev;
}

double nrmse(const VectorXd& y_true, const VectorXd& y_pred) {
  const double mean = y_true.mean();
  const double var = (y_true.array() - mean).square().sum() /
                     static_cast<double>(y_true.size());
  return nrmse(y_true, y_pred, std::sqrt(var));
}

double binary_auroc(const VectorXd& scores, const std::vector<char>& positive) {
  const Index n = scores.size();
  if (n == 0 || static_cast<Index>(positive.size()) != n)
    throw ContractError("binary_auroc: size mismatch");
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(),
            [&](Index a, Index b) { return scores[a] < scores[b]; });
  // rank2[i] = twice the 1-based midrank, an exact integer
  std::vector<double> rank2(static_cast<std::size_t>(n));
  Index i = 0;
  while (i < n) {
    Index j = i;
    while (j + 1 < n && scores[order[static_cast<std::size_t>(j + 1)]] ==
                            scores[order[static_cast<std::size_t>(i)]])
      ++j;
    const double r2 = static_cast<double>(i + j + 2);
    for (Index k = i; k <= j; ++k)
      rank2[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = r2;
    i = j + 1;
  }
  double n1 = 0;
  double sum2 = 0;
  for (Index k = 0; k < n; ++k) {
    if (positive[static_cast<std::size_t>(k)]) {
      n1 += 1;
      sum2 += rank2[static_cast<std::size_t>(k)];
    }
  }
  const double n0 = static_cast<double>(n) - n1;
  if (n1 == 0 || n0 == 0)
    throw ContractError("binary_auroc: need both positives and negatives");
  const double u2 = sum2 - n1 * (n1 + 1);
  return u2 / (2.0 * n1 * n0);
}

double auroc_ovr(const std::vector<int>& y_true, const MatrixXd& probs) {
  const Index n = probs.rows();
  if (n == 0 || static_cast<Index>(y_true.size()) != n)
    throw ContractError("auroc_ovr: size mismatch");
  double total = 0.0;
  int used = 0;
  for (Index c = 0; c < probs.cols(); ++c) {
    std::vector<char> pos(static_cast<std::size_t>(n));
    Index npos = 0;
    for (Index r = 0; r < n; ++r) {
      pos[static_cast<std::size_t>(r)] =
          y_true[static_cast<std::size_t>(r)] == static_cast<int>(c);
      npos += pos[static_cast<std::size_t>(r)];
    }
    if (npos == 0 || npos == n) continue;
    total += binary_auroc(probs.col(c), pos);
    ++used;
  }
  if (used == 0)
    throw ContractError("auroc_ovr: no class with both positives and negatives");
  return total / used;
}

void ErrorMatrix::validate() const {
  if (errors.rows() == 0 || errors.cols() == 0)
    throw ContractError("error matrix: empty");
  if (weights.size() != errors.rows())
    throw ContractError("error matrix: weight count mismatch");
  if ((errors.array() < 0).any())
    throw ContractError("error matrix: negative error");
  if (std::abs(weights.sum() - 1.0) > 1e-9)
    throw ContractError("error matrix: weights must sum to 1");
}

ErrorMatrix make_error_matrix(MatrixXd errors) {
  const Index n = errors.rows();
  return make_error_matrix(std::move(errors),
                           VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
}

ErrorMatrix make_error_matrix(MatrixXd errors, VectorXd weights) {
  ErrorMatrix m{std::move(errors), std::move(weights)};
  m.validate();
  return m;
}

double sgm(const ErrorMatrix& em, double eps) {
  em.validate();
  double acc = 0.0;
  const double m = static_cast<double>(em.n_splits());
  for (Index i = 0; i < em.n_datasets(); ++i)
    for (Index j = 0; j < em.n_splits(); ++j)
      acc += em.weights[i] / m * std::log(em.errors(i, j) + eps);
  return std::exp(acc);
}

namespace {

void require_same_grid(const std::vector<ErrorMatrix>& methods) {
  if (methods.empty()) throw ContractError("aggregate: no methods");
  for (const auto& m : methods) {
    m.validate();
    if (m.errors.rows() != methods[0].errors.rows() ||
        m.errors.cols() != methods[0].errors.cols())
      throw ContractError("aggregate: method grids differ in shape");
  }
}

}  // namespace

std::vector<double> aggregate_alt(const std::vector<ErrorMatrix>& methods,
                                  AggregateKind kind) {
  require_same_grid(methods);
  const Index n = methods[0].n_datasets();
  const Index s = methods[0].n_splits();
  const VectorXd& w = methods[0].weights;
  const std::size_t k = methods.size();
  std::vector<double> scores(k, 0.0);

  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < s; ++j) {
      const double cell_w = w[i] / static_cast<double>(s);
      switch (kind) {
        case AggregateKind::arithmetic:
          for (std::size_t a = 0; a < k; ++a)
            scores[a] += cell_w * methods[a].errors(i, j);
          break;
        case AggregateKind::mean_rank:
          for (std::size_t a = 0; a < k; ++a) {
            double less = 0, equal = 0;
            for (std::size_t b = 0; b < k; ++b) {
              less += methods[b].errors(i, j) < methods[a].errors(i, j);
              equal += methods[b].errors(i, j) == methods[a].errors(i, j);
            }
            // average rank among ties, 1-based
            scores[a] += cell_w * (less + (equal + 1.0) / 2.0);
          }
          break;
        case AggregateKind::normalized: {
          double lo = methods[0].errors(i, j), hi = lo;
          for (std::size_t a = 1; a < k; ++a) {
            lo = std::min(lo, methods[a].errors(i, j));
            hi = std::max(hi, methods[a].errors(i, j));
          }
          if (hi > lo)
            for (std::size_t a = 0; a < k; ++a)
              scores[a] += cell_w * (methods[a].errors(i, j) - lo) / (hi - lo);
          break;
        }
      }
    }
  }
  return scores;
}

VectorXd group_weights(const std::vector<int>& group_sizes) {
  if (group_sizes.empty()) throw ContractError("group_weights: empty");
  VectorXd w(static_cast<Index>(group_sizes.size()));
  for (std::size_t i = 0; i < group_sizes.size(); ++i) {
    if (group_sizes[i] <= 0)
      throw ContractError("group_weights: non-positive group size");
    w[static_cast<Index>(i)] = 1.0 / static_cast<double>(group_sizes[i]);
  }
  return w / w.sum();
}

VectorXd group_weights_from_labels(const std::vector<std::string>& groups) {
  std::unordered_map<std::string, int> counts;
  for (const auto& g : groups) ++counts[g];
  std::vector<int> sizes;
  sizes.reserve(groups.size());
  for (const auto& g : groups) sizes.push_back(counts[g]);
  return group_weights(sizes);
}

// ---- Student-t machinery ----------------------------------------------------

namespace {

// Continued fraction for the incomplete beta function (Lentz's method).
double beta_cont_frac(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0) || !(b > 0)) throw ContractError("incomplete_beta: a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) -
                          std::lgamma(b) + a * std::log(x) +
                          b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0))
    return front * beta_cont_frac(a, b, x) / a;
  return 1.0 - std::exp(std::lgamma(a + b) - std::lgamma(a) -
                        std::lgamma(b) + b * std::log1p(-x) +
                        a * std::log(x)) *
                   beta_cont_frac(b, a, 1.0 - x) / b;
}

double student_t_quantile(double p, double dof) {
  if (!(dof > 0)) throw ContractError("student_t_quantile: dof > 0");
  if (!(p > 0.0 && p < 1.0))
    throw ContractError("student_t_quantile: p in (0, 1)");
  if (p == 0.5) return 0.0;
  if (p < 0.5) return -student_t_quantile(1.0 - p, dof);
  // For t >= 0: P(T <= t) = 1 - I_x(dof/2, 1/2) / 2 with x = dof/(dof+t^2);
  // invert by bisection on x (monotone decreasing in t).
  const double target = 2.0 * (1.0 - p);
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (incomplete_beta(dof / 2.0, 0.5, mid) < target)
      lo = mid;
    else
      hi = mid;
  }
  const double x = 0.5 * (lo + hi);
  return std::sqrt(dof * (1.0 - x) / std::max(x, 1e-300));
}

CIResult ci_mean_t(const std::vector<double>& z, double level) {
  const auto m = z.size();
  if (m < 2) throw ContractError("ci_mean_t: need at least 2 values");
  const double mean =
      std::accumulate(z.begin(), z.end(), 0.0) / static_cast<double>(m);
  double ss = 0.0;
  for (double v : z) ss += (v - mean) * (v - mean);
  const double stderr_mean =
      std::sqrt(ss / static_cast<double>(m - 1) / static_cast<double>(m));
  const double tq =
      student_t_quantile(0.5 + level / 2.0, static_cast<double>(m - 1));
  return {mean, mean - tq * stderr_mean, mean + tq * stderr_mean, level};
}

namespace {

std::vector<double> split_aggregates(const ErrorMatrix& em, double eps) {
  em.validate();
  std::vector<double> z(static_cast<std::size_t>(em.n_splits()), 0.0);
  for (Index j = 0; j < em.n_splits(); ++j)
    for (Index i = 0; i < em.n_datasets(); ++i)
      z[static_cast<std::size_t>(j)] +=
          em.weights[i] * std::log(em.errors(i, j) + eps);
  return z;
}

}  // namespace

CIResult ci_sgm(const ErrorMatrix& errors, double eps, double level) {
  if (errors.n_splits() < 2)
    throw ContractError("ci_sgm: need at least 2 splits");
  const CIResult log_ci = ci_mean_t(split_aggregates(errors, eps), level);
  return {std::exp(log_ci.point), std::exp(log_ci.lower),
          std::exp(log_ci.upper), level};
}

CIResult ci_ratio(const ErrorMatrix& a, const ErrorMatrix& b, double eps,
                  double level) {
  a.validate();
  b.validate();
  if (a.errors.rows() != b.errors.rows() || a.errors.cols() != b.errors.cols())
    throw ContractError("ci_ratio: shape mismatch");
  if (a.n_splits() < 2) throw ContractError("ci_ratio: need at least 2 splits");
  const auto za = split_aggregates(a, eps);
  const auto zb = split_aggregates(b, eps);
  std::vector<double> diff(za.size());
  for (std::size_t j = 0; j < za.size(); ++j) diff[j] = za[j] - zb[j];
  const CIResult log_ci = ci_mean_t(diff, level);
  const auto pct = [](double r) { return 100.0 * (std::exp(r) - 1.0); };
  return {pct(log_ci.point), pct(log_ci.lower), pct(log_ci.upper), level};
}

MatrixXd winrate_matrix(const std::vector<ErrorMatrix>& methods) {
  require_same_grid(methods);
  const auto k = static_cast<Index>(methods.size());
  const Index n = methods[0].n_datasets();
  const Index s = methods[0].n_splits();
  const VectorXd& w = methods[0].weights;
  MatrixXd rates = MatrixXd::Zero(k, k);
  for (Index a = 0; a < k; ++a) {
    for (Index b = 0; b < k; ++b) {
      double rate = 0.0;
      for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < s; ++j) {
          const double ea = methods[static_cast<std::size_t>(a)].errors(i, j);
          const double eb = methods[static_cast<std::size_t>(b)].errors(i, j);
          const double win = ea < eb ? 1.0 : (ea == eb ? 0.5 : 0.0);
          rate += w[i] / static_cast<double>(s) * win;
        }
      }
      rates(a, b) = 100.0 * rate;
    }
  }
  return rates;
}

// ---- benchmark files ---------------------------------------------------------

namespace {

std::vector<std::vector<std::string>> read_csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.push_back("");
    rows.push_back(std::move(cells));
  }
  return rows;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContractError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

BenchTable parse_bench_table(const std::string& errors_csv,
                             const std::string& groups_csv) {
  const auto rows = read_csv_rows(errors_csv);
  if (rows.size() < 2 || rows[0].size() != 4 || rows[0][0] != "method")
    throw ContractError(
        "errors file: expected header 'method,dataset,split,error'");

  std::vector<std::string> methods, datasets;
  std::unordered_map<std::string, Index> method_of, dataset_of;
  std::map<long, Index> split_of;
  struct Cell {
    Index method, dataset, split;
    double error;
  };
  std::vector<Cell> cells;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != 4)
      throw ContractError("errors file: malformed line " + std::to_string(r + 1));
    const auto& m = rows[r][0];
    const auto& d = rows[r][1];
    if (!method_of.contains(m)) {
      method_of[m] = static_cast<Index>(methods.size());
      methods.push_back(m);
    }
    if (!dataset_of.contains(d)) {
      dataset_of[d] = static_cast<Index>(datasets.size());
      datasets.push_back(d);
    }
    const long split_key = std::stol(rows[r][2]);
    if (!split_of.contains(split_key)) split_of[split_key] = 0;
    const double err = std::stod(rows[r][3]);
    if (err < 0) throw ContractError("errors file: negative error");
    cells.push_back({method_of[m], dataset_of[d], split_key, err});
  }
  Index next = 0;
  for (auto& [key, idx] : split_of) idx = next++;

  BenchTable table;
  table.methods = methods;
  table.datasets = datasets;
  table.n_splits = next;

  VectorXd weights;
  if (!groups_csv.empty()) {
    const auto grows = read_csv_rows(groups_csv);
    if (grows.empty() || grows[0].size() != 2 || grows[0][0] != "dataset")
      throw ContractError("groups file: expected header 'dataset,group'");
    std::unordered_map<std::string, std::string> group_of;
    for (std::size_t r = 1; r < grows.size(); ++r) {
      if (grows[r].size() != 2)
        throw ContractError("groups file: malformed line " +
                            std::to_string(r + 1));
      group_of[grows[r][0]] = grows[r][1];
    }
    std::vector<std::string> labels;
    for (const auto& d : datasets) {
      auto it = group_of.find(d);
      if (it == group_of.end())
        throw ContractError("groups file: no group for dataset '" + d + "'");
      labels.push_back(it->second);
    }
    weights = group_weights_from_labels(labels);
  } else {
    weights = VectorXd::Constant(static_cast<Index>(datasets.size()),
                                 1.0 / static_cast<double>(datasets.size()));
  }

  const auto nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t m = 0; m < methods.size(); ++m)
    table.per_method.push_back(
        {MatrixXd::Constant(static_cast<Index>(datasets.size()), next, nan),
         weights});
  for (const auto& c : cells) {
    auto& dst = table.per_method[static_cast<std::size_t>(c.method)].errors(
        c.dataset, split_of[c.split]);
    if (!std::isnan(dst))
      throw ContractError("errors file: duplicate (method, dataset, split) cell");
    dst = c.error;
  }
  for (const auto& em : table.per_method)
    if (em.errors.hasNaN())
      throw ContractError("errors file: incomplete (method, dataset, split) grid");
  return table;
}

BenchTable load_bench_table(const std::string& errors_csv_path,
                            const std::string& groups_csv_path) {
  return parse_bench_table(
      slurp(errors_csv_path),
      groups_csv_path.empty() ? std::string() : slurp(groups_csv_path));
}

}  // namespace realmlp
