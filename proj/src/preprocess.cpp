#include "realmlp/preprocess.hpp"

#include <algorithm>
#include <set>

namespace realmlp {

double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw ContractError("quantile of empty column");
  const auto n = sorted.size();
  if (n == 1) return sorted[0];
  const double pos = p * static_cast<double>(n - 1);
  const auto lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= n) return sorted[n - 1];
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

FittedColumnScaler fit_column_scaler(std::vector<double> values) {
  if (values.empty()) throw ContractError("fit_column_scaler: empty column");
  std::sort(values.begin(), values.end());
  FittedColumnScaler f;
  f.q0 = values.front();
  f.q1 = values.back();
  f.q1_4 = quantile_sorted(values, 0.25);
  f.q1_2 = quantile_sorted(values, 0.5);
  f.q3_4 = quantile_sorted(values, 0.75);
  if (f.q3_4 != f.q1_4)
    f.s = 1.0 / (f.q3_4 - f.q1_4);
  else if (f.q1 != f.q0)
    f.s = 2.0 / (f.q1 - f.q0);
  else
    f.s = 0.0;
  return f;
}

double transform_column(const FittedColumnScaler& scaler, double x) {
  if (std::isnan(x))
    x = scaler.q1_2;
  else if (std::isinf(x))
    x = x > 0 ? scaler.q1 : scaler.q0;
  return smooth_clip(scaler.s * (x - scaler.q1_2));
}

int CatPlanEntry::dense_index(int code) const {
  auto it = std::lower_bound(train_codes.begin(), train_codes.end(), code);
  if (it == train_codes.end() || *it != code) return 0;
  return static_cast<int>(it - train_codes.begin()) + 1;
}

namespace {

Index plan_width(const CatPlanEntry& plan) {
  switch (plan.route) {
    case CatRoute::binary:
      return 1;
    case CatRoute::onehot:
      return plan.train_cardinality();
    case CatRoute::embed:
      return 0;
  }
  return 0;
}

// Raw (pre-scaling) row encoding: numeric values pass through, binary
// categories map to {-1, +1}, one-hot to indicator columns. Missing or
// unseen categories encode to zero in every route.
void encode_raw_row(const Dataset& dataset,
                    const std::vector<CatPlanEntry>& cat_plan, Index row,
                    std::vector<double>& out) {
  std::size_t pos = 0;
  Index num = 0, cat = 0;
  for (const auto& col : dataset.schema.columns) {
    if (col.kind == ColumnKind::numerical) {
      out[pos++] = dataset.numeric(row, num++);
    } else if (col.kind == ColumnKind::categorical) {
      const auto& plan = cat_plan[static_cast<std::size_t>(cat)];
      const auto& cc = dataset.categorical[static_cast<std::size_t>(cat)];
      const int code = cc.codes[row];
      const bool missing = code < 0 || code == cc.missing_code;
      switch (plan.route) {
        case CatRoute::binary: {
          double v = 0.0;
          if (!missing) {
            if (!plan.train_codes.empty() && code == plan.train_codes[0])
              v = -1.0;
            else if (plan.train_codes.size() > 1 &&
                     code == plan.train_codes[1])
              v = 1.0;
          }
          out[pos++] = v;
          break;
        }
        case CatRoute::onehot: {
          const int k = plan.train_cardinality();
          for (int i = 0; i < k; ++i) out[pos + static_cast<std::size_t>(i)] = 0.0;
          if (!missing) {
            const int idx = plan.dense_index(code);
            if (idx > 0) out[pos + static_cast<std::size_t>(idx - 1)] = 1.0;
          }
          pos += static_cast<std::size_t>(k);
          break;
        }
        case CatRoute::embed:
          break;  // carried through cat_codes, not the dense matrix
      }
      ++cat;
    }
  }
}

}  // namespace

FittedPreprocessor fit_preprocessor(const Dataset& dataset,
                                    const IndexList& train_rows,
                                    int max_onehot) {
  if (train_rows.empty())
    throw ContractError("fit_preprocessor: no train rows");
  FittedPreprocessor fp;
  fp.max_onehot = max_onehot;

  // route each categorical column from its distinct non-missing train values
  for (std::size_t j = 0; j < dataset.categorical.size(); ++j) {
    const auto& cc = dataset.categorical[j];
    std::set<int> distinct;
    for (Index r : train_rows) {
      const int code = cc.codes[r];
      if (code >= 0 && code != cc.missing_code) distinct.insert(code);
    }
    CatPlanEntry plan;
    plan.train_codes.assign(distinct.begin(), distinct.end());
    const int k = plan.train_cardinality();
    if (k > max_onehot) {
      plan.route = CatRoute::embed;
      fp.embed_routed.push_back(static_cast<int>(j));
      fp.embed_cardinalities.push_back(k);
    } else if (k >= 3) {
      plan.route = CatRoute::onehot;
    } else {
      plan.route = CatRoute::binary;  // also covers 0/1 distinct values
    }
    fp.cat_plan.push_back(std::move(plan));
  }

  // output column layout follows schema order
  Index num_pos = 0, cat_pos = 0;
  for (const auto& col : dataset.schema.columns) {
    if (col.kind == ColumnKind::numerical) {
      fp.columns.push_back({num_pos, true, true});
      ++num_pos;
    } else if (col.kind == ColumnKind::categorical) {
      const auto& plan = fp.cat_plan[static_cast<std::size_t>(cat_pos)];
      for (Index w = 0; w < plan_width(plan); ++w)
        fp.columns.push_back({cat_pos, false, false});
      ++cat_pos;
    }
  }

  // fit a scaler per output column on the raw-encoded train rows
  const Index n = static_cast<Index>(train_rows.size());
  const Index width = fp.output_width();
  MatrixXd raw(n, width);
  std::vector<double> scratch(static_cast<std::size_t>(width));
  for (Index r = 0; r < n; ++r) {
    encode_raw_row(dataset, fp.cat_plan, train_rows[static_cast<std::size_t>(r)],
                   scratch);
    for (Index c = 0; c < width; ++c)
      raw(r, c) = scratch[static_cast<std::size_t>(c)];
  }
  fp.scalers.reserve(static_cast<std::size_t>(width));
  for (Index c = 0; c < width; ++c) {
    std::vector<double> col(raw.col(c).data(), raw.col(c).data() + n);
    fp.scalers.push_back(fit_column_scaler(std::move(col)));
  }
  return fp;
}

PreprocessedBatch apply_preprocessor(const FittedPreprocessor& fitted,
                                     const Dataset& dataset,
                                     const IndexList& rows) {
  PreprocessedBatch batch;
  batch.info = fitted.columns;
  batch.cat_cardinalities = fitted.embed_cardinalities;
  const Index n = static_cast<Index>(rows.size());
  const Index width = fitted.output_width();
  batch.x.resize(n, width);
  batch.cat_codes.resize(n, static_cast<Index>(fitted.embed_routed.size()));

  std::vector<double> scratch(static_cast<std::size_t>(width));
  for (Index r = 0; r < n; ++r) {
    const Index row = rows[static_cast<std::size_t>(r)];
    encode_raw_row(dataset, fitted.cat_plan, row, scratch);
    for (Index c = 0; c < width; ++c)
      batch.x(r, c) = transform_column(
          fitted.scalers[static_cast<std::size_t>(c)],
          scratch[static_cast<std::size_t>(c)]);
    for (std::size_t e = 0; e < fitted.embed_routed.size(); ++e) {
      const auto cat = static_cast<std::size_t>(fitted.embed_routed[e]);
      const auto& plan = fitted.cat_plan[cat];
      const auto& cc = dataset.categorical[cat];
      const int code = cc.codes[row];
      const bool missing = code < 0 || code == cc.missing_code;
      batch.cat_codes(r, static_cast<Index>(e)) =
          missing ? 0 : plan.dense_index(code);
    }
  }
  return batch;
}

}  // namespace realmlp
