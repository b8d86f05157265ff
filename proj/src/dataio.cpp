#include "realmlp/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "realmlp/rng.hpp"

namespace realmlp {
namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContractError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Minimal RFC-4180-ish parser: quoted fields with "" escapes, CRLF tolerant.
std::vector<std::vector<std::string>> parse_delimited(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        any = true;
        break;
      case '\r':
        break;
      case '\n':
        row.push_back(std::move(field));
        field.clear();
        if (any || !row.back().empty() || row.size() > 1) rows.push_back(row);
        row.clear();
        any = false;
        break;
      default:
        field += c;
    }
  }
  if (!field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(row);
  }
  // drop fully empty trailing lines
  while (!rows.empty() && rows.back().size() == 1 && rows.back()[0].empty())
    rows.pop_back();
  return rows;
}

// Parses a full numeric cell; empty or non-finite counts as missing.
// Unparseable (trailing garbage) is a hard error, surfaced by the caller.
enum class NumCell { value, missing, bad };

NumCell parse_numeric(const std::string& cell, double* out) {
  if (cell.empty()) return NumCell::missing;
  const char* begin = cell.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  while (end && *end == ' ') ++end;
  if (end == begin || (end && *end != '\0')) return NumCell::bad;
  if (!std::isfinite(v)) return NumCell::missing;
  *out = v;
  return NumCell::value;
}

}  // namespace

Index DatasetSchema::target_index() const {
  for (Index i = 0; i < static_cast<Index>(columns.size()); ++i)
    if (columns[i].kind == ColumnKind::target) return i;
  throw ContractError("schema has no target column");
}

Index DatasetSchema::num_feature_count() const {
  Index n = 0;
  for (const auto& c : columns) n += (c.kind == ColumnKind::numerical);
  return n;
}

Index DatasetSchema::cat_feature_count() const {
  Index n = 0;
  for (const auto& c : columns) n += (c.kind == ColumnKind::categorical);
  return n;
}

void DatasetSchema::validate() const {
  Index targets = 0;
  std::unordered_set<std::string> names;
  for (const auto& c : columns) {
    if (c.name.empty()) throw ContractError("schema: empty column name");
    if (!names.insert(c.name).second)
      throw ContractError("schema: duplicate column name '" + c.name + "'");
    targets += (c.kind == ColumnKind::target);
  }
  if (targets != 1)
    throw ContractError("schema: expected exactly one target column");
  if (columns.size() < 2)
    throw ContractError("schema: expected at least one feature column");
}

std::uint64_t DatasetSchema::digest() const {
  return fnv1a64(schema_to_text(*this));
}

DatasetSchema parse_schema(const std::string& text) {
  const auto rows = parse_delimited(text);
  if (rows.empty()) throw ContractError("schema: empty file");
  const auto& head = rows[0];
  if (head.size() != 2 || head[0] != "task")
    throw ContractError("schema: first line must be 'task,<kind>'");
  DatasetSchema schema;
  schema.task = task_from_string(head[1]);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != 2)
      throw ContractError("schema: expected 'name,kind' on line " +
                          std::to_string(r + 1));
    const std::string& kind = rows[r][1];
    ColumnKind k;
    if (kind == "num")
      k = ColumnKind::numerical;
    else if (kind == "cat")
      k = ColumnKind::categorical;
    else if (kind == "target")
      k = ColumnKind::target;
    else
      throw ContractError("schema: unknown column kind '" + kind + "'");
    schema.columns.push_back({rows[r][0], k});
  }
  schema.validate();
  return schema;
}

DatasetSchema read_schema(const std::string& path) {
  return parse_schema(read_file(path));
}

std::string schema_to_text(const DatasetSchema& schema) {
  std::ostringstream out;
  out << "task," << to_string(schema.task) << "\n";
  for (const auto& c : schema.columns) {
    const char* kind = c.kind == ColumnKind::numerical  ? "num"
                       : c.kind == ColumnKind::categorical ? "cat"
                                                           : "target";
    out << c.name << "," << kind << "\n";
  }
  return out.str();
}

DatasetVocabulary Dataset::vocabulary() const {
  DatasetVocabulary v;
  for (const auto& c : categorical) v.cat_vocabs.push_back(c.vocab);
  v.target_labels = target_labels;
  return v;
}

Dataset parse_csv(const std::string& text, const DatasetSchema& schema,
                  const DatasetVocabulary* vocab, TargetPolicy target_policy) {
  schema.validate();
  const auto rows = parse_delimited(text);
  if (rows.empty()) throw ContractError("csv: empty file");
  const auto& header = rows[0];

  // map schema columns to file columns by name
  std::unordered_map<std::string, Index> file_col;
  for (Index i = 0; i < static_cast<Index>(header.size()); ++i) {
    if (!file_col.emplace(header[i], i).second)
      throw ContractError("csv: duplicate header column '" + header[i] + "'");
  }
  const Index target_schema_idx = schema.target_index();
  std::vector<Index> col_of_schema(schema.columns.size(), -1);
  bool target_present = true;
  for (std::size_t s = 0; s < schema.columns.size(); ++s) {
    auto it = file_col.find(schema.columns[s].name);
    if (it == file_col.end()) {
      if (static_cast<Index>(s) == target_schema_idx &&
          target_policy == TargetPolicy::optional) {
        target_present = false;
        continue;
      }
      throw ContractError("csv: header is missing column '" +
                          schema.columns[s].name + "'");
    }
    col_of_schema[s] = it->second;
  }

  Dataset ds;
  ds.schema = schema;
  ds.has_targets = target_present;

  const Index n_num = schema.num_feature_count();
  const Index n_cat = schema.cat_feature_count();
  const bool classification = schema.task == Task::classification;

  std::vector<std::vector<double>> num_rows;
  std::vector<std::vector<std::string>> cat_rows;
  std::vector<std::string> tgt_cells;
  std::vector<Index> kept;

  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& cells = rows[r];
    if (cells.size() != header.size())
      throw ContractError("csv: row " + std::to_string(r + 1) + " has " +
                          std::to_string(cells.size()) + " cells, expected " +
                          std::to_string(header.size()));
    std::vector<double> nums;
    nums.reserve(n_num);
    std::vector<std::string> cats;
    cats.reserve(n_cat);
    std::string tgt;
    bool drop = false;
    for (std::size_t s = 0; s < schema.columns.size() && !drop; ++s) {
      const auto& col = schema.columns[s];
      const bool present = col_of_schema[s] >= 0;
      const std::string& cell =
          present ? cells[static_cast<std::size_t>(col_of_schema[s])] : tgt;
      switch (col.kind) {
        case ColumnKind::numerical: {
          double v = 0.0;
          switch (parse_numeric(cell, &v)) {
            case NumCell::value:
              nums.push_back(v);
              break;
            case NumCell::missing:
              drop = true;
              break;
            case NumCell::bad:
              throw ContractError("csv: unparseable numeric cell '" + cell +
                                  "' in column '" + col.name + "', row " +
                                  std::to_string(r + 1));
          }
          break;
        }
        case ColumnKind::categorical:
          cats.push_back(cell);
          break;
        case ColumnKind::target:
          if (!present) break;  // optional target absent
          if (classification) {
            if (cell.empty() && target_policy == TargetPolicy::require)
              drop = true;  // a missing label is unusable for training/eval
            tgt = cell;
          } else {
            double v = 0.0;
            switch (parse_numeric(cell, &v)) {
              case NumCell::value:
                tgt = cell;
                break;
              case NumCell::missing:
                if (target_policy == TargetPolicy::require)
                  drop = true;
                else
                  tgt = "0";
                break;
              case NumCell::bad:
                throw ContractError("csv: unparseable numeric target '" +
                                    cell + "', row " + std::to_string(r + 1));
            }
          }
          break;
      }
    }
    if (drop) continue;
    num_rows.push_back(std::move(nums));
    cat_rows.push_back(std::move(cats));
    tgt_cells.push_back(std::move(tgt));
    kept.push_back(static_cast<Index>(r - 1));
  }

  ds.n_rows = static_cast<Index>(kept.size());
  if (ds.n_rows == 0) throw ContractError("csv: zero rows after filtering");
  ds.source_rows = std::move(kept);

  ds.numeric.resize(ds.n_rows, n_num);
  for (Index r = 0; r < ds.n_rows; ++r)
    for (Index c = 0; c < n_num; ++c)
      ds.numeric(r, c) = num_rows[static_cast<std::size_t>(r)]
                                 [static_cast<std::size_t>(c)];

  // categorical codes: first-appearance order, or fixed vocabulary
  ds.categorical.resize(static_cast<std::size_t>(n_cat));
  Index cat_pos = 0;
  for (const auto& col : schema.columns) {
    if (col.kind != ColumnKind::categorical) continue;
    auto& cc = ds.categorical[static_cast<std::size_t>(cat_pos)];
    cc.name = col.name;
    cc.codes.resize(ds.n_rows);
    std::unordered_map<std::string, int> code_of;
    if (vocab) {
      const auto& fixed = vocab->cat_vocabs.at(static_cast<std::size_t>(cat_pos));
      cc.vocab = fixed;
      for (int i = 0; i < static_cast<int>(fixed.size()); ++i)
        code_of.emplace(fixed[static_cast<std::size_t>(i)], i);
    }
    for (Index r = 0; r < ds.n_rows; ++r) {
      const std::string& cell =
          cat_rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(cat_pos)];
      auto it = code_of.find(cell);
      int code;
      if (it != code_of.end()) {
        code = it->second;
      } else if (vocab) {
        code = -1;  // unseen under a fixed vocabulary
      } else {
        code = static_cast<int>(cc.vocab.size());
        cc.vocab.push_back(cell);
        code_of.emplace(cell, code);
      }
      cc.codes[r] = code;
    }
    auto missing = code_of.find("");
    cc.missing_code = missing == code_of.end() ? -1 : missing->second;
    ++cat_pos;
  }

  // targets
  if (!target_present) {
    ds.has_targets = false;
    if (classification) {
      ds.class_targets = VectorXi::Zero(ds.n_rows);
      if (vocab) ds.target_labels = vocab->target_labels;
    } else {
      ds.real_targets = VectorXd::Zero(ds.n_rows);
    }
    return ds;
  }
  if (classification) {
    std::unordered_map<std::string, int> label_of;
    if (vocab) {
      ds.target_labels = vocab->target_labels;
      for (int i = 0; i < static_cast<int>(ds.target_labels.size()); ++i)
        label_of.emplace(ds.target_labels[static_cast<std::size_t>(i)], i);
    }
    ds.class_targets.resize(ds.n_rows);
    for (Index r = 0; r < ds.n_rows; ++r) {
      const auto& cell = tgt_cells[static_cast<std::size_t>(r)];
      auto it = label_of.find(cell);
      if (it != label_of.end()) {
        ds.class_targets[r] = it->second;
      } else if (vocab) {
        if (target_policy == TargetPolicy::require)
          throw ContractError("csv: target label '" + cell +
                              "' not in the model's label set");
        ds.class_targets[r] = 0;
        ds.has_targets = false;
      } else {
        const int code = static_cast<int>(ds.target_labels.size());
        ds.target_labels.push_back(cell);
        label_of.emplace(cell, code);
        ds.class_targets[r] = code;
      }
    }
    if (!vocab && ds.class_count() < 2)
      throw ContractError("csv: classification target has fewer than 2 classes");
  } else {
    ds.real_targets.resize(ds.n_rows);
    for (Index r = 0; r < ds.n_rows; ++r)
      ds.real_targets[r] =
          std::strtod(tgt_cells[static_cast<std::size_t>(r)].c_str(), nullptr);
  }
  return ds;
}

Dataset load_csv(const std::string& path, const DatasetSchema& schema) {
  return parse_csv(read_file(path), schema);
}

Dataset load_csv(const std::string& path, const DatasetSchema& schema,
                 const DatasetVocabulary& vocab, TargetPolicy target_policy) {
  return parse_csv(read_file(path), schema, &vocab, target_policy);
}

IndexList SplitIndices::train_and_validation() const {
  IndexList all = train;
  all.insert(all.end(), validation.begin(), validation.end());
  return all;
}

SplitIndices make_split(Index n_rows, std::uint64_t seed) {
  if (n_rows < 5)
    throw ContractError("make_split: need at least 5 rows, got " +
                        std::to_string(n_rows));
  IndexList order(static_cast<std::size_t>(n_rows));
  for (Index i = 0; i < n_rows; ++i) order[static_cast<std::size_t>(i)] = i;
  RngStream rng(seed, rng_purpose::split);
  rng.shuffle(order);

  const Index n_val = n_rows / 5;
  const Index n_test = n_rows / 5;
  const Index n_train = n_rows - n_val - n_test;  // remainder goes to train

  SplitIndices split;
  split.seed = seed;
  split.train.assign(order.begin(), order.begin() + n_train);
  split.validation.assign(order.begin() + n_train,
                          order.begin() + n_train + n_val);
  split.test.assign(order.begin() + n_train + n_val, order.end());
  return split;
}

TargetStandardizer fit_target_standardizer(const VectorXd& targets,
                                           const IndexList& rows) {
  if (rows.empty())
    throw ContractError("fit_target_standardizer: no rows");
  double mean = 0.0;
  for (Index i : rows) mean += targets[i];
  mean /= static_cast<double>(rows.size());
  double var = 0.0;
  for (Index i : rows) {
    const double d = targets[i] - mean;
    var += d * d;
  }
  var /= static_cast<double>(rows.size());
  TargetStandardizer s;
  s.mean = mean;
  s.std = std::sqrt(var);
  s.degenerate = !(s.std > 1e-12 * std::max(1.0, std::abs(mean)));
  if (s.degenerate) s.std = 1.0;
  return s;
}

VectorXd apply_standardizer(const TargetStandardizer& s, const VectorXd& y) {
  if (s.degenerate) return VectorXd::Zero(y.size());
  return (y.array() - s.mean) / s.std;
}

VectorXd invert_standardizer(const TargetStandardizer& s, const VectorXd& y) {
  if (s.degenerate) return VectorXd::Constant(y.size(), s.mean);
  return (y.array() * s.std + s.mean);
}

}  // namespace realmlp
