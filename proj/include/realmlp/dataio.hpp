#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "realmlp/types.hpp"

namespace realmlp {

enum class ColumnKind { numerical, categorical, target };

struct SchemaColumn {
  std::string name;
  ColumnKind kind;
};

/// Column-typed table description: exactly one target column, at least one
/// feature column, unique names.
struct DatasetSchema {
  std::vector<SchemaColumn> columns;
  Task task = Task::classification;

  Index target_index() const;
  Index num_feature_count() const;
  Index cat_feature_count() const;
  void validate() const;
  /// Stable content hash, stored in model files to detect schema mismatch.
  std::uint64_t digest() const;
};

/// Schema file: header line `task,<classification|regression>`, then one
/// `name,<num|cat|target>` line per column.
DatasetSchema read_schema(const std::string& path);
DatasetSchema parse_schema(const std::string& text);
std::string schema_to_text(const DatasetSchema& schema);

struct CategoricalColumn {
  std::string name;
  // codes assigned by first appearance in file order; -1 marks a value not
  // present in the fixed vocabulary (only when loading with one)
  VectorXi codes;
  // vocab[code] = original cell text; the empty string is the missing value
  std::vector<std::string> vocab;
  int missing_code = -1;  // code of "" in vocab, or -1 if no missing seen

  int cardinality() const { return static_cast<int>(vocab.size()); }
};

/// Fixed encodings captured at training time so later loads map values
/// consistently (prediction/evaluation data may order values differently).
struct DatasetVocabulary {
  std::vector<std::vector<std::string>> cat_vocabs;  // per categorical column
  std::vector<std::string> target_labels;            // classification only
};

enum class TargetPolicy { require, optional };

struct Dataset {
  DatasetSchema schema;
  MatrixXd numeric;  // n_rows x num_feature_count
  std::vector<CategoricalColumn> categorical;
  VectorXi class_targets;             // classification
  std::vector<std::string> target_labels;
  VectorXd real_targets;              // regression
  bool has_targets = true;
  std::vector<Index> source_rows;     // original file row per kept row
  Index n_rows = 0;

  int class_count() const { return static_cast<int>(target_labels.size()); }
  DatasetVocabulary vocabulary() const;
};

/// Loads a comma-delimited UTF-8 file with a header row. Rows with a missing
/// (or non-finite) numerical value are dropped; missing categorical cells
/// become their own category.
Dataset load_csv(const std::string& path, const DatasetSchema& schema);

/// Same, but with encodings fixed by `vocab`: unseen categorical values map
/// to code -1 (routed to the missing bucket downstream). With
/// TargetPolicy::optional the target column may be absent from the file.
Dataset load_csv(const std::string& path, const DatasetSchema& schema,
                 const DatasetVocabulary& vocab,
                 TargetPolicy target_policy = TargetPolicy::require);

Dataset parse_csv(const std::string& text, const DatasetSchema& schema,
                  const DatasetVocabulary* vocab = nullptr,
                  TargetPolicy target_policy = TargetPolicy::require);

/// Disjoint train/validation/test row indices covering all rows.
struct SplitIndices {
  IndexList train;
  IndexList validation;
  IndexList test;
  std::uint64_t seed = 0;

  IndexList train_and_validation() const;
};

/// Seeded uniform 60/20/20 shuffle split; validation and test sizes are
/// floor(0.2 n) and the remainder goes to train.
SplitIndices make_split(Index n_rows, std::uint64_t seed);

/// Affine target normalizer for regression, fitted on train+validation rows.
struct TargetStandardizer {
  double mean = 0.0;
  double std = 1.0;  // population (1/n) standard deviation
  bool degenerate = false;
};

TargetStandardizer fit_target_standardizer(const VectorXd& targets,
                                           const IndexList& rows);
VectorXd apply_standardizer(const TargetStandardizer& s, const VectorXd& y);
VectorXd invert_standardizer(const TargetStandardizer& s, const VectorXd& y);

}  // namespace realmlp
