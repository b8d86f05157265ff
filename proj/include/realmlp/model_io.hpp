#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "realmlp/model.hpp"

namespace realmlp {

inline constexpr std::uint32_t kModelFormatVersion = 1;

/// Versioned binary model container: "RMLP" magic, JSON metadata (task,
/// preset, config key/values, schema text + digest, seed), the fitted
/// preprocessor, vocabularies, the target standardizer and clip range, and
/// the named parameter arrays as little-endian payloads. Loading a saved
/// model reproduces predictions bit-exactly.
struct ModelBundle {
  RealMLPModel<double> model;
  DatasetSchema schema;
  DatasetVocabulary vocabulary;
  std::uint64_t seed = 0;
};

void save_model(const ModelBundle& bundle, const std::string& path);
std::string serialize_model(const ModelBundle& bundle);

ModelBundle load_model(const std::string& path);
ModelBundle deserialize_model(const std::string& bytes);

}  // namespace realmlp
