#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "realmlp/config.hpp"
#include "realmlp/dataio.hpp"
#include "realmlp/pipeline.hpp"
#include "realmlp/types.hpp"

namespace realmlp {
namespace hpo {

enum class DimKind { choice, uniform, log_uniform, log_uniform_int };

/// One named search dimension. Choice values are config-override strings;
/// numeric kinds format their samples with full precision.
struct SearchDimension {
  std::string name;
  DimKind kind = DimKind::choice;
  std::vector<std::string> choices;
  std::vector<double> probabilities;  // empty = uniform
  double lo = 0.0, hi = 0.0;

  void validate() const;
};

struct SearchSpace {
  std::vector<SearchDimension> dims;
  void validate() const;
};

/// The RealMLP search space (remaining hyperparameters stay at their
/// tuned-default values); regression omits the label-smoothing dimension.
SearchSpace realmlp_search_space(Task task);

using ConfigSample = std::vector<std::pair<std::string, std::string>>;

/// Draws one value per dimension; every value lies in its declared support.
ConfigSample sample_config(const SearchSpace& space, RngStream& rng);

struct TrialResult {
  double val_metric = std::numeric_limits<double>::quiet_NaN();
  double test_metric = std::numeric_limits<double>::quiet_NaN();
};

struct Trial {
  int index = 0;
  std::uint64_t seed = 0;
  ConfigSample sample;
  double val_metric = std::numeric_limits<double>::quiet_NaN();
  double test_metric = std::numeric_limits<double>::quiet_NaN();
  double wall_seconds = 0.0;
  bool failed = false;
  std::string error;
};

struct RandomSearchResult {
  std::vector<Trial> trials;
  int best_index = -1;  // argmin validation metric, earliest on ties
};

/// Evaluates one sampled configuration; receives a per-trial seed derived
/// from the global seed and the trial index (stable under parallelism).
/// The test metric is recorded in the log but never used for selection.
using TrialEvaluator =
    std::function<TrialResult(const ModelConfig&, std::uint64_t seed, int index)>;

RandomSearchResult random_search(const SearchSpace& space,
                                 const ModelConfig& base, int steps,
                                 std::uint64_t seed,
                                 const TrialEvaluator& evaluate, int jobs = 1);

/// Trains/evaluates trials with the full pipeline on the given split.
RandomSearchResult run_hpo(const Dataset& dataset, const SplitIndices& split,
                           const SearchSpace& space, int steps,
                           std::uint64_t seed, int jobs = 1);

/// Config of a recorded trial (base preset + the trial's sampled overrides).
ModelConfig trial_config(const ModelConfig& base, const Trial& trial);

}  // namespace hpo
}  // namespace realmlp
