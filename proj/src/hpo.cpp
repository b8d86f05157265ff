#include "realmlp/hpo.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include "realmlp/parallel.hpp"
#include "realmlp/rng.hpp"

namespace realmlp {
namespace hpo {

namespace {

std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void SearchDimension::validate() const {
  if (name.empty()) throw ContractError("search dimension: empty name");
  if (kind == DimKind::choice) {
    if (choices.empty()) throw ContractError(name + ": no choices");
    if (!probabilities.empty()) {
      if (probabilities.size() != choices.size())
        throw ContractError(name + ": probability count mismatch");
      double sum = 0;
      for (double p : probabilities) {
        if (p < 0) throw ContractError(name + ": negative probability");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-9)
        throw ContractError(name + ": probabilities must sum to 1");
    }
  } else {
    if (!(lo < hi)) throw ContractError(name + ": need lo < hi");
    if (kind != DimKind::uniform && !(lo > 0))
      throw ContractError(name + ": log spaces need lo > 0");
  }
}

void SearchSpace::validate() const {
  for (const auto& d : dims) d.validate();
}

SearchSpace realmlp_search_space(Task task) {
  SearchSpace s;
  s.dims.push_back({"num_embeddings",
                    DimKind::choice,
                    {"none", "pbld", "pl", "plr"},
                    {},
                    0,
                    0});
  s.dims.push_back(
      {"scaling_layer", DimKind::choice, {"on", "off"}, {0.6, 0.4}, 0, 0});
  s.dims.push_back({"lr", DimKind::log_uniform, {}, {}, 2e-2, 3e-1});
  s.dims.push_back({"dropout",
                    DimKind::choice,
                    {"0", "0.15", "0.3"},
                    {0.3, 0.5, 0.2},
                    0,
                    0});
  s.dims.push_back(
      {"activation", DimKind::choice, {"relu", "selu", "mish"}, {}, 0, 0});
  s.dims.push_back({"hidden_sizes",
                    DimKind::choice,
                    {"256,256,256", "64,64,64,64,64", "512"},
                    {0.6, 0.2, 0.2},
                    0,
                    0});
  s.dims.push_back({"wd", DimKind::choice, {"0", "0.02"}, {}, 0, 0});
  s.dims.push_back({"emb_init_std", DimKind::log_uniform, {}, {}, 0.05, 0.5});
  if (task == Task::classification)
    s.dims.push_back({"label_smoothing",
                      DimKind::choice,
                      {"0", "0.1"},
                      {0.3, 0.7},
                      0,
                      0});
  s.validate();
  return s;
}

ConfigSample sample_config(const SearchSpace& space, RngStream& rng) {
  space.validate();
  ConfigSample sample;
  sample.reserve(space.dims.size());
  for (const auto& d : space.dims) {
    switch (d.kind) {
      case DimKind::choice: {
        std::size_t pick = 0;
        if (d.probabilities.empty()) {
          pick = static_cast<std::size_t>(rng.uniform_int(
              0, static_cast<std::int64_t>(d.choices.size()) - 1));
        } else {
          const double u = rng.uniform();
          double acc = 0.0;
          pick = d.choices.size() - 1;
          for (std::size_t i = 0; i < d.probabilities.size(); ++i) {
            acc += d.probabilities[i];
            if (u < acc) {
              pick = i;
              break;
            }
          }
        }
        sample.emplace_back(d.name, d.choices[pick]);
        break;
      }
      case DimKind::uniform:
        sample.emplace_back(d.name, fmt_real(rng.uniform(d.lo, d.hi)));
        break;
      case DimKind::log_uniform:
        sample.emplace_back(
            d.name,
            fmt_real(std::exp(rng.uniform(std::log(d.lo), std::log(d.hi)))));
        break;
      case DimKind::log_uniform_int: {
        const double v =
            std::exp(rng.uniform(std::log(d.lo), std::log(d.hi)));
        const auto i = std::llround(std::clamp(v, d.lo, d.hi));
        sample.emplace_back(d.name, std::to_string(i));
        break;
      }
    }
  }
  return sample;
}

ModelConfig trial_config(const ModelConfig& base, const Trial& trial) {
  ModelConfig c = base;
  for (const auto& [key, value] : trial.sample) apply_override(c, key, value);
  return c;
}

RandomSearchResult random_search(const SearchSpace& space,
                                 const ModelConfig& base, int steps,
                                 std::uint64_t seed,
                                 const TrialEvaluator& evaluate, int jobs) {
  if (steps < 1) throw ContractError("random_search: steps must be >= 1");
  RandomSearchResult result;
  result.trials.resize(static_cast<std::size_t>(steps));

  parallel_for(steps, jobs, [&](int i) {
    Trial& trial = result.trials[static_cast<std::size_t>(i)];
    trial.index = i;
    trial.seed = derive_seed(seed, rng_purpose::hpo, static_cast<std::uint64_t>(i));
    RngStream sampler(trial.seed, "hpo_sample");
    trial.sample = sample_config(space, sampler);
    const auto start = std::chrono::steady_clock::now();
    try {
      const ModelConfig config = trial_config(base, trial);
      const TrialResult r = evaluate(config, trial.seed, i);
      trial.val_metric = r.val_metric;
      trial.test_metric = r.test_metric;
    } catch (const std::exception& e) {
      trial.failed = true;
      trial.error = e.what();
    }
    trial.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
  });

  // selection reads validation metrics only; earliest trial wins ties
  for (int i = 0; i < steps; ++i) {
    const Trial& t = result.trials[static_cast<std::size_t>(i)];
    if (t.failed || !std::isfinite(t.val_metric)) continue;
    if (result.best_index < 0 ||
        t.val_metric <
            result.trials[static_cast<std::size_t>(result.best_index)].val_metric)
      result.best_index = i;
  }
  if (result.best_index < 0) {
    std::string detail;
    for (const auto& t : result.trials)
      if (t.failed)
        detail += "\n  trial " + std::to_string(t.index) + ": " + t.error;
    throw ContractError("random_search: all trials failed" + detail);
  }
  return result;
}

RandomSearchResult run_hpo(const Dataset& dataset, const SplitIndices& split,
                           const SearchSpace& space, int steps,
                           std::uint64_t seed, int jobs) {
  const ModelConfig base = preset_config("td", dataset.schema.task);
  const EvalMetric test_metric = dataset.schema.task == Task::classification
                                     ? EvalMetric::err
                                     : EvalMetric::nrmse;
  auto evaluate = [&](const ModelConfig& config, std::uint64_t trial_seed,
                      int) -> TrialResult {
    FitOutcome fit = fit_realmlp(dataset, split.train, split.validation,
                                 config, trial_seed);
    TrialResult r;
    r.val_metric = fit.record.best_metric;
    if (!split.test.empty())
      r.test_metric = evaluate_model(fit.model, dataset, split.test,
                                     test_metric);
    return r;
  };
  return random_search(space, base, steps, seed, evaluate, jobs);
}

}  // namespace hpo
}  // namespace realmlp
