#pragma once

#include <map>
#include <string>
#include <vector>

#include "realmlp/autodiff.hpp"
#include "realmlp/preprocess.hpp"
#include "realmlp/schedule.hpp"
#include "realmlp/types.hpp"

namespace realmlp {

enum class NumEmbeddingKind { none, pbld, pl, plr };
enum class InitScheme { data_dependent, simple };
enum class BiasInitKind { he5_standin, zero, normal };
enum class StopMetric { class_error, rmse, cross_entropy };
enum class TieBreak { last, first };

/// Full hyperparameter assignment for one model. Presets fill every field;
/// any key can be overridden through the flat `key = value` config format.
struct ModelConfig {
  Task task = Task::classification;
  std::string preset_name = "td-class";

  // embeddings & input stack
  NumEmbeddingKind num_embeddings = NumEmbeddingKind::pbld;
  int emb_hidden_dim = 16;
  int emb_dim = 4;
  double emb_init_std = 0.1;
  int max_onehot = 8;
  int cat_emb_dim = 8;
  bool scaling_layer = true;

  // network
  std::vector<int> hidden_sizes{256, 256, 256};
  act::Kind activation = act::Kind::selu;
  bool parametric_activation = true;

  // initialization
  InitScheme init = InitScheme::data_dependent;
  BiasInitKind bias_init = BiasInitKind::he5_standin;
  Index init_sample_cap = 65536;

  // optimization
  double beta1 = 0.9;
  double beta2 = 0.95;
  double adam_eps = 1e-8;
  int epochs = 256;
  int batch_size = 256;
  double learning_rate = 0.04;
  ScheduleKind lr_schedule = ScheduleKind::coslog4;
  double lr_factor_num_emb = 0.1;
  double lr_factor_scaling = 6.0;
  double lr_factor_bias = 0.1;
  double lr_factor_alpha = 0.1;
  double dropout = 0.15;
  ScheduleKind dropout_schedule = ScheduleKind::flat_cos;
  double weight_decay = 0.02;
  ScheduleKind wd_schedule = ScheduleKind::flat_cos;
  double wd_factor_bias = 0.0;

  // loss & selection
  double label_smoothing = 0.1;  // classification only
  bool output_clip = true;       // regression only
  StopMetric stop_metric = StopMetric::class_error;
  TieBreak tie_break = TieBreak::last;
};

/// Builds "td-class", "td-reg", "tds-class" or "tds-reg". The short names
/// "td" / "td-s" resolve against `task`.
ModelConfig preset_config(const std::string& name, Task task);

/// Applies one `key = value` override; throws ContractError on unknown keys
/// or unparseable values.
void apply_override(ModelConfig& config, const std::string& key,
                    const std::string& value);

/// Parses the flat override format: one `key = value` per line, `#` comments.
/// A `preset` key, when present, must come first and selects the base.
std::vector<std::pair<std::string, std::string>> parse_config_text(
    const std::string& text);
std::vector<std::pair<std::string, std::string>> parse_config_file(
    const std::string& path);

ModelConfig config_from_overrides(
    const std::string& default_preset, Task task,
    const std::vector<std::pair<std::string, std::string>>& overrides);

/// Canonical key/value form (17 significant digits for reals); covers every
/// field so that a config can be reconstructed from a saved model.
std::map<std::string, std::string> config_to_kv(const ModelConfig& config);
ModelConfig config_from_kv(const std::map<std::string, std::string>& kv);

std::string to_string(NumEmbeddingKind k);
std::string to_string(act::Kind k);
std::string to_string(StopMetric m);
StopMetric stop_metric_from_string(const std::string& s);

}  // namespace realmlp
