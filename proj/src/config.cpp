#include "realmlp/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace realmlp {
namespace {

std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_real(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || *end != '\0')
    throw ContractError("config: bad numeric value for '" + key + "': " + value);
  return v;
}

long parse_int(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const long v = std::strtol(value.c_str(), &end, 10);
  if (end == value.c_str() || *end != '\0')
    throw ContractError("config: bad integer value for '" + key + "': " + value);
  return v;
}

bool parse_switch(const std::string& key, const std::string& value) {
  if (value == "on" || value == "true" || value == "1") return true;
  if (value == "off" || value == "false" || value == "0") return false;
  throw ContractError("config: bad on/off value for '" + key + "': " + value);
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

std::vector<int> parse_hidden_sizes(const std::string& value) {
  std::vector<int> sizes;
  std::string tok;
  std::istringstream ss(value);
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) continue;
    const long v = parse_int("hidden_sizes", tok);
    if (v <= 0) throw ContractError("config: hidden size must be positive");
    sizes.push_back(static_cast<int>(v));
  }
  return sizes;
}

std::string hidden_sizes_to_string(const std::vector<int>& sizes) {
  std::string out;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(sizes[i]);
  }
  return out;
}

}  // namespace

std::string to_string(NumEmbeddingKind k) {
  switch (k) {
    case NumEmbeddingKind::none: return "none";
    case NumEmbeddingKind::pbld: return "pbld";
    case NumEmbeddingKind::pl: return "pl";
    case NumEmbeddingKind::plr: return "plr";
  }
  return "none";
}

std::string to_string(act::Kind k) {
  switch (k) {
    case act::Kind::selu: return "selu";
    case act::Kind::mish: return "mish";
    case act::Kind::relu: return "relu";
  }
  return "selu";
}

std::string to_string(StopMetric m) {
  switch (m) {
    case StopMetric::class_error: return "err";
    case StopMetric::rmse: return "rmse";
    case StopMetric::cross_entropy: return "ce";
  }
  return "err";
}

StopMetric stop_metric_from_string(const std::string& s) {
  if (s == "err") return StopMetric::class_error;
  if (s == "rmse") return StopMetric::rmse;
  if (s == "ce") return StopMetric::cross_entropy;
  throw ContractError("unknown stop metric: " + s);
}

ModelConfig preset_config(const std::string& name, Task task) {
  std::string full = name;
  if (name == "td")
    full = task == Task::classification ? "td-class" : "td-reg";
  else if (name == "td-s" || name == "tds")
    full = task == Task::classification ? "tds-class" : "tds-reg";

  ModelConfig c;
  c.task = task;
  c.preset_name = full;
  const bool classification = task == Task::classification;
  if ((full == "td-class" || full == "tds-class") != classification)
    throw ContractError("preset '" + full + "' does not match task " +
                        realmlp::to_string(task));

  if (full == "td-class" || full == "td-reg") {
    c.num_embeddings = NumEmbeddingKind::pbld;
    c.max_onehot = 8;
    c.scaling_layer = true;
    c.parametric_activation = true;
    c.init = InitScheme::data_dependent;
    c.bias_init = BiasInitKind::he5_standin;
    c.dropout = 0.15;
    c.weight_decay = 0.02;
    c.learning_rate = classification ? 0.04 : 0.2;
  } else if (full == "tds-class" || full == "tds-reg") {
    c.num_embeddings = NumEmbeddingKind::none;
    c.max_onehot = kUnlimitedOneHot;
    c.scaling_layer = true;
    c.parametric_activation = false;
    c.init = InitScheme::simple;
    c.dropout = 0.0;
    c.weight_decay = 0.0;
    c.learning_rate = classification ? 0.04 : 0.07;
  } else {
    throw ContractError("unknown preset: " + name);
  }
  c.activation = classification ? act::Kind::selu : act::Kind::mish;
  c.label_smoothing = classification ? 0.1 : 0.0;
  c.output_clip = !classification && (full == "td-reg");
  c.stop_metric =
      classification ? StopMetric::class_error : StopMetric::rmse;
  return c;
}

void apply_override(ModelConfig& c, const std::string& key,
                    const std::string& value) {
  if (key == "lr" || key == "learning_rate") {
    c.learning_rate = parse_real(key, value);
  } else if (key == "dropout") {
    c.dropout = parse_real(key, value);
  } else if (key == "wd" || key == "weight_decay") {
    c.weight_decay = parse_real(key, value);
  } else if (key == "label_smoothing") {
    c.label_smoothing = parse_real(key, value);
  } else if (key == "beta1") {
    c.beta1 = parse_real(key, value);
  } else if (key == "beta2") {
    c.beta2 = parse_real(key, value);
  } else if (key == "adam_eps") {
    c.adam_eps = parse_real(key, value);
  } else if (key == "emb_init_std") {
    c.emb_init_std = parse_real(key, value);
  } else if (key == "emb_hidden_dim") {
    c.emb_hidden_dim = static_cast<int>(parse_int(key, value));
  } else if (key == "emb_dim") {
    c.emb_dim = static_cast<int>(parse_int(key, value));
  } else if (key == "cat_emb_dim") {
    c.cat_emb_dim = static_cast<int>(parse_int(key, value));
  } else if (key == "epochs") {
    c.epochs = static_cast<int>(parse_int(key, value));
  } else if (key == "batch_size") {
    c.batch_size = static_cast<int>(parse_int(key, value));
  } else if (key == "init_sample_cap") {
    c.init_sample_cap = parse_int(key, value);
  } else if (key == "max_onehot") {
    c.max_onehot = value == "inf" ? kUnlimitedOneHot
                                  : static_cast<int>(parse_int(key, value));
  } else if (key == "hidden_sizes") {
    c.hidden_sizes = parse_hidden_sizes(value);
  } else if (key == "activation") {
    if (value == "relu")
      c.activation = act::Kind::relu;
    else if (value == "selu")
      c.activation = act::Kind::selu;
    else if (value == "mish")
      c.activation = act::Kind::mish;
    else
      throw ContractError("config: unknown activation: " + value);
  } else if (key == "num_embeddings") {
    if (value == "none")
      c.num_embeddings = NumEmbeddingKind::none;
    else if (value == "pbld")
      c.num_embeddings = NumEmbeddingKind::pbld;
    else if (value == "pl")
      c.num_embeddings = NumEmbeddingKind::pl;
    else if (value == "plr")
      c.num_embeddings = NumEmbeddingKind::plr;
    else
      throw ContractError("config: unknown num_embeddings: " + value);
  } else if (key == "param_act") {
    c.parametric_activation = parse_switch(key, value);
  } else if (key == "scaling_layer") {
    c.scaling_layer = parse_switch(key, value);
  } else if (key == "output_clip") {
    c.output_clip = parse_switch(key, value);
  } else if (key == "init") {
    if (value == "data")
      c.init = InitScheme::data_dependent;
    else if (value == "simple")
      c.init = InitScheme::simple;
    else
      throw ContractError("config: unknown init scheme: " + value);
  } else if (key == "bias_init") {
    if (value == "he5")
      c.bias_init = BiasInitKind::he5_standin;
    else if (value == "zero")
      c.bias_init = BiasInitKind::zero;
    else if (value == "normal")
      c.bias_init = BiasInitKind::normal;
    else
      throw ContractError("config: unknown bias_init: " + value);
  } else if (key == "tie_break") {
    if (value == "last")
      c.tie_break = TieBreak::last;
    else if (value == "first")
      c.tie_break = TieBreak::first;
    else
      throw ContractError("config: unknown tie_break: " + value);
  } else if (key == "schedule" || key == "lr_schedule") {
    c.lr_schedule = schedule_from_string(value);
  } else if (key == "dropout_schedule") {
    c.dropout_schedule = schedule_from_string(value);
  } else if (key == "wd_schedule") {
    c.wd_schedule = schedule_from_string(value);
  } else if (key == "lr_factor_num_emb") {
    c.lr_factor_num_emb = parse_real(key, value);
  } else if (key == "lr_factor_scaling") {
    c.lr_factor_scaling = parse_real(key, value);
  } else if (key == "lr_factor_bias") {
    c.lr_factor_bias = parse_real(key, value);
  } else if (key == "lr_factor_alpha") {
    c.lr_factor_alpha = parse_real(key, value);
  } else if (key == "wd_factor_bias") {
    c.wd_factor_bias = parse_real(key, value);
  } else if (key == "stop_metric") {
    c.stop_metric = stop_metric_from_string(value);
  } else {
    throw ContractError("config: unknown key '" + key + "'");
  }
}

std::vector<std::pair<std::string, std::string>> parse_config_text(
    const std::string& text) {
  std::vector<std::pair<std::string, std::string>> kv;
  std::istringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ContractError("config: expected 'key = value' on line " +
                          std::to_string(lineno));
    kv.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return kv;
}

std::vector<std::pair<std::string, std::string>> parse_config_file(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

ModelConfig config_from_overrides(
    const std::string& default_preset, Task task,
    const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::string preset = default_preset;
  std::size_t start = 0;
  if (!overrides.empty() && overrides[0].first == "preset") {
    preset = overrides[0].second;
    start = 1;
  }
  for (std::size_t i = start; i < overrides.size(); ++i)
    if (overrides[i].first == "preset")
      throw ContractError("config: 'preset' must be the first key");
  ModelConfig c = preset_config(preset, task);
  for (std::size_t i = start; i < overrides.size(); ++i)
    apply_override(c, overrides[i].first, overrides[i].second);
  return c;
}

std::map<std::string, std::string> config_to_kv(const ModelConfig& c) {
  std::map<std::string, std::string> kv;
  kv["preset"] = c.preset_name;
  kv["num_embeddings"] = to_string(c.num_embeddings);
  kv["emb_hidden_dim"] = std::to_string(c.emb_hidden_dim);
  kv["emb_dim"] = std::to_string(c.emb_dim);
  kv["emb_init_std"] = fmt_real(c.emb_init_std);
  kv["max_onehot"] =
      c.max_onehot == kUnlimitedOneHot ? "inf" : std::to_string(c.max_onehot);
  kv["cat_emb_dim"] = std::to_string(c.cat_emb_dim);
  kv["scaling_layer"] = c.scaling_layer ? "on" : "off";
  kv["hidden_sizes"] = hidden_sizes_to_string(c.hidden_sizes);
  kv["activation"] = to_string(c.activation);
  kv["param_act"] = c.parametric_activation ? "on" : "off";
  kv["init"] = c.init == InitScheme::data_dependent ? "data" : "simple";
  kv["bias_init"] = c.bias_init == BiasInitKind::he5_standin ? "he5"
                    : c.bias_init == BiasInitKind::zero      ? "zero"
                                                             : "normal";
  kv["init_sample_cap"] = std::to_string(c.init_sample_cap);
  kv["beta1"] = fmt_real(c.beta1);
  kv["beta2"] = fmt_real(c.beta2);
  kv["adam_eps"] = fmt_real(c.adam_eps);
  kv["epochs"] = std::to_string(c.epochs);
  kv["batch_size"] = std::to_string(c.batch_size);
  kv["lr"] = fmt_real(c.learning_rate);
  kv["lr_schedule"] = to_string(c.lr_schedule);
  kv["lr_factor_num_emb"] = fmt_real(c.lr_factor_num_emb);
  kv["lr_factor_scaling"] = fmt_real(c.lr_factor_scaling);
  kv["lr_factor_bias"] = fmt_real(c.lr_factor_bias);
  kv["lr_factor_alpha"] = fmt_real(c.lr_factor_alpha);
  kv["dropout"] = fmt_real(c.dropout);
  kv["dropout_schedule"] = to_string(c.dropout_schedule);
  kv["wd"] = fmt_real(c.weight_decay);
  kv["wd_schedule"] = to_string(c.wd_schedule);
  kv["wd_factor_bias"] = fmt_real(c.wd_factor_bias);
  kv["label_smoothing"] = fmt_real(c.label_smoothing);
  kv["output_clip"] = c.output_clip ? "on" : "off";
  kv["stop_metric"] = to_string(c.stop_metric);
  kv["tie_break"] = c.tie_break == TieBreak::last ? "last" : "first";
  return kv;
}

ModelConfig config_from_kv(const std::map<std::string, std::string>& kv) {
  auto preset = kv.find("preset");
  if (preset == kv.end())
    throw ContractError("config kv: missing 'preset'");
  // the preset determines the task; explicit keys then restore every field
  const std::string& name = preset->second;
  const Task task = name.ends_with("-reg") ? Task::regression
                                           : Task::classification;
  ModelConfig c = preset_config(name, task);
  for (const auto& [key, value] : kv)
    if (key != "preset") apply_override(c, key, value);
  return c;
}

}  // namespace realmlp
