#include "realmlp/commands.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "realmlp/bench.hpp"
#include "realmlp/ensemble.hpp"
#include "realmlp/hpo.hpp"
#include "realmlp/model_io.hpp"
#include "realmlp/pipeline.hpp"

namespace realmlp {
namespace cli {
namespace {

// all report floats use 9 significant digits
std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char c : s) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ContractError("cannot write file: " + path);
  return out;
}

void write_report(const std::string& path, const std::string& content) {
  if (path.empty()) {
    std::cout << content;
    return;
  }
  auto out = open_out(path);
  out << content;
}

ModelConfig resolve_config(const std::string& preset,
                           const std::string& config_path, Task task,
                           const std::string& stop_metric) {
  std::vector<std::pair<std::string, std::string>> overrides;
  if (!config_path.empty()) overrides = parse_config_file(config_path);
  ModelConfig config = config_from_overrides(preset, task, overrides);
  if (!stop_metric.empty())
    config.stop_metric = stop_metric_from_string(stop_metric);
  return config;
}

void write_epoch_log(const std::string& path, const TrainRecord& record) {
  auto out = open_out(path);
  out << "epoch,train_loss,val_metric\n";
  for (std::size_t e = 0; e < record.epochs.size(); ++e)
    out << e << "," << fmt(record.epochs[e].train_loss) << ","
        << fmt(record.epochs[e].val_metric) << "\n";
}

}  // namespace

int default_jobs() {
  if (const char* env = std::getenv("REALMLP_JOBS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  return 1;
}

void cmd_train(const TrainArgs& args) {
  const DatasetSchema schema = read_schema(args.schema);
  const Dataset dataset = load_csv(args.data, schema);
  const ModelConfig config =
      resolve_config(args.preset, args.config, schema.task, args.stop_metric);

  const SplitIndices split = make_split(dataset.n_rows, args.seed);
  FitOutcome fit =
      fit_realmlp(dataset, split.train, split.validation, config, args.seed);

  ModelBundle bundle{std::move(fit.model), schema, dataset.vocabulary(),
                     args.seed};
  save_model(bundle, args.out);
  write_epoch_log(args.out + ".epochs.csv", fit.record);

  std::cout << "trained " << config.preset_name << " for "
            << fit.record.epochs.size() << " epochs; best epoch "
            << fit.record.best_epoch << ", validation "
            << to_string(config.stop_metric) << " "
            << fmt(fit.record.best_metric) << "\n";
  if (fit.record.aborted)
    std::cout << "warning: training aborted early: " << fit.record.abort_reason
              << "\n";
}

void cmd_predict(const PredictArgs& args) {
  const ModelBundle bundle = load_model(args.model);
  const Dataset dataset = load_csv(args.data, bundle.schema,
                                   bundle.vocabulary, TargetPolicy::optional);
  const IndexList rows = all_rows(dataset);

  std::string report;
  if (bundle.model.config.task == Task::classification) {
    const MatrixXd probs = predict_proba(bundle.model, dataset, rows);
    report += "row";
    for (const auto& label : bundle.vocabulary.target_labels)
      report += "," + csv_quote("prob_" + label);
    report += "\n";
    for (Index r = 0; r < probs.rows(); ++r) {
      report += std::to_string(dataset.source_rows[static_cast<std::size_t>(r)]);
      for (Index c = 0; c < probs.cols(); ++c)
        report += "," + fmt(probs(r, c));
      report += "\n";
    }
  } else {
    const VectorXd values = predict_values(bundle.model, dataset, rows);
    report += "row,prediction\n";
    for (Index r = 0; r < values.size(); ++r)
      report += std::to_string(dataset.source_rows[static_cast<std::size_t>(r)]) +
                "," + fmt(values[r]) + "\n";
  }
  write_report(args.out, report);
}

void cmd_evaluate(const EvaluateArgs& args) {
  const ModelBundle bundle = load_model(args.model);
  const Dataset dataset =
      load_csv(args.data, bundle.schema, bundle.vocabulary);
  const EvalMetric metric = eval_metric_from_string(args.metric);
  const double value =
      evaluate_model(bundle.model, dataset, all_rows(dataset), metric);
  write_report(args.out, args.metric + " " + fmt(value) + "\n");
}

void cmd_hpo(const HpoArgs& args) {
  const DatasetSchema schema = read_schema(args.schema);
  const Dataset dataset = load_csv(args.data, schema);
  const SplitIndices split = make_split(dataset.n_rows, args.seed);
  const hpo::SearchSpace space = hpo::realmlp_search_space(schema.task);

  std::filesystem::create_directories(args.out_dir);
  const hpo::RandomSearchResult result =
      hpo::run_hpo(dataset, split, space, args.steps, args.seed, args.jobs);

  // trial log: every sampled dimension plus metrics
  std::string log = "trial,seed";
  for (const auto& d : space.dims) log += "," + d.name;
  log += ",val_metric,test_metric,wall_seconds,status\n";
  for (const auto& t : result.trials) {
    log += std::to_string(t.index) + "," + std::to_string(t.seed);
    for (const auto& [key, value] : t.sample) log += "," + csv_quote(value);
    log += "," + (t.failed ? std::string() : fmt(t.val_metric));
    log += "," + (t.failed ? std::string() : fmt(t.test_metric));
    log += "," + fmt(t.wall_seconds);
    log += t.failed ? ",failed" : ",ok";
    log += "\n";
  }
  write_report(args.out_dir + "/trials.csv", log);

  // deterministic refit of the winning trial
  const hpo::Trial& best =
      result.trials[static_cast<std::size_t>(result.best_index)];
  const ModelConfig base = preset_config("td", schema.task);
  const ModelConfig best_config = hpo::trial_config(base, best);
  FitOutcome fit = fit_realmlp(dataset, split.train, split.validation,
                               best_config, best.seed);
  ModelBundle bundle{std::move(fit.model), schema, dataset.vocabulary(),
                     best.seed};
  save_model(bundle, args.out_dir + "/best.rmlp");
  write_epoch_log(args.out_dir + "/best.rmlp.epochs.csv", fit.record);

  std::cout << "hpo: best trial " << best.index << " (validation "
            << fmt(best.val_metric) << ", test " << fmt(best.test_metric)
            << ") of " << result.trials.size() << "\n";
}

void cmd_ensemble(const EnsembleArgs& args) {
  const DatasetSchema schema = read_schema(args.schema);
  const Dataset dataset = load_csv(args.data, schema);
  const ModelConfig config =
      resolve_config(args.preset, args.config, schema.task, "");

  ensemble::EnsembleConfig spec;
  spec.members = args.members;
  if (args.mode == "bagging")
    spec.refitting = false;
  else if (args.mode == "refitting")
    spec.refitting = true;
  else
    throw ContractError("ensemble: mode must be bagging or refitting");
  if (args.stopping == "indiv")
    spec.joint_stopping = false;
  else if (args.stopping == "joint")
    spec.joint_stopping = true;
  else
    throw ContractError("ensemble: stopping must be indiv or joint");

  const SplitIndices split = make_split(dataset.n_rows, args.seed);
  const IndexList pool = split.train_and_validation();
  ensemble::EnsembleOutcome ens = ensemble::run_ensemble(
      dataset, pool, config, spec, args.seed, args.jobs);

  std::filesystem::create_directories(args.out_dir);
  for (std::size_t i = 0; i < ens.models.size(); ++i) {
    const ModelBundle bundle{
        ens.models[i], schema, dataset.vocabulary(),
        derive_seed(args.seed, spec.refitting ? "refit" : "member",
                    static_cast<std::uint64_t>(i))};
    save_model(bundle, args.out_dir + "/member_" + std::to_string(i) + ".rmlp");
  }

  nlohmann::json manifest;
  manifest["mode"] = args.mode;
  manifest["stopping"] = args.stopping;
  manifest["members"] = args.members;
  manifest["seed"] = args.seed;
  manifest["chosen_epochs"] = ens.chosen_epochs;
  manifest["fold_sizes"] = nlohmann::json::array();
  for (const auto& f : ens.folds.folds)
    manifest["fold_sizes"].push_back(f.size());
  manifest["unassigned_rows"] = ens.folds.unassigned.size();
  write_report(args.out_dir + "/ensemble.json", manifest.dump(2) + "\n");

  // test metrics for the ensemble and each member
  const bool classification = schema.task == Task::classification;
  std::string metrics = "entity,test_metric\n";
  const EvalMetric metric =
      classification ? EvalMetric::err : EvalMetric::nrmse;
  for (std::size_t i = 0; i < ens.models.size(); ++i)
    metrics += "member_" + std::to_string(i) + "," +
               fmt(evaluate_model(ens.models[i], dataset, split.test, metric)) +
               "\n";
  double ens_metric = 0.0;
  if (classification) {
    const MatrixXd probs =
        ensemble::predict_ensemble_proba(ens, dataset, split.test);
    std::vector<int> truth, pred(static_cast<std::size_t>(probs.rows()));
    for (Index r : split.test) truth.push_back(dataset.class_targets[r]);
    for (Index r = 0; r < probs.rows(); ++r) {
      Index best = 0;
      probs.row(r).maxCoeff(&best);
      pred[static_cast<std::size_t>(r)] = static_cast<int>(best);
    }
    ens_metric = classification_error(truth, pred);
  } else {
    const VectorXd values =
        ensemble::predict_ensemble_values(ens, dataset, split.test);
    VectorXd truth(static_cast<Index>(split.test.size()));
    for (std::size_t i = 0; i < split.test.size(); ++i)
      truth[static_cast<Index>(i)] = dataset.real_targets[split.test[i]];
    ens_metric = nrmse(truth, values);
  }
  metrics += "ensemble," + fmt(ens_metric) + "\n";
  write_report(args.out_dir + "/metrics.csv", metrics);

  std::cout << "ensemble: " << args.mode << ", " << args.members
            << " member(s), " << args.stopping << " stopping; test metric "
            << fmt(ens_metric) << "\n";
}

void cmd_bench(const BenchArgs& args) {
  const BenchTable table = load_bench_table(args.errors, args.groups);
  std::string report;

  if (args.agg == "winrate") {
    const MatrixXd rates = winrate_matrix(table.per_method);
    report += "method";
    for (const auto& m : table.methods) report += "," + m;
    report += "\n";
    for (Index a = 0; a < rates.rows(); ++a) {
      report += table.methods[static_cast<std::size_t>(a)];
      for (Index b = 0; b < rates.cols(); ++b)
        report += "," + fmt(rates(a, b));
      report += "\n";
    }
    write_report(args.out, report);
    return;
  }

  Index baseline = -1;
  if (!args.ratio_baseline.empty()) {
    for (std::size_t m = 0; m < table.methods.size(); ++m)
      if (table.methods[m] == args.ratio_baseline)
        baseline = static_cast<Index>(m);
    if (baseline < 0)
      throw ContractError("bench: unknown baseline method '" +
                          args.ratio_baseline + "'");
  }

  report += "method,score";
  if (args.ci) report += ",ci_lower,ci_upper";
  if (baseline >= 0) {
    report += ",vs_baseline_pct";
    if (args.ci) report += ",vs_baseline_lower,vs_baseline_upper";
  }
  report += "\n";

  std::vector<double> scores;
  if (args.agg == "sgm") {
    for (const auto& em : table.per_method)
      scores.push_back(sgm(em, args.eps));
  } else {
    AggregateKind kind;
    if (args.agg == "arith")
      kind = AggregateKind::arithmetic;
    else if (args.agg == "rank")
      kind = AggregateKind::mean_rank;
    else if (args.agg == "norm")
      kind = AggregateKind::normalized;
    else
      throw ContractError("bench: unknown aggregation '" + args.agg + "'");
    scores = aggregate_alt(table.per_method, kind);
  }

  for (std::size_t m = 0; m < table.methods.size(); ++m) {
    report += table.methods[m] + "," + fmt(scores[m]);
    if (args.ci) {
      if (args.agg != "sgm")
        throw ContractError("bench: --ci is defined for --agg sgm");
      const CIResult ci = ci_sgm(table.per_method[m], args.eps);
      report += "," + fmt(ci.lower) + "," + fmt(ci.upper);
    }
    if (baseline >= 0) {
      if (args.agg != "sgm")
        throw ContractError("bench: --ratio-baseline is defined for --agg sgm");
      const CIResult ratio =
          ci_ratio(table.per_method[m],
                   table.per_method[static_cast<std::size_t>(baseline)],
                   args.eps);
      report += "," + fmt(ratio.point);
      if (args.ci) report += "," + fmt(ratio.lower) + "," + fmt(ratio.upper);
    }
    report += "\n";
  }
  write_report(args.out, report);
}

}  // namespace cli
}  // namespace realmlp
