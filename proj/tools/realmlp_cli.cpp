#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "realmlp/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"RealMLP tabular neural networks: training, prediction, "
               "hyperparameter search, ensembles and benchmark aggregation"};
  app.require_subcommand(1);

  using namespace realmlp::cli;

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a model on a CSV dataset");
  t->add_option("--data", train.data, "Dataset CSV")->required();
  t->add_option("--schema", train.schema, "Schema file")->required();
  t->add_option("--preset", train.preset,
                "Preset: td, td-s, td-class, td-reg, tds-class, tds-reg");
  t->add_option("--config", train.config, "key = value override file");
  t->add_option("--seed", train.seed, "Random seed");
  t->add_option("--out", train.out, "Output model file")->required();
  t->add_option("--stop-metric", train.stop_metric,
                "Best-epoch selection metric: err, rmse or ce");

  PredictArgs predict;
  auto* p = app.add_subcommand("predict", "Predict with a saved model");
  p->add_option("--model", predict.model, "Model file")->required();
  p->add_option("--data", predict.data, "Dataset CSV")->required();
  p->add_option("--out", predict.out, "Predictions CSV (stdout if omitted)");

  EvaluateArgs evaluate;
  auto* e = app.add_subcommand("evaluate", "Evaluate a saved model");
  e->add_option("--model", evaluate.model, "Model file")->required();
  e->add_option("--data", evaluate.data, "Dataset CSV")->required();
  e->add_option("--metric", evaluate.metric, "err, nrmse, auc-ovr or ce");
  e->add_option("--out", evaluate.out, "Report file (stdout if omitted)");

  HpoArgs hpo;
  hpo.jobs = default_jobs();
  auto* h = app.add_subcommand("hpo", "Random-search hyperparameter tuning");
  h->add_option("--data", hpo.data, "Dataset CSV")->required();
  h->add_option("--schema", hpo.schema, "Schema file")->required();
  h->add_option("--steps", hpo.steps, "Random search steps");
  h->add_option("--seed", hpo.seed, "Random seed");
  h->add_option("--out-dir", hpo.out_dir, "Output directory")->required();
  h->add_option("--jobs", hpo.jobs, "Parallel trials (REALMLP_JOBS default)");

  EnsembleArgs ens;
  ens.jobs = default_jobs();
  auto* n = app.add_subcommand("ensemble", "Bagging/refitting ensembles");
  n->add_option("--data", ens.data, "Dataset CSV")->required();
  n->add_option("--schema", ens.schema, "Schema file")->required();
  n->add_option("--mode", ens.mode, "bagging or refitting");
  n->add_option("--members", ens.members, "Ensemble size (1 or 5)");
  n->add_option("--stopping", ens.stopping, "indiv or joint");
  n->add_option("--preset", ens.preset, "Training preset");
  n->add_option("--config", ens.config, "key = value override file");
  n->add_option("--seed", ens.seed, "Random seed");
  n->add_option("--out-dir", ens.out_dir, "Output directory")->required();
  n->add_option("--jobs", ens.jobs, "Parallel members (REALMLP_JOBS default)");

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "Aggregate benchmark error tables");
  b->add_option("--errors", bench.errors, "CSV: method,dataset,split,error")
      ->required();
  b->add_option("--groups", bench.groups, "CSV: dataset,group");
  b->add_option("--agg", bench.agg, "sgm, arith, rank, norm or winrate");
  b->add_option("--eps", bench.eps, "SGM shift");
  b->add_flag("--ci", bench.ci, "Student-t confidence intervals (sgm only)");
  b->add_option("--ratio-baseline", bench.ratio_baseline,
                "Report error increase in % vs this method (sgm only)");
  b->add_option("--out", bench.out, "Report file (stdout if omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*t) cmd_train(train);
    if (*p) cmd_predict(predict);
    if (*e) cmd_evaluate(evaluate);
    if (*h) cmd_hpo(hpo);
    if (*n) cmd_ensemble(ens);
    if (*b) cmd_bench(bench);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
