#pragma once

#include <cstdint>
#include <string>

namespace realmlp {
namespace cli {

/// CLI subcommand implementations; all I/O goes through files so the
/// commands are directly testable. Every function throws ContractError
/// (or std::exception) on failure; the binary maps that to exit code 1.

struct TrainArgs {
  std::string data;
  std::string schema;
  std::string preset = "td";
  std::string config;  // optional override file
  std::uint64_t seed = 0;
  std::string out;
  std::string stop_metric;  // optional: err | rmse | ce
};
void cmd_train(const TrainArgs& args);

struct PredictArgs {
  std::string model;
  std::string data;
  std::string out;
};
void cmd_predict(const PredictArgs& args);

struct EvaluateArgs {
  std::string model;
  std::string data;
  std::string metric = "err";
  std::string out;  // optional; stdout when empty
};
void cmd_evaluate(const EvaluateArgs& args);

struct HpoArgs {
  std::string data;
  std::string schema;
  int steps = 50;
  std::uint64_t seed = 0;
  std::string out_dir;
  int jobs = 1;
};
void cmd_hpo(const HpoArgs& args);

struct EnsembleArgs {
  std::string data;
  std::string schema;
  std::string mode = "bagging";     // bagging | refitting
  int members = 5;                  // 1 | 5
  std::string stopping = "indiv";   // indiv | joint
  std::string preset = "td";
  std::string config;
  std::uint64_t seed = 0;
  std::string out_dir;
  int jobs = 1;
};
void cmd_ensemble(const EnsembleArgs& args);

struct BenchArgs {
  std::string errors;
  std::string groups;          // optional
  std::string agg = "sgm";     // sgm | arith | rank | norm | winrate
  double eps = 0.01;
  bool ci = false;
  std::string ratio_baseline;  // optional: add 100 (SGM/SGM_base - 1) columns
  std::string out;             // optional; stdout when empty
};
void cmd_bench(const BenchArgs& args);

/// Default worker count: REALMLP_JOBS, else 1.
int default_jobs();

}  // namespace cli
}  // namespace realmlp
