#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aisac/mdp.hpp"
#include "aisac/training.hpp"

namespace aisac {

// Flat "key = value" configuration; '#' starts a comment. Duplicate keys are
// an error.
using KeyValues = std::map<std::string, std::string>;
KeyValues parse_key_values(std::istream& in);
KeyValues load_key_values(const std::string& path);

struct TaskSpec {
  std::string name = "chain";  // chain | gridworld | random | pendulum | reacher
  int n_states = 3;            // chain, random
  int n_actions = 2;           // random
  int width = 4;               // gridworld
  int height = 4;
  double slip = 0.1;
  double distractor_reward = 0.2;
  double step_cost = 0.01;
  std::uint64_t mdp_seed = 0;  // random

  bool is_tabular() const { return name != "pendulum" && name != "reacher"; }
};

struct VarianceStudySpec {
  int n_mdps = 200;
  int n_states = 4;
  int n_actions = 3;
  bool scalar_theta = false;  // single-parameter softmax family instead of tabular theta
  std::string behavior = "ais";  // ais | on_policy
  double epsilon_mix = 0.05;
  double theta_scale = 1.0;
  double gamma = 0.99;
};

struct ExperimentSpec {
  TaskSpec task;
  std::vector<Algorithm> algorithms{Algorithm::Aisac, Algorithm::Baseline};
  TrainConfig train;
  int n_seeds = 1;
  std::uint64_t seed = 0;
  std::string output_dir = "results";
  int smoothing_window = 51;
  int smoothing_order = 3;
  int workers = 0;  // 0 = hardware concurrency
  VarianceStudySpec variance;

  void validate() const;
  // Resolved configuration as sorted "key = value" lines; parses back to the
  // same spec.
  std::string to_text() const;
};

// Unknown keys and malformed values throw ConfigError.
ExperimentSpec parse_experiment_spec(const KeyValues& values);
ExperimentSpec load_experiment_spec(const std::string& path);

TabularMdp make_tabular_task(const TaskSpec& task, double gamma);
ContinuousTask make_continuous_task(const TaskSpec& task);

// One training run of `config` on the task.
TrainResult run_task(const TaskSpec& task, const TrainConfig& config);

struct RunOutcome {
  Algorithm algorithm;
  std::uint64_t seed;
  TrainResult result;
};

// All algorithm x seed runs; seed k is spec.seed + k for every algorithm.
// Runs go to a bounded worker pool and come back in (algorithm, seed) order.
std::vector<RunOutcome> run_all(const ExperimentSpec& spec);

struct AggregateCurve {
  Algorithm algorithm;
  std::vector<int> n_runs;
  std::vector<double> target_mean;
  std::vector<double> target_std;
  std::vector<double> behavior_mean;
  std::vector<double> behavior_std;
  std::vector<double> target_mean_smoothed;
  std::vector<double> target_std_smoothed;
  std::vector<double> behavior_mean_smoothed;
};

// Mean and sample std across runs per iteration. Runs that diverged contribute
// only the iterations they completed. Series shorter than the window are
// smoothed with the largest admissible odd window, or copied when none exists.
AggregateCurve aggregate_runs(const std::vector<RunOutcome>& runs, Algorithm algorithm, int window, int order);

// Smoothing with the window shrunk to fit short series (see aggregate_runs).
std::vector<double> smooth_series(const std::vector<double>& series, int window, int order);

void write_run_csv(std::ostream& out, const TrainResult& result);
void write_steps_csv(std::ostream& out, const TrainResult& result);
void write_aggregate_csv(std::ostream& out, const std::vector<AggregateCurve>& curves);

std::string run_file_name(const TaskSpec& task, Algorithm algorithm, std::uint64_t seed);

struct ExperimentReport {
  std::vector<RunOutcome> runs;
  std::vector<AggregateCurve> curves;
  std::vector<std::string> files;
  int n_diverged = 0;
};

// Runs everything and writes per-run CSVs under <out>/runs, aggregate.csv and
// manifest.txt under <out>.
ExperimentReport run_experiment(const ExperimentSpec& spec, const std::string& output_dir);

struct VarianceRow {
  std::uint64_t mdp_seed;
  int state;
  double var_mc;
  double var_is;
  bool reduced;
  double gradient_norm;  // |I(s)|
};

struct VarianceStudyResult {
  std::vector<VarianceRow> rows;
  int n_reduced = 0;
  double reduction_fraction = 0.0;
};

// Exact-summation variance comparison over random MDPs and random theta.
VarianceStudyResult run_variance_study(const VarianceStudySpec& spec, std::uint64_t seed);
void write_variance_csv(std::ostream& out, const VarianceStudyResult& result);
std::string variance_summary_line(const VarianceStudyResult& result);

}  // namespace aisac
