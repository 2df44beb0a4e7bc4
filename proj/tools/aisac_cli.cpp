// aisac: command-line front end for training runs, experiments, variance
// studies and CSV smoothing.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "aisac/behavior.hpp"
#include "aisac/experiment.hpp"
#include "aisac/smoothing.hpp"
#include "aisac/tensor_io.hpp"

namespace fs = std::filesystem;
using namespace aisac;

namespace {

struct CommonOptions {
  std::string spec_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

ExperimentSpec resolve_spec(const CommonOptions& opts) {
  ExperimentSpec spec = opts.spec_path.empty() ? parse_experiment_spec({}) : load_experiment_spec(opts.spec_path);
  if (opts.seed) spec.seed = *opts.seed;
  if (!opts.out.empty()) spec.output_dir = opts.out;
  return spec;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

void dump_behavior(const ExperimentSpec& spec, const TrainConfig& config, const TrainResult& result,
                   const fs::path& path) {
  std::ofstream out = open_output(path);
  if (spec.task.is_tabular()) {
    const TabularMdp mdp = make_tabular_task(spec.task, config.gamma);
    SoftmaxPolicy policy(mdp.n_states, mdp.n_actions);
    policy.set_parameters(result.policy_parameters);
    TabularCritic critic(mdp.n_states, mdp.n_actions, config.alpha_w);
    critic.weights() = result.critic_weights;
    write_behavior_csv(out, build_tabular_behavior(policy, critic.q_table(), config.epsilon_mix), policy);
    return;
  }
  const ContinuousTask task = make_continuous_task(spec.task);
  GaussianPolicy policy(task.policy_features, task.env->action_dim());
  policy.set_parameters(result.policy_parameters);
  LinearCritic critic(task.critic_features, task.env->action_dim(), config.alpha_w, task.env->action_low(),
                      task.env->action_high());
  critic.weights() = result.critic_weights;
  auto env = task.env->clone();
  Rng rng(substream_seed(config.seed, 99));
  std::vector<Vector> states;
  std::vector<GaussianBehavior> fits;
  for (int k = 0; k < config.eval_rollouts; ++k) {
    states.push_back(env->reset(substream_seed(config.seed, 100 + static_cast<std::uint64_t>(k))));
    fits.push_back(cross_entropy_fit(policy, critic, states.back(), config.n_proposal, rng, config.std_min,
                                     config.epsilon_mix, config.ce_rounds));
  }
  write_behavior_csv(out, states, fits);
}

int cmd_train(const CommonOptions& opts, const std::string& algorithm, bool dump) {
  ExperimentSpec spec = resolve_spec(opts);
  TrainConfig config = spec.train;
  config.seed = spec.seed;
  config.algorithm = algorithm.empty() ? spec.algorithms.front() : parse_algorithm(algorithm);
  const TrainResult result = run_task(spec.task, config);
  const fs::path root(spec.output_dir);
  fs::create_directories(root);
  {
    auto out = open_output(root / run_file_name(spec.task, config.algorithm, config.seed));
    write_run_csv(out, result);
  }
  if (config.record_steps) {
    auto out = open_output(root / "steps.csv");
    write_steps_csv(out, result);
  }
  save_critic((root / "critic.txt").string(), result.critic_weights);
  save_tensor_file((root / "policy.txt").string(),
                   {Tensor{"theta", {static_cast<int>(result.policy_parameters.size())},
                           std::vector<double>(result.policy_parameters.data(),
                                               result.policy_parameters.data() + result.policy_parameters.size())}});
  if (dump) dump_behavior(spec, config, result, root / "behavior.csv");
  if (!opts.quiet) {
    std::cout << to_string(config.algorithm) << " on " << spec.task.name << ": " << result.summaries.size()
              << " iterations";
    if (!result.summaries.empty()) {
      std::cout << ", final target return " << format_double(result.summaries.back().target_return_mean);
    }
    std::cout << (result.diverged ? ", DIVERGED: " + result.divergence_message : "") << '\n';
  }
  return 0;
}

int cmd_experiment(const CommonOptions& opts) {
  const ExperimentSpec spec = resolve_spec(opts);
  const ExperimentReport report = run_experiment(spec, spec.output_dir);
  if (!opts.quiet) {
    for (const auto& c : report.curves) {
      if (c.target_mean.empty()) continue;
      std::cout << to_string(c.algorithm) << ": final mean target return " << format_double(c.target_mean.back())
                << " (std " << format_double(c.target_std.back()) << ")\n";
    }
    std::cout << report.files.size() << " files written to " << spec.output_dir << ", " << report.n_diverged
              << " diverged runs\n";
  }
  return 0;
}

int cmd_variance(const CommonOptions& opts) {
  const ExperimentSpec spec = resolve_spec(opts);
  const VarianceStudyResult result = run_variance_study(spec.variance, spec.seed);
  fs::create_directories(spec.output_dir);
  auto out = open_output(fs::path(spec.output_dir) / "variance_study.csv");
  write_variance_csv(out, result);
  if (!opts.quiet) std::cout << variance_summary_line(result) << '\n';
  return 0;
}

int cmd_smooth(const CommonOptions& opts, const std::string& input, const std::string& column, int window, int order) {
  std::ifstream in(input);
  if (!in) throw ConfigError("cannot open " + input);
  std::string header;
  std::getline(in, header);
  std::vector<std::string> names;
  {
    std::stringstream hs(header);
    std::string name;
    while (std::getline(hs, name, ',')) names.push_back(name);
  }
  const auto it = std::find(names.begin(), names.end(), column);
  if (it == names.end()) throw ConfigError("column '" + column + "' not found in " + input);
  const auto index = static_cast<std::size_t>(it - names.begin());
  std::vector<std::string> lines;
  std::vector<double> values;
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string cell;
    for (std::size_t i = 0; i <= index && std::getline(ls, cell, ','); ++i) {}
    try {
      values.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw ConfigError("non-numeric value '" + cell + "' in column " + column);
    }
    lines.push_back(line);
  }
  const std::vector<double> smoothed = savitzky_golay(values, window, order);
  std::ofstream file;
  if (!opts.out.empty()) file = open_output(opts.out);
  std::ostream& out = opts.out.empty() ? std::cout : file;
  out << header << ',' << column << "_smoothed\n";
  for (std::size_t i = 0; i < lines.size(); ++i) out << lines[i] << ',' << format_double(smoothed[i]) << '\n';
  return 0;
}

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--spec", opts.spec_path, "Experiment spec file (key = value)");
  cmd->add_option("--out", opts.out, "Output directory (file for smooth)");
  cmd->add_option("--seed", opts.seed, "Base seed, overrides the spec file");
  cmd->add_flag("--quiet", opts.quiet, "Suppress progress output");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active-importance-sampling actor-critic experiments"};
  app.require_subcommand(1);
  CommonOptions opts;

  auto* train = app.add_subcommand("train", "Single training run");
  add_common(train, opts);
  std::string algorithm;
  bool dump = false;
  train->add_option("--algorithm", algorithm, "aisac or baseline (default: first in spec)");
  train->add_flag("--dump-behavior", dump, "Write behavior.csv for the final parameters");

  auto* experiment = app.add_subcommand("experiment", "Multi-seed comparison driven by a spec file");
  add_common(experiment, opts);

  auto* variance = app.add_subcommand("variance-study", "Exact variance comparison over random MDPs");
  add_common(variance, opts);

  auto* smooth = app.add_subcommand("smooth", "Savitzky-Golay filter one CSV column");
  add_common(smooth, opts);
  std::string input;
  std::string column;
  int window = 51;
  int order = 3;
  smooth->add_option("--input", input, "CSV file")->required();
  smooth->add_option("--column", column, "Column name")->required();
  smooth->add_option("--window", window, "Odd window length");
  smooth->add_option("--order", order, "Polynomial order");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train) return cmd_train(opts, algorithm, dump);
    if (*experiment) return cmd_experiment(opts);
    if (*variance) return cmd_variance(opts);
    if (*smooth) return cmd_smooth(opts, input, column, window, order);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
