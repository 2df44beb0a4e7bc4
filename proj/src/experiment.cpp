#include "aisac/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

#include "aisac/estimators.hpp"
#include "aisac/smoothing.hpp"
#include "aisac/tensor_io.hpp"

namespace aisac {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Typed accessors that consume keys, so leftovers can be reported.
class SpecReader {
 public:
  explicit SpecReader(KeyValues values) : values_(std::move(values)) {}

  void read(const std::string& key, std::string& out) {
    if (auto v = take(key)) out = *v;
  }
  void read(const std::string& key, double& out) {
    if (auto v = take(key)) out = parse_double(key, *v);
  }
  void read(const std::string& key, int& out) {
    if (auto v = take(key)) {
      const double d = parse_double(key, *v);
      if (d != std::floor(d) || std::abs(d) > 2e9) throw ConfigError("'" + key + "' must be an integer");
      out = static_cast<int>(d);
    }
  }
  void read(const std::string& key, std::uint64_t& out) {
    if (auto v = take(key)) {
      auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
      if (ec != std::errc() || ptr != v->data() + v->size()) {
        throw ConfigError("'" + key + "' must be a non-negative integer");
      }
    }
  }
  void read(const std::string& key, bool& out) {
    if (auto v = take(key)) {
      if (*v == "true" || *v == "1") {
        out = true;
      } else if (*v == "false" || *v == "0") {
        out = false;
      } else {
        throw ConfigError("'" + key + "' must be true or false");
      }
    }
  }

  void finish() const {
    if (!values_.empty()) throw ConfigError("unknown configuration key '" + values_.begin()->first + "'");
  }

 private:
  std::optional<std::string> take(const std::string& key) {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    std::string v = it->second;
    values_.erase(it);
    return v;
  }

  static double parse_double(const std::string& key, const std::string& text) {
    std::istringstream in(text);
    double d = 0.0;
    if (!(in >> d) || !(in >> std::ws).eof()) throw ConfigError("'" + key + "' must be a number, got '" + text + "'");
    return d;
  }

  KeyValues values_;
};

std::vector<Algorithm> parse_algorithms(const std::string& text) {
  std::vector<Algorithm> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_algorithm(item));
  }
  return out;
}

double mean_of(const std::vector<double>& xs) {
  double total = 0.0;
  for (double x : xs) total += x;
  return total / static_cast<double>(xs.size());
}

double std_of(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double sq = 0.0;
  for (double x : xs) sq += (x - mean) * (x - mean);
  return std::sqrt(sq / static_cast<double>(xs.size() - 1));
}

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buffer[64];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buffer;
}

}  // namespace

KeyValues parse_key_values(std::istream& in) {
  KeyValues out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("spec line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("spec line " + std::to_string(line_no) + ": empty key");
    if (!out.emplace(key, value).second) throw ConfigError("duplicate key '" + key + "'");
  }
  return out;
}

KeyValues load_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open spec file: " + path);
  return parse_key_values(in);
}

void ExperimentSpec::validate() const {
  static const std::vector<std::string> tasks{"chain", "gridworld", "random", "pendulum", "reacher"};
  if (std::find(tasks.begin(), tasks.end(), task.name) == tasks.end()) {
    throw ConfigError("unknown task '" + task.name + "'");
  }
  if (algorithms.empty()) throw ConfigError("at least one algorithm is required");
  if (n_seeds < 1) throw ConfigError("n_seeds must be at least 1");
  if (smoothing_window < 1 || smoothing_window % 2 == 0) throw ConfigError("smoothing.window must be odd");
  if (smoothing_order < 0 || smoothing_window <= smoothing_order) {
    throw ConfigError("smoothing.window must exceed smoothing.order");
  }
  if (workers < 0) throw ConfigError("workers must be >= 0");
  if (variance.n_mdps < 1 || variance.n_states < 1 || variance.n_actions < 2) {
    throw ConfigError("variance study needs n_mdps >= 1, n_states >= 1, n_actions >= 2");
  }
  if (variance.behavior != "ais" && variance.behavior != "on_policy") {
    throw ConfigError("variance.behavior must be ais or on_policy");
  }
  if (!(variance.epsilon_mix >= 0.0 && variance.epsilon_mix <= 1.0)) {
    throw ConfigError("variance.epsilon_mix must lie in [0, 1]");
  }
  train.validate();
}

std::string ExperimentSpec::to_text() const {
  KeyValues kv;
  std::string algos;
  for (std::size_t i = 0; i < algorithms.size(); ++i) algos += (i ? "," : "") + to_string(algorithms[i]);
  kv["algorithms"] = algos;
  kv["n_seeds"] = std::to_string(n_seeds);
  kv["seed"] = std::to_string(seed);
  kv["out"] = output_dir;
  kv["workers"] = std::to_string(workers);
  kv["smoothing.window"] = std::to_string(smoothing_window);
  kv["smoothing.order"] = std::to_string(smoothing_order);
  kv["task"] = task.name;
  kv["task.n_states"] = std::to_string(task.n_states);
  kv["task.n_actions"] = std::to_string(task.n_actions);
  kv["task.width"] = std::to_string(task.width);
  kv["task.height"] = std::to_string(task.height);
  kv["task.slip"] = format_double(task.slip);
  kv["task.distractor_reward"] = format_double(task.distractor_reward);
  kv["task.step_cost"] = format_double(task.step_cost);
  kv["task.mdp_seed"] = std::to_string(task.mdp_seed);
  kv["train.alpha_theta"] = format_double(train.alpha_theta);
  kv["train.alpha_w"] = format_double(train.alpha_w);
  kv["train.gamma"] = format_double(train.gamma);
  kv["train.n_iterations"] = std::to_string(train.n_iterations);
  kv["train.steps_per_iteration"] = std::to_string(train.steps_per_iteration);
  kv["train.epsilon_mix"] = format_double(train.epsilon_mix);
  kv["train.n_proposal"] = std::to_string(train.n_proposal);
  kv["train.ce_rounds"] = std::to_string(train.ce_rounds);
  kv["train.m_expectation_samples"] = std::to_string(train.m_expectation_samples);
  kv["train.behavior_refit_period"] = std::to_string(train.behavior_refit_period);
  kv["train.std_min"] = format_double(train.std_min);
  kv["train.eval_rollouts"] = std::to_string(train.eval_rollouts);
  kv["train.eval_horizon"] = std::to_string(train.eval_horizon);
  kv["train.initial_log_std"] = format_double(train.initial_log_std);
  kv["train.log_std_max"] = format_double(train.log_std_max);
  kv["train.record_steps"] = train.record_steps ? "true" : "false";
  kv["variance.n_mdps"] = std::to_string(variance.n_mdps);
  kv["variance.n_states"] = std::to_string(variance.n_states);
  kv["variance.n_actions"] = std::to_string(variance.n_actions);
  kv["variance.scalar_theta"] = variance.scalar_theta ? "true" : "false";
  kv["variance.behavior"] = variance.behavior;
  kv["variance.epsilon_mix"] = format_double(variance.epsilon_mix);
  kv["variance.theta_scale"] = format_double(variance.theta_scale);
  kv["variance.gamma"] = format_double(variance.gamma);
  std::ostringstream out;
  for (const auto& [k, v] : kv) out << k << " = " << v << '\n';
  return out.str();
}

ExperimentSpec parse_experiment_spec(const KeyValues& values) {
  ExperimentSpec spec;
  spec.train.record_steps = false;
  SpecReader r(values);
  std::string algos;
  r.read("algorithms", algos);
  if (!algos.empty()) spec.algorithms = parse_algorithms(algos);
  r.read("n_seeds", spec.n_seeds);
  r.read("seed", spec.seed);
  r.read("out", spec.output_dir);
  r.read("workers", spec.workers);
  r.read("smoothing.window", spec.smoothing_window);
  r.read("smoothing.order", spec.smoothing_order);
  r.read("task", spec.task.name);
  r.read("task.n_states", spec.task.n_states);
  r.read("task.n_actions", spec.task.n_actions);
  r.read("task.width", spec.task.width);
  r.read("task.height", spec.task.height);
  r.read("task.slip", spec.task.slip);
  r.read("task.distractor_reward", spec.task.distractor_reward);
  r.read("task.step_cost", spec.task.step_cost);
  r.read("task.mdp_seed", spec.task.mdp_seed);
  r.read("train.alpha_theta", spec.train.alpha_theta);
  r.read("train.alpha_w", spec.train.alpha_w);
  r.read("train.gamma", spec.train.gamma);
  r.read("train.n_iterations", spec.train.n_iterations);
  r.read("train.steps_per_iteration", spec.train.steps_per_iteration);
  r.read("train.epsilon_mix", spec.train.epsilon_mix);
  r.read("train.n_proposal", spec.train.n_proposal);
  r.read("train.ce_rounds", spec.train.ce_rounds);
  r.read("train.m_expectation_samples", spec.train.m_expectation_samples);
  r.read("train.behavior_refit_period", spec.train.behavior_refit_period);
  r.read("train.std_min", spec.train.std_min);
  r.read("train.eval_rollouts", spec.train.eval_rollouts);
  r.read("train.eval_horizon", spec.train.eval_horizon);
  r.read("train.initial_log_std", spec.train.initial_log_std);
  r.read("train.record_steps", spec.train.record_steps);
  r.read("train.log_std_max", spec.train.log_std_max);
  r.read("variance.n_mdps", spec.variance.n_mdps);
  r.read("variance.n_states", spec.variance.n_states);
  r.read("variance.n_actions", spec.variance.n_actions);
  r.read("variance.scalar_theta", spec.variance.scalar_theta);
  r.read("variance.behavior", spec.variance.behavior);
  r.read("variance.epsilon_mix", spec.variance.epsilon_mix);
  r.read("variance.theta_scale", spec.variance.theta_scale);
  r.read("variance.gamma", spec.variance.gamma);
  r.finish();
  spec.validate();
  return spec;
}

ExperimentSpec load_experiment_spec(const std::string& path) { return parse_experiment_spec(load_key_values(path)); }

TabularMdp make_tabular_task(const TaskSpec& task, double gamma) {
  if (task.name == "chain") return chain_mdp(task.n_states, task.slip, gamma, task.distractor_reward);
  if (task.name == "gridworld") return gridworld_mdp(task.width, task.height, task.slip, gamma, task.step_cost);
  if (task.name == "random") return random_mdp(task.n_states, task.n_actions, gamma, task.mdp_seed);
  throw ConfigError("task '" + task.name + "' is not tabular");
}

ContinuousTask make_continuous_task(const TaskSpec& task) {
  if (task.name == "pendulum") return make_pendulum_task();
  if (task.name == "reacher") return make_reacher_task();
  throw ConfigError("task '" + task.name + "' is not continuous");
}

TrainResult run_task(const TaskSpec& task, const TrainConfig& config) {
  if (task.is_tabular()) return run_training(make_tabular_task(task, config.gamma), config);
  return run_training(make_continuous_task(task), config);
}

std::vector<RunOutcome> run_all(const ExperimentSpec& spec) {
  spec.validate();
  std::vector<RunOutcome> runs;
  for (Algorithm algorithm : spec.algorithms) {
    for (int k = 0; k < spec.n_seeds; ++k) {
      runs.push_back({algorithm, spec.seed + static_cast<std::uint64_t>(k), {}});
    }
  }
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers =
      std::min<unsigned>(spec.workers > 0 ? static_cast<unsigned>(spec.workers) : hw, static_cast<unsigned>(runs.size()));
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::string first_error;
  auto worker = [&] {
    for (std::size_t i = next++; i < runs.size(); i = next++) {
      try {
        TrainConfig config = spec.train;
        config.algorithm = runs[i].algorithm;
        config.seed = runs[i].seed;
        runs[i].result = run_task(spec.task, config);
      } catch (const std::exception& e) {
        std::lock_guard lock(error_mutex);
        if (first_error.empty()) first_error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (!first_error.empty()) throw ConfigError(first_error);
  return runs;
}

std::vector<double> smooth_series(const std::vector<double>& series, int window, int order) {
  int w = std::min<int>(window, static_cast<int>(series.size()));
  if (w % 2 == 0) --w;
  if (w <= order || w < 1) return series;
  return savitzky_golay(series, w, order);
}

AggregateCurve aggregate_runs(const std::vector<RunOutcome>& runs, Algorithm algorithm, int window, int order) {
  AggregateCurve curve;
  curve.algorithm = algorithm;
  std::size_t length = 0;
  for (const auto& r : runs)
    if (r.algorithm == algorithm) length = std::max(length, r.result.summaries.size());
  for (std::size_t t = 0; t < length; ++t) {
    std::vector<double> target;
    std::vector<double> behavior;
    for (const auto& r : runs) {
      if (r.algorithm != algorithm || t >= r.result.summaries.size()) continue;
      target.push_back(r.result.summaries[t].target_return_mean);
      behavior.push_back(r.result.summaries[t].behavior_return_mean);
    }
    curve.n_runs.push_back(static_cast<int>(target.size()));
    const double tm = mean_of(target);
    const double bm = mean_of(behavior);
    curve.target_mean.push_back(tm);
    curve.target_std.push_back(std_of(target, tm));
    curve.behavior_mean.push_back(bm);
    curve.behavior_std.push_back(std_of(behavior, bm));
  }
  curve.target_mean_smoothed = smooth_series(curve.target_mean, window, order);
  curve.target_std_smoothed = smooth_series(curve.target_std, window, order);
  curve.behavior_mean_smoothed = smooth_series(curve.behavior_mean, window, order);
  return curve;
}

void write_run_csv(std::ostream& out, const TrainResult& result) {
  out << "iteration,target_return_mean,target_return_std,behavior_return_mean,mean_abs_td_error,mean_importance_ratio\n";
  for (const auto& s : result.summaries) {
    out << s.iteration << ',' << format_double(s.target_return_mean) << ',' << format_double(s.target_return_std) << ','
        << format_double(s.behavior_return_mean) << ',' << format_double(s.mean_abs_td_error) << ','
        << format_double(s.mean_importance_ratio) << '\n';
  }
}

void write_steps_csv(std::ostream& out, const TrainResult& result) {
  out << "iteration,step,reward,td_error,importance_ratio,policy_entropy\n";
  for (const auto& s : result.steps) {
    out << s.iteration << ',' << s.step << ',' << format_double(s.reward) << ',' << format_double(s.td_error) << ','
        << format_double(s.importance_ratio) << ',' << format_double(s.policy_entropy) << '\n';
  }
}

void write_aggregate_csv(std::ostream& out, const std::vector<AggregateCurve>& curves) {
  out << "algorithm,iteration,n_runs,target_return_mean,target_return_std,target_return_mean_smoothed,"
         "target_return_std_smoothed,behavior_return_mean,behavior_return_std,behavior_return_mean_smoothed\n";
  for (const auto& c : curves) {
    for (std::size_t t = 0; t < c.target_mean.size(); ++t) {
      out << to_string(c.algorithm) << ',' << t << ',' << c.n_runs[t] << ',' << format_double(c.target_mean[t]) << ','
          << format_double(c.target_std[t]) << ',' << format_double(c.target_mean_smoothed[t]) << ','
          << format_double(c.target_std_smoothed[t]) << ',' << format_double(c.behavior_mean[t]) << ','
          << format_double(c.behavior_std[t]) << ',' << format_double(c.behavior_mean_smoothed[t]) << '\n';
    }
  }
}

std::string run_file_name(const TaskSpec& task, Algorithm algorithm, std::uint64_t seed) {
  return task.name + "_" + to_string(algorithm) + "_seed" + std::to_string(seed) + ".csv";
}

ExperimentReport run_experiment(const ExperimentSpec& spec, const std::string& output_dir) {
  namespace fs = std::filesystem;
  ExperimentReport report;
  report.runs = run_all(spec);
  for (Algorithm a : spec.algorithms) {
    report.curves.push_back(aggregate_runs(report.runs, a, spec.smoothing_window, spec.smoothing_order));
  }
  const fs::path root(output_dir);
  fs::create_directories(root / "runs");
  for (const auto& r : report.runs) {
    const fs::path path = root / "runs" / run_file_name(spec.task, r.algorithm, r.seed);
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    write_run_csv(out, r.result);
    report.files.push_back(path.string());
    if (r.result.diverged) ++report.n_diverged;
  }
  {
    const fs::path path = root / "aggregate.csv";
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    write_aggregate_csv(out, report.curves);
    report.files.push_back(path.string());
  }
  {
    const fs::path path = root / "manifest.txt";
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << "# generated " << timestamp() << '\n';
    out << spec.to_text();
    for (const auto& r : report.runs) {
      const std::string key = "run." + to_string(r.algorithm) + ".seed" + std::to_string(r.seed);
      out << key << ".status = " << (r.result.diverged ? "diverged: " + r.result.divergence_message : "ok") << '\n';
      out << key << ".iterations = " << r.result.summaries.size() << '\n';
      out << key << ".clamp_events = " << r.result.clamp_events << '\n';
    }
    report.files.push_back(path.string());
  }
  return report;
}

VarianceStudyResult run_variance_study(const VarianceStudySpec& spec, std::uint64_t seed) {
  VarianceStudyResult result;
  for (int i = 0; i < spec.n_mdps; ++i) {
    const std::uint64_t mdp_seed = substream_seed(seed, static_cast<std::uint64_t>(i));
    const TabularMdp mdp = random_mdp(spec.n_states, spec.n_actions, spec.gamma, mdp_seed);
    Rng rng(substream_seed(mdp_seed, 1));
    std::normal_distribution<double> normal(0.0, spec.theta_scale);
    std::optional<SoftmaxPolicy> policy;
    if (spec.scalar_theta) {
      std::vector<Matrix> features(static_cast<std::size_t>(spec.n_states), Matrix(spec.n_actions, 1));
      for (auto& f : features)
        for (int a = 0; a < spec.n_actions; ++a) f(a, 0) = standard_normal(rng);
      policy.emplace(std::move(features));
    } else {
      policy.emplace(spec.n_states, spec.n_actions);
    }
    for (Eigen::Index k = 0; k < policy->parameters().size(); ++k) policy->parameters()(k) = normal(rng);
    const Matrix q = exact_q_values(mdp, policy->probabilities());
    const TabularBehavior behavior = spec.behavior == "ais" ? build_tabular_behavior(*policy, q, spec.epsilon_mix)
                                                            : on_policy_behavior(*policy);
    for (int s = 0; s < spec.n_states; ++s) {
      const VarianceReport report = variance_reduction_check(*policy, behavior.row(s), q, s);
      result.rows.push_back({mdp_seed, s, report.var_mc, report.var_is, report.reduced,
                             exact_state_gradient(*policy, q, s).norm()});
      if (report.reduced) ++result.n_reduced;
    }
  }
  result.reduction_fraction =
      result.rows.empty() ? 0.0 : static_cast<double>(result.n_reduced) / static_cast<double>(result.rows.size());
  return result;
}

void write_variance_csv(std::ostream& out, const VarianceStudyResult& result) {
  out << "mdp_seed,state,var_mc,var_is,reduced\n";
  for (const auto& r : result.rows) {
    out << r.mdp_seed << ',' << r.state << ',' << format_double(r.var_mc) << ',' << format_double(r.var_is) << ','
        << (r.reduced ? 1 : 0) << '\n';
  }
}

std::string variance_summary_line(const VarianceStudyResult& result) {
  std::ostringstream out;
  out << "reduced " << result.n_reduced << " of " << result.rows.size() << " (mdp, state) pairs, fraction "
      << format_double(result.reduction_fraction);
  return out.str();
}

}  // namespace aisac
