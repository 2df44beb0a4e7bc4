#include "aisac/training.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

namespace aisac {

namespace {

// RNG substream tags.
enum Stream : std::uint64_t {
  kEnvStream = 1,
  kActionStream = 2,
  kSelectorStream = 3,
  kProposalStream = 4,
  kExpectationStream = 5,
  kEvalStream = 6,
};

void check_finite_parameters(const Vector& theta) {
  if (!theta.allFinite()) throw DivergenceError("policy parameters are not finite");
}

void apply_actor_step(Vector& theta, const Vector& score, double q, double rho, double alpha_theta) {
  if (!std::isfinite(rho)) throw DivergenceError("importance ratio is not finite");
  const double scale = alpha_theta * rho * q;
  theta += scale * score;
  check_finite_parameters(theta);
}

struct MeanStd {
  double mean;
  double std;
};

MeanStd mean_std(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double sq = 0.0;
  for (double x : xs) sq += (x - mean) * (x - mean);
  return {mean, xs.size() > 1 ? std::sqrt(sq / (n - 1.0)) : 0.0};
}

// Per-iteration accumulators shared by both task kinds.
struct IterationStats {
  double reward_sum = 0.0;
  double abs_td_sum = 0.0;
  double ratio_sum = 0.0;
  long steps = 0;

  void add(double reward, double td, double ratio) {
    reward_sum += reward;
    abs_td_sum += std::abs(td);
    ratio_sum += ratio;
    ++steps;
  }

  void fill(IterationSummary& out, int horizon) const {
    if (steps == 0) return;
    const double n = static_cast<double>(steps);
    out.behavior_return_mean = reward_sum / n * horizon;
    out.mean_abs_td_error = abs_td_sum / n;
    out.mean_importance_ratio = ratio_sum / n;
  }
};

MeanStd evaluate_tabular(const TabularMdp& mdp, const SoftmaxPolicy& policy, const TrainConfig& config) {
  TabularEnv env(mdp, substream_seed(config.seed, kEvalStream));
  std::vector<double> returns;
  for (int k = 0; k < config.eval_rollouts; ++k) {
    int s = env.reset();
    double total = 0.0;
    for (int t = 0; t < config.eval_horizon; ++t) {
      const auto step = env.step(policy.greedy_action(s));
      total += step.reward;
      s = step.next_state;
    }
    returns.push_back(total);
  }
  return mean_std(returns);
}

MeanStd evaluate_continuous(const ContinuousTask& task, const GaussianPolicy& policy, const TrainConfig& config) {
  auto env = task.env->clone();
  const std::uint64_t eval_seed = substream_seed(config.seed, kEvalStream);
  std::vector<double> returns;
  for (int k = 0; k < config.eval_rollouts; ++k) {
    Vector s = env->reset(substream_seed(eval_seed, static_cast<std::uint64_t>(k)));
    double total = 0.0;
    for (int t = 0; t < env->episode_length(); ++t) {
      const EnvStep step = env->step(policy.mean(s));
      total += step.reward;
      s = step.next_state;
      if (step.done) break;
    }
    returns.push_back(total);
  }
  return mean_std(returns);
}

}  // namespace

std::string to_string(Algorithm algorithm) { return algorithm == Algorithm::Aisac ? "aisac" : "baseline"; }

Algorithm parse_algorithm(const std::string& name) {
  if (name == "aisac") return Algorithm::Aisac;
  if (name == "baseline") return Algorithm::Baseline;
  throw ConfigError("unknown algorithm '" + name + "' (expected aisac or baseline)");
}

void TrainConfig::validate() const {
  auto nonneg = [](double x) { return std::isfinite(x) && x >= 0.0; };
  if (!nonneg(alpha_theta) || !nonneg(alpha_w)) throw ConfigError("step sizes must be finite and non-negative");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
  if (n_iterations < 1 || steps_per_iteration < 1) throw ConfigError("iteration counts must be positive");
  if (!(epsilon_mix >= 0.0 && epsilon_mix <= 1.0)) throw ConfigError("epsilon_mix must lie in [0, 1]");
  if (n_proposal < 8) throw ConfigError("n_proposal must be at least 8");
  if (ce_rounds < 1) throw ConfigError("ce_rounds must be at least 1");
  if (m_expectation_samples < 1) throw ConfigError("m_expectation_samples must be positive");
  if (behavior_refit_period < 1) throw ConfigError("behavior_refit_period must be at least 1");
  if (!(std_min > 0.0)) throw ConfigError("std_min must be positive");
  if (eval_rollouts < 1 || eval_horizon < 1) throw ConfigError("evaluation rollouts and horizon must be positive");
  if (!std::isfinite(initial_log_std)) throw ConfigError("initial_log_std must be finite");
  if (!(log_std_max > std::log(std_min))) throw ConfigError("log_std_max must exceed ln(std_min)");
}

ContinuousTask make_pendulum_task() {
  Vector lows(2), highs(2), periods(2);
  lows << -std::numbers::pi, -PendulumConstants::max_speed;
  highs << std::numbers::pi, PendulumConstants::max_speed;
  periods << 2.0 * std::numbers::pi, 0.0;
  FeatureMap rbf = FeatureMap::radial_grid(lows, highs, {9, 9}, periods);
  return {std::make_shared<Pendulum>(), rbf, rbf};
}

ContinuousTask make_reacher_task() {
  return {std::make_shared<PointMassReacher>(), FeatureMap::identity(4), FeatureMap::polynomial(4, 2)};
}

double importance_ratio(const SoftmaxPolicy& policy, const TabularBehavior& behavior, int s, int a) {
  const double b = behavior.density(s, a);
  if (!(b > 0.0)) throw SupportError("importance ratio: behavior has no mass on the taken action");
  return policy.density(s, a) / b;
}

double importance_ratio(const GaussianPolicy& policy, const GaussianBehavior& behavior, const Vector& s,
                        const Vector& a) {
  return std::exp(policy.log_density(s, a) - behavior_log_density(behavior, a));
}

double actor_update_offpolicy(SoftmaxPolicy& policy, const TabularCritic& critic, const TabularBehavior& behavior,
                              const TabularTransition& t, double alpha_theta) {
  const double rho = importance_ratio(policy, behavior, t.state, t.action);
  apply_actor_step(policy.parameters(), policy.score(t.state, t.action), critic.q_value(t.state, t.action), rho,
                   alpha_theta);
  return rho;
}

double actor_update_offpolicy(GaussianPolicy& policy, const LinearCritic& critic, const GaussianBehavior& behavior,
                              const ContinuousTransition& t, double alpha_theta) {
  const double rho = importance_ratio(policy, behavior, t.state, t.action);
  apply_actor_step(policy.parameters(), policy.score(t.state, t.action), critic.q_value(t.state, t.action), rho,
                   alpha_theta);
  return rho;
}

void actor_update_onpolicy(SoftmaxPolicy& policy, const TabularCritic& critic, const TabularTransition& t,
                           double alpha_theta) {
  apply_actor_step(policy.parameters(), policy.score(t.state, t.action), critic.q_value(t.state, t.action), 1.0,
                   alpha_theta);
}

void actor_update_onpolicy(GaussianPolicy& policy, const LinearCritic& critic, const ContinuousTransition& t,
                           double alpha_theta) {
  apply_actor_step(policy.parameters(), policy.score(t.state, t.action), critic.q_value(t.state, t.action), 1.0,
                   alpha_theta);
}

TrainResult run_training(const TabularMdp& mdp, const TrainConfig& config) {
  config.validate();
  mdp.validate();
  TrainResult result;
  SoftmaxPolicy policy(mdp.n_states, mdp.n_actions);
  TabularCritic critic(mdp.n_states, mdp.n_actions, config.alpha_w);
  TabularEnv env(mdp, substream_seed(config.seed, kEnvStream));
  Rng action_rng(substream_seed(config.seed, kActionStream));
  const bool aisac = config.algorithm == Algorithm::Aisac;

  int s = env.reset();
  TabularBehavior behavior;
  long global_step = 0;
  try {
    for (int it = 0; it < config.n_iterations; ++it) {
      IterationStats stats;
      for (int k = 0; k < config.steps_per_iteration; ++k, ++global_step) {
        if (aisac) {
          if (global_step % config.behavior_refit_period == 0) {
            behavior = build_tabular_behavior(policy, critic.q_table(), config.epsilon_mix);
          }
        } else {
          behavior = on_policy_behavior(policy);
        }
        TabularTransition t;
        t.state = s;
        t.action = behavior.sample(s, action_rng);
        t.behavior_logprob = behavior.log_density(s, t.action);
        const auto step = env.step(t.action);
        t.reward = step.reward;
        t.next_state = step.next_state;

        const double delta = critic.td_error(policy, t, config.gamma);
        critic.update(t.state, t.action, delta);
        double rho = 1.0;
        if (aisac) {
          rho = actor_update_offpolicy(policy, critic, behavior, t, config.alpha_theta);
        } else {
          actor_update_onpolicy(policy, critic, t, config.alpha_theta);
        }
        stats.add(t.reward, delta, rho);
        if (config.record_steps) {
          result.steps.push_back({it, global_step, t.reward, delta, rho, policy.entropy(s)});
        }
        s = t.next_state;
      }
      IterationSummary summary;
      summary.iteration = it;
      const MeanStd eval = evaluate_tabular(mdp, policy, config);
      summary.target_return_mean = eval.mean;
      summary.target_return_std = eval.std;
      stats.fill(summary, config.eval_horizon);
      result.summaries.push_back(summary);
    }
  } catch (const std::runtime_error& e) {
    result.diverged = true;
    result.divergence_message = e.what();
  }
  result.policy_parameters = policy.parameters();
  result.critic_weights = critic.weights();
  return result;
}

TrainResult run_training(const ContinuousTask& task, const TrainConfig& config) {
  config.validate();
  if (!task.env) throw ConfigError("continuous task has no environment");
  TrainResult result;
  const int action_dim = task.env->action_dim();
  GaussianPolicy policy(task.policy_features, action_dim, config.initial_log_std);
  LinearCritic critic(task.critic_features, action_dim, config.alpha_w, task.env->action_low(),
                      task.env->action_high());
  auto env = task.env->clone();
  const std::uint64_t env_seed = substream_seed(config.seed, kEnvStream);
  const std::uint64_t expectation_seed = substream_seed(config.seed, kExpectationStream);
  Rng action_rng(substream_seed(config.seed, kActionStream));
  Rng selector_rng(substream_seed(config.seed, kSelectorStream));
  Rng proposal_rng(substream_seed(config.seed, kProposalStream));
  const bool aisac = config.algorithm == Algorithm::Aisac;
  const int episode_length = env->episode_length();
  const double log_std_min = std::log(config.std_min);

  std::uint64_t episode = 0;
  Vector s = env->reset(substream_seed(env_seed, episode));
  int episode_step = 0;
  long global_step = 0;
  // Between refits the last fit is carried to new states as an offset from the
  // policy mean with the fitted std.
  Vector fit_offset;
  Vector fit_std;
  try {
    for (int it = 0; it < config.n_iterations; ++it) {
      IterationStats stats;
      for (int k = 0; k < config.steps_per_iteration; ++k, ++global_step) {
        GaussianBehavior behavior;
        if (aisac) {
          if (global_step % config.behavior_refit_period == 0) {
            behavior = cross_entropy_fit(policy, critic, s, config.n_proposal, proposal_rng, config.std_min,
                                         config.epsilon_mix, config.ce_rounds);
            fit_offset = behavior.mean - behavior.target_mean;
            fit_std = behavior.stddev;
          } else {
            behavior = on_policy_behavior(policy, s);
            behavior.mean = behavior.target_mean + fit_offset;
            behavior.stddev = fit_std;
            behavior.epsilon_mix = config.epsilon_mix;
            behavior.fallback = false;
          }
        }
        ContinuousTransition t;
        t.state = s;
        if (aisac) {
          t.action = behavior.sample(selector_rng, action_rng);
          t.behavior_logprob = behavior_log_density(behavior, t.action);
        } else {
          t.action = policy.sample(s, action_rng);
          t.behavior_logprob = policy.log_density(s, t.action);
        }
        const EnvStep step = env->step(t.action);
        t.reward = step.reward;
        t.next_state = step.next_state;
        t.done = step.done;

        const double delta = critic.td_error(policy, t, config.gamma, config.m_expectation_samples,
                                             substream_seed(expectation_seed, static_cast<std::uint64_t>(global_step)));
        critic.update(t.state, t.action, delta);
        double rho = 1.0;
        if (aisac) {
          rho = actor_update_offpolicy(policy, critic, behavior, t, config.alpha_theta);
        } else {
          actor_update_onpolicy(policy, critic, t, config.alpha_theta);
        }
        policy.clamp_log_std(log_std_min, config.log_std_max);
        stats.add(t.reward, delta, rho);
        if (config.record_steps) {
          result.steps.push_back({it, global_step, t.reward, delta, rho, policy.entropy()});
        }

        ++episode_step;
        if (t.done || episode_step >= episode_length) {
          ++episode;
          episode_step = 0;
          s = env->reset(substream_seed(env_seed, episode));
        } else {
          s = t.next_state;
        }
      }
      IterationSummary summary;
      summary.iteration = it;
      const MeanStd eval = evaluate_continuous(task, policy, config);
      summary.target_return_mean = eval.mean;
      summary.target_return_std = eval.std;
      stats.fill(summary, episode_length);
      result.summaries.push_back(summary);
    }
  } catch (const std::runtime_error& e) {
    result.diverged = true;
    result.divergence_message = e.what();
  }
  result.policy_parameters = policy.parameters();
  result.critic_weights = critic.weights();
  result.clamp_events = env->clamp_events();
  return result;
}

}  // namespace aisac
