#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "aisac/behavior.hpp"
#include "aisac/continuous_env.hpp"
#include "aisac/critic.hpp"
#include "aisac/features.hpp"
#include "aisac/mdp.hpp"
#include "aisac/policy.hpp"

namespace aisac {

enum class Algorithm { Aisac, Baseline };

std::string to_string(Algorithm algorithm);
Algorithm parse_algorithm(const std::string& name);

struct TrainConfig {
  double alpha_theta = 1e-3;
  double alpha_w = 1e-2;
  double gamma = 0.99;
  int n_iterations = 300;
  int steps_per_iteration = 200;
  double epsilon_mix = 0.05;
  int n_proposal = 64;
  int ce_rounds = 1;
  int m_expectation_samples = 16;
  std::uint64_t seed = 0;
  Algorithm algorithm = Algorithm::Aisac;
  int behavior_refit_period = 1;
  double std_min = 1e-2;
  int eval_rollouts = 10;
  int eval_horizon = 100;  // tabular tasks; continuous tasks use the episode length
  double initial_log_std = 0.0;
  // Gaussian log-std is projected onto [ln std_min, log_std_max] after each
  // actor step.
  double log_std_max = 1.0;
  bool record_steps = true;

  // Throws ConfigError. Step sizes may be zero (frozen parameters).
  void validate() const;
};

struct StepRecord {
  int iteration = 0;
  long step = 0;
  double reward = 0.0;
  double td_error = 0.0;
  double importance_ratio = 1.0;
  double policy_entropy = 0.0;
};

struct IterationSummary {
  int iteration = 0;
  double target_return_mean = 0.0;
  double target_return_std = 0.0;
  // Training reward of the iteration rescaled to one episode (or evaluation
  // horizon) worth of steps: the return of the data-collecting policy.
  double behavior_return_mean = 0.0;
  double mean_abs_td_error = 0.0;
  double mean_importance_ratio = 1.0;
};

struct TrainResult {
  std::vector<IterationSummary> summaries;
  std::vector<StepRecord> steps;
  bool diverged = false;
  std::string divergence_message;
  Vector policy_parameters;
  Vector critic_weights;
  long clamp_events = 0;
};

// Continuous task: environment prototype plus the fixed feature bases.
struct ContinuousTask {
  std::shared_ptr<const ContinuousEnv> env;
  FeatureMap policy_features;
  FeatureMap critic_features;
};

ContinuousTask make_pendulum_task();
ContinuousTask make_reacher_task();

// rho = pi(A|s) / b(A|s)
double importance_ratio(const SoftmaxPolicy& policy, const TabularBehavior& behavior, int s, int a);
double importance_ratio(const GaussianPolicy& policy, const GaussianBehavior& behavior, const Vector& s,
                        const Vector& a);

// theta += alpha * rho * score(s, A) * Q(s, A, w); the state-distribution ratio
// is taken as 1. Returns rho. Throws DivergenceError on non-finite rho or theta.
double actor_update_offpolicy(SoftmaxPolicy& policy, const TabularCritic& critic, const TabularBehavior& behavior,
                              const TabularTransition& t, double alpha_theta);
double actor_update_offpolicy(GaussianPolicy& policy, const LinearCritic& critic, const GaussianBehavior& behavior,
                              const ContinuousTransition& t, double alpha_theta);

// theta += alpha * score(S, A) * Q(S, A, w)
void actor_update_onpolicy(SoftmaxPolicy& policy, const TabularCritic& critic, const TabularTransition& t,
                           double alpha_theta);
void actor_update_onpolicy(GaussianPolicy& policy, const LinearCritic& critic, const ContinuousTransition& t,
                           double alpha_theta);

// Online actor-critic. Aisac rebuilds b every behavior_refit_period steps and
// samples from it; Baseline samples from pi. Divergence ends the run early with
// `diverged` set instead of throwing.
TrainResult run_training(const TabularMdp& mdp, const TrainConfig& config);
TrainResult run_training(const ContinuousTask& task, const TrainConfig& config);

}  // namespace aisac
