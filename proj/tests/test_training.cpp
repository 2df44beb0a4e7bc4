#include <doctest.h>

#include <cmath>

#include "aisac/mdp.hpp"
#include "aisac/training.hpp"

using namespace aisac;

namespace {

TrainConfig chain_config(Algorithm algorithm, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.algorithm = algorithm;
  cfg.seed = seed;
  cfg.n_iterations = 20;
  cfg.steps_per_iteration = 100;
  return cfg;
}

TrainConfig pendulum_config(Algorithm algorithm, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.algorithm = algorithm;
  cfg.seed = seed;
  cfg.n_iterations = 3;
  cfg.steps_per_iteration = 150;
  cfg.eval_rollouts = 2;
  return cfg;
}

bool same_steps(const TrainResult& a, const TrainResult& b) {
  if (a.steps.size() != b.steps.size()) return false;
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    const auto& x = a.steps[i];
    const auto& y = b.steps[i];
    if (x.iteration != y.iteration || x.step != y.step || x.reward != y.reward || x.td_error != y.td_error ||
        x.importance_ratio != y.importance_ratio || x.policy_entropy != y.policy_entropy) {
      return false;
    }
  }
  return true;
}

bool same_summaries(const TrainResult& a, const TrainResult& b) {
  if (a.summaries.size() != b.summaries.size()) return false;
  for (std::size_t i = 0; i < a.summaries.size(); ++i) {
    const auto& x = a.summaries[i];
    const auto& y = b.summaries[i];
    if (x.target_return_mean != y.target_return_mean || x.target_return_std != y.target_return_std ||
        x.behavior_return_mean != y.behavior_return_mean || x.mean_abs_td_error != y.mean_abs_td_error) {
      return false;
    }
  }
  return true;
}

TabularTransition transition(int s, int a, double r, int s2) {
  TabularTransition t;
  t.state = s;
  t.action = a;
  t.reward = r;
  t.next_state = s2;
  return t;
}

}  // namespace

TEST_CASE("config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.alpha_theta = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.gamma = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.behavior_refit_period = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.epsilon_mix = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK(parse_algorithm("aisac") == Algorithm::Aisac);
  CHECK(to_string(Algorithm::Baseline) == "baseline");
  CHECK_THROWS_AS(parse_algorithm("ppo"), ConfigError);
}

TEST_CASE("actor updates") {
  SoftmaxPolicy policy(2, 3);
  policy.parameters() << 0.1, -0.2, 0.3, 0.0, 0.5, -0.5;
  TabularCritic critic(2, 3, 0.1);
  const auto t = transition(1, 2, 0.0, 0);

  SUBCASE("zero critic leaves theta unchanged") {
    const Vector before = policy.parameters();
    actor_update_onpolicy(policy, critic, t, 0.5);
    CHECK(policy.parameters() == before);
  }
  SUBCASE("zero step size is the identity") {
    critic.weights()(5) = 2.0;
    const Vector before = policy.parameters();
    actor_update_onpolicy(policy, critic, t, 0.0);
    CHECK(policy.parameters() == before);
  }
  SUBCASE("one-hot tabular closed form") {
    critic.weights()(5) = 2.0;
    const Vector pi = policy.action_probabilities(1);
    Vector expected = policy.parameters();
    for (int b = 0; b < 3; ++b) expected(3 + b) += 0.1 * 2.0 * ((b == 2 ? 1.0 : 0.0) - pi(b));
    actor_update_onpolicy(policy, critic, t, 0.1);
    CHECK((policy.parameters() - expected).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("off-policy update is rho score Q") {
    Rng rng(1);
    for (int i = 0; i < 6; ++i) critic.weights()(i) = standard_normal(rng);
    TabularBehavior b;
    b.table.resize(2, 3);
    b.table << 0.2, 0.3, 0.5, 0.6, 0.1, 0.3;
    const double rho_expected = policy.density(1, 2) / 0.3;
    const Vector expected = policy.parameters() + 0.05 * rho_expected * critic.q_value(1, 2) * policy.score(1, 2);
    const double rho = actor_update_offpolicy(policy, critic, b, t, 0.05);
    CHECK(std::abs(rho - rho_expected) < 1e-15);
    CHECK((policy.parameters() - expected).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("off-policy with b = pi equals on-policy bitwise") {
    critic.weights()(5) = -1.3;
    SoftmaxPolicy other = policy;
    actor_update_offpolicy(policy, critic, on_policy_behavior(policy), t, 0.2);
    actor_update_onpolicy(other, critic, t, 0.2);
    CHECK(policy.parameters() == other.parameters());
  }
}

TEST_CASE("Gaussian off-policy update with b = pi equals on-policy bitwise") {
  GaussianPolicy policy(FeatureMap::identity(1), 1, -0.1);
  policy.parameters() << 0.2, -0.4, -0.1;
  LinearCritic critic(FeatureMap::identity(1), 1, 0.1);
  critic.weights() << 0.3, -0.2, 0.1, 0.5, 0.0, -0.2;
  ContinuousTransition t;
  t.state = Vector::Constant(1, 0.7);
  t.action = Vector::Constant(1, -0.3);
  GaussianPolicy other = policy;
  const double rho = actor_update_offpolicy(policy, critic, on_policy_behavior(policy, t.state), t, 0.01);
  actor_update_onpolicy(other, critic, t, 0.01);
  CHECK(rho == 1.0);
  CHECK(policy.parameters() == other.parameters());
}

TEST_CASE("tabular training is deterministic") {
  auto chain = chain_mdp(3, 0.1, 0.99);
  auto a = run_training(chain, chain_config(Algorithm::Aisac, 5));
  auto b = run_training(chain, chain_config(Algorithm::Aisac, 5));
  CHECK_FALSE(a.diverged);
  CHECK(a.steps.size() == 2000);
  CHECK(same_steps(a, b));
  CHECK(same_summaries(a, b));
  CHECK(a.policy_parameters == b.policy_parameters);
  auto c = run_training(chain, chain_config(Algorithm::Aisac, 6));
  CHECK_FALSE(same_steps(a, c));
}

TEST_CASE("epsilon = 1 reproduces the baseline on the chain") {
  auto chain = chain_mdp(3, 0.1, 0.99);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto cfg = chain_config(Algorithm::Aisac, seed);
    cfg.epsilon_mix = 1.0;
    auto aisac = run_training(chain, cfg);
    auto base = run_training(chain, chain_config(Algorithm::Baseline, seed));
    CHECK(same_steps(aisac, base));
    CHECK(same_summaries(aisac, base));
    CHECK(aisac.policy_parameters == base.policy_parameters);
  }
}

TEST_CASE("importance ratios are bounded by 1/epsilon") {
  auto mdp = random_mdp(4, 3, 0.9, 3);
  for (double eps : {0.05, 0.2}) {
    auto cfg = chain_config(Algorithm::Aisac, 1);
    cfg.epsilon_mix = eps;
    cfg.alpha_theta = 0.05;
    auto result = run_training(mdp, cfg);
    REQUIRE_FALSE(result.diverged);
    double max_ratio = 0.0;
    for (const auto& s : result.steps) {
      CHECK(s.importance_ratio > 0.0);
      max_ratio = std::max(max_ratio, s.importance_ratio);
    }
    CHECK(max_ratio <= 1.0 / eps + 1e-12);
  }
  auto base = run_training(mdp, chain_config(Algorithm::Baseline, 1));
  for (const auto& s : base.steps) CHECK(s.importance_ratio == 1.0);
}

TEST_CASE("zero step sizes freeze everything") {
  auto chain = chain_mdp(4, 0.1, 0.9);
  auto cfg = chain_config(Algorithm::Aisac, 2);
  cfg.alpha_theta = 0.0;
  cfg.alpha_w = 0.0;
  auto result = run_training(chain, cfg);
  CHECK(result.policy_parameters == Vector::Zero(8));
  CHECK(result.critic_weights == Vector::Zero(8));
  for (const auto& s : result.summaries) CHECK(s.target_return_mean == result.summaries.front().target_return_mean);

  auto task = make_pendulum_task();
  auto pcfg = pendulum_config(Algorithm::Aisac, 2);
  pcfg.alpha_theta = 0.0;
  pcfg.alpha_w = 0.0;
  auto cont = run_training(task, pcfg);
  REQUIRE_FALSE(cont.diverged);
  GaussianPolicy fresh(task.policy_features, 1, pcfg.initial_log_std);
  CHECK(cont.policy_parameters == fresh.parameters());
  CHECK(cont.critic_weights.isZero());
  for (const auto& s : cont.summaries) CHECK(s.target_return_mean == cont.summaries.front().target_return_mean);
}

TEST_CASE("chain training finds the optimal policy") {
  auto chain = chain_mdp(3, 0.1, 0.99);
  const auto optimal = value_iteration(chain).greedy_policy;
  for (Algorithm algorithm : {Algorithm::Aisac, Algorithm::Baseline}) {
    auto cfg = chain_config(algorithm, 0);
    cfg.n_iterations = 200;
    cfg.steps_per_iteration = 200;
    cfg.record_steps = false;
    auto result = run_training(chain, cfg);
    REQUIRE_FALSE(result.diverged);
    SoftmaxPolicy policy(3, 2);
    policy.set_parameters(result.policy_parameters);
    for (int s = 0; s < 3; ++s) CHECK(policy.greedy_action(s) == optimal[static_cast<std::size_t>(s)]);
    CHECK(result.steps.empty());
  }
}

TEST_CASE("continuous training: determinism and epsilon = 1 equivalence") {
  auto task = make_pendulum_task();
  auto a = run_training(task, pendulum_config(Algorithm::Aisac, 4));
  auto b = run_training(task, pendulum_config(Algorithm::Aisac, 4));
  REQUIRE_FALSE(a.diverged);
  CHECK(same_steps(a, b));
  CHECK(same_summaries(a, b));

  auto cfg = pendulum_config(Algorithm::Aisac, 4);
  cfg.epsilon_mix = 1.0;
  auto mixed = run_training(task, cfg);
  auto base = run_training(task, pendulum_config(Algorithm::Baseline, 4));
  CHECK(same_steps(mixed, base));
  CHECK(same_summaries(mixed, base));
  CHECK(mixed.policy_parameters == base.policy_parameters);

  for (const auto& s : a.steps) CHECK(s.importance_ratio <= 1.0 / 0.05 + 1e-12);
}

TEST_CASE("reacher runs with a two-dimensional action") {
  auto task = make_reacher_task();
  auto cfg = pendulum_config(Algorithm::Aisac, 1);
  cfg.behavior_refit_period = 5;
  auto result = run_training(task, cfg);
  CHECK_FALSE(result.diverged);
  CHECK(result.summaries.size() == 3);
  CHECK(result.policy_parameters.size() == 2 * 5 + 2);
}

TEST_CASE("divergence is flagged, not thrown") {
  auto task = make_pendulum_task();
  auto cfg = pendulum_config(Algorithm::Baseline, 0);
  cfg.alpha_w = 1e6;
  TrainResult result;
  CHECK_NOTHROW(result = run_training(task, cfg));
  CHECK(result.diverged);
  CHECK_FALSE(result.divergence_message.empty());
}
