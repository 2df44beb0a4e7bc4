#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aisac/common.hpp"

namespace aisac {

// Finite MDP with expected-reward tensor. transition[s](a, s') = P(s' | s, a).
struct TabularMdp {
  int n_states = 0;
  int n_actions = 0;
  std::vector<Matrix> transition;
  Matrix reward;  // n_states x n_actions
  double gamma = 0.99;
  Vector initial_dist;

  TabularMdp() = default;
  TabularMdp(int states, int actions, double discount);

  // Throws ConfigError if any stochasticity or shape invariant is violated.
  void validate() const;

  // Row-stochastic state-to-state matrix under a per-state action table.
  Matrix state_transition(const Matrix& action_probs) const;
  Vector expected_reward(const Matrix& action_probs) const;
};

// Dirichlet(1,...,1) transition rows and initial distribution, rewards U[-1, 1].
TabularMdp random_mdp(int n_states, int n_actions, double gamma, std::uint64_t seed);

// Line of states; action 0 moves left, action 1 moves right, each with `slip`
// probability of moving the other way. Pushing right at the last state pays 1,
// pushing left at the first state pays `distractor_reward`. Starts at state 0.
TabularMdp chain_mdp(int n_states, double slip, double gamma, double distractor_reward = 0.2);

// width x height grid, actions up/right/down/left. The intended move happens
// with probability 1 - slip, each perpendicular move with slip / 2. Any action
// in the bottom-right goal cell pays 1 and returns the agent to the top-left
// start cell. Every other step costs `step_cost`.
TabularMdp gridworld_mdp(int width, int height, double slip, double gamma, double step_cost = 0.01);

// Q^pi by a direct linear solve with iterative refinement; the returned table
// has Bellman residual below `tolerance` or NumericalError is thrown.
Matrix exact_q_values(const TabularMdp& mdp, const Matrix& action_probs, double tolerance = 1e-10);

Vector exact_state_values(const TabularMdp& mdp, const Matrix& action_probs);

// Sup-norm residual of the Bellman evaluation operator at q.
double bellman_residual(const TabularMdp& mdp, const Matrix& action_probs, const Matrix& q);

// Normalized discounted state occupancy (1 - gamma) mu^T (I - gamma P_pi)^-1.
// For gamma = 0 this is the initial distribution.
Vector exact_state_distribution(const TabularMdp& mdp, const Matrix& action_probs);

// sum_s mu(s) sum_a pi(a|s) R[s][a]
double average_reward(const TabularMdp& mdp, const Matrix& action_probs);

// (1 - gamma) sum_s mu(s) V^pi(s); its gradient is the occupancy-weighted
// policy gradient returned by exact_gradient.
double discounted_objective(const TabularMdp& mdp, const Matrix& action_probs);

struct OptimalSolution {
  Vector values;
  Matrix q_values;
  std::vector<int> greedy_policy;
  int iterations = 0;
};

OptimalSolution value_iteration(const TabularMdp& mdp, double tolerance = 1e-12, int max_iterations = 1000000);

// Sampling interface over a TabularMdp. Continuing task: never terminates.
class TabularEnv {
 public:
  struct Step {
    int next_state;
    double reward;
  };

  TabularEnv(const TabularMdp& mdp, std::uint64_t seed);

  int reset();
  Step step(int action);
  int state() const { return state_; }
  const TabularMdp& mdp() const { return *mdp_; }

 private:
  const TabularMdp* mdp_;
  Rng rng_;
  int state_ = 0;
};

// Tensor-file form of an MDP (tensors "meta" = [n_states, n_actions, gamma],
// "initial", "reward", "transition").
void save_mdp(const std::string& path, const TabularMdp& mdp);
TabularMdp load_mdp(const std::string& path);
std::string mdp_to_text(const TabularMdp& mdp);
TabularMdp mdp_from_text(const std::string& text);

}  // namespace aisac
