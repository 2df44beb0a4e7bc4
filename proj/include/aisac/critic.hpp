#pragma once

#include <cstdint>
#include <string>

#include "aisac/common.hpp"
#include "aisac/features.hpp"
#include "aisac/policy.hpp"

namespace aisac {

template <class State, class Action>
struct Transition {
  State state;
  Action action;
  double reward = 0.0;
  State next_state;
  bool done = false;
  double behavior_logprob = 0.0;  // log b(action | state) at sampling time
};

using TabularTransition = Transition<int, int>;
using ContinuousTransition = Transition<Vector, Vector>;

// One-hot linear critic, Q(s, a, w) = w[s * n_actions + a].
class TabularCritic {
 public:
  TabularCritic(int n_states, int n_actions, double alpha_w);

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  double alpha() const { return alpha_; }
  const Vector& weights() const { return w_; }
  Vector& weights() { return w_; }

  double q_value(int s, int a) const;
  Vector features(int s, int a) const;
  Matrix q_table() const;

  // sum_a' pi(a'|s') Q(s', a')
  double expected_next_q(const SoftmaxPolicy& policy, int next_state) const;
  // R + gamma * (done ? 0 : expected_next_q(s')) - Q(s, A); the bootstrap is
  // taken under the target policy regardless of which policy acted.
  double td_error(const SoftmaxPolicy& policy, const TabularTransition& t, double gamma) const;
  // w += alpha * delta * phi(s, a)
  void update(int s, int a, double delta);

 private:
  int n_states_;
  int n_actions_;
  double alpha_;
  Vector w_;
};

// Q(s, a, w) = w . (phi(s) (x) psi(a)) where psi(a) holds the action monomials
// of degree <= 2: [1, a_i, a_i a_j (i <= j)]. Quadratic in the action, so
// grad_a Q is analytic.
//
// Weight layout: w[t + j * n_action_terms] multiplies psi_t(a) * phi_j(s).
//
// With action bounds set, every action is clamped into the box before psi is
// evaluated, so Q(s, a) = Q(s, clip(a)) and grad_a Q vanishes in clamped
// coordinates.
class LinearCritic {
 public:
  LinearCritic(FeatureMap state_features, int action_dim, double alpha_w);
  LinearCritic(FeatureMap state_features, int action_dim, double alpha_w, Vector action_low, Vector action_high);

  const FeatureMap& state_features() const { return features_; }
  int action_dim() const { return action_dim_; }
  int n_action_terms() const { return n_terms_; }
  int n_weights() const { return static_cast<int>(w_.size()); }
  double alpha() const { return alpha_; }
  const Vector& weights() const { return w_; }
  Vector& weights() { return w_; }

  bool bounded() const { return action_low_.size() > 0; }
  Vector clip(const Vector& action) const;
  Vector action_terms(const Vector& action) const;
  Vector features(const Vector& state, const Vector& action) const;

  // Coefficients c(s) with Q(s, a) = c(s) . psi(a).
  Vector action_coefficients(const Vector& phi) const;
  double q_from_coefficients(const Vector& coeffs, const Vector& action) const;
  Vector action_gradient_from_coefficients(const Vector& coeffs, const Vector& action) const;

  double q_value(const Vector& state, const Vector& action) const;
  Vector action_gradient(const Vector& state, const Vector& action) const;

  // Mean of Q(s', a') over m draws a' ~ pi(.|s'), from a generator seeded with
  // `seed` so each call is reproducible on its own.
  double expected_next_q(const GaussianPolicy& policy, const Vector& next_state, int m, std::uint64_t seed) const;
  double td_error(const GaussianPolicy& policy, const ContinuousTransition& t, double gamma, int m,
                  std::uint64_t seed) const;
  void update(const Vector& state, const Vector& action, double delta);

 private:
  FeatureMap features_;
  int action_dim_;
  int n_terms_;
  double alpha_;
  Vector w_;
  Vector action_low_;
  Vector action_high_;
};

void save_critic(const std::string& path, const Vector& weights);
Vector load_critic_weights(const std::string& path, int expected_size);

}  // namespace aisac
