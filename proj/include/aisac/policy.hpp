#pragma once

#include <string>
#include <vector>

#include "aisac/common.hpp"
#include "aisac/features.hpp"

namespace aisac {

// Softmax over discrete actions, pi(a|s) = exp(h(s,a)/T) / sum_b exp(h(s,b)/T).
//
// Tabular form: one preference per (s, a), parameter index s * n_actions + a.
// Feature form: h(s, a) = features[s].row(a) . theta, which allows policy
// families with very few parameters (a single scalar, for example).
class SoftmaxPolicy {
 public:
  SoftmaxPolicy(int n_states, int n_actions, double temperature = 1.0);
  explicit SoftmaxPolicy(std::vector<Matrix> features, double temperature = 1.0);

  bool is_tabular() const { return features_.empty(); }
  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  int n_params() const { return static_cast<int>(theta_.size()); }
  double temperature() const { return temperature_; }

  const Vector& parameters() const { return theta_; }
  Vector& parameters() { return theta_; }
  void set_parameters(const Vector& theta);

  Vector preferences(int s) const;
  Vector action_probabilities(int s) const;
  Matrix probabilities() const;  // n_states x n_actions

  double density(int s, int a) const;
  double log_density(int s, int a) const;
  // grad_theta ln pi(a|s); throws SupportError when pi(a|s) underflows to 0.
  Vector score(int s, int a) const;
  // grad_theta pi(a|s) = pi(a|s) * score(s, a)
  Vector density_gradient(int s, int a) const;

  int sample(int s, Rng& rng) const;
  int greedy_action(int s) const;
  double entropy(int s) const;

 private:
  void check_state_action(int s, int a) const;
  int param_index(int s, int a) const { return s * n_actions_ + a; }

  int n_states_;
  int n_actions_;
  double temperature_;
  Vector theta_;
  std::vector<Matrix> features_;  // empty for tabular
};

// Diagonal Gaussian with mean W phi(s) and state-independent log std.
//
// Parameter layout: the action_dim x n_features mean-weight matrix in
// column-major order, followed by the action_dim log-std entries.
class GaussianPolicy {
 public:
  GaussianPolicy(FeatureMap features, int action_dim, double initial_log_std = 0.0);

  const FeatureMap& feature_map() const { return features_; }
  int action_dim() const { return action_dim_; }
  int n_features() const { return features_.size(); }
  int n_params() const { return static_cast<int>(theta_.size()); }
  int log_std_offset() const { return action_dim_ * n_features(); }

  const Vector& parameters() const { return theta_; }
  Vector& parameters() { return theta_; }
  void set_parameters(const Vector& theta);

  Eigen::Map<const Matrix> mean_weights() const;
  Eigen::Map<Matrix> mean_weights();
  Vector log_std() const { return theta_.tail(action_dim_); }
  Vector stddev() const { return log_std().array().exp(); }

  Vector features(const Vector& state) const { return features_(state); }
  Vector mean(const Vector& state) const;
  Vector mean_from_features(const Vector& phi) const;

  double density(const Vector& state, const Vector& action) const;
  double log_density(const Vector& state, const Vector& action) const;
  Vector score(const Vector& state, const Vector& action) const;
  Vector density_gradient(const Vector& state, const Vector& action) const;

  // Variants taking precomputed phi(s), used on hot paths.
  double log_density_from_features(const Vector& phi, const Vector& action) const;
  Vector score_from_features(const Vector& phi, const Vector& action) const;

  // d mean / d theta, n_params x action_dim. Log-std rows are zero.
  Matrix mean_jacobian(const Vector& state) const;

  // Unclamped draw mean + std * z.
  Vector sample(const Vector& state, Rng& rng) const;
  Vector sample_from_features(const Vector& phi, Rng& rng) const;
  double entropy() const;

  // Projects every log-std entry onto [lo, hi].
  void clamp_log_std(double lo, double hi);

 private:
  FeatureMap features_;
  int action_dim_;
  Vector theta_;
};

// Diagonal Gaussian log density, shared by policy and behavior code.
double gaussian_log_density(const Vector& x, const Vector& mean, const Vector& stddev);

// Checkpoints in the plain-text tensor format.
void save_policy(const std::string& path, const SoftmaxPolicy& policy);
void save_policy(const std::string& path, const GaussianPolicy& policy);
void load_policy_parameters(const std::string& path, SoftmaxPolicy& policy);
void load_policy_parameters(const std::string& path, GaussianPolicy& policy);

}  // namespace aisac
