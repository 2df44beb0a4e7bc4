#include "aisac/critic.hpp"

#include <cmath>

#include "aisac/tensor_io.hpp"

namespace aisac {

namespace {

void check_alpha(double alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("critic step size must be finite and >= 0");
}

double checked_delta(double delta) {
  if (!std::isfinite(delta)) throw DivergenceError("TD error is not finite");
  return delta;
}

}  // namespace

TabularCritic::TabularCritic(int n_states, int n_actions, double alpha_w)
    : n_states_(n_states), n_actions_(n_actions), alpha_(alpha_w), w_(Vector::Zero(n_states * n_actions)) {
  if (n_states <= 0 || n_actions <= 0) throw ConfigError("tabular critic needs positive state/action counts");
  check_alpha(alpha_w);
}

double TabularCritic::q_value(int s, int a) const { return w_(s * n_actions_ + a); }

Vector TabularCritic::features(int s, int a) const {
  Vector phi = Vector::Zero(w_.size());
  phi(s * n_actions_ + a) = 1.0;
  return phi;
}

Matrix TabularCritic::q_table() const {
  Matrix q(n_states_, n_actions_);
  for (int s = 0; s < n_states_; ++s)
    for (int a = 0; a < n_actions_; ++a) q(s, a) = q_value(s, a);
  return q;
}

double TabularCritic::expected_next_q(const SoftmaxPolicy& policy, int next_state) const {
  const Vector pi = policy.action_probabilities(next_state);
  double total = 0.0;
  for (int a = 0; a < n_actions_; ++a) total += pi(a) * q_value(next_state, a);
  return total;
}

double TabularCritic::td_error(const SoftmaxPolicy& policy, const TabularTransition& t, double gamma) const {
  if (!std::isfinite(t.reward)) throw DivergenceError("transition reward is not finite");
  const double bootstrap = t.done ? 0.0 : expected_next_q(policy, t.next_state);
  return checked_delta(t.reward + gamma * bootstrap - q_value(t.state, t.action));
}

void TabularCritic::update(int s, int a, double delta) {
  double& w = w_(s * n_actions_ + a);
  w += alpha_ * delta;
  if (!std::isfinite(w)) throw DivergenceError("critic weights are not finite");
}

LinearCritic::LinearCritic(FeatureMap state_features, int action_dim, double alpha_w)
    : features_(std::move(state_features)),
      action_dim_(action_dim),
      n_terms_(1 + action_dim + action_dim * (action_dim + 1) / 2),
      alpha_(alpha_w) {
  if (action_dim <= 0) throw ConfigError("linear critic needs a positive action dimension");
  check_alpha(alpha_w);
  w_ = Vector::Zero(n_terms_ * features_.size());
}

LinearCritic::LinearCritic(FeatureMap state_features, int action_dim, double alpha_w, Vector action_low,
                           Vector action_high)
    : LinearCritic(std::move(state_features), action_dim, alpha_w) {
  if (action_low.size() != action_dim || action_high.size() != action_dim || (action_high.array() < action_low.array()).any()) {
    throw ConfigError("linear critic: bad action bounds");
  }
  action_low_ = std::move(action_low);
  action_high_ = std::move(action_high);
}

Vector LinearCritic::clip(const Vector& action) const {
  if (!bounded()) return action;
  return action.cwiseMax(action_low_).cwiseMin(action_high_);
}

Vector LinearCritic::action_terms(const Vector& raw_action) const {
  if (raw_action.size() != action_dim_) throw ConfigError("critic: action dimension mismatch");
  const Vector action = clip(raw_action);
  Vector psi(n_terms_);
  psi(0) = 1.0;
  int k = 1;
  for (int i = 0; i < action_dim_; ++i) psi(k++) = action(i);
  for (int i = 0; i < action_dim_; ++i)
    for (int j = i; j < action_dim_; ++j) psi(k++) = action(i) * action(j);
  return psi;
}

Vector LinearCritic::features(const Vector& state, const Vector& action) const {
  const Vector phi = features_(state);
  const Vector psi = action_terms(action);
  Vector out(w_.size());
  for (int j = 0; j < phi.size(); ++j) out.segment(j * n_terms_, n_terms_) = phi(j) * psi;
  return out;
}

Vector LinearCritic::action_coefficients(const Vector& phi) const {
  return Eigen::Map<const Matrix>(w_.data(), n_terms_, features_.size()) * phi;
}

double LinearCritic::q_from_coefficients(const Vector& coeffs, const Vector& action) const {
  return coeffs.dot(action_terms(action));
}

Vector LinearCritic::action_gradient_from_coefficients(const Vector& coeffs, const Vector& raw_action) const {
  const Vector action = clip(raw_action);
  Vector grad = coeffs.segment(1, action_dim_);
  int k = 1 + action_dim_;
  for (int i = 0; i < action_dim_; ++i) {
    for (int j = i; j < action_dim_; ++j) {
      // d(a_i a_j)/da_i = a_j, d(a_i a_j)/da_j = a_i
      grad(i) += coeffs(k) * action(j);
      grad(j) += coeffs(k) * action(i);
      ++k;
    }
  }
  if (bounded()) {
    for (int i = 0; i < action_dim_; ++i)
      if (raw_action(i) < action_low_(i) || raw_action(i) > action_high_(i)) grad(i) = 0.0;
  }
  return grad;
}

double LinearCritic::q_value(const Vector& state, const Vector& action) const {
  return q_from_coefficients(action_coefficients(features_(state)), action);
}

Vector LinearCritic::action_gradient(const Vector& state, const Vector& action) const {
  return action_gradient_from_coefficients(action_coefficients(features_(state)), action);
}

double LinearCritic::expected_next_q(const GaussianPolicy& policy, const Vector& next_state, int m,
                                     std::uint64_t seed) const {
  if (m <= 0) throw ConfigError("expected_next_q needs at least one sample");
  Rng rng(seed);
  const Vector phi = features_(next_state);
  const Vector coeffs = action_coefficients(phi);
  const Vector phi_policy = policy.features(next_state);
  double total = 0.0;
  for (int i = 0; i < m; ++i) total += q_from_coefficients(coeffs, policy.sample_from_features(phi_policy, rng));
  return total / m;
}

double LinearCritic::td_error(const GaussianPolicy& policy, const ContinuousTransition& t, double gamma, int m,
                              std::uint64_t seed) const {
  if (!std::isfinite(t.reward)) throw DivergenceError("transition reward is not finite");
  const double bootstrap = t.done ? 0.0 : expected_next_q(policy, t.next_state, m, seed);
  return checked_delta(t.reward + gamma * bootstrap - q_value(t.state, t.action));
}

void LinearCritic::update(const Vector& state, const Vector& action, double delta) {
  const Vector phi = features_(state);
  const Vector psi = action_terms(action);
  const double step = alpha_ * delta;
  for (int j = 0; j < phi.size(); ++j) w_.segment(j * n_terms_, n_terms_) += (step * phi(j)) * psi;
  if (!w_.allFinite()) throw DivergenceError("critic weights are not finite");
}

void save_critic(const std::string& path, const Vector& weights) {
  save_tensor_file(path, {Tensor{"weights", {static_cast<int>(weights.size())},
                                 std::vector<double>(weights.data(), weights.data() + weights.size())}});
}

Vector load_critic_weights(const std::string& path, int expected_size) {
  const auto tensors = load_tensor_file(path);
  const Tensor& w = require_tensor(tensors, "weights", {expected_size});
  return Eigen::Map<const Vector>(w.values.data(), expected_size);
}

}  // namespace aisac
