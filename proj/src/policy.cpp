#include "aisac/policy.hpp"

#include <cmath>
#include <numbers>

#include "aisac/tensor_io.hpp"

namespace aisac {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2 pi)

Vector softmax(const Vector& prefs) {
  const Vector shifted = (prefs.array() - prefs.maxCoeff()).exp();
  return shifted / shifted.sum();
}

}  // namespace

SoftmaxPolicy::SoftmaxPolicy(int n_states, int n_actions, double temperature)
    : n_states_(n_states), n_actions_(n_actions), temperature_(temperature) {
  if (n_states <= 0 || n_actions <= 0) throw ConfigError("softmax policy needs positive state/action counts");
  if (!(temperature > 0.0)) throw ConfigError("softmax temperature must be positive");
  theta_ = Vector::Zero(n_states * n_actions);
}

SoftmaxPolicy::SoftmaxPolicy(std::vector<Matrix> features, double temperature)
    : n_states_(static_cast<int>(features.size())), temperature_(temperature), features_(std::move(features)) {
  if (features_.empty()) throw ConfigError("feature softmax needs at least one state");
  if (!(temperature > 0.0)) throw ConfigError("softmax temperature must be positive");
  n_actions_ = static_cast<int>(features_.front().rows());
  const auto dim = features_.front().cols();
  for (const auto& f : features_) {
    if (f.rows() != n_actions_ || f.cols() != dim) throw ConfigError("feature softmax: ragged feature tensors");
  }
  if (n_actions_ <= 0 || dim <= 0) throw ConfigError("feature softmax: empty feature tensors");
  theta_ = Vector::Zero(dim);
}

void SoftmaxPolicy::set_parameters(const Vector& theta) {
  if (theta.size() != theta_.size()) throw ConfigError("softmax policy: parameter size mismatch");
  theta_ = theta;
}

void SoftmaxPolicy::check_state_action(int s, int a) const {
  if (s < 0 || s >= n_states_ || a < 0 || a >= n_actions_) throw ConfigError("softmax policy: (s, a) out of range");
}

Vector SoftmaxPolicy::preferences(int s) const {
  if (s < 0 || s >= n_states_) throw ConfigError("softmax policy: state out of range");
  if (is_tabular()) return theta_.segment(s * n_actions_, n_actions_) / temperature_;
  return features_[static_cast<std::size_t>(s)] * theta_ / temperature_;
}

Vector SoftmaxPolicy::action_probabilities(int s) const { return softmax(preferences(s)); }

Matrix SoftmaxPolicy::probabilities() const {
  Matrix out(n_states_, n_actions_);
  for (int s = 0; s < n_states_; ++s) out.row(s) = action_probabilities(s).transpose();
  return out;
}

double SoftmaxPolicy::density(int s, int a) const {
  check_state_action(s, a);
  return action_probabilities(s)(a);
}

double SoftmaxPolicy::log_density(int s, int a) const {
  check_state_action(s, a);
  const Vector h = preferences(s);
  const double m = h.maxCoeff();
  return h(a) - m - std::log((h.array() - m).exp().sum());
}

Vector SoftmaxPolicy::score(int s, int a) const {
  check_state_action(s, a);
  const Vector pi = action_probabilities(s);
  if (!(pi(a) > 0.0)) {
    throw SupportError("softmax score undefined: pi(" + std::to_string(a) + "|" + std::to_string(s) + ") = 0");
  }
  Vector g = Vector::Zero(n_params());
  if (is_tabular()) {
    for (int b = 0; b < n_actions_; ++b) g(param_index(s, b)) = ((b == a ? 1.0 : 0.0) - pi(b)) / temperature_;
  } else {
    const Matrix& f = features_[static_cast<std::size_t>(s)];
    g = (f.row(a).transpose() - f.transpose() * pi) / temperature_;
  }
  return g;
}

Vector SoftmaxPolicy::density_gradient(int s, int a) const {
  const Vector g = score(s, a);
  return density(s, a) * g;
}

int SoftmaxPolicy::sample(int s, Rng& rng) const { return sample_categorical(action_probabilities(s), rng); }

int SoftmaxPolicy::greedy_action(int s) const {
  Eigen::Index best = 0;
  preferences(s).maxCoeff(&best);
  return static_cast<int>(best);
}

double SoftmaxPolicy::entropy(int s) const {
  const Vector pi = action_probabilities(s);
  double h = 0.0;
  for (int a = 0; a < n_actions_; ++a)
    if (pi(a) > 0.0) h -= pi(a) * std::log(pi(a));
  return h;
}

double gaussian_log_density(const Vector& x, const Vector& mean, const Vector& stddev) {
  double out = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double z = (x(i) - mean(i)) / stddev(i);
    out += -0.5 * z * z - std::log(stddev(i)) - kHalfLog2Pi;
  }
  return out;
}

GaussianPolicy::GaussianPolicy(FeatureMap features, int action_dim, double initial_log_std)
    : features_(std::move(features)), action_dim_(action_dim) {
  if (action_dim <= 0) throw ConfigError("Gaussian policy needs a positive action dimension");
  if (!std::isfinite(initial_log_std)) throw ConfigError("Gaussian policy: initial log std must be finite");
  theta_ = Vector::Zero(action_dim_ * features_.size() + action_dim_);
  theta_.tail(action_dim_).setConstant(initial_log_std);
}

void GaussianPolicy::set_parameters(const Vector& theta) {
  if (theta.size() != theta_.size()) throw ConfigError("Gaussian policy: parameter size mismatch");
  theta_ = theta;
}

Eigen::Map<const Matrix> GaussianPolicy::mean_weights() const {
  return Eigen::Map<const Matrix>(theta_.data(), action_dim_, n_features());
}

Eigen::Map<Matrix> GaussianPolicy::mean_weights() { return Eigen::Map<Matrix>(theta_.data(), action_dim_, n_features()); }

Vector GaussianPolicy::mean_from_features(const Vector& phi) const { return mean_weights() * phi; }

Vector GaussianPolicy::mean(const Vector& state) const { return mean_from_features(features_(state)); }

double GaussianPolicy::log_density_from_features(const Vector& phi, const Vector& action) const {
  if (action.size() != action_dim_) throw ConfigError("Gaussian policy: action dimension mismatch");
  return gaussian_log_density(action, mean_from_features(phi), stddev());
}

double GaussianPolicy::log_density(const Vector& state, const Vector& action) const {
  return log_density_from_features(features_(state), action);
}

double GaussianPolicy::density(const Vector& state, const Vector& action) const {
  return std::exp(log_density(state, action));
}

Vector GaussianPolicy::score_from_features(const Vector& phi, const Vector& action) const {
  if (action.size() != action_dim_) throw ConfigError("Gaussian policy: action dimension mismatch");
  const Vector mu = mean_from_features(phi);
  const Vector var = (2.0 * log_std()).array().exp();
  const Vector z = (action - mu).cwiseQuotient(var);
  Vector g(n_params());
  Eigen::Map<Matrix>(g.data(), action_dim_, n_features()) = z * phi.transpose();
  g.tail(action_dim_) = ((action - mu).array().square() / var.array() - 1.0).matrix();
  if (!g.allFinite()) throw SupportError("Gaussian score is not finite");
  return g;
}

Vector GaussianPolicy::score(const Vector& state, const Vector& action) const {
  return score_from_features(features_(state), action);
}

Vector GaussianPolicy::density_gradient(const Vector& state, const Vector& action) const {
  const Vector phi = features_(state);
  return std::exp(log_density_from_features(phi, action)) * score_from_features(phi, action);
}

Matrix GaussianPolicy::mean_jacobian(const Vector& state) const {
  const Vector phi = features_(state);
  Matrix jac = Matrix::Zero(n_params(), action_dim_);
  for (int j = 0; j < n_features(); ++j)
    for (int i = 0; i < action_dim_; ++i) jac(i + j * action_dim_, i) = phi(j);
  return jac;
}

Vector GaussianPolicy::sample_from_features(const Vector& phi, Rng& rng) const {
  Vector a = mean_from_features(phi);
  const Vector sd = stddev();
  for (int i = 0; i < action_dim_; ++i) a(i) += sd(i) * standard_normal(rng);
  return a;
}

Vector GaussianPolicy::sample(const Vector& state, Rng& rng) const { return sample_from_features(features_(state), rng); }

void GaussianPolicy::clamp_log_std(double lo, double hi) {
  theta_.tail(action_dim_) = theta_.tail(action_dim_).cwiseMax(lo).cwiseMin(hi);
}

double GaussianPolicy::entropy() const {
  return static_cast<double>(action_dim_) * (0.5 + kHalfLog2Pi) + log_std().sum();
}

void save_policy(const std::string& path, const SoftmaxPolicy& policy) {
  Tensor theta{"theta", {}, {}};
  if (policy.is_tabular()) {
    theta.dims = {policy.n_states(), policy.n_actions()};
  } else {
    theta.dims = {policy.n_params()};
  }
  theta.values.assign(policy.parameters().data(), policy.parameters().data() + policy.n_params());
  save_tensor_file(path, {Tensor{"temperature", {1}, {policy.temperature()}}, theta});
}

void save_policy(const std::string& path, const GaussianPolicy& policy) {
  Tensor weights{"mean_weights", {policy.action_dim(), policy.n_features()}, {}};
  const auto w = policy.mean_weights();
  for (int i = 0; i < policy.action_dim(); ++i)
    for (int j = 0; j < policy.n_features(); ++j) weights.values.push_back(w(i, j));
  const Vector ls = policy.log_std();
  Tensor log_std{"log_std", {policy.action_dim()}, std::vector<double>(ls.data(), ls.data() + ls.size())};
  save_tensor_file(path, {weights, log_std});
}

void load_policy_parameters(const std::string& path, SoftmaxPolicy& policy) {
  const auto tensors = load_tensor_file(path);
  const std::vector<int> dims =
      policy.is_tabular() ? std::vector<int>{policy.n_states(), policy.n_actions()} : std::vector<int>{policy.n_params()};
  const Tensor& theta = require_tensor(tensors, "theta", dims);
  policy.set_parameters(Eigen::Map<const Vector>(theta.values.data(), policy.n_params()));
}

void load_policy_parameters(const std::string& path, GaussianPolicy& policy) {
  const auto tensors = load_tensor_file(path);
  const Tensor& weights = require_tensor(tensors, "mean_weights", {policy.action_dim(), policy.n_features()});
  const Tensor& log_std = require_tensor(tensors, "log_std", {policy.action_dim()});
  Vector theta(policy.n_params());
  Eigen::Map<Matrix> w(theta.data(), policy.action_dim(), policy.n_features());
  std::size_t k = 0;
  for (int i = 0; i < policy.action_dim(); ++i)
    for (int j = 0; j < policy.n_features(); ++j) w(i, j) = weights.values[k++];
  for (int i = 0; i < policy.action_dim(); ++i) theta(policy.log_std_offset() + i) = log_std.values[static_cast<std::size_t>(i)];
  policy.set_parameters(theta);
}

}  // namespace aisac
