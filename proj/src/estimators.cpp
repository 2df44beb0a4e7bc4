#include "aisac/estimators.hpp"

#include <cmath>

namespace aisac {

namespace {

// Welford accumulator over gradient vectors.
class RunningMoments {
 public:
  explicit RunningMoments(int dim) : mean_(Vector::Zero(dim)), m2_(Vector::Zero(dim)) {}

  void add(const Vector& x) {
    ++n_;
    const Vector delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta.cwiseProduct(x - mean_);
  }

  GradientEstimate finish() const {
    GradientEstimate out;
    out.gradient = mean_;
    out.n_samples = n_;
    out.per_component_variance = n_ > 1 ? Vector(m2_ / static_cast<double>(n_ - 1)) : Vector(Vector::Zero(mean_.size()));
    out.trace_variance = out.per_component_variance.sum();
    return out;
  }

 private:
  int n_ = 0;
  Vector mean_;
  Vector m2_;
};

void check_samples(int n) {
  if (n < 1) throw ConfigError("gradient estimate needs n >= 1");
}

}  // namespace

Vector GradientEstimate::standard_errors() const {
  return (per_component_variance / static_cast<double>(n_samples)).cwiseSqrt();
}

Vector exact_state_gradient(const SoftmaxPolicy& policy, const Matrix& q, int s) {
  Vector g = Vector::Zero(policy.n_params());
  for (int a = 0; a < policy.n_actions(); ++a) g += policy.density_gradient(s, a) * q(s, a);
  return g;
}

Vector exact_gradient(const TabularMdp& mdp, const SoftmaxPolicy& policy) {
  if (policy.n_states() != mdp.n_states || policy.n_actions() != mdp.n_actions) {
    throw ConfigError("exact_gradient: policy does not match the MDP");
  }
  const Matrix pi = policy.probabilities();
  const Matrix q = exact_q_values(mdp, pi);
  const Vector d = exact_state_distribution(mdp, pi);
  Vector g = Vector::Zero(policy.n_params());
  for (int s = 0; s < mdp.n_states; ++s) g += d(s) * exact_state_gradient(policy, q, s);
  return g;
}

GradientEstimate mc_gradient_estimate(const SoftmaxPolicy& policy, const Matrix& q, int s, int n, Rng& rng) {
  check_samples(n);
  const Vector pi = policy.action_probabilities(s);
  RunningMoments moments(policy.n_params());
  for (int i = 0; i < n; ++i) {
    const int a = sample_categorical(pi, rng);
    moments.add(policy.score(s, a) * q(s, a));
  }
  return moments.finish();
}

GradientEstimate mc_gradient_estimate(const TabularMdp& mdp, const SoftmaxPolicy& policy, const Matrix& q, int n,
                                      Rng& rng) {
  check_samples(n);
  const Vector d = exact_state_distribution(mdp, policy.probabilities());
  RunningMoments moments(policy.n_params());
  for (int i = 0; i < n; ++i) {
    const int s = sample_categorical(d, rng);
    const int a = policy.sample(s, rng);
    moments.add(policy.score(s, a) * q(s, a));
  }
  return moments.finish();
}

GradientEstimate is_gradient_estimate(const SoftmaxPolicy& policy, const Vector& behavior_row, const Matrix& q, int s,
                                      int n, Rng& rng) {
  check_samples(n);
  if (behavior_row.size() != policy.n_actions()) throw ConfigError("is_gradient_estimate: behavior row size mismatch");
  const Vector pi = policy.action_probabilities(s);
  RunningMoments moments(policy.n_params());
  for (int i = 0; i < n; ++i) {
    const int a = sample_categorical(behavior_row, rng);
    if (!(behavior_row(a) > 0.0)) throw SupportError("is_gradient_estimate: sampled action has zero behavior mass");
    const double ratio = pi(a) / behavior_row(a);
    moments.add(policy.score(s, a) * q(s, a) * ratio);
  }
  return moments.finish();
}

Vector exact_variance(const SoftmaxPolicy& policy, const Vector& weights, const Matrix& q, int s) {
  if (weights.size() != policy.n_actions()) throw ConfigError("exact_variance: weight vector size mismatch");
  Vector second = Vector::Zero(policy.n_params());
  Vector mean = Vector::Zero(policy.n_params());
  for (int a = 0; a < policy.n_actions(); ++a) {
    const Vector f = policy.density_gradient(s, a) * q(s, a);
    mean += f;
    if (weights(a) > 0.0) {
      second += f.cwiseProduct(f) / weights(a);
    } else if (f.cwiseAbs().maxCoeff() != 0.0) {
      throw SupportError("exact_variance: zero sampling mass on action " + std::to_string(a) +
                         " where the integrand is nonzero");
    }
  }
  return second - mean.cwiseProduct(mean);
}

Vector exact_is_expectation(const SoftmaxPolicy& policy, const Vector& behavior_row, const Matrix& q, int s) {
  const Vector pi = policy.action_probabilities(s);
  Vector total = Vector::Zero(policy.n_params());
  for (int a = 0; a < policy.n_actions(); ++a) {
    if (!(behavior_row(a) > 0.0)) continue;
    total += behavior_row(a) * (policy.score(s, a) * q(s, a) * (pi(a) / behavior_row(a)));
  }
  return total;
}

VarianceReport variance_reduction_check(const SoftmaxPolicy& policy, const Vector& behavior_row, const Matrix& q,
                                        int s) {
  VarianceReport report;
  report.method = VarianceReport::Method::ExactSummation;
  report.var_mc = exact_variance(policy, policy.action_probabilities(s), q, s).sum();
  report.var_is = exact_variance(policy, behavior_row, q, s).sum();
  report.reduced = report.var_is < report.var_mc;
  return report;
}

}  // namespace aisac
