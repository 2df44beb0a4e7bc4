#pragma once

#include "aisac/behavior.hpp"
#include "aisac/common.hpp"
#include "aisac/mdp.hpp"
#include "aisac/policy.hpp"

namespace aisac {

// Sampled policy-gradient estimate. per_component_variance is the empirical
// single-sample variance (n = 1 convention); divide by n_samples for the
// variance of `gradient` itself.
struct GradientEstimate {
  Vector gradient;
  int n_samples = 0;
  Vector per_component_variance;
  double trace_variance = 0.0;

  Vector standard_errors() const;
};

struct VarianceReport {
  enum class Method { ExactSummation, Empirical };

  double var_mc = 0.0;
  double var_is = 0.0;
  bool reduced = false;  // var_is < var_mc
  Method method = Method::ExactSummation;
};

// sum_s d(s) sum_a grad pi(a|s) Q^pi(s, a), with d the normalized discounted
// occupancy. Gradient of discounted_objective.
Vector exact_gradient(const TabularMdp& mdp, const SoftmaxPolicy& policy);

// Per-state gradient I(s) = sum_a grad pi(a|s) Q(s, a).
Vector exact_state_gradient(const SoftmaxPolicy& policy, const Matrix& q, int s);

// Mean of score(s, a) Q(s, a) over n draws a ~ pi(.|s).
GradientEstimate mc_gradient_estimate(const SoftmaxPolicy& policy, const Matrix& q, int s, int n, Rng& rng);
// MDP mode: n pairs (s, a) ~ d x pi.
GradientEstimate mc_gradient_estimate(const TabularMdp& mdp, const SoftmaxPolicy& policy, const Matrix& q, int n,
                                      Rng& rng);

// Mean of score(s, a) Q(s, a) pi(a|s) / b(a|s) over n draws a ~ b(.|s).
// `behavior_row` is b(.|s). Throws SupportError if a drawn action has b = 0.
GradientEstimate is_gradient_estimate(const SoftmaxPolicy& policy, const Vector& behavior_row, const Matrix& q, int s,
                                      int n, Rng& rng);

// Exact single-sample variance per component,
//   sum_a (grad pi(a|s) Q(s, a))^2 / w(a) - I(s)^2,
// where w is the sampling distribution over actions. With w = pi this is the
// plain Monte-Carlo variance. Throws SupportError where w = 0 but the
// integrand is not.
Vector exact_variance(const SoftmaxPolicy& policy, const Vector& weights, const Matrix& q, int s);

// Exact expectation of the IS estimator under b (sum_a b(a) * term(a)).
Vector exact_is_expectation(const SoftmaxPolicy& policy, const Vector& behavior_row, const Matrix& q, int s);

// Compares trace(exact_variance) under b against under pi.
VarianceReport variance_reduction_check(const SoftmaxPolicy& policy, const Vector& behavior_row, const Matrix& q,
                                        int s);

}  // namespace aisac
