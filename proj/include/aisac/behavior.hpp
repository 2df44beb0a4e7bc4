#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "aisac/common.hpp"
#include "aisac/critic.hpp"
#include "aisac/policy.hpp"

namespace aisac {

// Per-state action distribution used to collect data.
struct TabularBehavior {
  Matrix table;  // n_states x n_actions, rows are distributions
  double epsilon_mix = 0.0;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> support_mask;  // pi(a|s) != 0
  std::vector<bool> fallback_rows;  // rows where every score vanished and b = pi

  int n_states() const { return static_cast<int>(table.rows()); }
  int n_actions() const { return static_cast<int>(table.cols()); }
  Vector row(int s) const { return table.row(s).transpose(); }
  double density(int s, int a) const { return table(s, a); }
  // Throws SupportError for b(a|s) = 0.
  double log_density(int s, int a) const;
  int sample(int s, Rng& rng) const { return sample_categorical(row(s), rng); }
};

// b = pi in every state; what the on-policy baseline samples from.
TabularBehavior on_policy_behavior(const SoftmaxPolicy& policy);

// G(s) = sum_A grad_theta pi(A|s) Q(s, A)
Vector state_gradient(const SoftmaxPolicy& policy, const Matrix& q, int s);

// |(grad_theta pi(a|s) . G(s)) * Q(s, a)| * 1{pi(a|s) != 0}
double unnormalized_score_tabular(const SoftmaxPolicy& policy, const Matrix& q, int s, int a);
Vector unnormalized_scores_tabular(const SoftmaxPolicy& policy, const Matrix& q, int s);

// Normalizes the scores per state, falls back to pi on all-zero rows, then
// mixes b <- (1 - eps) b + eps pi. Throws NumericalError on NaN scores.
TabularBehavior build_tabular_behavior(const SoftmaxPolicy& policy, const Matrix& q, double epsilon_mix);

// Fitted Gaussian b(.|s), optionally mixed with pi(.|s):
//   b(a) = (1 - eps) N(a; mean, stddev) + eps N(a; target_mean, target_stddev)
struct GaussianBehavior {
  Vector mean;
  Vector stddev;
  Vector target_mean;
  Vector target_stddev;
  double epsilon_mix = 0.0;
  double effective_sample_size = 0.0;
  int n_proposal = 0;
  bool fallback = false;

  double log_density(const Vector& action) const;
  // The mixture component is picked with `selector`; the action noise always
  // comes from `rng`, drawn exactly as GaussianPolicy::sample does.
  Vector sample(Rng& selector, Rng& rng) const;
};

GaussianBehavior on_policy_behavior(const GaussianPolicy& policy, const Vector& state);

// Evaluates the continuous behavior score at one state. The bracket
// grad mu(s) grad_a Q(s, a) is taken at a = mu(s) once, then
//   score(a) = |(grad_theta pi(a|s) . G(s)) * Q(s, a)|.
class GaussianScore {
 public:
  GaussianScore(const GaussianPolicy& policy, const LinearCritic& critic, const Vector& state);

  double operator()(const Vector& action) const;
  const Vector& direction() const { return direction_; }
  const Vector& policy_mean() const { return mean_; }
  Vector policy_stddev() const { return policy_->stddev(); }

 private:
  const GaussianPolicy* policy_;
  const LinearCritic* critic_;
  Vector phi_policy_;
  Vector coeffs_;
  Vector mean_;
  Vector direction_;
};

double unnormalized_score_gaussian(const GaussianPolicy& policy, const LinearCritic& critic, const Vector& state,
                                   const Vector& action);

struct GaussianFit {
  Vector mean;
  Vector stddev;
  double effective_sample_size = 0.0;
  int n_proposal = 0;
  bool fallback = false;
};

// Cross-entropy fit: draw n actions from N(proposal_mean, proposal_std),
// weight each by score(a) / proposal_density(a), return the weighted mean and
// std (floored at std_min). With rounds > 1 the fit becomes the proposal of
// the next round. All-zero weights in the first round return the proposal
// itself; in a later round the previous fit is kept. Throws ConfigError for
// n < 8 or rounds < 1, NumericalError for non-finite weights.
GaussianFit fit_gaussian_cross_entropy(const Vector& proposal_mean, const Vector& proposal_std,
                                       const std::function<double(const Vector&)>& score, int n_proposal, Rng& rng,
                                       double std_min, int rounds = 1);

GaussianBehavior cross_entropy_fit(const GaussianPolicy& policy, const LinearCritic& critic, const Vector& state,
                                   int n_proposal, Rng& rng, double std_min = 1e-2, double epsilon_mix = 0.0,
                                   int rounds = 1);

double behavior_log_density(const TabularBehavior& behavior, int s, int a);
double behavior_log_density(const GaussianBehavior& behavior, const Vector& action);

// Diagnostic dumps.
void write_behavior_csv(std::ostream& out, const TabularBehavior& behavior, const SoftmaxPolicy& policy);
void write_behavior_csv(std::ostream& out, const std::vector<Vector>& states,
                        const std::vector<GaussianBehavior>& fits);

}  // namespace aisac
