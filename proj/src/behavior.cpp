#include "aisac/behavior.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "aisac/tensor_io.hpp"

namespace aisac {

namespace {

void check_epsilon(double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon_mix must lie in [0, 1]");
}

double log_sum_exp(double x, double y) {
  const double m = std::max(x, y);
  if (m == -std::numeric_limits<double>::infinity()) return m;
  return m + std::log(std::exp(x - m) + std::exp(y - m));
}

}  // namespace

double TabularBehavior::log_density(int s, int a) const {
  const double b = table(s, a);
  if (!(b > 0.0)) {
    throw SupportError("behavior has no mass on action " + std::to_string(a) + " in state " + std::to_string(s));
  }
  return std::log(b);
}

TabularBehavior on_policy_behavior(const SoftmaxPolicy& policy) {
  TabularBehavior b;
  b.table = policy.probabilities();
  b.epsilon_mix = 1.0;
  b.support_mask = b.table.array() != 0.0;
  b.fallback_rows.assign(static_cast<std::size_t>(policy.n_states()), true);
  return b;
}

Vector state_gradient(const SoftmaxPolicy& policy, const Matrix& q, int s) {
  Vector g = Vector::Zero(policy.n_params());
  for (int a = 0; a < policy.n_actions(); ++a) g += policy.density_gradient(s, a) * q(s, a);
  return g;
}

Vector unnormalized_scores_tabular(const SoftmaxPolicy& policy, const Matrix& q, int s) {
  if (!q.row(s).allFinite()) throw NumericalError("behavior scores need finite Q values in state " + std::to_string(s));
  const Vector g = state_gradient(policy, q, s);
  const Vector pi = policy.action_probabilities(s);
  Vector scores(policy.n_actions());
  for (int a = 0; a < policy.n_actions(); ++a) {
    scores(a) = pi(a) != 0.0 ? std::abs(policy.density_gradient(s, a).dot(g) * q(s, a)) : 0.0;
  }
  return scores;
}

double unnormalized_score_tabular(const SoftmaxPolicy& policy, const Matrix& q, int s, int a) {
  return unnormalized_scores_tabular(policy, q, s)(a);
}

TabularBehavior build_tabular_behavior(const SoftmaxPolicy& policy, const Matrix& q, double epsilon_mix) {
  check_epsilon(epsilon_mix);
  if (q.rows() != policy.n_states() || q.cols() != policy.n_actions()) {
    throw ConfigError("build_tabular_behavior: Q table shape mismatch");
  }
  TabularBehavior b;
  b.epsilon_mix = epsilon_mix;
  b.table.resize(policy.n_states(), policy.n_actions());
  b.support_mask.resize(policy.n_states(), policy.n_actions());
  b.fallback_rows.assign(static_cast<std::size_t>(policy.n_states()), false);
  for (int s = 0; s < policy.n_states(); ++s) {
    const Vector pi = policy.action_probabilities(s);
    const Vector scores = unnormalized_scores_tabular(policy, q, s);
    for (int a = 0; a < policy.n_actions(); ++a) {
      if (std::isnan(scores(a))) {
        throw NumericalError("NaN behavior score at (" + std::to_string(s) + "," + std::to_string(a) + ")");
      }
      b.support_mask(s, a) = pi(a) != 0.0;
    }
    const double total = scores.sum();
    Vector row;
    if (total > 0.0 && std::isfinite(total)) {
      row = scores / total;
    } else {
      row = pi;
      b.fallback_rows[static_cast<std::size_t>(s)] = true;
    }
    b.table.row(s) = ((1.0 - epsilon_mix) * row + epsilon_mix * pi).transpose();
  }
  return b;
}

double GaussianBehavior::log_density(const Vector& action) const {
  const double fitted = gaussian_log_density(action, mean, stddev);
  if (epsilon_mix <= 0.0) return fitted;
  const double target = gaussian_log_density(action, target_mean, target_stddev);
  return log_sum_exp(std::log1p(-epsilon_mix) + fitted, std::log(epsilon_mix) + target);
}

Vector GaussianBehavior::sample(Rng& selector, Rng& rng) const {
  bool use_target = epsilon_mix >= 1.0;
  if (epsilon_mix > 0.0 && epsilon_mix < 1.0) use_target = uniform01(selector) < epsilon_mix;
  const Vector& m = use_target ? target_mean : mean;
  const Vector& sd = use_target ? target_stddev : stddev;
  Vector a = m;
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i) += sd(i) * standard_normal(rng);
  return a;
}

GaussianBehavior on_policy_behavior(const GaussianPolicy& policy, const Vector& state) {
  GaussianBehavior b;
  b.target_mean = policy.mean(state);
  b.target_stddev = policy.stddev();
  b.mean = b.target_mean;
  b.stddev = b.target_stddev;
  b.epsilon_mix = 1.0;
  b.fallback = true;
  return b;
}

GaussianScore::GaussianScore(const GaussianPolicy& policy, const LinearCritic& critic, const Vector& state)
    : policy_(&policy), critic_(&critic) {
  if (critic.action_dim() != policy.action_dim()) throw ConfigError("policy and critic disagree on action dimension");
  phi_policy_ = policy.features(state);
  coeffs_ = critic.action_coefficients(critic.state_features()(state));
  mean_ = policy.mean_from_features(phi_policy_);
  // G = (d mu / d theta) grad_a Q(s, mu); only the mean-weight block is nonzero.
  const Vector grad_q = critic.action_gradient_from_coefficients(coeffs_, mean_);
  direction_ = Vector::Zero(policy.n_params());
  const int k = policy.action_dim();
  for (int j = 0; j < policy.n_features(); ++j)
    for (int i = 0; i < k; ++i) direction_(i + j * k) = phi_policy_(j) * grad_q(i);
}

double GaussianScore::operator()(const Vector& action) const {
  const double density = std::exp(policy_->log_density_from_features(phi_policy_, action));
  const double aligned = density * policy_->score_from_features(phi_policy_, action).dot(direction_);
  return std::abs(aligned * critic_->q_from_coefficients(coeffs_, action));
}

double unnormalized_score_gaussian(const GaussianPolicy& policy, const LinearCritic& critic, const Vector& state,
                                   const Vector& action) {
  return GaussianScore(policy, critic, state)(action);
}

namespace {

GaussianFit cross_entropy_round(const Vector& proposal_mean, const Vector& proposal_std,
                                const std::function<double(const Vector&)>& score, int n_proposal, Rng& rng,
                                double std_min) {
  const auto dim = proposal_mean.size();
  Matrix samples(dim, n_proposal);
  Vector weights(n_proposal);
  for (int i = 0; i < n_proposal; ++i) {
    Vector a = proposal_mean;
    for (Eigen::Index d = 0; d < dim; ++d) a(d) += proposal_std(d) * standard_normal(rng);
    const double w = score(a) * std::exp(-gaussian_log_density(a, proposal_mean, proposal_std));
    if (!std::isfinite(w) || w < 0.0) throw NumericalError("cross-entropy fit: non-finite or negative weight");
    samples.col(i) = a;
    weights(i) = w;
  }
  GaussianFit fit;
  fit.n_proposal = n_proposal;
  const double total = weights.sum();
  if (!std::isfinite(total)) throw NumericalError("cross-entropy fit: weight sum overflowed");
  if (total <= 0.0) {
    fit.mean = proposal_mean;
    fit.stddev = proposal_std;
    fit.fallback = true;
    return fit;
  }
  const Vector normalized = weights / total;
  fit.effective_sample_size = 1.0 / normalized.squaredNorm();
  fit.mean = samples * normalized;
  fit.stddev.resize(dim);
  for (Eigen::Index d = 0; d < dim; ++d) {
    const double var = ((samples.row(d).array() - fit.mean(d)).square() * normalized.transpose().array()).sum();
    fit.stddev(d) = std::max(std::sqrt(var), std_min);
  }
  return fit;
}

}  // namespace

GaussianFit fit_gaussian_cross_entropy(const Vector& proposal_mean, const Vector& proposal_std,
                                       const std::function<double(const Vector&)>& score, int n_proposal, Rng& rng,
                                       double std_min, int rounds) {
  if (n_proposal < 8) throw ConfigError("cross-entropy fit needs n_proposal >= 8");
  if (!(std_min > 0.0)) throw ConfigError("std_min must be positive");
  if (rounds < 1) throw ConfigError("cross-entropy fit needs at least one round");
  GaussianFit fit = cross_entropy_round(proposal_mean, proposal_std, score, n_proposal, rng, std_min);
  for (int r = 1; r < rounds && !fit.fallback; ++r) {
    GaussianFit next = cross_entropy_round(fit.mean, fit.stddev, score, n_proposal, rng, std_min);
    if (next.fallback) break;
    fit = std::move(next);
  }
  return fit;
}

GaussianBehavior cross_entropy_fit(const GaussianPolicy& policy, const LinearCritic& critic, const Vector& state,
                                   int n_proposal, Rng& rng, double std_min, double epsilon_mix, int rounds) {
  check_epsilon(epsilon_mix);
  const GaussianScore score(policy, critic, state);
  const Vector sd = policy.stddev();
  const GaussianFit fit = fit_gaussian_cross_entropy(
      score.policy_mean(), sd, [&score](const Vector& a) { return score(a); }, n_proposal, rng, std_min, rounds);
  GaussianBehavior b;
  b.mean = fit.mean;
  b.stddev = fit.stddev;
  b.target_mean = score.policy_mean();
  b.target_stddev = sd;
  b.epsilon_mix = epsilon_mix;
  b.effective_sample_size = fit.effective_sample_size;
  b.n_proposal = fit.n_proposal;
  b.fallback = fit.fallback;
  return b;
}

double behavior_log_density(const TabularBehavior& behavior, int s, int a) { return behavior.log_density(s, a); }

double behavior_log_density(const GaussianBehavior& behavior, const Vector& action) {
  const double lp = behavior.log_density(action);
  if (!std::isfinite(lp)) throw SupportError("behavior density vanishes at the queried action");
  return lp;
}

void write_behavior_csv(std::ostream& out, const TabularBehavior& behavior, const SoftmaxPolicy& policy) {
  out << "state,action,behavior_prob,target_prob,fallback\n";
  for (int s = 0; s < behavior.n_states(); ++s) {
    const Vector pi = policy.action_probabilities(s);
    for (int a = 0; a < behavior.n_actions(); ++a) {
      out << s << ',' << a << ',' << format_double(behavior.table(s, a)) << ',' << format_double(pi(a)) << ','
          << (behavior.fallback_rows[static_cast<std::size_t>(s)] ? 1 : 0) << '\n';
    }
  }
}

void write_behavior_csv(std::ostream& out, const std::vector<Vector>& states,
                        const std::vector<GaussianBehavior>& fits) {
  if (states.size() != fits.size()) throw ConfigError("write_behavior_csv: states and fits differ in length");
  if (fits.empty()) return;
  const auto sdim = states.front().size();
  const auto adim = fits.front().mean.size();
  for (Eigen::Index i = 0; i < sdim; ++i) out << "state_" << i << ',';
  for (Eigen::Index i = 0; i < adim; ++i) out << "mean_" << i << ',';
  for (Eigen::Index i = 0; i < adim; ++i) out << "std_" << i << ',';
  out << "effective_sample_size,n_proposal,fallback\n";
  for (std::size_t k = 0; k < fits.size(); ++k) {
    for (Eigen::Index i = 0; i < sdim; ++i) out << format_double(states[k](i)) << ',';
    for (Eigen::Index i = 0; i < adim; ++i) out << format_double(fits[k].mean(i)) << ',';
    for (Eigen::Index i = 0; i < adim; ++i) out << format_double(fits[k].stddev(i)) << ',';
    out << format_double(fits[k].effective_sample_size) << ',' << fits[k].n_proposal << ','
        << (fits[k].fallback ? 1 : 0) << '\n';
  }
}

}  // namespace aisac
