#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "aisac/behavior.hpp"
#include "aisac/mdp.hpp"
#include "oracles.hpp"

using namespace aisac;

namespace {

SoftmaxPolicy random_softmax(int s, int a, Rng& rng) {
  SoftmaxPolicy p(s, a);
  for (int i = 0; i < p.n_params(); ++i) p.parameters()(i) = standard_normal(rng);
  return p;
}

Matrix random_q(int s, int a, Rng& rng) {
  Matrix q(s, a);
  for (int i = 0; i < s; ++i)
    for (int j = 0; j < a; ++j) q(i, j) = 2.0 * standard_normal(rng);
  return q;
}

// single-parameter family: h(s, a) = x[s][a] * theta
SoftmaxPolicy scalar_softmax(int s, int a, Rng& rng) {
  std::vector<Matrix> features(static_cast<std::size_t>(s), Matrix(a, 1));
  for (auto& f : features)
    for (int i = 0; i < a; ++i) f(i, 0) = standard_normal(rng);
  SoftmaxPolicy p(features);
  p.parameters()(0) = standard_normal(rng);
  return p;
}

}  // namespace

TEST_CASE("tabular scores vanish with Q") {
  Rng rng(1);
  auto p = random_softmax(3, 3, rng);
  Matrix q = Matrix::Zero(3, 3);
  for (int s = 0; s < 3; ++s) CHECK(unnormalized_scores_tabular(p, q, s).isZero());
  auto b = build_tabular_behavior(p, q, 0.0);
  CHECK(b.table == p.probabilities());
  for (bool f : b.fallback_rows) CHECK(f);
}

TEST_CASE("tabular score matches a recomputation from density gradients") {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    auto p = random_softmax(2, 3, rng);
    Matrix q = random_q(2, 3, rng);
    for (int s = 0; s < 2; ++s) {
      // G(s) by explicit loops over parameter components
      std::vector<double> g(static_cast<std::size_t>(p.n_params()), 0.0);
      for (int a = 0; a < 3; ++a) {
        Vector dg = p.density_gradient(s, a);
        for (int k = 0; k < p.n_params(); ++k) g[static_cast<std::size_t>(k)] += dg(k) * q(s, a);
      }
      for (int a = 0; a < 3; ++a) {
        Vector dg = p.density_gradient(s, a);
        double dot = 0.0;
        for (int k = 0; k < p.n_params(); ++k) dot += dg(k) * g[static_cast<std::size_t>(k)];
        CHECK(std::abs(unnormalized_score_tabular(p, q, s, a) - std::abs(dot * q(s, a))) < 1e-12);
      }
    }
  }
}

TEST_CASE("scalar family score reduces to |f p| |I|") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = scalar_softmax(2, 4, rng);
    Matrix q = random_q(2, 4, rng);
    for (int s = 0; s < 2; ++s) {
      const Vector pi = p.action_probabilities(s);
      // d pi(a) / d theta = pi(a) (x_a - sum_b pi(b) x_b)
      Vector feat(4);
      for (int a = 0; a < 4; ++a) feat(a) = p.preferences(s)(a) / p.parameters()(0);
      const double mean_x = pi.dot(feat);
      double total = 0.0;
      Vector fp(4);
      for (int a = 0; a < 4; ++a) {
        fp(a) = pi(a) * (feat(a) - mean_x) * q(s, a);
        total += fp(a);
      }
      for (int a = 0; a < 4; ++a) {
        CHECK(std::abs(unnormalized_score_tabular(p, q, s, a) - std::abs(fp(a)) * std::abs(total)) < 1e-10);
      }
    }
  }
}

TEST_CASE("built behavior rows are normalized scores") {
  Rng rng(4);
  auto mdp = random_mdp(5, 3, 0.9, 4);
  auto p = random_softmax(5, 3, rng);
  const Matrix q = exact_q_values(mdp, p.probabilities());
  auto b = build_tabular_behavior(p, q, 0.0);
  for (int s = 0; s < 5; ++s) {
    const Vector scores = unnormalized_scores_tabular(p, q, s);
    CHECK(std::abs(b.row(s).sum() - 1.0) < 1e-12);
    CHECK((b.row(s) - scores / scores.sum()).cwiseAbs().maxCoeff() < 1e-12);
  }

  const double eps = 0.1;
  auto mixed = build_tabular_behavior(p, q, eps);
  for (int s = 0; s < 5; ++s) {
    CHECK((mixed.row(s) - ((1 - eps) * b.row(s) + eps * p.action_probabilities(s))).cwiseAbs().maxCoeff() < 1e-15);
    for (int a = 0; a < 3; ++a) CHECK(p.density(s, a) / mixed.density(s, a) <= 1.0 / eps + 1e-12);
  }
  auto full = build_tabular_behavior(p, q, 1.0);
  CHECK(full.table == p.probabilities());
}

TEST_CASE("single nonzero score puts all mass on that action") {
  SoftmaxPolicy p(1, 3);
  p.parameters() << 0.2, -0.1, 0.4;
  Matrix q = Matrix::Zero(1, 3);
  q(0, 1) = 2.0;  // only action 1 has Q != 0
  auto b = build_tabular_behavior(p, q, 0.0);
  CHECK(b.density(0, 1) == 1.0);
  CHECK(b.density(0, 0) == 0.0);
  CHECK_THROWS_AS(b.log_density(0, 0), SupportError);
  CHECK(b.log_density(0, 1) == 0.0);
}

TEST_CASE("NaN in Q is reported") {
  SoftmaxPolicy p(2, 2);
  Matrix q = Matrix::Ones(2, 2);
  q(1, 0) = std::nan("");
  CHECK_THROWS_AS(build_tabular_behavior(p, q, 0.0), NumericalError);
  CHECK_THROWS_AS(build_tabular_behavior(p, Matrix::Ones(2, 2), 1.5), ConfigError);
}

TEST_CASE("tabular behavior log density") {
  TabularBehavior b;
  b.table = Matrix::Constant(1, 2, 0.5);
  CHECK(behavior_log_density(b, 0, 1) == doctest::Approx(std::log(0.5)).epsilon(1e-15));
}

TEST_CASE("Gaussian behavior log density") {
  GaussianBehavior b;
  b.mean = Vector::Constant(1, 0.3);
  b.stddev = Vector::Ones(1);
  CHECK(behavior_log_density(b, b.mean) == doctest::Approx(-0.5 * std::log(2 * std::numbers::pi)).epsilon(1e-15));

  Rng rng(5);
  b.mean = Vector::Random(2);
  b.stddev = Vector::Constant(2, 0.7);
  b.target_mean = Vector::Random(2);
  b.target_stddev = Vector::Constant(2, 1.3);
  for (int k = 0; k < 10; ++k) {
    Vector a = Vector::Random(2) * 2.0;
    b.epsilon_mix = 0.0;
    CHECK(std::abs(behavior_log_density(b, a) - gaussian_log_density(a, b.mean, b.stddev)) < 1e-12);
    b.epsilon_mix = 0.2;
    const double mix = 0.8 * std::exp(gaussian_log_density(a, b.mean, b.stddev)) +
                       0.2 * std::exp(gaussian_log_density(a, b.target_mean, b.target_stddev));
    CHECK(std::abs(behavior_log_density(b, a) - std::log(mix)) < 1e-12);
  }
}

TEST_CASE("Gaussian score hand case") {
  // policy mean 0.2 + 0.4 s, sigma 0.8; critic Q = -1 + 0.6 a - 0.3 a^2 at s = 0.5
  GaussianPolicy policy(FeatureMap::identity(1), 1, std::log(0.8));
  policy.parameters() << 0.2, 0.4, std::log(0.8);
  LinearCritic critic(FeatureMap::identity(1), 1, 0.1);
  critic.weights() << -1.0, 0.6, -0.3, 0.0, 0.0, 0.0;
  const Vector s = Vector::Constant(1, 0.5);
  // value from a symbolic hand derivation evaluated in Python
  CHECK(unnormalized_score_gaussian(policy, critic, s, Vector::Constant(1, 1.1)) ==
        doctest::Approx(0.1176664435858136).epsilon(1e-12));

  LinearCritic constant(FeatureMap::identity(1), 1, 0.1);
  constant.weights()(0) = 3.0;
  CHECK(unnormalized_score_gaussian(policy, constant, s, Vector::Constant(1, -0.4)) == 0.0);
}

TEST_CASE("Gaussian score with a finite-difference critic gradient") {
  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    GaussianPolicy policy(FeatureMap::identity(2), 2, -0.3);
    for (int i = 0; i < policy.log_std_offset(); ++i) policy.parameters()(i) = 0.5 * standard_normal(rng);
    LinearCritic critic(FeatureMap::polynomial(2, 2), 2, 0.1);
    for (int i = 0; i < critic.n_weights(); ++i) critic.weights()(i) = standard_normal(rng);
    const Vector s = Vector::Random(2);
    const Vector a = policy.mean(s) + 0.5 * Vector::Random(2);
    const Vector mu = policy.mean(s);
    auto q = [&](const Vector& x) { return critic.q_value(s, x); };
    const Vector grad_q = oracle::finite_difference(q, mu, 1e-5);
    const Vector phi = policy.features(s);
    Vector direction = Vector::Zero(policy.n_params());
    for (int j = 0; j < phi.size(); ++j)
      for (int i = 0; i < 2; ++i) direction(i + 2 * j) = phi(j) * grad_q(i);
    const double expected = std::abs(policy.density_gradient(s, a).dot(direction) * critic.q_value(s, a));
    const double got = unnormalized_score_gaussian(policy, critic, s, a);
    CHECK(std::abs(got - expected) <= 1e-4 * std::max(expected, 1e-12));
  }
}

TEST_CASE("cross-entropy fit recovers a Gaussian target") {
  const double mu = 2.0, sd = 0.5;
  auto target = [&](const Vector& a) {
    const double z = (a(0) - mu) / sd;
    return std::exp(-0.5 * z * z) / (sd * std::sqrt(2 * std::numbers::pi));
  };
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    auto fit = fit_gaussian_cross_entropy(Vector::Constant(1, 1.0), Vector::Constant(1, 1.5), target, 10000, rng, 1e-2);
    CHECK(std::abs(fit.mean(0) - mu) < 0.05);
    CHECK(std::abs(fit.stddev(0) / sd - 1.0) < 0.05);
    CHECK(fit.effective_sample_size > 1000.0);
    CHECK_FALSE(fit.fallback);
  }
}

TEST_CASE("repeated cross-entropy rounds start from the policy") {
  const double mu = 2.0, sd = 0.5;
  auto target = [&](const Vector& a) { return std::exp(gaussian_log_density(a, Vector::Constant(1, mu), Vector::Constant(1, sd))); };
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    auto fit = fit_gaussian_cross_entropy(Vector::Zero(1), Vector::Ones(1), target, 10000, rng, 1e-2, 3);
    CHECK(std::abs(fit.mean(0) - mu) < 0.05);
    CHECK(std::abs(fit.stddev(0) / sd - 1.0) < 0.05);
  }
  Rng rng(1);
  CHECK_THROWS_AS(fit_gaussian_cross_entropy(Vector::Zero(1), Vector::Ones(1), target, 64, rng, 1e-2, 0), ConfigError);
  // a zero score keeps the first-round fallback
  auto zero = [](const Vector&) { return 0.0; };
  auto fallback = fit_gaussian_cross_entropy(Vector::Constant(1, 0.4), Vector::Ones(1), zero, 64, rng, 1e-2, 4);
  CHECK(fallback.fallback);
  CHECK(fallback.mean(0) == 0.4);
}

TEST_CASE("cross-entropy fit with uniform weights recovers the proposal") {
  const Vector m = Vector::Constant(2, 0.3), s = Vector::Constant(2, 0.8);
  auto proportional = [&](const Vector& a) { return 5.0 * std::exp(gaussian_log_density(a, m, s)); };
  Rng rng(7);
  auto fit = fit_gaussian_cross_entropy(m, s, proportional, 100000, rng, 1e-2);
  CHECK(std::abs(fit.effective_sample_size - 100000.0) < 1e-3);
  for (int i = 0; i < 2; ++i) {
    CHECK(std::abs(fit.mean(i) - 0.3) < 4 * 0.8 / std::sqrt(1e5));
    CHECK(std::abs(fit.stddev(i) - 0.8) < 0.01);
  }
}

TEST_CASE("cross-entropy fallback and guards") {
  Rng rng(8);
  auto zero = [](const Vector&) { return 0.0; };
  auto fit = fit_gaussian_cross_entropy(Vector::Constant(1, -0.7), Vector::Constant(1, 0.9), zero, 64, rng, 1e-2);
  CHECK(fit.fallback);
  CHECK(fit.mean(0) == -0.7);
  CHECK(fit.stddev(0) == 0.9);
  CHECK_THROWS_AS(fit_gaussian_cross_entropy(Vector::Zero(1), Vector::Ones(1), zero, 7, rng, 1e-2), ConfigError);
  auto bad = [](const Vector&) { return std::nan(""); };
  CHECK_THROWS_AS(fit_gaussian_cross_entropy(Vector::Zero(1), Vector::Ones(1), bad, 16, rng, 1e-2), NumericalError);
  // a point-mass target collapses the fit onto the floor
  auto spike = [](const Vector& a) { return a(0) > 0.0 && a(0) < 0.01 ? 1.0 : 0.0; };
  auto narrow = fit_gaussian_cross_entropy(Vector::Zero(1), Vector::Ones(1), spike, 2000, rng, 0.05);
  CHECK(narrow.stddev(0) == 0.05);
}

TEST_CASE("policy cross-entropy fit with a zero critic falls back to pi") {
  GaussianPolicy policy(FeatureMap::identity(1), 1, -0.2);
  policy.parameters() << 0.1, 0.3, -0.2;
  LinearCritic critic(FeatureMap::identity(1), 1, 0.1);
  Rng rng(9);
  const Vector s = Vector::Constant(1, 0.4);
  auto b = cross_entropy_fit(policy, critic, s, 64, rng, 1e-2, 0.05);
  CHECK(b.fallback);
  CHECK(b.mean == policy.mean(s));
  CHECK(b.stddev == policy.stddev());
  CHECK(b.epsilon_mix == 0.05);
}

TEST_CASE("Gaussian behavior sampling respects the mixture") {
  GaussianBehavior b;
  b.mean = Vector::Constant(1, 10.0);
  b.stddev = Vector::Constant(1, 0.01);
  b.target_mean = Vector::Constant(1, -10.0);
  b.target_stddev = Vector::Constant(1, 0.01);
  b.epsilon_mix = 0.25;
  Rng selector(1), rng(2);
  int from_target = 0;
  const int n = 40000;
  for (int i = 0; i < n; ++i) from_target += b.sample(selector, rng)(0) < 0.0 ? 1 : 0;
  CHECK(std::abs(from_target - 0.25 * n) < 4 * std::sqrt(n * 0.25 * 0.75));
  b.epsilon_mix = 1.0;
  for (int i = 0; i < 100; ++i) CHECK(b.sample(selector, rng)(0) < 0.0);
}

TEST_CASE("behavior CSV layout") {
  SoftmaxPolicy p(2, 2);
  auto b = on_policy_behavior(p);
  std::ostringstream out;
  write_behavior_csv(out, b, p);
  const std::string text = out.str();
  CHECK(text.rfind("state,action,behavior_prob,target_prob,fallback\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 5);
}
