#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "aisac/features.hpp"
#include "aisac/policy.hpp"
#include "oracles.hpp"

using namespace aisac;

namespace {

SoftmaxPolicy random_softmax(int s, int a, Rng& rng, double scale = 1.0) {
  SoftmaxPolicy p(s, a);
  for (int i = 0; i < p.n_params(); ++i) p.parameters()(i) = scale * standard_normal(rng);
  return p;
}

GaussianPolicy random_gaussian(int state_dim, int action_dim, Rng& rng) {
  GaussianPolicy p(FeatureMap::polynomial(state_dim, 2), action_dim);
  for (int i = 0; i < p.n_params(); ++i) p.parameters()(i) = 0.5 * standard_normal(rng);
  return p;
}

Vector random_vector(int n, Rng& rng) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = standard_normal(rng);
  return v;
}

}  // namespace

TEST_CASE("softmax density values") {
  SoftmaxPolicy uniform(2, 4);
  CHECK(uniform.density(1, 2) == doctest::Approx(0.25).epsilon(1e-15));

  Rng rng(1);
  auto p = random_softmax(3, 4, rng);
  for (int s = 0; s < 3; ++s) {
    std::vector<double> prefs(4);
    for (int a = 0; a < 4; ++a) prefs[static_cast<std::size_t>(a)] = p.parameters()(s * 4 + a);
    auto direct = oracle::softmax_row(prefs);
    double sum = 0.0;
    for (int a = 0; a < 4; ++a) {
      CHECK(std::abs(p.density(s, a) - direct[static_cast<std::size_t>(a)]) < 1e-12);
      CHECK(std::abs(p.log_density(s, a) - std::log(direct[static_cast<std::size_t>(a)])) < 1e-12);
      sum += p.density(s, a);
    }
    CHECK(std::abs(sum - 1.0) < 1e-14);
  }

  SoftmaxPolicy hot(1, 3, 2.0);
  hot.parameters() << 1.0, 0.0, -1.0;
  auto direct = oracle::softmax_row({1.0, 0.0, -1.0}, 2.0);
  CHECK(std::abs(hot.density(0, 0) - direct[0]) < 1e-14);
}

TEST_CASE("Gaussian density values") {
  GaussianPolicy p(FeatureMap::identity(2), 1);
  Vector s(2);
  s << 0.3, -0.7;
  CHECK(p.density(s, p.mean(s)) == doctest::Approx(1.0 / std::sqrt(2 * std::numbers::pi)).epsilon(1e-15));

  Rng rng(2);
  auto g = random_gaussian(2, 2, rng);
  for (int k = 0; k < 20; ++k) {
    Vector st = random_vector(2, rng), a = random_vector(2, rng);
    const Vector mu = g.mean(st), sd = g.stddev();
    double direct = 1.0;
    for (int i = 0; i < 2; ++i)
      direct *= std::exp(-0.5 * std::pow((a(i) - mu(i)) / sd(i), 2)) / (sd(i) * std::sqrt(2 * std::numbers::pi));
    CHECK(std::abs(g.density(st, a) - direct) < 1e-12 * std::max(1.0, direct));
  }
}

TEST_CASE("softmax score closed form") {
  SoftmaxPolicy p(3, 2);
  Vector g = p.score(1, 0);
  Vector expected = Vector::Zero(6);
  expected(2) = 0.5;
  expected(3) = -0.5;
  CHECK(g == expected);
  // density gradient: pi = 0.5 times the score
  CHECK(p.density_gradient(1, 0) == 0.5 * expected);

  SoftmaxPolicy quarter(1, 4);
  CHECK(quarter.density_gradient(0, 1)(1) == doctest::Approx(0.25 * 0.75).epsilon(1e-15));
  CHECK(quarter.density_gradient(0, 1)(0) == doctest::Approx(-0.25 * 0.25).epsilon(1e-15));
}

TEST_CASE("Gaussian score at the mean has zero mean-weight block") {
  Rng rng(3);
  auto g = random_gaussian(2, 2, rng);
  Vector s = random_vector(2, rng);
  Vector score = g.score(s, g.mean(s));
  CHECK(score.head(g.log_std_offset()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(score.tail(2) == Vector::Constant(2, -1.0));
}

TEST_CASE("scores and density gradients match finite differences") {
  const double h = 1e-6;
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    auto p = random_softmax(3, 3, rng);
    const int s = trial % 3, a = (trial / 3) % 3;
    const Vector theta = p.parameters();
    auto log_pi = [&](const Vector& t) {
      SoftmaxPolicy q = p;
      q.set_parameters(t);
      return q.log_density(s, a);
    };
    auto pi = [&](const Vector& t) {
      SoftmaxPolicy q = p;
      q.set_parameters(t);
      return q.density(s, a);
    };
    CHECK(oracle::relative_error(p.score(s, a), oracle::finite_difference(log_pi, theta, h)) < 1e-5);
    CHECK(oracle::relative_error(p.density_gradient(s, a), oracle::finite_difference(pi, theta, h)) < 1e-5);
  }
  for (int trial = 0; trial < 30; ++trial) {
    auto p = random_gaussian(2, 2, rng);
    const Vector s = random_vector(2, rng);
    const Vector a = p.mean(s) + random_vector(2, rng);
    const Vector theta = p.parameters();
    auto log_pi = [&](const Vector& t) {
      GaussianPolicy q = p;
      q.set_parameters(t);
      return q.log_density(s, a);
    };
    auto pi = [&](const Vector& t) {
      GaussianPolicy q = p;
      q.set_parameters(t);
      return q.density(s, a);
    };
    CHECK(oracle::relative_error(p.score(s, a), oracle::finite_difference(log_pi, theta, h)) < 1e-5);
    CHECK(oracle::relative_error(p.density_gradient(s, a), oracle::finite_difference(pi, theta, h)) < 1e-5);
  }
}

TEST_CASE("feature softmax score matches finite differences") {
  Rng rng(5);
  std::vector<Matrix> features(3, Matrix(4, 2));
  for (auto& f : features)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 2; ++j) f(i, j) = standard_normal(rng);
  SoftmaxPolicy p(features);
  p.parameters() << 0.4, -1.1;
  for (int s = 0; s < 3; ++s) {
    for (int a = 0; a < 4; ++a) {
      auto log_pi = [&](const Vector& t) {
        SoftmaxPolicy q = p;
        q.set_parameters(t);
        return q.log_density(s, a);
      };
      CHECK(oracle::relative_error(p.score(s, a), oracle::finite_difference(log_pi, p.parameters(), 1e-6)) < 1e-5);
    }
  }
}

TEST_CASE("softmax density gradients sum to zero over actions") {
  Rng rng(6);
  auto p = random_softmax(4, 5, rng, 2.0);
  for (int s = 0; s < 4; ++s) {
    Vector total = Vector::Zero(p.n_params());
    for (int a = 0; a < 5; ++a) total += p.density_gradient(s, a);
    CHECK(total.cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("sampling") {
  SoftmaxPolicy det(1, 3);
  det.parameters() << 0.0, 50.0, 0.0;
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) CHECK(det.sample(0, rng) == 1);
  CHECK(det.greedy_action(0) == 1);

  SoftmaxPolicy uniform(1, 4);
  std::vector<int> counts(4, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(uniform.sample(0, rng))];
  const double sd = std::sqrt(n * 0.25 * 0.75);
  for (int c : counts) CHECK(std::abs(c - n * 0.25) < 3 * sd);

  GaussianPolicy narrow(FeatureMap::identity(1), 1, std::log(1e-8));
  narrow.parameters()(0) = 0.3;
  narrow.parameters()(1) = -2.0;
  Vector s = Vector::Constant(1, 0.5);
  for (int i = 0; i < 100; ++i) CHECK(std::abs(narrow.sample(s, rng)(0) - narrow.mean(s)(0)) < 1e-6);
}

TEST_CASE("extreme preferences keep a finite score") {
  SoftmaxPolicy p(1, 2);
  p.parameters() << 0.0, 2000.0;
  CHECK(p.density(0, 1) == 1.0);
  CHECK(p.density(0, 0) < 1e-300);
  CHECK(p.score(0, 0).allFinite());
  CHECK_THROWS_AS(p.score(0, 2), ConfigError);
}

TEST_CASE("entropy") {
  SoftmaxPolicy uniform(1, 4);
  CHECK(uniform.entropy(0) == doctest::Approx(std::log(4.0)));
  GaussianPolicy g(FeatureMap::identity(1), 2, 0.5);
  CHECK(g.entropy() == doctest::Approx(2 * (0.5 * std::log(2 * std::numbers::pi * std::numbers::e) + 0.5)));
}

TEST_CASE("policy files round trip") {
  Rng rng(8);
  auto soft = random_softmax(3, 2, rng);
  auto gauss = random_gaussian(2, 2, rng);
  auto dir = std::filesystem::temp_directory_path();
  save_policy((dir / "aisac_soft.txt").string(), soft);
  save_policy((dir / "aisac_gauss.txt").string(), gauss);
  SoftmaxPolicy soft2(3, 2);
  GaussianPolicy gauss2(FeatureMap::polynomial(2, 2), 2);
  load_policy_parameters((dir / "aisac_soft.txt").string(), soft2);
  load_policy_parameters((dir / "aisac_gauss.txt").string(), gauss2);
  CHECK(soft2.parameters() == soft.parameters());
  CHECK(gauss2.parameters() == gauss.parameters());
  SoftmaxPolicy wrong(2, 2);
  CHECK_THROWS(load_policy_parameters((dir / "aisac_soft.txt").string(), wrong));
  std::filesystem::remove(dir / "aisac_soft.txt");
  std::filesystem::remove(dir / "aisac_gauss.txt");
}
