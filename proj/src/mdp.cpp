#include "aisac/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "aisac/tensor_io.hpp"

namespace aisac {

namespace {

constexpr double kStochasticTolerance = 1e-12;

void check_action_table(const TabularMdp& mdp, const Matrix& action_probs) {
  if (action_probs.rows() != mdp.n_states || action_probs.cols() != mdp.n_actions) {
    throw ConfigError("action table shape does not match the MDP");
  }
  for (int s = 0; s < mdp.n_states; ++s) {
    if ((action_probs.row(s).array() < 0.0).any() ||
        std::abs(action_probs.row(s).sum() - 1.0) > 1e-9) {
      throw ConfigError("action table row " + std::to_string(s) + " is not a distribution");
    }
  }
}

Vector dirichlet_ones(int n, Rng& rng) {
  std::exponential_distribution<double> expo(1.0);
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = expo(rng);
  return v / v.sum();
}

}  // namespace

TabularMdp::TabularMdp(int states, int actions, double discount)
    : n_states(states),
      n_actions(actions),
      transition(static_cast<std::size_t>(states), Matrix::Zero(actions, states)),
      reward(Matrix::Zero(states, actions)),
      gamma(discount),
      initial_dist(Vector::Zero(states)) {}

void TabularMdp::validate() const {
  if (n_states <= 0 || n_actions <= 0) throw ConfigError("MDP needs positive state and action counts");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("MDP discount must lie in [0, 1)");
  if (static_cast<int>(transition.size()) != n_states || reward.rows() != n_states ||
      reward.cols() != n_actions || initial_dist.size() != n_states) {
    throw ConfigError("MDP tensor shapes are inconsistent");
  }
  if (!reward.allFinite()) throw ConfigError("MDP rewards must be finite");
  for (int s = 0; s < n_states; ++s) {
    const Matrix& p = transition[static_cast<std::size_t>(s)];
    if (p.rows() != n_actions || p.cols() != n_states) throw ConfigError("MDP transition shape mismatch");
    for (int a = 0; a < n_actions; ++a) {
      if ((p.row(a).array() < 0.0).any()) {
        throw ConfigError("negative transition probability at (" + std::to_string(s) + "," + std::to_string(a) + ")");
      }
      if (std::abs(p.row(a).sum() - 1.0) > kStochasticTolerance) {
        throw ConfigError("transition row (" + std::to_string(s) + "," + std::to_string(a) + ") does not sum to 1");
      }
    }
  }
  if ((initial_dist.array() < 0.0).any() || std::abs(initial_dist.sum() - 1.0) > kStochasticTolerance) {
    throw ConfigError("initial distribution is not a probability vector");
  }
}

Matrix TabularMdp::state_transition(const Matrix& action_probs) const {
  Matrix p(n_states, n_states);
  for (int s = 0; s < n_states; ++s) {
    p.row(s) = action_probs.row(s) * transition[static_cast<std::size_t>(s)];
  }
  return p;
}

Vector TabularMdp::expected_reward(const Matrix& action_probs) const {
  return (action_probs.array() * reward.array()).rowwise().sum();
}

TabularMdp random_mdp(int n_states, int n_actions, double gamma, std::uint64_t seed) {
  TabularMdp mdp(n_states, n_actions, gamma);
  Rng rng(seed);
  std::uniform_real_distribution<double> reward(-1.0, 1.0);
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) {
      mdp.transition[static_cast<std::size_t>(s)].row(a) = dirichlet_ones(n_states, rng).transpose();
      mdp.reward(s, a) = reward(rng);
    }
  }
  mdp.initial_dist = dirichlet_ones(n_states, rng);
  mdp.validate();
  return mdp;
}

TabularMdp chain_mdp(int n_states, double slip, double gamma, double distractor_reward) {
  if (n_states < 2) throw ConfigError("chain needs at least 2 states");
  if (!(slip >= 0.0 && slip <= 1.0)) throw ConfigError("chain slip must lie in [0, 1]");
  TabularMdp mdp(n_states, 2, gamma);
  for (int s = 0; s < n_states; ++s) {
    const int left = std::max(s - 1, 0);
    const int right = std::min(s + 1, n_states - 1);
    Matrix& p = mdp.transition[static_cast<std::size_t>(s)];
    p(0, left) += 1.0 - slip;
    p(0, right) += slip;
    p(1, right) += 1.0 - slip;
    p(1, left) += slip;
  }
  mdp.reward(n_states - 1, 1) = 1.0;
  mdp.reward(0, 0) = distractor_reward;
  mdp.initial_dist(0) = 1.0;
  mdp.validate();
  return mdp;
}

TabularMdp gridworld_mdp(int width, int height, double slip, double gamma, double step_cost) {
  if (width < 2 || height < 1) throw ConfigError("gridworld needs at least 2x1 cells");
  if (!(slip >= 0.0 && slip <= 1.0)) throw ConfigError("gridworld slip must lie in [0, 1]");
  const int n = width * height;
  const int goal = n - 1;
  TabularMdp mdp(n, 4, gamma);
  constexpr int dx[4] = {0, 1, 0, -1};
  constexpr int dy[4] = {-1, 0, 1, 0};
  auto move = [&](int s, int dir) {
    const int x = std::clamp(s % width + dx[dir], 0, width - 1);
    const int y = std::clamp(s / width + dy[dir], 0, height - 1);
    return y * width + x;
  };
  for (int s = 0; s < n; ++s) {
    Matrix& p = mdp.transition[static_cast<std::size_t>(s)];
    for (int a = 0; a < 4; ++a) {
      if (s == goal) {
        p(a, 0) = 1.0;
        mdp.reward(s, a) = 1.0;
        continue;
      }
      p(a, move(s, a)) += 1.0 - slip;
      p(a, move(s, (a + 1) % 4)) += 0.5 * slip;
      p(a, move(s, (a + 3) % 4)) += 0.5 * slip;
      mdp.reward(s, a) = -step_cost;
    }
  }
  mdp.initial_dist(0) = 1.0;
  mdp.validate();
  return mdp;
}

Vector exact_state_values(const TabularMdp& mdp, const Matrix& action_probs) {
  check_action_table(mdp, action_probs);
  const Matrix system = Matrix::Identity(mdp.n_states, mdp.n_states) - mdp.gamma * mdp.state_transition(action_probs);
  const Vector r = mdp.expected_reward(action_probs);
  Eigen::PartialPivLU<Matrix> lu(system);
  Vector v = lu.solve(r);
  // Two rounds of iterative refinement recover the last digits on
  // ill-conditioned (gamma close to 1) systems.
  for (int i = 0; i < 2; ++i) v += lu.solve(r - system * v);
  return v;
}

double bellman_residual(const TabularMdp& mdp, const Matrix& action_probs, const Matrix& q) {
  double worst = 0.0;
  const Vector v = (action_probs.array() * q.array()).rowwise().sum();
  for (int s = 0; s < mdp.n_states; ++s) {
    const Vector backup = mdp.reward.row(s).transpose() + mdp.gamma * mdp.transition[static_cast<std::size_t>(s)] * v;
    worst = std::max(worst, (backup - q.row(s).transpose()).cwiseAbs().maxCoeff());
  }
  return worst;
}

Matrix exact_q_values(const TabularMdp& mdp, const Matrix& action_probs, double tolerance) {
  const Vector v = exact_state_values(mdp, action_probs);
  Matrix q(mdp.n_states, mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s) {
    q.row(s) = (mdp.reward.row(s).transpose() + mdp.gamma * mdp.transition[static_cast<std::size_t>(s)] * v).transpose();
  }
  // Polish with Bellman backups; each sweep contracts the error by gamma.
  constexpr int kMaxSweeps = 200;
  double residual = bellman_residual(mdp, action_probs, q);
  for (int sweep = 0; sweep < kMaxSweeps && residual >= tolerance; ++sweep) {
    const Vector next_v = (action_probs.array() * q.array()).rowwise().sum();
    for (int s = 0; s < mdp.n_states; ++s) {
      q.row(s) = (mdp.reward.row(s).transpose() + mdp.gamma * mdp.transition[static_cast<std::size_t>(s)] * next_v).transpose();
    }
    residual = bellman_residual(mdp, action_probs, q);
  }
  if (!(residual < tolerance)) {
    throw NumericalError("exact_q_values: Bellman residual " + format_double(residual) + " above tolerance " +
                         format_double(tolerance));
  }
  return q;
}

Vector exact_state_distribution(const TabularMdp& mdp, const Matrix& action_probs) {
  check_action_table(mdp, action_probs);
  const Matrix system =
      (Matrix::Identity(mdp.n_states, mdp.n_states) - mdp.gamma * mdp.state_transition(action_probs)).transpose();
  Eigen::FullPivLU<Matrix> lu(system);
  if (!lu.isInvertible()) throw NumericalError("exact_state_distribution: singular occupancy system");
  const Vector rhs = (1.0 - mdp.gamma) * mdp.initial_dist;
  Vector d = lu.solve(rhs);
  d += lu.solve(rhs - system * d);
  d = d.cwiseMax(0.0);
  return d / d.sum();
}

double average_reward(const TabularMdp& mdp, const Matrix& action_probs) {
  check_action_table(mdp, action_probs);
  double total = 0.0;
  for (int s = 0; s < mdp.n_states; ++s) {
    double inner = 0.0;
    for (int a = 0; a < mdp.n_actions; ++a) inner += action_probs(s, a) * mdp.reward(s, a);
    total += mdp.initial_dist(s) * inner;
  }
  return total;
}

double discounted_objective(const TabularMdp& mdp, const Matrix& action_probs) {
  return (1.0 - mdp.gamma) * mdp.initial_dist.dot(exact_state_values(mdp, action_probs));
}

OptimalSolution value_iteration(const TabularMdp& mdp, double tolerance, int max_iterations) {
  OptimalSolution out;
  out.values = Vector::Zero(mdp.n_states);
  out.q_values = Matrix::Zero(mdp.n_states, mdp.n_actions);
  for (int it = 1; it <= max_iterations; ++it) {
    for (int s = 0; s < mdp.n_states; ++s) {
      out.q_values.row(s) =
          (mdp.reward.row(s).transpose() + mdp.gamma * mdp.transition[static_cast<std::size_t>(s)] * out.values).transpose();
    }
    const Vector next = out.q_values.rowwise().maxCoeff();
    const double change = (next - out.values).cwiseAbs().maxCoeff();
    out.values = next;
    out.iterations = it;
    if (change < tolerance) break;
  }
  out.greedy_policy.resize(static_cast<std::size_t>(mdp.n_states));
  for (int s = 0; s < mdp.n_states; ++s) {
    Eigen::Index best = 0;
    out.q_values.row(s).maxCoeff(&best);
    out.greedy_policy[static_cast<std::size_t>(s)] = static_cast<int>(best);
  }
  return out;
}

TabularEnv::TabularEnv(const TabularMdp& mdp, std::uint64_t seed) : mdp_(&mdp), rng_(seed) {}

int TabularEnv::reset() {
  state_ = sample_categorical(mdp_->initial_dist, rng_);
  return state_;
}

TabularEnv::Step TabularEnv::step(int action) {
  if (action < 0 || action >= mdp_->n_actions) throw ConfigError("TabularEnv::step: action out of range");
  const Matrix& p = mdp_->transition[static_cast<std::size_t>(state_)];
  const Vector row = p.row(action).transpose();
  Step out{sample_categorical(row, rng_), mdp_->reward(state_, action)};
  state_ = out.next_state;
  return out;
}

namespace {

std::vector<Tensor> mdp_tensors(const TabularMdp& mdp) {
  Tensor meta{"meta", {3}, {double(mdp.n_states), double(mdp.n_actions), mdp.gamma}};
  Tensor initial{"initial", {mdp.n_states}, {}};
  for (int s = 0; s < mdp.n_states; ++s) initial.values.push_back(mdp.initial_dist(s));
  Tensor reward{"reward", {mdp.n_states, mdp.n_actions}, {}};
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a) reward.values.push_back(mdp.reward(s, a));
  Tensor transition{"transition", {mdp.n_states, mdp.n_actions, mdp.n_states}, {}};
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a)
      for (int t = 0; t < mdp.n_states; ++t) transition.values.push_back(mdp.transition[static_cast<std::size_t>(s)](a, t));
  return {meta, initial, reward, transition};
}

TabularMdp mdp_from_tensors(const std::map<std::string, Tensor>& tensors) {
  const Tensor& meta = require_tensor(tensors, "meta", {3});
  const int n_states = static_cast<int>(meta.values[0]);
  const int n_actions = static_cast<int>(meta.values[1]);
  if (n_states <= 0 || n_actions <= 0) throw ConfigError("MDP file: bad dimensions");
  TabularMdp mdp(n_states, n_actions, meta.values[2]);
  const Tensor& initial = require_tensor(tensors, "initial", {n_states});
  const Tensor& reward = require_tensor(tensors, "reward", {n_states, n_actions});
  const Tensor& transition = require_tensor(tensors, "transition", {n_states, n_actions, n_states});
  std::size_t k = 0;
  for (int s = 0; s < n_states; ++s) mdp.initial_dist(s) = initial.values[static_cast<std::size_t>(s)];
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a) mdp.reward(s, a) = reward.values[k++];
  k = 0;
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a)
      for (int t = 0; t < n_states; ++t) mdp.transition[static_cast<std::size_t>(s)](a, t) = transition.values[k++];
  mdp.validate();
  return mdp;
}

}  // namespace

void save_mdp(const std::string& path, const TabularMdp& mdp) { save_tensor_file(path, mdp_tensors(mdp)); }

TabularMdp load_mdp(const std::string& path) { return mdp_from_tensors(load_tensor_file(path)); }

std::string mdp_to_text(const TabularMdp& mdp) {
  std::ostringstream out;
  for (const auto& t : mdp_tensors(mdp)) write_tensor(out, t);
  return out.str();
}

TabularMdp mdp_from_text(const std::string& text) {
  std::istringstream in(text);
  return mdp_from_tensors(read_tensor_map(in));
}

}  // namespace aisac
