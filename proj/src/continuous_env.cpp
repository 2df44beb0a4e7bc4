#include "aisac/continuous_env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace aisac {

Vector ContinuousEnv::clamp_action(const Vector& action) {
  if (action.size() != action_dim()) throw ConfigError(name() + ": action dimension mismatch");
  if (!action.allFinite()) throw DivergenceError(name() + ": non-finite action");
  const Vector clamped = action.cwiseMax(action_low()).cwiseMin(action_high());
  if (clamped != action) ++clamp_events_;
  return clamped;
}

double wrap_angle(double angle) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double wrapped = std::fmod(angle + std::numbers::pi, two_pi);
  if (wrapped < 0.0) wrapped += two_pi;
  wrapped -= std::numbers::pi;
  // fmod maps +pi to -pi; the reported range is (-pi, pi]
  return wrapped <= -std::numbers::pi ? std::numbers::pi : wrapped;
}

PendulumStep pendulum_step(const Vector& state, double torque) {
  using C = PendulumConstants;
  if (state.size() != 2) throw ConfigError("pendulum_step: state must be (angle, velocity)");
  if (!state.allFinite() || !std::isfinite(torque)) throw DivergenceError("pendulum_step: non-finite state or torque");
  const double u = std::clamp(torque, -C::max_torque, C::max_torque);
  const double angle = wrap_angle(state(0));
  const double omega = state(1);
  const double reward = -(angle * angle + 0.1 * omega * omega + 0.001 * u * u);
  double next_omega = omega + (3.0 * C::gravity / (2.0 * C::length) * std::sin(angle) +
                               3.0 / (C::mass * C::length * C::length) * u) * C::dt;
  next_omega = std::clamp(next_omega, -C::max_speed, C::max_speed);
  Vector next(2);
  next << wrap_angle(angle + next_omega * C::dt), next_omega;
  return {std::move(next), reward};
}

Vector Pendulum::action_low() const { return Vector::Constant(1, -PendulumConstants::max_torque); }
Vector Pendulum::action_high() const { return Vector::Constant(1, PendulumConstants::max_torque); }

Vector Pendulum::reset(std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> velocity(-1.0, 1.0);
  state_.resize(2);
  state_(0) = wrap_angle(angle(rng));
  state_(1) = velocity(rng);
  return state_;
}

void Pendulum::set_state(const Vector& state) {
  if (state.size() != 2) throw ConfigError("pendulum state must be (angle, velocity)");
  state_ = state;
  state_(0) = wrap_angle(state_(0));
}

EnvStep Pendulum::step(const Vector& action) {
  const Vector u = clamp_action(action);
  PendulumStep out = pendulum_step(state_, u(0));
  state_ = out.next_state;
  return {std::move(out.next_state), out.reward, false};
}

Vector PointMassReacher::action_low() const { return Vector::Constant(2, -max_force); }
Vector PointMassReacher::action_high() const { return Vector::Constant(2, max_force); }

Vector PointMassReacher::reset(std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> position(-arena, arena);
  state_ = Vector::Zero(4);
  state_(0) = position(rng);
  state_(1) = position(rng);
  return state_;
}

EnvStep PointMassReacher::step(const Vector& action) {
  const Vector u = clamp_action(action);
  const double reward = -(state_.head<2>().squaredNorm() + 0.1 * state_.tail<2>().squaredNorm() + 0.001 * u.squaredNorm());
  state_.tail<2>() = (state_.tail<2>() + u * dt).cwiseMax(-max_speed).cwiseMin(max_speed);
  state_.head<2>() += state_.tail<2>() * dt;
  for (int i = 0; i < 2; ++i) {
    // walls: stop the mass at the arena boundary
    if (std::abs(state_(i)) > arena) {
      state_(i) = std::clamp(state_(i), -arena, arena);
      state_(i + 2) = 0.0;
    }
  }
  if (!state_.allFinite()) throw DivergenceError("reacher: non-finite state");
  return {state_, reward, false};
}

}  // namespace aisac
