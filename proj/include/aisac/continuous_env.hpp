#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "aisac/common.hpp"

namespace aisac {

struct EnvStep {
  Vector next_state;
  double reward = 0.0;
  bool done = false;  // true termination; time limits are handled by the runner
};

// Continuous-state, continuous-action environment. Actions outside the box are
// clamped and counted. Identical seed + action sequence gives bit-identical
// trajectories.
class ContinuousEnv {
 public:
  virtual ~ContinuousEnv() = default;

  virtual std::string name() const = 0;
  virtual int state_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual Vector action_low() const = 0;
  virtual Vector action_high() const = 0;
  virtual int episode_length() const = 0;

  virtual Vector reset(std::uint64_t seed) = 0;
  virtual EnvStep step(const Vector& action) = 0;
  virtual const Vector& state() const = 0;
  virtual std::unique_ptr<ContinuousEnv> clone() const = 0;

  long clamp_events() const { return clamp_events_; }

 protected:
  // Clamps into [action_low, action_high]; bumps clamp_events when it had to.
  Vector clamp_action(const Vector& action);

  long clamp_events_ = 0;
};

struct PendulumConstants {
  static constexpr double gravity = 10.0;
  static constexpr double mass = 1.0;
  static constexpr double length = 1.0;
  static constexpr double dt = 0.05;
  static constexpr double max_torque = 2.0;
  static constexpr double max_speed = 8.0;
  static constexpr int episode_length = 200;
};

// Angle into (-pi, pi].
double wrap_angle(double angle);

struct PendulumStep {
  Vector next_state;
  double reward;
};

// One step of the swing-up pendulum; angle 0 is upright. The torque is clamped
// to the admissible range, the reward uses the current state. Throws
// DivergenceError on non-finite input.
PendulumStep pendulum_step(const Vector& state, double torque);

class Pendulum final : public ContinuousEnv {
 public:
  std::string name() const override { return "pendulum"; }
  int state_dim() const override { return 2; }
  int action_dim() const override { return 1; }
  Vector action_low() const override;
  Vector action_high() const override;
  int episode_length() const override { return PendulumConstants::episode_length; }

  // angle ~ U(-pi, pi], angular velocity ~ U(-1, 1)
  Vector reset(std::uint64_t seed) override;
  EnvStep step(const Vector& action) override;
  const Vector& state() const override { return state_; }
  std::unique_ptr<ContinuousEnv> clone() const override { return std::make_unique<Pendulum>(*this); }

  void set_state(const Vector& state);

 private:
  Vector state_ = Vector::Zero(2);
};

// 2-D point mass driven to the origin; state (x, y, vx, vy), force in [-1, 1]^2.
// The arena has walls and the speed is capped, so the state stays bounded.
class PointMassReacher final : public ContinuousEnv {
 public:
  static constexpr double dt = 0.05;
  static constexpr double max_force = 1.0;
  static constexpr double max_speed = 1.0;
  static constexpr double arena = 1.0;  // positions stay in [-arena, arena]^2

  std::string name() const override { return "reacher"; }
  int state_dim() const override { return 4; }
  int action_dim() const override { return 2; }
  Vector action_low() const override;
  Vector action_high() const override;
  int episode_length() const override { return 200; }

  // position ~ U[-1, 1]^2, zero velocity
  Vector reset(std::uint64_t seed) override;
  EnvStep step(const Vector& action) override;
  const Vector& state() const override { return state_; }
  std::unique_ptr<ContinuousEnv> clone() const override { return std::make_unique<PointMassReacher>(*this); }

 private:
  Vector state_ = Vector::Zero(4);
};

}  // namespace aisac
