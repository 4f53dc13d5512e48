#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "csac/policy.hpp"
#include "csac/rng.hpp"

namespace csac {

struct EnvSpec {
  std::size_t observation_dim = 0;
  std::size_t action_dim = 0;
  std::vector<double> action_low;
  std::vector<double> action_high;
  std::size_t max_episode_steps = 200;

  ActionBounds bounds() const { return {action_low, action_high}; }
  void validate() const;
};

struct StepResult {
  std::vector<double> observation;
  double reward = 0.0;
  bool terminal = false;
  bool truncated = false;
};

class Environment {
 public:
  virtual ~Environment() = default;
  virtual const EnvSpec& spec() const = 0;
  /// Starts an episode from the seeded initial-state distribution.
  virtual std::vector<double> reset(std::uint64_t seed) = 0;
  /// Out-of-bounds actions are clipped and counted; non-finite actions throw
  /// ValidationError.
  virtual StepResult step(std::span<const double> action) = 0;
  /// Scales the damping coefficient from the next step on (must be > 0).
  virtual void set_dynamics_scale(double friction_multiplier) = 0;
  virtual double dynamics_scale() const = 0;

  std::size_t action_violations() const { return violations_; }
  std::size_t elapsed_steps() const { return elapsed_; }

 protected:
  std::vector<double> clip_action(std::span<const double> action);
  std::size_t violations_ = 0;
  std::size_t elapsed_ = 0;
};

/// Pendulum swing-up. theta = 0 is upright.
///   theta_ddot = 3g/(2l) sin(theta) + 3u/(m l^2) - friction_scale * b * theta_dot
/// with g = 10, l = 1, m = 1, b = 0.05, integrated by semi-implicit Euler at
/// dt = 0.05 (velocity first, clipped to +-8, then angle). Torque is bounded
/// by +-2. The reward is charged on the pre-step state:
///   -(wrap(theta)^2 + 0.1 theta_dot^2 + 0.001 u^2).
class Pendulum : public Environment {
 public:
  static constexpr double kGravity = 10.0;
  static constexpr double kLength = 1.0;
  static constexpr double kMass = 1.0;
  static constexpr double kDamping = 0.05;
  static constexpr double kDt = 0.05;
  static constexpr double kMaxSpeed = 8.0;
  static constexpr double kMaxTorque = 2.0;

  explicit Pendulum(std::size_t max_episode_steps = 200);

  const EnvSpec& spec() const override { return spec_; }
  std::vector<double> reset(std::uint64_t seed) override;
  StepResult step(std::span<const double> action) override;
  void set_dynamics_scale(double friction_multiplier) override;
  double dynamics_scale() const override { return friction_scale_; }

  /// Places the pendulum in an arbitrary state (does not reset the step count).
  void set_state(double theta, double theta_dot);
  double theta() const { return theta_; }
  double theta_dot() const { return theta_dot_; }
  std::vector<double> observation() const;

  /// Kinetic plus potential energy per unit inertia: theta_dot^2 / 2 + 3g/(2l) cos(theta).
  double energy() const;

 private:
  EnvSpec spec_;
  double theta_ = 0.0;
  double theta_dot_ = 0.0;
  double friction_scale_ = 1.0;
};

/// Wraps an angle to [-pi, pi).
double wrap_angle(double theta);

/// 2-D point mass driven by a bounded force toward a goal sampled per episode.
/// Observation (position, velocity, goal - position); reward
/// -|position - goal| - 0.01 |force|^2; the position is clamped to the box
/// [-1, 1]^2, zeroing the velocity component that hits a wall.
class Reacher : public Environment {
 public:
  static constexpr double kDt = 0.05;
  static constexpr double kBox = 1.0;
  static constexpr double kMaxSpeed = 2.0;
  static constexpr double kDamping = 0.5;
  static constexpr double kMaxForce = 1.0;

  explicit Reacher(std::size_t max_episode_steps = 100);

  const EnvSpec& spec() const override { return spec_; }
  std::vector<double> reset(std::uint64_t seed) override;
  StepResult step(std::span<const double> action) override;
  void set_dynamics_scale(double friction_multiplier) override;
  double dynamics_scale() const override { return friction_scale_; }

  std::vector<double> observation() const;
  const double* position() const { return pos_; }
  const double* goal() const { return goal_; }

 private:
  EnvSpec spec_;
  double pos_[2] = {0.0, 0.0};
  double vel_[2] = {0.0, 0.0};
  double goal_[2] = {0.0, 0.0};
  double friction_scale_ = 1.0;
};

/// "pendulum" or "reacher"; max_episode_steps of 0 keeps the default.
/// Throws ValidationError for an unknown name.
std::unique_ptr<Environment> make_env(const std::string& name, std::size_t max_episode_steps = 0);

}  // namespace csac
