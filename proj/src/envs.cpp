#include "csac/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "csac/errors.hpp"

namespace csac {

void EnvSpec::validate() const {
  if (observation_dim == 0 || action_dim == 0 || max_episode_steps == 0) {
    throw ValidationError("EnvSpec: dimensions and episode length must be positive");
  }
  if (action_low.size() != action_dim || action_high.size() != action_dim) {
    throw ValidationError("EnvSpec: bounds must match the action dimension");
  }
  bounds().validate();
}

std::vector<double> Environment::clip_action(std::span<const double> action) {
  const auto& s = spec();
  if (action.size() != s.action_dim) {
    throw DimensionError("step: action has " + std::to_string(action.size()) +
                         " components, environment expects " + std::to_string(s.action_dim));
  }
  std::vector<double> a(action.begin(), action.end());
  bool violated = false;
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (!std::isfinite(a[j])) throw ValidationError("step: non-finite action");
    if (a[j] < s.action_low[j] || a[j] > s.action_high[j]) {
      a[j] = std::clamp(a[j], s.action_low[j], s.action_high[j]);
      violated = true;
    }
  }
  if (violated) ++violations_;
  return a;
}

double wrap_angle(double theta) {
  const double two_pi = 2.0 * std::numbers::pi;
  double w = std::fmod(theta + std::numbers::pi, two_pi);
  if (w < 0.0) w += two_pi;
  return w - std::numbers::pi;
}

Pendulum::Pendulum(std::size_t max_episode_steps) {
  spec_ = {3, 1, {-kMaxTorque}, {kMaxTorque}, max_episode_steps};
  spec_.validate();
}

std::vector<double> Pendulum::reset(std::uint64_t seed) {
  Rng rng(seed);
  // uniform on (-pi, pi]
  theta_ = -rng.uniform(-std::numbers::pi, std::numbers::pi);
  theta_dot_ = rng.uniform(-1.0, 1.0);
  elapsed_ = 0;
  return observation();
}

std::vector<double> Pendulum::observation() const {
  return {std::cos(theta_), std::sin(theta_), theta_dot_};
}

void Pendulum::set_state(double theta, double theta_dot) {
  theta_ = theta;
  theta_dot_ = std::clamp(theta_dot, -kMaxSpeed, kMaxSpeed);
}

double Pendulum::energy() const {
  return 0.5 * theta_dot_ * theta_dot_ + 3.0 * kGravity / (2.0 * kLength) * std::cos(theta_);
}

StepResult Pendulum::step(std::span<const double> action) {
  const double u = clip_action(action)[0];
  const double th = wrap_angle(theta_);
  const double cost = th * th + 0.1 * theta_dot_ * theta_dot_ + 0.001 * u * u;

  const double accel = 3.0 * kGravity / (2.0 * kLength) * std::sin(theta_) +
                       3.0 * u / (kMass * kLength * kLength) -
                       friction_scale_ * kDamping * theta_dot_;
  theta_dot_ = std::clamp(theta_dot_ + accel * kDt, -kMaxSpeed, kMaxSpeed);
  theta_ = theta_ + theta_dot_ * kDt;
  ++elapsed_;

  StepResult r;
  r.observation = observation();
  r.reward = -cost;
  r.terminal = false;
  r.truncated = elapsed_ >= spec_.max_episode_steps;
  return r;
}

void Pendulum::set_dynamics_scale(double friction_multiplier) {
  if (!(friction_multiplier > 0.0) || !std::isfinite(friction_multiplier)) {
    throw ValidationError("set_dynamics_scale: multiplier must be positive");
  }
  friction_scale_ = friction_multiplier;
}

Reacher::Reacher(std::size_t max_episode_steps) {
  spec_ = {6, 2, {-kMaxForce, -kMaxForce}, {kMaxForce, kMaxForce}, max_episode_steps};
  spec_.validate();
}

std::vector<double> Reacher::reset(std::uint64_t seed) {
  Rng rng(seed);
  for (int k = 0; k < 2; ++k) {
    pos_[k] = rng.uniform(-0.5, 0.5);
    vel_[k] = 0.0;
  }
  for (double& g : goal_) g = rng.uniform(-0.8, 0.8);
  elapsed_ = 0;
  return observation();
}

std::vector<double> Reacher::observation() const {
  return {pos_[0], pos_[1], vel_[0], vel_[1], goal_[0] - pos_[0], goal_[1] - pos_[1]};
}

StepResult Reacher::step(std::span<const double> action) {
  const auto f = clip_action(action);
  const double dx = pos_[0] - goal_[0];
  const double dy = pos_[1] - goal_[1];
  const double reward = -std::sqrt(dx * dx + dy * dy) - 0.01 * (f[0] * f[0] + f[1] * f[1]);
  for (int k = 0; k < 2; ++k) {
    const double accel = f[k] - friction_scale_ * kDamping * vel_[k];
    vel_[k] = std::clamp(vel_[k] + accel * kDt, -kMaxSpeed, kMaxSpeed);
    pos_[k] += vel_[k] * kDt;
    if (pos_[k] > kBox || pos_[k] < -kBox) {
      pos_[k] = std::clamp(pos_[k], -kBox, kBox);
      vel_[k] = 0.0;
    }
  }
  ++elapsed_;
  StepResult r;
  r.observation = observation();
  r.reward = reward;
  r.truncated = elapsed_ >= spec_.max_episode_steps;
  return r;
}

void Reacher::set_dynamics_scale(double friction_multiplier) {
  if (!(friction_multiplier > 0.0) || !std::isfinite(friction_multiplier)) {
    throw ValidationError("set_dynamics_scale: multiplier must be positive");
  }
  friction_scale_ = friction_multiplier;
}

std::unique_ptr<Environment> make_env(const std::string& name, std::size_t max_episode_steps) {
  if (name == "pendulum") {
    return std::make_unique<Pendulum>(max_episode_steps == 0 ? 200 : max_episode_steps);
  }
  if (name == "reacher") {
    return std::make_unique<Reacher>(max_episode_steps == 0 ? 100 : max_episode_steps);
  }
  throw ValidationError("unknown environment '" + name + "' (expected pendulum or reacher)");
}

}  // namespace csac
