#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "csac/adam.hpp"
#include "csac/buffer.hpp"
#include "csac/checkpoint.hpp"
#include "csac/critic.hpp"
#include "csac/policy.hpp"
#include "csac/regularization.hpp"
#include "csac/rng.hpp"

namespace csac {

struct AgentConfig {
  double sigma = 0.2;
  double tau = 0.5;
  double gamma = 0.99;
  double rho = 0.005;
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  std::vector<std::size_t> hidden{64, 64};
  double log_std_min = kDefaultLogStdMin;
  double log_std_max = kDefaultLogStdMax;
  /// Differentiate the previous-policy density through the sampled action.
  /// When false that path is treated as a constant.
  bool kl_through_action = true;

  /// Throws ValidationError on out-of-range values.
  void validate() const;
  friend bool operator==(const AgentConfig&, const AgentConfig&) = default;
};

Json agent_config_to_json(const AgentConfig& c);
AgentConfig agent_config_from_json(const Json& j);

struct UpdateMetrics {
  double critic_loss_1 = 0.0;
  double critic_loss_2 = 0.0;
  double actor_loss = 0.0;
  double entropy = 0.0;  // mean of -log pi over the actor batch
  double kl = 0.0;       // mean of log pi_new - log pi_prev, per sample clamped to +-100
  std::uint64_t snapshot_version = 0;  // policy updates seen when the snapshot was taken
};

/// Common interface of the trainable agents used by the harness.
class Learner {
 public:
  virtual ~Learner() = default;
  virtual std::vector<double> act(std::span<const double> observation, bool explore) = 0;
  virtual UpdateMetrics update_step(const TransitionBatch& batch) = 0;
  virtual const SquashedGaussianPolicy& policy() const = 0;
  virtual std::uint64_t updates() const = 0;
  virtual Json to_json() const = 0;
};

/// Loss value plus its gradient with respect to the live policy parameters.
struct ActorLoss {
  double loss = 0.0;
  double entropy = 0.0;
  std::vector<double> grad;
  PolicySample sample;
};

/// Conservative soft actor-critic.
class CsacAgent : public Learner {
 public:
  /// Initializes the policy, then q1, then q2 from one stream seeded by `seed`;
  /// the same stream then drives all sampling.
  CsacAgent(std::size_t obs_dim, ActionBounds bounds, AgentConfig config, std::uint64_t seed);
  static CsacAgent from_json(const Json& j);

  std::vector<double> act(std::span<const double> observation, bool explore) override;
  UpdateMetrics update_step(const TransitionBatch& batch) override;
  const SquashedGaussianPolicy& policy() const override { return policy_; }
  std::uint64_t updates() const override { return updates_; }
  Json to_json() const override;

  /// Replaces the previous-policy snapshot with a copy of the live policy.
  void refresh_snapshot();

  /// Mean over the batch of (tau+sigma) log pi - tau log pi_prev - min Q at
  /// actions sampled with `noise` (act x M). Gradient is only computed when asked.
  ActorLoss actor_loss(const Matrix& states, const Matrix& noise, bool with_gradient = true) const;

  /// tau * log pi_prev(action | s) + min of the online critics.
  double preference(std::span<const double> observation, std::span<const double> action) const;

  /// Mean one-sample estimate of log pi - log pi_prev at actions drawn from the
  /// live policy with `noise`; each sample clamped to +-100.
  double kl_estimate(const Matrix& states, const Matrix& noise) const;

  const AgentConfig& config() const { return config_; }
  const RegularizationConfig& regularization() const { return reg_; }
  SquashedGaussianPolicy& mutable_policy() { return policy_; }
  const PolicySnapshot& prev_policy() const { return prev_; }
  TwinCritics& critics() { return critics_; }
  const TwinCritics& critics() const { return critics_; }
  const Adam& actor_optimizer() const { return actor_opt_; }
  const Adam& critic1_optimizer() const { return q1_opt_; }
  const Adam& critic2_optimizer() const { return q2_opt_; }
  Rng& rng() { return rng_; }
  const Rng& rng() const { return rng_; }

 private:
  CsacAgent() = default;
  void init_optimizers();

  AgentConfig config_;
  RegularizationConfig reg_;
  SquashedGaussianPolicy policy_;
  PolicySnapshot prev_;
  TwinCritics critics_;
  Adam actor_opt_, q1_opt_, q2_opt_;
  Rng rng_;
  std::uint64_t updates_ = 0;
};

/// Gradient of the mean of min(q1, q2)(s, a) with respect to the actions,
/// following whichever twin attains the minimum (q1 on ties).
Matrix min_q_action_gradient(const TwinCritics& critics, const Matrix& states,
                             const Matrix& actions, std::vector<double>& min_q);

}  // namespace csac
