#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "csac/adam.hpp"
#include "csac/agent.hpp"
#include "csac/buffer.hpp"
#include "csac/mlp.hpp"
#include "csac/policy.hpp"
#include "csac/rng.hpp"

namespace csac {

/// Plain soft actor-critic with fixed temperature, written directly against
/// the network and policy primitives. It has no previous-policy snapshot and
/// no relative-entropy term. Initialization and random-stream consumption
/// match CsacAgent, so a CSAC agent with tau = 0 must follow it exactly.
class SacReference : public Learner {
 public:
  SacReference(std::size_t obs_dim, ActionBounds bounds, AgentConfig config, std::uint64_t seed);

  std::vector<double> act(std::span<const double> observation, bool explore) override;
  UpdateMetrics update_step(const TransitionBatch& batch) override;
  const SquashedGaussianPolicy& policy() const override { return policy_; }
  std::uint64_t updates() const override { return updates_; }
  Json to_json() const override;

  /// r + gamma * (min target Q - sigma * log pi) at next actions drawn with `noise`.
  std::vector<double> td_target(const TransitionBatch& batch, const Matrix& noise) const;
  /// Mean of sigma * log pi - min Q, with its policy gradient.
  double actor_loss(const Matrix& states, const Matrix& noise, std::vector<double>* grad,
                    double* entropy = nullptr) const;

  const Mlp& q1() const { return q1_; }
  const Mlp& q2() const { return q2_; }
  const Mlp& target_q1() const { return tq1_; }
  const Mlp& target_q2() const { return tq2_; }

 private:
  AgentConfig config_;
  SquashedGaussianPolicy policy_;
  Mlp q1_, q2_, tq1_, tq2_;
  Adam actor_opt_, q1_opt_, q2_opt_;
  Rng rng_;
  std::uint64_t updates_ = 0;
};

}  // namespace csac
