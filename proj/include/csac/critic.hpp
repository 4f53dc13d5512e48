#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "csac/buffer.hpp"
#include "csac/matrix.hpp"
#include "csac/mlp.hpp"
#include "csac/policy.hpp"
#include "csac/regularization.hpp"
#include "csac/rng.hpp"

namespace csac {

/// Two Q-networks over the stacked (observation, action) input, each with a
/// target copy that only moves through polyak_update.
struct TwinCritics {
  Mlp q1, q2;
  Mlp target_q1, target_q2;

  /// q1 is initialized first, then q2, from the same stream; targets are copies.
  static TwinCritics create(std::size_t obs_dim, std::size_t act_dim,
                            const std::vector<std::size_t>& hidden, Rng& rng);
  static TwinCritics from(Mlp q1, Mlp q2);

  std::size_t input_size() const { return q1.input_size(); }
  void polyak(double rho);

  friend bool operator==(const TwinCritics&, const TwinCritics&) = default;
};

/// Stacks states (obs x M) over actions (act x M).
Matrix critic_input(const Matrix& states, const Matrix& actions);

/// Q(s, a) for every column.
std::vector<double> q_values(const Mlp& q, const Matrix& states, const Matrix& actions);

/// Element-wise min of the online (or target) pair. Throws NumericError on a
/// non-finite output.
std::vector<double> q_min(const TwinCritics& critics, const Matrix& states, const Matrix& actions,
                          bool use_targets);
double q_min(const TwinCritics& critics, std::span<const double> observation,
             std::span<const double> action, bool use_targets);

/// Regularized TD targets, one next action per transition drawn from the live
/// policy with the given noise (act x M). The previous policy's density is
/// evaluated at the same next action and floored at kPrevLogProbFloor.
/// Throws NumericError naming the offending transition on a non-finite target.
std::vector<double> td_target(const TransitionBatch& batch, const SquashedGaussianPolicy& policy,
                              const PolicySnapshot& prev, const RegularizationConfig& cfg,
                              double gamma, const TwinCritics& critics, const Matrix& noise);
/// Same, drawing the noise from `rng`.
std::vector<double> td_target(const TransitionBatch& batch, const SquashedGaussianPolicy& policy,
                              const PolicySnapshot& prev, const RegularizationConfig& cfg,
                              double gamma, const TwinCritics& critics, Rng& rng);

struct CriticLoss {
  double loss1 = 0.0;
  double loss2 = 0.0;
  std::vector<double> grad1;  // w.r.t. q1 parameters only
  std::vector<double> grad2;  // w.r.t. q2 parameters only
};

/// Mean squared error of each online critic against the fixed targets.
CriticLoss critic_loss(const TwinCritics& critics, const TransitionBatch& batch,
                       std::span<const double> targets, bool with_gradients = true);

/// Mean of (q(s,a) - y)^2 and its parameter gradient for a single network.
double squared_error_loss(const Mlp& q, const Matrix& input, std::span<const double> targets,
                          std::vector<double>* grad);

}  // namespace csac
