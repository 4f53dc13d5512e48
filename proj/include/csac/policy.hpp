#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "csac/matrix.hpp"
#include "csac/mlp.hpp"
#include "csac/rng.hpp"

namespace csac {

/// Per-dimension box for actions; low < high componentwise, both finite.
struct ActionBounds {
  std::vector<double> low;
  std::vector<double> high;

  static ActionBounds symmetric(std::size_t dim, double limit);
  std::size_t dim() const { return low.size(); }
  double center(std::size_t j) const { return 0.5 * (high[j] + low[j]); }
  double half_range(std::size_t j) const { return 0.5 * (high[j] - low[j]); }
  void validate() const;

  friend bool operator==(const ActionBounds&, const ActionBounds&) = default;
};

inline constexpr double kDefaultLogStdMin = -20.0;
inline constexpr double kDefaultLogStdMax = 2.0;

/// Gaussian parameters of a batch of observations (all act_dim x batch).
struct GaussianHeads {
  Matrix mean;
  Matrix log_std;  // after clamping
  Matrix std;
  std::vector<unsigned char> clamped;  // row-major flags, 1 where the raw log-std was clamped
  Tape tape;                           // empty unless recorded
};

/// tanh-squashed diagonal Gaussian policy.
///
/// One network maps an observation to 2*act_dim outputs: the first act_dim
/// rows are the mean, the remaining rows the (unclamped) log standard
/// deviation. This is the trunk with its two linear heads stacked into one
/// final layer.
///
/// Sampling: u = mean + std * noise, action = center + half_range * tanh(u).
/// log_prob is the exact density of the action, i.e. the Gaussian density
/// of u minus the tanh and rescaling log-Jacobians.
class SquashedGaussianPolicy {
 public:
  SquashedGaussianPolicy() = default;
  SquashedGaussianPolicy(std::size_t obs_dim, ActionBounds bounds,
                         const std::vector<std::size_t>& hidden, Rng& rng,
                         double log_std_min = kDefaultLogStdMin,
                         double log_std_max = kDefaultLogStdMax);
  /// Wraps an existing network (output size must be 2 * bounds.dim()).
  SquashedGaussianPolicy(Mlp net, ActionBounds bounds, double log_std_min = kDefaultLogStdMin,
                         double log_std_max = kDefaultLogStdMax);

  std::size_t obs_dim() const { return net_.input_size(); }
  std::size_t act_dim() const { return bounds_.dim(); }
  const ActionBounds& bounds() const { return bounds_; }
  double log_std_min() const { return log_std_min_; }
  double log_std_max() const { return log_std_max_; }

  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }

  /// Batched heads; `obs` is (obs_dim x batch). With record_tape the result can
  /// be fed to backward_sample().
  GaussianHeads heads(const Matrix& obs, bool record_tape = false) const;

  /// tanh(mean) rescaled to the bounds.
  std::vector<double> deterministic_action(std::span<const double> obs) const;

  friend bool operator==(const SquashedGaussianPolicy&, const SquashedGaussianPolicy&) = default;

 private:
  Mlp net_;
  ActionBounds bounds_;
  double log_std_min_ = kDefaultLogStdMin;
  double log_std_max_ = kDefaultLogStdMax;
};

struct PolicySample {
  Matrix noise;       // the standard-normal draw used
  Matrix pre_squash;  // u
  Matrix action;      // strictly inside the bounds
  std::vector<double> log_prob;
};

/// Reparameterized sample from precomputed heads.
PolicySample sample(const SquashedGaussianPolicy& policy, const GaussianHeads& heads,
                    const Matrix& noise);

/// Single-observation sample: (action, pre_squash, log_prob).
struct SingleSample {
  std::vector<double> action;
  std::vector<double> pre_squash;
  double log_prob = 0.0;
};
SingleSample sample(const SquashedGaussianPolicy& policy, std::span<const double> obs,
                    std::span<const double> noise);

/// log density of the action reached from pre-squash value u, per sample.
std::vector<double> log_prob(const SquashedGaussianPolicy& policy, const GaussianHeads& heads,
                             const Matrix& pre_squash);
double log_prob(const SquashedGaussianPolicy& policy, std::span<const double> obs,
                std::span<const double> pre_squash);

/// log(1 - tanh(u)^2), stable for large |u|.
double tanh_log_jacobian(double u);

/// Pre-squash values to actions (clamped strictly inside the bounds).
Matrix squash(const ActionBounds& bounds, const Matrix& pre_squash);
/// Actions to pre-squash values (atanh of the normalized action).
Matrix unsquash(const ActionBounds& bounds, const Matrix& action);
/// dL/du from dL/d(action).
Matrix squash_backward(const ActionBounds& bounds, const Matrix& pre_squash,
                       const Matrix& grad_action);

/// d log_prob / du with the head values held fixed, each column scaled by
/// weight[b]. Used for densities whose parameters are frozen.
Matrix log_prob_grad_pre_squash(const GaussianHeads& heads, const Matrix& pre_squash,
                                std::span<const double> weight);

/// Gradient w.r.t. the policy parameters of
///   sum_b [ grad_pre_squash[:, b] . u[:, b] + grad_log_prob[b] * log_prob[b] ]
/// where u = mean + std * noise depends on the parameters (reparameterization).
/// `heads` must carry a recorded tape; it is consumed.
std::vector<double> backward_sample(const SquashedGaussianPolicy& policy, GaussianHeads& heads,
                                    const PolicySample& s, const Matrix& grad_pre_squash,
                                    std::span<const double> grad_log_prob);

/// Frozen deep copy of a policy. Immutable once created; safe to share.
class PolicySnapshot {
 public:
  PolicySnapshot() = default;
  PolicySnapshot(const SquashedGaussianPolicy& live, std::uint64_t version);

  bool empty() const { return frozen_ == nullptr; }
  const SquashedGaussianPolicy& policy() const { return *frozen_; }
  /// Number of policy updates the live policy had received when this was taken.
  std::uint64_t version() const { return version_; }
  /// True when the live policy's parameters are bitwise equal to the frozen ones.
  bool matches(const SquashedGaussianPolicy& live) const;

  GaussianHeads heads(const Matrix& obs) const { return frozen_->heads(obs, false); }
  std::vector<double> log_prob(const Matrix& obs, const Matrix& pre_squash) const;

 private:
  std::shared_ptr<const SquashedGaussianPolicy> frozen_;
  std::uint64_t version_ = 0;
};

PolicySnapshot snapshot(const SquashedGaussianPolicy& policy, std::uint64_t version = 0);

}  // namespace csac
