#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "csac/mlp.hpp"

namespace csac {

/// Scalar loss of a network. When `grad` is non-null the callee also writes
/// the reverse-mode gradient with respect to net.params() into it.
using LossFn = std::function<double(const Mlp& net, std::vector<double>* grad)>;

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_param = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t probes = 0;
};

/// Denominator floor of the relative error, per unit of loss magnitude:
/// gradients smaller than floor * max(1, |loss|) are compared on an absolute
/// scale, below the resolution of central differences on that loss.
inline constexpr double kGradientCheckFloor = 1e-6;

/// Compares reverse-mode gradients with central differences on `probe_count`
/// parameters drawn without replacement (all of them if fewer).
/// relative error = |analytic - numeric| / max(|analytic|, |numeric|, floor * max(1, |loss|)).
/// Throws NumericError if the loss is non-finite at any evaluation point.
GradientCheckResult gradient_check(const Mlp& net, const LossFn& loss, std::size_t probe_count,
                                   std::uint64_t seed = 0, double step = 1e-5);

}  // namespace csac
