#include "csac/gradient_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "csac/errors.hpp"
#include "csac/rng.hpp"

namespace csac {

namespace {

double checked(double v) {
  if (!std::isfinite(v)) throw NumericError("gradient_check: loss is not finite");
  return v;
}

}  // namespace

GradientCheckResult gradient_check(const Mlp& net, const LossFn& loss, std::size_t probe_count,
                                   std::uint64_t seed, double step) {
  std::vector<double> analytic;
  const double base = checked(loss(net, &analytic));
  const double floor = kGradientCheckFloor * std::max(1.0, std::abs(base));
  if (analytic.size() != net.param_count()) {
    throw DimensionError("gradient_check: loss returned a gradient of the wrong size");
  }

  std::vector<std::size_t> order(net.param_count());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  const std::size_t probes = std::min(probe_count, order.size());
  for (std::size_t k = 0; k < probes; ++k) {
    std::swap(order[k], order[k + rng.index(order.size() - k)]);
  }

  GradientCheckResult result;
  result.probes = probes;
  Mlp probe = net;
  for (std::size_t k = 0; k < probes; ++k) {
    const std::size_t idx = order[k];
    const double original = probe.params()[idx];
    probe.params()[idx] = original + step;
    const double up = checked(loss(probe, nullptr));
    probe.params()[idx] = original - step;
    const double down = checked(loss(probe, nullptr));
    probe.params()[idx] = original;

    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic[idx];
    const double denom = std::max({std::abs(a), std::abs(numeric), floor});
    const double rel = std::abs(a - numeric) / denom;
    if (rel > result.max_relative_error || k == 0) {
      result.max_relative_error = rel;
      result.worst_param = idx;
      result.worst_analytic = a;
      result.worst_numeric = numeric;
    }
  }
  return result;
}

}  // namespace csac
