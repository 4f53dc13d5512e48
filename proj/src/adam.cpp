#include "csac/adam.hpp"

#include <cmath>

#include "csac/errors.hpp"

namespace csac {

Adam::Adam(std::size_t param_count, AdamConfig config)
    : config_(config), m_(param_count, 0.0), v_(param_count, 0.0) {
  if (!(config.learning_rate > 0.0) || !(config.epsilon > 0.0) || !(config.beta1 >= 0.0) ||
      !(config.beta1 < 1.0) || !(config.beta2 >= 0.0) || !(config.beta2 < 1.0)) {
    throw ValidationError("Adam: invalid hyperparameters");
  }
}

void Adam::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw DimensionError("Adam::step: parameter/gradient size does not match optimizer state");
  }
  for (double g : grads) {
    if (!std::isfinite(g)) throw NumericError("Adam::step: non-finite gradient, update rejected");
  }
  const std::uint64_t t = steps_ + 1;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t));

  scratch_m_.resize(m_.size());
  scratch_v_.resize(v_.size());
  scratch_p_.resize(params.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double g = grads[k];
    const double m = b1 * m_[k] + (1.0 - b1) * g;
    const double v = b2 * v_[k] + (1.0 - b2) * (g * g);
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    const double p = params[k] - config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    if (!std::isfinite(p)) throw NumericError("Adam::step: update would produce a non-finite parameter");
    scratch_m_[k] = m;
    scratch_v_[k] = v;
    scratch_p_[k] = p;
  }
  m_.swap(scratch_m_);
  v_.swap(scratch_v_);
  std::copy(scratch_p_.begin(), scratch_p_.end(), params.begin());
  steps_ = t;
}

void Adam::restore(std::uint64_t steps, std::vector<double> m, std::vector<double> v) {
  if (m.size() != m_.size() || v.size() != v_.size()) {
    throw DimensionError("Adam::restore: moment size mismatch");
  }
  steps_ = steps;
  m_ = std::move(m);
  v_ = std::move(v);
}

}  // namespace csac
