#include "csac/regularization.hpp"

#include <cmath>

#include "csac/errors.hpp"

namespace csac {

RegularizationConfig RegularizationConfig::make(double sigma, double tau) {
  if (!std::isfinite(sigma) || !std::isfinite(tau) || sigma < 0.0 || tau < 0.0) {
    throw ValidationError("regularization: sigma and tau must be finite and non-negative");
  }
  if (!(sigma + tau > 0.0)) {
    throw ValidationError("regularization: sigma + tau must be positive (beta undefined)");
  }
  const double total = tau + sigma;
  return {sigma, tau, tau / total, 1.0 / total};
}

double td_target_value(double reward, bool terminal, double gamma, double min_target_q,
                       double log_pi, double log_prev, const RegularizationConfig& cfg) {
  if (terminal) return reward;
  const double soft = min_target_q - cfg.entropy_coef * log_pi;
  const double conservative = soft - cfg.rel_entropy_coef * (log_pi - log_prev);
  return reward + gamma * conservative;
}

double actor_objective(const RegularizationConfig& cfg, double log_pi, double log_prev,
                       double min_q) {
  return (cfg.rel_entropy_coef + cfg.entropy_coef) * log_pi - cfg.rel_entropy_coef * log_prev -
         min_q;
}

double preference_value(double tau, double log_prev, double min_q) {
  return tau * log_prev + min_q;
}

}  // namespace csac
