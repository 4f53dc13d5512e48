#pragma once

namespace csac {

/// Entropy (sigma) and relative-entropy (tau) weights with the derived
/// conservative-value-iteration parameters
///   alpha = tau / (tau + sigma),   beta = 1 / (tau + sigma).
struct RegularizationConfig {
  double entropy_coef = 0.2;      // sigma
  double rel_entropy_coef = 0.5;  // tau
  double alpha = 0.5 / 0.7;
  double beta = 1.0 / 0.7;

  /// Throws ValidationError unless sigma >= 0, tau >= 0 and sigma + tau > 0.
  static RegularizationConfig make(double sigma, double tau);
};

/// Floor applied to previous-policy log-densities before they enter a loss.
inline constexpr double kPrevLogProbFloor = -100.0;

/// y = r + gamma * [min_q - sigma*log_pi - tau*(log_pi - log_prev)], or r at a terminal.
/// `log_prev` is used as given (callers apply the floor).
double td_target_value(double reward, bool terminal, double gamma, double min_target_q,
                       double log_pi, double log_prev, const RegularizationConfig& cfg);

/// Per-sample actor objective (tau + sigma)*log_pi - tau*log_prev - min_q.
double actor_objective(const RegularizationConfig& cfg, double log_pi, double log_prev,
                       double min_q);

/// Action preference tau*log_prev + min_q.
double preference_value(double tau, double log_prev, double min_q);

}  // namespace csac
