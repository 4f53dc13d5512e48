#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace csac {

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adaptive-moment optimizer state for one flat parameter vector.
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t param_count, AdamConfig config);

  /// One bias-corrected update. Rejects (NumericError, state untouched) a
  /// non-finite gradient or an update that would make a parameter non-finite.
  void step(std::span<double> params, std::span<const double> grads);

  const AdamConfig& config() const { return config_; }
  std::uint64_t steps() const { return steps_; }
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }

  /// Restores a saved state; sizes must agree.
  void restore(std::uint64_t steps, std::vector<double> m, std::vector<double> v);

  friend bool operator==(const Adam& a, const Adam& b) {
    return a.steps_ == b.steps_ && a.m_ == b.m_ && a.v_ == b.v_ &&
           a.config_.learning_rate == b.config_.learning_rate &&
           a.config_.beta1 == b.config_.beta1 && a.config_.beta2 == b.config_.beta2 &&
           a.config_.epsilon == b.config_.epsilon;
  }

 private:
  AdamConfig config_;
  std::uint64_t steps_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
  std::vector<double> scratch_m_, scratch_v_, scratch_p_;
};

}  // namespace csac
