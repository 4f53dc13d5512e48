#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "csac/agent.hpp"

namespace csac {

struct Perturbation {
  std::size_t step = 0;
  double multiplier = 1.0;
  friend bool operator==(const Perturbation&, const Perturbation&) = default;
};

/// Everything a run needs. Text form: one `key = value` per line, '#' starts a
/// comment. Keys:
///   env, algo (csac|sac), sigma, tau, gamma, rho, actor_lr, critic_lr,
///   hidden (e.g. 64,64), batch_size, buffer_capacity, warmup_steps,
///   total_steps, eval_interval, eval_episodes, max_episode_steps (0 = env
///   default), seeds (e.g. 0,1,2), perturbation (e.g. 30000:2.0), tau_list,
///   threshold, out_dir, checkpoint_interval (0 = final only), wall_clock,
///   threads, workers, kl_through_action, log_std_min, log_std_max.
struct ExperimentConfig {
  std::string env = "pendulum";
  std::string algo = "csac";
  AgentConfig agent;
  std::size_t batch_size = 256;
  std::size_t buffer_capacity = 100000;
  std::size_t warmup_steps = 1000;
  std::size_t total_steps = 50000;
  std::size_t eval_interval = 1000;
  std::size_t eval_episodes = 10;
  std::size_t max_episode_steps = 0;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::vector<Perturbation> perturbation;
  std::vector<double> tau_list{0.005, 0.05, 0.5, 5.0, 50.0};
  double threshold = -250.0;
  std::string out_dir = "runs";
  std::size_t checkpoint_interval = 0;
  bool wall_clock = false;
  int threads = 1;
  int workers = 1;

  /// Sets one key from its text value. Throws ValidationError for an unknown
  /// key or an unparsable value.
  void set(const std::string& key, const std::string& value);
  /// Applies a `key=value` string.
  void apply_override(const std::string& assignment);
  /// Range checks across all fields; throws ValidationError.
  void validate() const;
  std::string to_text() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace csac
