#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "csac/agent.hpp"
#include "csac/config.hpp"
#include "csac/envs.hpp"
#include "csac/metrics.hpp"

namespace csac {

/// CsacAgent or SacReference as selected by cfg.algo.
std::unique_ptr<Learner> make_learner(const ExperimentConfig& cfg, const EnvSpec& spec,
                                      std::uint64_t seed);

struct EvalStats {
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
  std::vector<double> returns;
};

/// Deterministic-action episodes; episode i starts from reset(derive_seed(seed, i)).
EvalStats evaluate(const SquashedGaussianPolicy& policy, Environment& env, std::size_t episodes,
                   std::uint64_t seed);
/// Loads the policy from a checkpoint written by train().
EvalStats evaluate_checkpoint(const std::filesystem::path& checkpoint, const std::string& env_name,
                              std::size_t episodes, std::uint64_t seed,
                              std::size_t max_episode_steps = 0);

struct TrainResult {
  std::vector<MetricsRow> rows;
  std::filesystem::path run_dir;
  std::filesystem::path metrics_path;
  std::filesystem::path checkpoint_path;
  std::size_t buffer_size = 0;
  std::size_t warmup_policy_queries = 0;  // policy calls made during warmup
  std::size_t updates = 0;
  std::size_t episodes = 0;
  std::size_t action_violations = 0;
  bool aborted = false;  // non-finite loss
  std::string abort_reason;
};

/// One training run: warmup with uniform actions, then act, store and
/// update every step, evaluating every eval_interval steps. Perturbations in
/// cfg.perturbation are applied after the step they name (and after that
/// step's evaluation), to both the training and evaluation environments.
/// Writes run_dir/metrics.csv, run_dir/episodes.csv, run_dir/config.txt and
/// run_dir/checkpoint.json.
TrainResult train(const ExperimentConfig& cfg, std::uint64_t seed,
                  const std::filesystem::path& run_dir);

/// Runs `fn(seed)` for every seed on up to cfg.workers threads; results are in
/// seed order.
std::vector<TrainResult> run_seeds(const ExperimentConfig& cfg,
                                   const std::function<TrainResult(std::uint64_t)>& fn);

/// train() for every seed in cfg.seeds under cfg.out_dir/<algo>/seed_<n>.
std::vector<TrainResult> train_all(const ExperimentConfig& cfg);

struct AblationRow {
  double tau = 0.0;
  std::size_t seeds = 0;
  double final_return_mean = 0.0;
  double final_return_std = 0.0;
  double max_mean_return = 0.0;  // best evaluation point of the cross-seed mean
};

/// One training run per (tau, seed) under out_dir/tau_<tau>/seed_<n>, plus
/// out_dir/ablation_summary.csv.
std::vector<AblationRow> ablate_tau(const ExperimentConfig& cfg, const std::vector<double>& taus);

struct RecoveryReport {
  std::size_t perturbation_step = 0;
  double multiplier = 1.0;
  double baseline = 0.0;  // mean of the last three evaluations at or before the perturbation
  double post_min = 0.0;  // lowest evaluation after the perturbation
  std::optional<std::size_t> recovery_step;  // first later evaluation within 10% of baseline
};

/// Throws ValidationError if there is no evaluation before or after the step.
RecoveryReport recovery_report(const std::vector<MetricsRow>& rows, const Perturbation& p);

struct PerturbResult {
  TrainResult run;
  RecoveryReport report;
};

/// Trains with the given schedule (overriding cfg.perturbation) and reports
/// recovery from its first entry.
PerturbResult perturb_run(const ExperimentConfig& cfg, const std::vector<Perturbation>& schedule,
                          std::uint64_t seed, const std::filesystem::path& run_dir);

/// Median with unreached entries (nullopt) counted as +infinity; nullopt if
/// more than half never reached.
std::optional<double> median_steps(const std::vector<std::optional<std::size_t>>& steps);

struct OracleCheckResult {
  std::size_t checks = 0;
  std::size_t failures = 0;
  bool ok() const { return checks > 0 && failures == 0; }
};

/// Runs the tabular invariant suites on every *.mdp fixture in `dir`, printing
/// one line per check. Throws ValidationError for a missing or empty directory
/// or an invalid fixture.
OracleCheckResult oracle_check(const std::filesystem::path& dir, std::ostream& out);

}  // namespace csac
