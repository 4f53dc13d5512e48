#include "csac/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <thread>

#include "csac/buffer.hpp"
#include "csac/checkpoint.hpp"
#include "csac/errors.hpp"
#include "csac/kernels.hpp"
#include "csac/oracle.hpp"
#include "csac/sac_reference.hpp"

namespace csac {

namespace {

// Independent streams of one run.
enum Stream : std::uint64_t {
  kAgentStream = 1,
  kEnvStream = 2,
  kReplayStream = 3,
  kWarmupStream = 4,
  kEvalStream = 5,
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Accum {
  double c1 = 0, c2 = 0, actor = 0, entropy = 0, kl = 0;
  std::size_t n = 0;
  void add(const UpdateMetrics& m) {
    c1 += m.critic_loss_1;
    c2 += m.critic_loss_2;
    actor += m.actor_loss;
    entropy += m.entropy;
    kl += m.kl;
    ++n;
  }
};

}  // namespace

std::unique_ptr<Learner> make_learner(const ExperimentConfig& cfg, const EnvSpec& spec,
                                      std::uint64_t seed) {
  if (cfg.algo == "sac") {
    return std::make_unique<SacReference>(spec.observation_dim, spec.bounds(), cfg.agent, seed);
  }
  return std::make_unique<CsacAgent>(spec.observation_dim, spec.bounds(), cfg.agent, seed);
}

EvalStats evaluate(const SquashedGaussianPolicy& policy, Environment& env, std::size_t episodes,
                   std::uint64_t seed) {
  if (episodes == 0) throw ValidationError("evaluate: need at least one episode");
  if (policy.obs_dim() != env.spec().observation_dim ||
      policy.act_dim() != env.spec().action_dim) {
    throw DimensionError("evaluate: policy and environment dimensions differ");
  }
  EvalStats s;
  for (std::size_t e = 0; e < episodes; ++e) {
    auto obs = env.reset(derive_seed(seed, e));
    double ret = 0.0;
    for (;;) {
      const auto r = env.step(policy.deterministic_action(obs));
      ret += r.reward;
      obs = r.observation;
      if (r.terminal || r.truncated) break;
    }
    s.returns.push_back(ret);
  }
  double sum = 0.0;
  for (double r : s.returns) sum += r;
  s.mean = sum / static_cast<double>(episodes);
  double var = 0.0;
  for (double r : s.returns) var += (r - s.mean) * (r - s.mean);
  s.stddev = std::sqrt(var / static_cast<double>(episodes));
  return s;
}

EvalStats evaluate_checkpoint(const std::filesystem::path& checkpoint, const std::string& env_name,
                              std::size_t episodes, std::uint64_t seed,
                              std::size_t max_episode_steps) {
  const Json j = load_json(checkpoint);
  check_format_version(j);
  try {
    const auto cfg = agent_config_from_json(j.at("config"));
    ActionBounds bounds{j.at("action_low").get<std::vector<double>>(),
                        j.at("action_high").get<std::vector<double>>()};
    SquashedGaussianPolicy policy(mlp_from_json(j.at("policy")), bounds, cfg.log_std_min,
                                  cfg.log_std_max);
    auto env = make_env(env_name, max_episode_steps);
    if (j.contains("dynamics_scale")) env->set_dynamics_scale(j["dynamics_scale"].get<double>());
    return evaluate(policy, *env, episodes, seed);
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("checkpoint: malformed: ") + e.what());
  }
}

TrainResult train(const ExperimentConfig& cfg, std::uint64_t seed,
                  const std::filesystem::path& run_dir) {
  cfg.validate();
  kernels::set_num_threads(cfg.threads);
  const auto start = std::chrono::steady_clock::now();
  auto wall = [&] {
    if (!cfg.wall_clock) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  TrainResult result;
  result.run_dir = run_dir;
  std::filesystem::create_directories(run_dir);
  result.metrics_path = run_dir / "metrics.csv";
  result.checkpoint_path = run_dir / "checkpoint.json";
  {
    std::ofstream c(run_dir / "config.txt");
    c << "# seed = " << seed << '\n' << cfg.to_text();
  }
  std::ofstream metrics(result.metrics_path);
  std::ofstream episodes_out(run_dir / "episodes.csv");
  if (!metrics || !episodes_out) throw ValidationError("cannot write into " + run_dir.string());
  metrics << kMetricsHeader << '\n';
  episodes_out << "step,episode_return\n";

  auto env = make_env(cfg.env, cfg.max_episode_steps);
  auto eval_env = make_env(cfg.env, cfg.max_episode_steps);
  const EnvSpec spec = env->spec();
  auto learner = make_learner(cfg, spec, derive_seed(seed, kAgentStream));
  ReplayBuffer buffer(cfg.buffer_capacity);
  Rng env_rng(derive_seed(seed, kEnvStream));
  Rng replay_rng(derive_seed(seed, kReplayStream));
  Rng warmup_rng(derive_seed(seed, kWarmupStream));
  const std::uint64_t eval_seed = derive_seed(seed, kEvalStream);

  std::vector<double> obs = env->reset(env_rng.next_u64());
  double episode_return = 0.0;
  std::size_t policy_queries = 0;

  auto record = [&](std::size_t step, const std::vector<double>& action, const StepResult& r) {
    buffer.push({obs, action, r.reward, r.observation, r.terminal, r.truncated});
    episode_return += r.reward;
    if (r.terminal || r.truncated) {
      episodes_out << step << ',' << fmt(episode_return) << '\n';
      ++result.episodes;
      episode_return = 0.0;
      obs = env->reset(env_rng.next_u64());
    } else {
      obs = r.observation;
    }
  };

  for (std::size_t w = 0; w < cfg.warmup_steps; ++w) {
    std::vector<double> a(spec.action_dim);
    for (std::size_t j = 0; j < a.size(); ++j) {
      a[j] = warmup_rng.uniform(spec.action_low[j], spec.action_high[j]);
    }
    record(0, a, env->step(a));
  }
  result.warmup_policy_queries = policy_queries;

  auto write_checkpoint = [&](const std::filesystem::path& path, std::size_t step) {
    Json j = learner->to_json();
    j["env"] = cfg.env;
    j["seed"] = seed;
    j["env_steps"] = step;
    j["dynamics_scale"] = env->dynamics_scale();
    j["experiment_config"] = cfg.to_text();
    save_json(path, j);
  };

  Accum acc;
  for (std::size_t t = 1; t <= cfg.total_steps; ++t) {
    const auto a = learner->act(obs, true);
    ++policy_queries;
    record(t, a, env->step(a));

    if (buffer.size() >= cfg.batch_size) {
      try {
        acc.add(learner->update_step(buffer.sample(cfg.batch_size, replay_rng)));
      } catch (const NumericError& e) {
        result.aborted = true;
        result.abort_reason = "step " + std::to_string(t) + ": " + e.what();
        const double nan = std::numeric_limits<double>::quiet_NaN();
        MetricsRow row{t, nan, nan, nan, nan, nan, nan, nan, wall()};
        write_metrics_row(metrics, row);
        result.rows.push_back(row);
        break;
      }
    }

    if (t % cfg.eval_interval == 0) {
      const auto stats = evaluate(learner->policy(), *eval_env, cfg.eval_episodes, eval_seed);
      MetricsRow row;
      row.step = t;
      row.eval_return_mean = stats.mean;
      row.eval_return_std = stats.stddev;
      if (acc.n > 0) {
        const double n = static_cast<double>(acc.n);
        row.critic_loss_1 = acc.c1 / n;
        row.critic_loss_2 = acc.c2 / n;
        row.actor_loss = acc.actor / n;
        row.entropy_est = acc.entropy / n;
        row.kl_est = acc.kl / n;
      }
      row.wall_secs = wall();
      write_metrics_row(metrics, row);
      metrics.flush();
      result.rows.push_back(row);
      acc = Accum{};
    }
    for (const auto& p : cfg.perturbation) {
      if (p.step == t) {
        env->set_dynamics_scale(p.multiplier);
        eval_env->set_dynamics_scale(p.multiplier);
      }
    }
    if (cfg.checkpoint_interval > 0 && t % cfg.checkpoint_interval == 0) {
      write_checkpoint(run_dir / ("checkpoint_" + std::to_string(t) + ".json"), t);
    }
  }

  write_checkpoint(result.checkpoint_path, result.rows.empty() ? 0 : result.rows.back().step);
  result.buffer_size = buffer.size();
  result.updates = learner->updates();
  result.action_violations = env->action_violations();
  return result;
}

std::vector<TrainResult> run_seeds(const ExperimentConfig& cfg,
                                   const std::function<TrainResult(std::uint64_t)>& fn) {
  std::vector<TrainResult> results(cfg.seeds.size());
  std::vector<std::exception_ptr> errors(cfg.seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < cfg.seeds.size();) {
      try {
        results[k] = fn(cfg.seeds[k]);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(cfg.workers), cfg.seeds.size());
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

std::vector<TrainResult> train_all(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::filesystem::path base = std::filesystem::path(cfg.out_dir) / cfg.algo;
  return run_seeds(cfg, [&](std::uint64_t seed) {
    return train(cfg, seed, base / ("seed_" + std::to_string(seed)));
  });
}

std::vector<AblationRow> ablate_tau(const ExperimentConfig& cfg, const std::vector<double>& taus) {
  if (taus.empty()) throw ValidationError("ablate: empty tau list");
  std::vector<AblationRow> rows;
  const std::filesystem::path base(cfg.out_dir);
  for (double tau : taus) {
    ExperimentConfig c = cfg;
    c.algo = "csac";
    c.agent.tau = tau;
    c.validate();
    const auto dir = base / ("tau_" + fmt(tau));
    const auto runs = run_seeds(c, [&](std::uint64_t seed) {
      return train(c, seed, dir / ("seed_" + std::to_string(seed)));
    });
    AblationRow row;
    row.tau = tau;
    row.seeds = runs.size();
    std::vector<double> finals;
    std::map<std::size_t, std::pair<double, std::size_t>> by_step;
    for (const auto& r : runs) {
      if (!r.rows.empty()) finals.push_back(r.rows.back().eval_return_mean);
      for (const auto& m : r.rows) {
        auto& [sum, n] = by_step[m.step];
        sum += m.eval_return_mean;
        ++n;
      }
    }
    if (!finals.empty()) {
      double s = 0.0;
      for (double f : finals) s += f;
      row.final_return_mean = s / static_cast<double>(finals.size());
      double v = 0.0;
      for (double f : finals) v += (f - row.final_return_mean) * (f - row.final_return_mean);
      row.final_return_std = std::sqrt(v / static_cast<double>(finals.size()));
    }
    row.max_mean_return = -std::numeric_limits<double>::infinity();
    for (const auto& [step, sn] : by_step) {
      if (sn.second == runs.size()) {
        row.max_mean_return = std::max(row.max_mean_return, sn.first / static_cast<double>(sn.second));
      }
    }
    rows.push_back(row);
  }
  std::filesystem::create_directories(base);
  std::ofstream out(base / "ablation_summary.csv");
  out << "tau,seeds,final_return_mean,final_return_std,max_mean_return\n";
  for (const auto& r : rows) {
    out << fmt(r.tau) << ',' << r.seeds << ',' << fmt(r.final_return_mean) << ','
        << fmt(r.final_return_std) << ',' << fmt(r.max_mean_return) << '\n';
  }
  return rows;
}

RecoveryReport recovery_report(const std::vector<MetricsRow>& rows, const Perturbation& p) {
  RecoveryReport rep;
  rep.perturbation_step = p.step;
  rep.multiplier = p.multiplier;
  std::vector<double> before;
  std::vector<const MetricsRow*> after;
  for (const auto& r : rows) {
    if (!std::isfinite(r.eval_return_mean)) continue;
    if (r.step <= p.step) {
      before.push_back(r.eval_return_mean);
    } else {
      after.push_back(&r);
    }
  }
  if (before.empty() || after.empty()) {
    throw ValidationError("recovery report needs evaluations before and after step " +
                          std::to_string(p.step));
  }
  const std::size_t n = std::min<std::size_t>(3, before.size());
  double s = 0.0;
  for (std::size_t k = before.size() - n; k < before.size(); ++k) s += before[k];
  rep.baseline = s / static_cast<double>(n);
  rep.post_min = std::numeric_limits<double>::infinity();
  const double bar = rep.baseline - 0.1 * std::abs(rep.baseline);
  for (const auto* r : after) {
    rep.post_min = std::min(rep.post_min, r->eval_return_mean);
    if (!rep.recovery_step && r->eval_return_mean >= bar) rep.recovery_step = r->step;
  }
  return rep;
}

PerturbResult perturb_run(const ExperimentConfig& cfg, const std::vector<Perturbation>& schedule,
                          std::uint64_t seed, const std::filesystem::path& run_dir) {
  ExperimentConfig c = cfg;
  c.perturbation = schedule;
  PerturbResult out;
  out.run = train(c, seed, run_dir);
  if (!schedule.empty()) {
    out.report = recovery_report(out.run.rows, schedule.front());
    std::ofstream rep(run_dir / "recovery.txt");
    rep << "perturbation_step = " << out.report.perturbation_step << '\n'
        << "multiplier = " << fmt(out.report.multiplier) << '\n'
        << "baseline = " << fmt(out.report.baseline) << '\n'
        << "post_min = " << fmt(out.report.post_min) << '\n'
        << "recovery_step = "
        << (out.report.recovery_step ? std::to_string(*out.report.recovery_step) : "none") << '\n';
  }
  return out;
}

std::optional<double> median_steps(const std::vector<std::optional<std::size_t>>& steps) {
  if (steps.empty()) return std::nullopt;
  std::vector<double> v;
  for (const auto& s : steps) {
    v.push_back(s ? static_cast<double>(*s) : std::numeric_limits<double>::infinity());
  }
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  const double m = n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  if (!std::isfinite(m)) return std::nullopt;
  return m;
}

OracleCheckResult oracle_check(const std::filesystem::path& dir, std::ostream& out) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw ValidationError("oracle-check: no such directory " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".mdp") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ValidationError("oracle-check: no fixtures (*.mdp) in " + dir.string());

  OracleCheckResult res;
  auto check = [&](const std::string& name, const fs::path& f, bool pass, const std::string& detail) {
    ++res.checks;
    if (!pass) ++res.failures;
    out << (pass ? "PASS " : "FAIL ") << f.filename().string() << ' ' << name << ": " << detail
        << '\n';
  };
  auto sci = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return std::string(buf);
  };

  for (const auto& f : files) {
    const auto mdp = oracle::read_fixture(f);
    const auto cfg = RegularizationConfig::make(0.2, 0.5);

    const auto run = oracle::run_policy_iteration(mdp, cfg, 200);
    check("route_equivalence", f, run.max_route_gap < 1e-10, "max gap " + sci(run.max_route_gap));
    check("self_consistency", f, run.max_consistency_gap < 1e-10,
          "max gap " + sci(run.max_consistency_gap));

    {
      const auto& it = run.final;
      auto shifted = it.q;
      for (std::size_t s = 0; s < mdp.n_states; ++s)
        for (double& q : shifted[s]) q += 3.0 * static_cast<double>(s) - 7.0;
      const auto a = oracle::exp_of(oracle::closed_form_update(it.log_policy, it.q, cfg));
      const auto b = oracle::exp_of(oracle::closed_form_update(it.log_policy, shifted, cfg));
      double gap = 0.0;
      for (std::size_t s = 0; s < mdp.n_states; ++s)
        for (std::size_t k = 0; k < mdp.n_actions; ++k) gap = std::max(gap, std::abs(a[s][k] - b[s][k]));
      check("shift_invariance", f, gap < 1e-10, "max gap " + sci(gap));
    }

    {
      // tau = 0: soft update pi ~ exp(q / sigma); sigma = 0: pi ~ pi_k exp(q / tau).
      const auto& it = run.final;
      const auto soft = oracle::exp_of(oracle::closed_form_update(it.log_policy, it.q,
                                                                  RegularizationConfig::make(0.2, 0.0)));
      const auto md = oracle::exp_of(oracle::closed_form_update(it.log_policy, it.q,
                                                                RegularizationConfig::make(0.0, 0.5)));
      double gap_soft = 0.0, gap_md = 0.0;
      for (std::size_t s = 0; s < mdp.n_states; ++s) {
        std::vector<double> ls(mdp.n_actions), lm(mdp.n_actions);
        for (std::size_t k = 0; k < mdp.n_actions; ++k) {
          ls[k] = it.q[s][k] / 0.2;
          lm[k] = it.log_policy[s][k] + it.q[s][k] / 0.5;
        }
        const double ms = *std::max_element(ls.begin(), ls.end());
        const double mm = *std::max_element(lm.begin(), lm.end());
        double zs = 0.0, zm = 0.0;
        for (std::size_t k = 0; k < mdp.n_actions; ++k) {
          zs += std::exp(ls[k] - ms);
          zm += std::exp(lm[k] - mm);
        }
        for (std::size_t k = 0; k < mdp.n_actions; ++k) {
          gap_soft = std::max(gap_soft, std::abs(soft[s][k] - std::exp(ls[k] - ms) / zs));
          gap_md = std::max(gap_md, std::abs(md[s][k] - std::exp(lm[k] - mm) / zm));
        }
      }
      check("entropy_only_limit", f, gap_soft < 1e-10, "max gap " + sci(gap_soft));
      check("kl_only_limit", f, gap_md < 1e-10, "max gap " + sci(gap_md));
    }

    {
      const auto zero = RegularizationConfig::make(0.0, 1.0);
      RegularizationConfig none = zero;
      none.rel_entropy_coef = 0.0;
      const auto& lp = run.final.log_policy;
      const auto q_fp = oracle::policy_evaluation(mdp, lp, lp, none);
      const auto q_ls = oracle::linear_solve_evaluation(mdp, run.final.policy);
      double gap = 0.0;
      for (std::size_t s = 0; s < mdp.n_states; ++s)
        for (std::size_t k = 0; k < mdp.n_actions; ++k) gap = std::max(gap, std::abs(q_fp[s][k] - q_ls[s][k]));
      check("evaluation_vs_linear_solve", f, gap < 1e-8, "max gap " + sci(gap));
    }

    {
      const auto lim = oracle::limit_check(mdp, {1e-3}, 500);
      const auto& r = lim.front();
      check("greedy_limit", f, r.all_matched(),
            std::to_string(r.states_matched) + "/" + std::to_string(r.states_checked) +
                " states match (" + std::to_string(r.tied_states) + " tied)");
    }
  }
  return res;
}

}  // namespace csac
