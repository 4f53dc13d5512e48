// csac <subcommand> --config <path> [--seed N] [--out <dir>] [key=value ...]
//
// Exit status: 0 success, 1 validation error or failed check, 2 numeric abort.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "csac/errors.hpp"
#include "csac/harness.hpp"
#include "csac/metrics.hpp"

namespace {

using namespace csac;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_path, "Key-value config file");
  sub->add_option("--seed", c.seed, "Run only this seed");
  sub->add_option("--out", c.out, "Output directory (overrides out_dir)");
  sub->add_option("overrides", c.overrides, "key=value overrides");
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg = c.config_path.empty() ? ExperimentConfig{} : load_config(c.config_path);
  for (const auto& o : c.overrides) cfg.apply_override(o);
  if (c.seed) cfg.seeds = {*c.seed};
  if (!c.out.empty()) cfg.out_dir = c.out;
  cfg.validate();
  return cfg;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

int report_runs(const std::vector<TrainResult>& runs) {
  int status = 0;
  for (const auto& r : runs) {
    std::cout << r.run_dir.string() << ": ";
    if (r.aborted) {
      std::cout << "ABORTED (" << r.abort_reason << ")\n";
      status = 2;
    } else if (r.rows.empty()) {
      std::cout << "no evaluations, buffer " << r.buffer_size << "\n";
    } else {
      std::cout << "final eval " << fmt(r.rows.back().eval_return_mean) << " +- "
                << fmt(r.rows.back().eval_return_std) << " at step " << r.rows.back().step << "\n";
    }
  }
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conservative soft actor-critic experiments"};
  app.require_subcommand(1);

  Common train_c, eval_c, ablate_c, perturb_c;
  auto* train = app.add_subcommand("train", "Train one agent per seed");
  add_common(train, train_c);

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint with deterministic actions");
  add_common(eval, eval_c);
  std::string checkpoint;
  std::size_t episodes = 0;
  eval->add_option("--checkpoint", checkpoint, "checkpoint.json written by train")->required();
  eval->add_option("--episodes", episodes, "Episodes (default eval_episodes)");

  auto* ablate = app.add_subcommand("ablate", "Sweep tau (tau_list) over all seeds");
  add_common(ablate, ablate_c);

  auto* perturb = app.add_subcommand("perturb", "Train with a friction perturbation and report recovery");
  add_common(perturb, perturb_c);

  auto* oracle = app.add_subcommand("oracle-check", "Run the tabular oracle suites on fixtures");
  std::string fixtures = "fixtures/oracle";
  oracle->add_option("--fixtures", fixtures, "Directory of *.mdp fixtures");

  auto* stt = app.add_subcommand("steps-to-threshold", "First evaluation step reaching a return");
  std::string metrics_path;
  double threshold = -250.0;
  stt->add_option("--metrics", metrics_path, "metrics.csv")->required();
  stt->add_option("--threshold", threshold, "Return threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*train) return report_runs(train_all(resolve(train_c)));

    if (*eval) {
      const auto cfg = resolve(eval_c);
      const auto s = evaluate_checkpoint(checkpoint, cfg.env, episodes ? episodes : cfg.eval_episodes,
                                         cfg.seeds.front(), cfg.max_episode_steps);
      std::cout << "mean " << fmt(s.mean) << " std " << fmt(s.stddev) << " over " << s.returns.size()
                << " episodes\n";
      return 0;
    }

    if (*ablate) {
      const auto cfg = resolve(ablate_c);
      const auto rows = ablate_tau(cfg, cfg.tau_list);
      std::cout << "tau,seeds,final_return_mean,final_return_std,max_mean_return\n";
      for (const auto& r : rows) {
        std::cout << fmt(r.tau) << ',' << r.seeds << ',' << fmt(r.final_return_mean) << ','
                  << fmt(r.final_return_std) << ',' << fmt(r.max_mean_return) << '\n';
      }
      return 0;
    }

    if (*perturb) {
      auto cfg = resolve(perturb_c);
      if (cfg.perturbation.empty()) cfg.perturbation = {{30000, 2.0}};
      const auto base = std::filesystem::path(cfg.out_dir) / ("perturb_" + cfg.algo);
      int status = 0;
      std::vector<std::optional<std::size_t>> rec;
      for (auto seed : cfg.seeds) {
        const auto r = perturb_run(cfg, cfg.perturbation, seed, base / ("seed_" + std::to_string(seed)));
        if (r.run.aborted) status = 2;
        rec.push_back(r.report.recovery_step);
        std::cout << "seed " << seed << ": baseline " << fmt(r.report.baseline) << ", post_min "
                  << fmt(r.report.post_min) << ", recovery_step "
                  << (r.report.recovery_step ? std::to_string(*r.report.recovery_step) : "none")
                  << '\n';
      }
      const auto med = median_steps(rec);
      std::cout << "median recovery step: " << (med ? fmt(*med) : "none") << '\n';
      return status;
    }

    if (*oracle) {
      const auto res = oracle_check(fixtures, std::cout);
      std::cout << (res.ok() ? "oracle-check: all " : "oracle-check: FAILED ")
                << res.checks - res.failures << "/" << res.checks << " checks passed\n";
      return res.ok() ? 0 : 1;
    }

    if (*stt) {
      const auto step = steps_to_threshold(read_metrics(metrics_path), threshold);
      std::cout << (step ? std::to_string(*step) : "none") << '\n';
      return 0;
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const DimensionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
