#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <vector>

#include "csac/errors.hpp"
#include "csac/harness.hpp"
#include "csac/oracle.hpp"

using namespace csac;
using namespace csac::oracle;

namespace {

// Config with sigma = tau = 0 (rejected by make(); only evaluation accepts it).
RegularizationConfig unregularized() { return {0.0, 0.0, 0.0, 0.0}; }

TabularMDP single_state(double reward, std::size_t actions, double gamma) {
  TabularMDP m;
  m.n_states = 1;
  m.n_actions = actions;
  m.gamma = gamma;
  m.reward = Table(1, std::vector<double>(actions, reward));
  m.transition = {Table(actions, std::vector<double>{1.0})};
  return m;
}

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("closed form: uniform policy and constant Q stay uniform") {
  const auto cfg = RegularizationConfig::make(0.2, 0.5);
  const Table lp(2, std::vector<double>(3, -std::log(3.0)));
  const Table q(2, std::vector<double>(3, 1.7));
  const auto next = exp_of(closed_form_update(lp, q, cfg));
  for (const auto& row : next) {
    for (double p : row) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  }
}

TEST_CASE("closed form: two-action worked example") {
  const auto cfg = RegularizationConfig::make(0.5, 0.5);  // alpha 0.5, beta 1
  REQUIRE(cfg.alpha == 0.5);
  REQUIRE(cfg.beta == 1.0);
  const Table lp{{std::log(0.5), std::log(0.5)}};
  const auto next = exp_of(closed_form_update(lp, Table{{1.0, 0.0}}, cfg));
  const double e = std::numbers::e;
  CHECK(next[0][0] == doctest::Approx(e / (e + 1.0)).epsilon(1e-14));
  CHECK(next[0][1] == doctest::Approx(1.0 / (e + 1.0)).epsilon(1e-14));
  CHECK(next[0][0] == doctest::Approx(0.7311).epsilon(1e-4));
}

TEST_CASE("closed form: invariant to a state-dependent shift of Q") {
  const auto cfg = RegularizationConfig::make(0.2, 0.5);
  const Table lp{{std::log(0.2), std::log(0.3), std::log(0.5)}, {std::log(0.6), std::log(0.3), std::log(0.1)}};
  const Table q{{0.1, 0.9, -0.4}, {2.0, 1.5, 1.0}};
  Table shifted = q;
  for (double& v : shifted[0]) v += 5.0;
  for (double& v : shifted[1]) v -= 300.0;
  const auto a = exp_of(closed_form_update(lp, q, cfg));
  const auto b = exp_of(closed_form_update(lp, shifted, cfg));
  for (std::size_t s = 0; s < 2; ++s) {
    for (std::size_t k = 0; k < 3; ++k) CHECK(a[s][k] == doctest::Approx(b[s][k]).epsilon(1e-12));
  }
}

TEST_CASE("closed form: no overflow at large beta * Q") {
  const auto cfg = RegularizationConfig::make(1e-3, 1e-3);
  const Table lp{{std::log(0.5), std::log(0.5)}};
  const auto next = closed_form_update(lp, Table{{1000.0, 999.0}}, cfg);
  CHECK(std::isfinite(next[0][0]));
  CHECK(std::isfinite(next[0][1]));
  CHECK(std::exp(next[0][0]) == doctest::Approx(1.0));
}

TEST_CASE("preference route: log-sum-exp value and symmetric preferences") {
  CHECK(soft_max_value({0.0, 0.0}, 2.0) == doctest::Approx(0.5 * std::numbers::ln2).epsilon(1e-15));
  CHECK(soft_max_value({800.0, 800.0}, 2.0) == doctest::Approx(800.0 + 0.5 * std::numbers::ln2));
  // alpha = 0 makes the preference equal to Q.
  const auto cfg = RegularizationConfig::make(0.5, 0.0);
  const Table lp{{std::log(0.9), std::log(0.1)}, {std::log(0.3), std::log(0.7)}};
  const auto r = preference_update(lp, Table{{0.0, 0.0}, {0.0, 0.0}}, cfg);
  for (const auto& row : r.policy) {
    for (double p : row) CHECK(p == doctest::Approx(0.5).epsilon(1e-15));
  }
  CHECK(r.value[0] == doctest::Approx(0.5 * std::numbers::ln2).epsilon(1e-15));
}

TEST_CASE("preference route equals the closed form on random MDPs") {
  const auto cfg = RegularizationConfig::make(0.2, 0.5);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto mdp = random_mdp(2 + seed % 9, 2 + seed % 4, 0.9, seed);
    const auto run = run_policy_iteration(mdp, cfg, 30);
    CHECK(run.max_route_gap < 1e-10);
    CHECK(run.max_consistency_gap < 1e-10);
    for (const auto& row : run.final.policy) {
      double total = 0.0;
      for (double p : row) {
        CHECK(p > 0.0);
        total += p;
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
    }
  }
}

TEST_CASE("policy evaluation: geometric series cases") {
  const auto one = single_state(1.0, 1, 0.5);
  const Table lp{{0.0}};
  const auto q = policy_evaluation(one, lp, lp, unregularized());
  CHECK(q[0][0] == doctest::Approx(2.0).epsilon(1e-10));

  const double gamma = 0.9;
  const double sigma = 0.3;
  const auto two = single_state(0.0, 2, gamma);
  const Table uniform{{std::log(0.5), std::log(0.5)}};
  const auto qe = policy_evaluation(two, uniform, uniform, RegularizationConfig::make(sigma, 0.0));
  const double expected = gamma * sigma * std::numbers::ln2 / (1.0 - gamma);
  CHECK(qe[0][0] == doctest::Approx(expected).epsilon(1e-9));
  CHECK(qe[0][1] == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("policy evaluation: unregularized fixed point matches a linear solve") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto mdp = random_mdp(6, 3, 0.9, 500 + seed);
    Table policy(6, std::vector<double>(3));
    Rng rng(seed);
    for (auto& row : policy) {
      double total = 0.0;
      for (double& p : row) total += (p = rng.uniform(0.1, 1.0));
      for (double& p : row) p /= total;
    }
    const auto lp = log_of(policy);
    const auto a = policy_evaluation(mdp, lp, lp, unregularized());
    const auto b = linear_solve_evaluation(mdp, policy);
    for (std::size_t s = 0; s < 6; ++s) {
      for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(a[s][k] - b[s][k]) < 1e-8);
    }
  }
}

TEST_CASE("tau 0 reduces to soft policy iteration, sigma 0 to KL-anchored updates") {
  const auto mdp = random_mdp(4, 3, 0.9, 77);
  const Table lp = log_of(Table{{0.2, 0.3, 0.5}, {0.1, 0.1, 0.8}, {0.4, 0.4, 0.2}, {0.6, 0.2, 0.2}});
  const Table q{{0.3, -0.2, 1.0}, {0.0, 0.5, 0.1}, {2.0, 1.0, 0.0}, {-1.0, 0.4, 0.2}};

  const double sigma = 0.4;
  const auto soft = exp_of(closed_form_update(lp, q, RegularizationConfig::make(sigma, 0.0)));
  const double tau = 0.7;
  const auto mirror = exp_of(closed_form_update(lp, q, RegularizationConfig::make(0.0, tau)));
  for (std::size_t s = 0; s < 4; ++s) {
    double zs = 0.0, zm = 0.0;
    for (std::size_t a = 0; a < 3; ++a) {
      zs += std::exp(q[s][a] / sigma);
      zm += std::exp(lp[s][a]) * std::exp(q[s][a] / tau);
    }
    for (std::size_t a = 0; a < 3; ++a) {
      CHECK(soft[s][a] == doctest::Approx(std::exp(q[s][a] / sigma) / zs).epsilon(1e-12));
      CHECK(mirror[s][a] == doctest::Approx(std::exp(lp[s][a]) * std::exp(q[s][a] / tau) / zm).epsilon(1e-12));
    }
  }
  (void)mdp;
}

TEST_CASE("greedy limit on a 5-state 3-action MDP") {
  const auto mdp = random_mdp(5, 3, 0.9, 2024);
  const auto reports = limit_check(mdp, {1e-3}, 500);
  REQUIRE(reports.size() == 1);
  CHECK(reports[0].states_checked > 0);
  CHECK(reports[0].all_matched());
}

TEST_CASE("exactly tied optimal actions keep comparable probability") {
  TabularMDP m;
  m.n_states = 2;
  m.n_actions = 3;
  m.gamma = 0.9;
  m.reward = {{1.0, 1.0, 0.2}, {0.5, 0.5, 0.0}};
  m.transition = {{{0.3, 0.7}, {0.3, 0.7}, {0.9, 0.1}}, {{0.6, 0.4}, {0.6, 0.4}, {0.2, 0.8}}};
  const auto run = run_policy_iteration(m, RegularizationConfig::make(1e-3, 1e-3), 500);
  for (std::size_t s = 0; s < 2; ++s) {
    CHECK(run.final.policy[s][0] >= 0.4);
    CHECK(run.final.policy[s][1] >= 0.4);
  }
}

TEST_CASE("large regularization keeps the policy near uniform") {
  const auto mdp = random_mdp(5, 3, 0.9, 31);
  const auto run = run_policy_iteration(mdp, RegularizationConfig::make(10.0, 10.0), 2000, 1e-12);
  CHECK(run.converged);
  const std::vector<double> uniform(3, 1.0 / 3.0);
  for (const auto& row : run.final.policy) CHECK(total_variation(row, uniform) <= 0.05);
}

TEST_CASE("random MDPs are valid and reproducible") {
  const auto a = random_mdp(7, 4, 0.95, 9);
  const auto b = random_mdp(7, 4, 0.95, 9);
  CHECK_NOTHROW(a.validate());
  CHECK(a.reward == b.reward);
  CHECK(a.transition == b.transition);
  for (const auto& row : a.reward) {
    for (double r : row) CHECK((r >= 0.0 && r <= 1.0));
  }
}

TEST_CASE("fixtures round-trip; corrupted fixtures and empty directories are rejected") {
  const auto dir = fresh_dir("csac_oracle_fixtures");
  const auto mdp = random_mdp(3, 2, 0.9, 4);
  write_fixture(dir / "a.mdp", mdp, "seed 4");
  const auto back = read_fixture(dir / "a.mdp");
  CHECK(back.reward == mdp.reward);
  CHECK(back.transition == mdp.transition);
  CHECK(back.gamma == mdp.gamma);

  std::ostringstream log;
  const auto result = oracle_check(dir, log);
  CHECK(result.ok());

  auto broken = mdp;
  broken.transition[1][0][0] += 0.25;
  {
    std::ofstream out(dir / "b.mdp");
    out << "n_states 3\nn_actions 2\ngamma 0.9\nrewards\n";
    for (const auto& row : broken.reward) out << row[0] << ' ' << row[1] << '\n';
    out << "transitions\n";
    for (const auto& sa : broken.transition) {
      for (const auto& row : sa) out << row[0] << ' ' << row[1] << ' ' << row[2] << '\n';
    }
  }
  CHECK_THROWS_AS(read_fixture(dir / "b.mdp"), ValidationError);
  CHECK_THROWS_AS(oracle_check(dir, log), ValidationError);

  const auto empty = fresh_dir("csac_oracle_empty");
  CHECK_THROWS_AS(oracle_check(empty, log), ValidationError);
  CHECK_THROWS_AS(oracle_check(empty / "missing", log), ValidationError);
  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(empty);
}

TEST_CASE("shipped fixtures pass every oracle check") {
  std::ostringstream log;
  const auto result = oracle_check(std::filesystem::path(CSAC_SOURCE_DIR) / "fixtures" / "oracle", log);
  CHECK(result.ok());
  CHECK(result.checks > 0);
}
