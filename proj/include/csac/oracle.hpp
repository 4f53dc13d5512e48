#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "csac/regularization.hpp"
#include "csac/rng.hpp"

namespace csac::oracle {

/// Dense row-major table indexed [s][a].
using Table = std::vector<std::vector<double>>;

struct TabularMDP {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  double gamma = 0.9;
  Table reward;                   // [s][a]
  std::vector<Table> transition;  // [s][a][s']

  /// Throws ValidationError on inconsistent shapes, gamma outside [0, 1),
  /// negative probabilities or rows not summing to 1 within 1e-12.
  void validate() const;
};

/// Policies are carried in log space as well: at small temperatures the
/// probabilities of suboptimal actions underflow while their logs stay finite.
struct TabularIterate {
  Table q;
  Table preference;
  std::vector<double> value;
  Table policy;
  Table log_policy;
  std::size_t k = 0;
};

Table log_of(const Table& policy);
Table exp_of(const Table& log_policy);

/// Uniform policy, zero Q, preference and value.
TabularIterate initial_iterate(const TabularMDP& mdp);

/// Per state: pi_next[a] proportional to pi[a]^alpha * exp(beta * q[a]),
/// evaluated in log space with max-subtraction. Returns log pi_next.
Table closed_form_update(const Table& log_policy, const Table& q, const RegularizationConfig& cfg);

struct PreferenceResult {
  Table preference;           // (alpha / beta) log pi + q
  std::vector<double> value;  // (1 / beta) log sum_a exp(beta * preference)
  Table policy;               // exp(beta * (preference - value))
  Table log_policy;           // beta * (preference - value)
};
PreferenceResult preference_update(const Table& log_policy, const Table& q,
                                   const RegularizationConfig& cfg);

/// (1 / beta) log sum exp(beta * x), with max-subtraction.
double soft_max_value(const std::vector<double>& x, double beta);

struct EvaluationOptions {
  double tolerance = 1e-10;
  std::size_t max_iterations = 1000000;
};

/// Fixed point of
///   Q(s,a) = r(s,a) + gamma sum_s' P(s'|s,a) sum_a' pi(a'|s')
///            [Q(s',a') - sigma log pi(a'|s') - tau log(pi(a'|s') / anchor(a'|s'))]
/// by successive approximation until the sup-norm residual is below the
/// tolerance. Throws NumericError on non-convergence.
/// Both policies are given in log space.
Table policy_evaluation(const TabularMDP& mdp, const Table& log_policy, const Table& log_anchor,
                        const RegularizationConfig& cfg, const EvaluationOptions& opts = {});

/// Unregularized Q^pi by solving (I - gamma P_pi) Q = r with Gaussian elimination.
Table linear_solve_evaluation(const TabularMDP& mdp, const Table& policy);

/// One outer iteration: Q_{k+1} = evaluation of pi_k anchored to pi_{k-1},
/// then the preference-route policy update.
TabularIterate iterate_once(const TabularMDP& mdp, const TabularIterate& current,
                            const Table& log_anchor, const RegularizationConfig& cfg,
                            const EvaluationOptions& opts = {});

struct RunReport {
  TabularIterate final;
  double max_route_gap = 0.0;        // closed form vs preference route, per entry
  double max_consistency_gap = 0.0;  // renormalized exp(beta (P - V)) vs pi
  std::size_t iterations = 0;
  bool converged = false;            // policy change below tolerance
};

/// Runs outer iterations from the uniform policy until the policy moves less
/// than `policy_tolerance` (sup norm) or `max_iterations` is reached, checking
/// both invariants at every iteration.
RunReport run_policy_iteration(const TabularMDP& mdp, const RegularizationConfig& cfg,
                               std::size_t max_iterations, double policy_tolerance = 1e-12,
                               const EvaluationOptions& opts = {});

struct ValueIterationResult {
  Table q;
  std::vector<double> value;
};
/// Exact optimal Q by value iteration to sup-norm residual `tolerance`.
ValueIterationResult value_iteration(const TabularMDP& mdp, double tolerance = 1e-12,
                                     std::size_t max_iterations = 10000000);

struct LimitReport {
  double epsilon = 0.0;
  std::size_t states_checked = 0;  // states whose optimal Q gap exceeds the tie tolerance
  std::size_t states_matched = 0;
  std::size_t tied_states = 0;
  bool all_matched() const { return states_checked == states_matched; }
};

/// For each epsilon, runs sigma = tau = epsilon policy iteration and compares
/// the per-state argmax of the resulting policy with the greedy optimal action.
/// States whose best and second-best optimal Q differ by at most
/// `tie_tolerance` are skipped.
std::vector<LimitReport> limit_check(const TabularMDP& mdp, const std::vector<double>& epsilons,
                                     std::size_t iterations, double tie_tolerance = 1e-6);

/// Transition rows drawn uniformly from the simplex, rewards uniform in [0, 1].
TabularMDP random_mdp(std::size_t n_states, std::size_t n_actions, double gamma,
                      std::uint64_t seed);

/// Total variation distance between two distributions.
double total_variation(const std::vector<double>& p, const std::vector<double>& q);

// Fixture text format:
//   n_states <S>
//   n_actions <A>
//   gamma <g>
//   rewards
//   <S lines of A numbers>
//   transitions
//   <S*A lines of S numbers, row (s, a) at line s*A + a>
// Lines starting with '#' are comments.
void write_fixture(const std::filesystem::path& path, const TabularMDP& mdp,
                   const std::string& comment = "");
/// Throws ValidationError on malformed or invalid content.
TabularMDP read_fixture(const std::filesystem::path& path);

}  // namespace csac::oracle
