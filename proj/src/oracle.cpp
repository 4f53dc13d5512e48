#include "csac/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "csac/errors.hpp"

namespace csac::oracle {

namespace {

Table zeros(std::size_t rows, std::size_t cols) {
  return Table(rows, std::vector<double>(cols, 0.0));
}

double log_sum_exp(const std::vector<double>& x) {
  const double m = *std::max_element(x.begin(), x.end());
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

// Expected regularization bonus of pi at each state:
//   sum_a pi(a) [-sigma log pi(a) - tau (log pi(a) - log anchor(a))]
std::vector<double> regularization_bonus(const Table& log_policy, const Table& log_anchor,
                                         const RegularizationConfig& cfg) {
  std::vector<double> h(log_policy.size(), 0.0);
  for (std::size_t s = 0; s < log_policy.size(); ++s) {
    for (std::size_t a = 0; a < log_policy[s].size(); ++a) {
      const double lp = log_policy[s][a];
      const double p = std::exp(lp);
      if (p == 0.0) continue;
      double term = 0.0;
      if (cfg.entropy_coef != 0.0) term -= cfg.entropy_coef * lp;
      if (cfg.rel_entropy_coef != 0.0) term -= cfg.rel_entropy_coef * (lp - log_anchor[s][a]);
      h[s] += p * term;
    }
  }
  return h;
}

void check_tables(const TabularMDP& mdp, const Table& t, const char* what) {
  if (t.size() != mdp.n_states) throw DimensionError(std::string(what) + ": wrong state count");
  for (const auto& row : t) {
    if (row.size() != mdp.n_actions) throw DimensionError(std::string(what) + ": wrong action count");
  }
}

}  // namespace

void TabularMDP::validate() const {
  if (n_states == 0 || n_actions == 0) throw ValidationError("mdp: empty state or action set");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ValidationError("mdp: gamma must be in [0, 1)");
  if (reward.size() != n_states || transition.size() != n_states) {
    throw ValidationError("mdp: reward/transition state count mismatch");
  }
  for (std::size_t s = 0; s < n_states; ++s) {
    if (reward[s].size() != n_actions || transition[s].size() != n_actions) {
      throw ValidationError("mdp: action count mismatch at state " + std::to_string(s));
    }
    for (std::size_t a = 0; a < n_actions; ++a) {
      if (!std::isfinite(reward[s][a])) throw ValidationError("mdp: non-finite reward");
      const auto& row = transition[s][a];
      if (row.size() != n_states) {
        throw ValidationError("mdp: transition row (" + std::to_string(s) + ", " +
                              std::to_string(a) + ") has wrong length");
      }
      double total = 0.0;
      for (double p : row) {
        if (!(p >= 0.0 && p <= 1.0)) {
          throw ValidationError("mdp: transition probability outside [0, 1] in row (" +
                                std::to_string(s) + ", " + std::to_string(a) + ")");
        }
        total += p;
      }
      if (std::abs(total - 1.0) > 1e-12) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", total);
        throw ValidationError("mdp: transition row (" + std::to_string(s) + ", " +
                              std::to_string(a) + ") sums to " + buf);
      }
    }
  }
}

Table log_of(const Table& policy) {
  Table out = policy;
  for (auto& row : out)
    for (double& v : row) v = std::log(v);
  return out;
}

Table exp_of(const Table& log_policy) {
  Table out = log_policy;
  for (auto& row : out)
    for (double& v : row) v = std::exp(v);
  return out;
}

TabularIterate initial_iterate(const TabularMDP& mdp) {
  TabularIterate it;
  const double u = 1.0 / static_cast<double>(mdp.n_actions);
  it.q = zeros(mdp.n_states, mdp.n_actions);
  it.preference = zeros(mdp.n_states, mdp.n_actions);
  it.value.assign(mdp.n_states, 0.0);
  it.policy = Table(mdp.n_states, std::vector<double>(mdp.n_actions, u));
  it.log_policy = log_of(it.policy);
  return it;
}

Table closed_form_update(const Table& log_policy, const Table& q, const RegularizationConfig& cfg) {
  Table out(q.size());
  for (std::size_t s = 0; s < q.size(); ++s) {
    std::vector<double> logits(q[s].size());
    for (std::size_t a = 0; a < logits.size(); ++a) {
      logits[a] = cfg.alpha * log_policy[s][a] + cfg.beta * q[s][a];
    }
    const double z = log_sum_exp(logits);
    out[s].resize(logits.size());
    for (std::size_t a = 0; a < logits.size(); ++a) out[s][a] = logits[a] - z;
  }
  return out;
}

double soft_max_value(const std::vector<double>& x, double beta) {
  const double m = *std::max_element(x.begin(), x.end());
  double s = 0.0;
  for (double v : x) s += std::exp(beta * (v - m));
  return m + std::log(s) / beta;
}

PreferenceResult preference_update(const Table& log_policy, const Table& q,
                                   const RegularizationConfig& cfg) {
  PreferenceResult r;
  const double ratio = cfg.alpha / cfg.beta;
  r.preference = q;
  r.value.resize(q.size());
  r.policy = q;
  r.log_policy = q;
  for (std::size_t s = 0; s < q.size(); ++s) {
    for (std::size_t a = 0; a < q[s].size(); ++a) {
      r.preference[s][a] = ratio * log_policy[s][a] + q[s][a];
    }
    r.value[s] = soft_max_value(r.preference[s], cfg.beta);
    for (std::size_t a = 0; a < q[s].size(); ++a) {
      r.log_policy[s][a] = cfg.beta * (r.preference[s][a] - r.value[s]);
      r.policy[s][a] = std::exp(r.log_policy[s][a]);
    }
  }
  return r;
}

Table policy_evaluation(const TabularMDP& mdp, const Table& log_policy, const Table& log_anchor,
                        const RegularizationConfig& cfg, const EvaluationOptions& opts) {
  check_tables(mdp, log_policy, "policy_evaluation");
  check_tables(mdp, log_anchor, "policy_evaluation");
  const auto policy = exp_of(log_policy);
  const auto bonus = regularization_bonus(log_policy, log_anchor, cfg);
  Table q = zeros(mdp.n_states, mdp.n_actions);
  std::vector<double> v(mdp.n_states);
  for (std::size_t it = 0; it < opts.max_iterations; ++it) {
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
      double e = bonus[s];
      for (std::size_t a = 0; a < mdp.n_actions; ++a) e += policy[s][a] * q[s][a];
      v[s] = e;
    }
    double residual = 0.0;
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
      for (std::size_t a = 0; a < mdp.n_actions; ++a) {
        double ev = 0.0;
        const auto& row = mdp.transition[s][a];
        for (std::size_t n = 0; n < mdp.n_states; ++n) ev += row[n] * v[n];
        const double next = mdp.reward[s][a] + mdp.gamma * ev;
        residual = std::max(residual, std::abs(next - q[s][a]));
        q[s][a] = next;
      }
    }
    if (!std::isfinite(residual)) throw NumericError("policy_evaluation: non-finite values");
    if (residual < opts.tolerance) return q;
  }
  throw NumericError("policy_evaluation: no convergence within the iteration cap");
}

Table linear_solve_evaluation(const TabularMDP& mdp, const Table& policy) {
  const std::size_t n = mdp.n_states * mdp.n_actions;
  std::vector<std::vector<double>> m(n, std::vector<double>(n + 1, 0.0));
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      const std::size_t r = s * mdp.n_actions + a;
      m[r][r] += 1.0;
      for (std::size_t s2 = 0; s2 < mdp.n_states; ++s2) {
        for (std::size_t a2 = 0; a2 < mdp.n_actions; ++a2) {
          m[r][s2 * mdp.n_actions + a2] -= mdp.gamma * mdp.transition[s][a][s2] * policy[s2][a2];
        }
      }
      m[r][n] = mdp.reward[s][a];
    }
  }
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
    }
    std::swap(m[c], m[piv]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = m[r][c] / m[c][c];
      if (f == 0.0) continue;
      for (std::size_t k = c; k <= n; ++k) m[r][k] -= f * m[c][k];
    }
  }
  Table q = zeros(mdp.n_states, mdp.n_actions);
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      const std::size_t r = s * mdp.n_actions + a;
      q[s][a] = m[r][n] / m[r][r];
    }
  }
  return q;
}

TabularIterate iterate_once(const TabularMDP& mdp, const TabularIterate& current,
                            const Table& log_anchor, const RegularizationConfig& cfg,
                            const EvaluationOptions& opts) {
  TabularIterate next;
  next.q = policy_evaluation(mdp, current.log_policy, log_anchor, cfg, opts);
  auto pref = preference_update(current.log_policy, next.q, cfg);
  next.preference = std::move(pref.preference);
  next.value = std::move(pref.value);
  next.policy = std::move(pref.policy);
  next.log_policy = std::move(pref.log_policy);
  next.k = current.k + 1;
  return next;
}

RunReport run_policy_iteration(const TabularMDP& mdp, const RegularizationConfig& cfg,
                               std::size_t max_iterations, double policy_tolerance,
                               const EvaluationOptions& opts) {
  mdp.validate();
  RunReport report;
  TabularIterate it = initial_iterate(mdp);
  Table anchor = it.log_policy;
  for (std::size_t k = 0; k < max_iterations; ++k) {
    TabularIterate next = iterate_once(mdp, it, anchor, cfg, opts);

    const Table closed = closed_form_update(it.log_policy, next.q, cfg);
    double change = 0.0;
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
      double total = 0.0;
      for (std::size_t a = 0; a < mdp.n_actions; ++a) {
        const double pi = next.policy[s][a];
        report.max_route_gap = std::max(report.max_route_gap, std::abs(std::exp(closed[s][a]) - pi));
        total += std::exp(cfg.beta * (next.preference[s][a] - next.value[s]));
        change = std::max(change, std::abs(pi - it.policy[s][a]));
      }
      report.max_consistency_gap = std::max(report.max_consistency_gap, std::abs(total - 1.0));
      for (std::size_t a = 0; a < mdp.n_actions; ++a) {
        const double renorm = std::exp(cfg.beta * (next.preference[s][a] - next.value[s])) / total;
        report.max_consistency_gap =
            std::max(report.max_consistency_gap, std::abs(renorm - next.policy[s][a]));
      }
    }

    anchor = it.log_policy;
    it = std::move(next);
    report.iterations = k + 1;
    if (change < policy_tolerance) {
      report.converged = true;
      break;
    }
  }
  report.final = std::move(it);
  return report;
}

ValueIterationResult value_iteration(const TabularMDP& mdp, double tolerance,
                                     std::size_t max_iterations) {
  mdp.validate();
  ValueIterationResult r;
  r.q = zeros(mdp.n_states, mdp.n_actions);
  r.value.assign(mdp.n_states, 0.0);
  for (std::size_t it = 0; it < max_iterations; ++it) {
    double residual = 0.0;
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
      for (std::size_t a = 0; a < mdp.n_actions; ++a) {
        double ev = 0.0;
        for (std::size_t n = 0; n < mdp.n_states; ++n) ev += mdp.transition[s][a][n] * r.value[n];
        const double q = mdp.reward[s][a] + mdp.gamma * ev;
        residual = std::max(residual, std::abs(q - r.q[s][a]));
        r.q[s][a] = q;
      }
    }
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
      r.value[s] = *std::max_element(r.q[s].begin(), r.q[s].end());
    }
    if (residual < tolerance) return r;
  }
  throw NumericError("value_iteration: no convergence within the iteration cap");
}

std::vector<LimitReport> limit_check(const TabularMDP& mdp, const std::vector<double>& epsilons,
                                     std::size_t iterations, double tie_tolerance) {
  const auto opt = value_iteration(mdp);
  std::vector<LimitReport> out;
  for (double eps : epsilons) {
    const auto cfg = RegularizationConfig::make(eps, eps);
    const auto run = run_policy_iteration(mdp, cfg, iterations);
    LimitReport rep;
    rep.epsilon = eps;
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
      const auto& q = opt.q[s];
      std::vector<double> sorted = q;
      std::sort(sorted.begin(), sorted.end(), std::greater<>());
      if (sorted.size() > 1 && sorted[0] - sorted[1] <= tie_tolerance) {
        ++rep.tied_states;
        continue;
      }
      ++rep.states_checked;
      const auto& lp = run.final.log_policy[s];
      const auto greedy = std::max_element(q.begin(), q.end()) - q.begin();
      const auto learned = std::max_element(lp.begin(), lp.end()) - lp.begin();
      if (greedy == learned) ++rep.states_matched;
    }
    out.push_back(rep);
  }
  return out;
}

TabularMDP random_mdp(std::size_t n_states, std::size_t n_actions, double gamma,
                      std::uint64_t seed) {
  Rng rng(seed);
  TabularMDP mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.gamma = gamma;
  mdp.reward = zeros(n_states, n_actions);
  mdp.transition.assign(n_states, zeros(n_actions, n_states));
  for (std::size_t s = 0; s < n_states; ++s) {
    for (std::size_t a = 0; a < n_actions; ++a) {
      mdp.reward[s][a] = rng.uniform(0.0, 1.0);
      // Normalized unit exponentials are uniform on the simplex.
      auto& row = mdp.transition[s][a];
      double total = 0.0;
      for (double& p : row) {
        p = -std::log1p(-rng.uniform(0.0, 1.0));
        total += p;
      }
      for (double& p : row) p /= total;
    }
  }
  mdp.validate();
  return mdp;
}

double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  double d = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) d += std::abs(p[k] - q[k]);
  return 0.5 * d;
}

void write_fixture(const std::filesystem::path& path, const TabularMDP& mdp,
                   const std::string& comment) {
  mdp.validate();
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write fixture " + path.string());
  char buf[40];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "n_states " << mdp.n_states << '\n'
      << "n_actions " << mdp.n_actions << '\n'
      << "gamma " << num(mdp.gamma) << '\n'
      << "rewards\n";
  for (const auto& row : mdp.reward) {
    for (std::size_t a = 0; a < row.size(); ++a) out << (a ? " " : "") << num(row[a]);
    out << '\n';
  }
  out << "transitions\n";
  for (const auto& rows : mdp.transition) {
    for (const auto& row : rows) {
      for (std::size_t n = 0; n < row.size(); ++n) out << (n ? " " : "") << num(row[n]);
      out << '\n';
    }
  }
}

TabularMDP read_fixture(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read fixture " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    lines.push_back(line.substr(first));
  }
  const std::string where = "fixture " + path.filename().string() + ": ";
  std::size_t pos = 0;
  auto next_line = [&]() -> const std::string& {
    if (pos >= lines.size()) throw ValidationError(where + "unexpected end of file");
    return lines[pos++];
  };
  auto keyed = [&](const std::string& key) {
    std::istringstream ss(next_line());
    std::string k, v, extra;
    if (!(ss >> k >> v) || k != key || (ss >> extra)) {
      throw ValidationError(where + "expected '" + key + " <value>'");
    }
    return v;
  };
  auto numbers = [&](std::size_t count) {
    std::istringstream ss(next_line());
    std::vector<double> v;
    for (std::string tok; ss >> tok;) {
      char* end = nullptr;
      const double d = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0') throw ValidationError(where + "bad number '" + tok + "'");
      v.push_back(d);
    }
    if (v.size() != count) {
      throw ValidationError(where + "expected " + std::to_string(count) + " numbers on line, got " +
                            std::to_string(v.size()));
    }
    return v;
  };
  auto positive = [&](const std::string& s) {
    char* end = nullptr;
    const long long n = std::strtoll(s.c_str(), &end, 10);
    if (*end != '\0' || n <= 0 || n > 100000) throw ValidationError(where + "bad count '" + s + "'");
    return static_cast<std::size_t>(n);
  };

  TabularMDP mdp;
  mdp.n_states = positive(keyed("n_states"));
  mdp.n_actions = positive(keyed("n_actions"));
  {
    const auto g = keyed("gamma");
    char* end = nullptr;
    mdp.gamma = std::strtod(g.c_str(), &end);
    if (*end != '\0') throw ValidationError(where + "bad gamma");
  }
  if (next_line() != "rewards") throw ValidationError(where + "expected 'rewards'");
  for (std::size_t s = 0; s < mdp.n_states; ++s) mdp.reward.push_back(numbers(mdp.n_actions));
  if (next_line() != "transitions") throw ValidationError(where + "expected 'transitions'");
  mdp.transition.resize(mdp.n_states);
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      mdp.transition[s].push_back(numbers(mdp.n_states));
    }
  }
  if (pos != lines.size()) throw ValidationError(where + "trailing content");
  try {
    mdp.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(where + e.what());
  }
  return mdp;
}

}  // namespace csac::oracle
