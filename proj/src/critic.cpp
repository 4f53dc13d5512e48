#include "csac/critic.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "csac/errors.hpp"

namespace csac {

namespace {

std::vector<std::size_t> critic_sizes(std::size_t obs_dim, std::size_t act_dim,
                                      const std::vector<std::size_t>& hidden) {
  std::vector<std::size_t> sizes{obs_dim + act_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  return sizes;
}

void require_finite(std::span<const double> values, const char* what) {
  for (std::size_t b = 0; b < values.size(); ++b) {
    if (!std::isfinite(values[b])) {
      throw NumericError(std::string(what) + ": non-finite value at batch index " +
                         std::to_string(b));
    }
  }
}

}  // namespace

TwinCritics TwinCritics::create(std::size_t obs_dim, std::size_t act_dim,
                                const std::vector<std::size_t>& hidden, Rng& rng) {
  auto q1 = Mlp::uniform_init(critic_sizes(obs_dim, act_dim, hidden), rng);
  auto q2 = Mlp::uniform_init(critic_sizes(obs_dim, act_dim, hidden), rng);
  return from(std::move(q1), std::move(q2));
}

TwinCritics TwinCritics::from(Mlp q1, Mlp q2) {
  if (!q1.same_architecture(q2)) throw DimensionError("TwinCritics: twins differ in shape");
  if (q1.output_size() != 1) throw DimensionError("TwinCritics: critics must output a scalar");
  TwinCritics c;
  c.target_q1 = q1;
  c.target_q2 = q2;
  c.q1 = std::move(q1);
  c.q2 = std::move(q2);
  return c;
}

void TwinCritics::polyak(double rho) {
  polyak_update(target_q1, q1, rho);
  polyak_update(target_q2, q2, rho);
}

Matrix critic_input(const Matrix& states, const Matrix& actions) {
  if (states.cols() != actions.cols()) {
    throw DimensionError("critic_input: states and actions differ in batch size");
  }
  return Matrix::stack(states, actions);
}

std::vector<double> q_values(const Mlp& q, const Matrix& states, const Matrix& actions) {
  const Matrix out = evaluate(q, critic_input(states, actions));
  return {out.data(), out.data() + out.size()};
}

std::vector<double> q_min(const TwinCritics& critics, const Matrix& states, const Matrix& actions,
                          bool use_targets) {
  const Mlp& a = use_targets ? critics.target_q1 : critics.q1;
  const Mlp& b = use_targets ? critics.target_q2 : critics.q2;
  const Matrix input = critic_input(states, actions);
  const Matrix qa = evaluate(a, input);
  const Matrix qb = evaluate(b, input);
  std::vector<double> out(input.cols());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::min(qa(0, k), qb(0, k));
  require_finite(out, "q_min");
  return out;
}

double q_min(const TwinCritics& critics, std::span<const double> observation,
             std::span<const double> action, bool use_targets) {
  return q_min(critics, Matrix::column_vector(observation), Matrix::column_vector(action),
               use_targets)[0];
}

std::vector<double> td_target(const TransitionBatch& batch, const SquashedGaussianPolicy& policy,
                              const PolicySnapshot& prev, const RegularizationConfig& cfg,
                              double gamma, const TwinCritics& critics, const Matrix& noise) {
  const std::size_t m = batch.size();
  const auto heads = policy.heads(batch.next_states);
  const auto next = sample(policy, heads, noise);
  std::vector<double> log_prev;
  if (cfg.rel_entropy_coef != 0.0) {
    log_prev = prev.matches(policy) ? next.log_prob : prev.log_prob(batch.next_states, next.pre_squash);
    for (double& v : log_prev) v = std::max(v, kPrevLogProbFloor);
  } else {
    log_prev.assign(m, 0.0);
  }
  const auto min_q = q_min(critics, batch.next_states, next.action, true);

  std::vector<double> y(m);
  for (std::size_t b = 0; b < m; ++b) {
    y[b] = td_target_value(batch.rewards[b], batch.terminal[b] != 0, gamma, min_q[b],
                           next.log_prob[b], log_prev[b], cfg);
    if (!std::isfinite(y[b])) {
      throw NumericError("td_target: non-finite target for transition " + std::to_string(b) +
                         " (reward " + std::to_string(batch.rewards[b]) + ", min Q " +
                         std::to_string(min_q[b]) + ", log pi " + std::to_string(next.log_prob[b]) +
                         ")");
    }
  }
  return y;
}

std::vector<double> td_target(const TransitionBatch& batch, const SquashedGaussianPolicy& policy,
                              const PolicySnapshot& prev, const RegularizationConfig& cfg,
                              double gamma, const TwinCritics& critics, Rng& rng) {
  const Matrix noise = rng.normal_matrix(policy.act_dim(), batch.size());
  return td_target(batch, policy, prev, cfg, gamma, critics, noise);
}

double squared_error_loss(const Mlp& q, const Matrix& input, std::span<const double> targets,
                          std::vector<double>* grad) {
  const std::size_t m = input.cols();
  if (targets.size() != m) throw DimensionError("critic_loss: one target per transition required");
  auto fwd = forward(q, input);
  const double inv_m = 1.0 / static_cast<double>(m);
  Matrix dq(1, m);
  double loss = 0.0;
  for (std::size_t b = 0; b < m; ++b) {
    const double diff = fwd.output(0, b) - targets[b];
    loss += diff * diff;
    dq(0, b) = 2.0 * diff * inv_m;
  }
  loss *= inv_m;
  if (!std::isfinite(loss)) throw NumericError("critic_loss: non-finite loss");
  if (grad != nullptr) *grad = backward(fwd.tape, dq).params;
  return loss;
}

CriticLoss critic_loss(const TwinCritics& critics, const TransitionBatch& batch,
                       std::span<const double> targets, bool with_gradients) {
  const Matrix input = critic_input(batch.states, batch.actions);
  CriticLoss out;
  out.loss1 = squared_error_loss(critics.q1, input, targets, with_gradients ? &out.grad1 : nullptr);
  out.loss2 = squared_error_loss(critics.q2, input, targets, with_gradients ? &out.grad2 : nullptr);
  return out;
}

}  // namespace csac
