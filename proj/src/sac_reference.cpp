#include "csac/sac_reference.hpp"

#include <algorithm>
#include <cmath>

#include "csac/errors.hpp"

namespace csac {

namespace {

Mlp make_q(std::size_t in, const std::vector<std::size_t>& hidden, Rng& rng) {
  std::vector<std::size_t> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  return Mlp::uniform_init(sizes, rng);
}

// Mean squared error against y and its gradient.
double mse_step(const Mlp& q, const Matrix& x, const std::vector<double>& y,
                std::vector<double>& grad) {
  auto f = forward(q, x);
  const double inv_m = 1.0 / static_cast<double>(y.size());
  Matrix d(1, y.size());
  double loss = 0.0;
  for (std::size_t b = 0; b < y.size(); ++b) {
    const double e = f.output(0, b) - y[b];
    loss += e * e;
    d(0, b) = 2.0 * e * inv_m;
  }
  grad = backward(f.tape, d).params;
  return loss * inv_m;
}

}  // namespace

SacReference::SacReference(std::size_t obs_dim, ActionBounds bounds, AgentConfig config,
                           std::uint64_t seed)
    : config_(std::move(config)), rng_(seed) {
  config_.validate();
  policy_ = SquashedGaussianPolicy(obs_dim, std::move(bounds), config_.hidden, rng_,
                                   config_.log_std_min, config_.log_std_max);
  const std::size_t in = obs_dim + policy_.act_dim();
  q1_ = make_q(in, config_.hidden, rng_);
  q2_ = make_q(in, config_.hidden, rng_);
  tq1_ = q1_;
  tq2_ = q2_;
  actor_opt_ = Adam(policy_.net().param_count(), {config_.actor_lr});
  q1_opt_ = Adam(q1_.param_count(), {config_.critic_lr});
  q2_opt_ = Adam(q2_.param_count(), {config_.critic_lr});
}

std::vector<double> SacReference::act(std::span<const double> observation, bool explore) {
  if (!explore) return policy_.deterministic_action(observation);
  std::vector<double> noise(policy_.act_dim());
  for (double& v : noise) v = rng_.normal();
  return sample(policy_, observation, noise).action;
}

std::vector<double> SacReference::td_target(const TransitionBatch& batch,
                                            const Matrix& noise) const {
  const auto heads = policy_.heads(batch.next_states);
  const auto next = sample(policy_, heads, noise);
  const Matrix x = Matrix::stack(batch.next_states, next.action);
  const Matrix a = evaluate(tq1_, x);
  const Matrix b = evaluate(tq2_, x);
  std::vector<double> y(batch.size());
  for (std::size_t k = 0; k < y.size(); ++k) {
    if (batch.terminal[k]) {
      y[k] = batch.rewards[k];
    } else {
      const double v = std::min(a(0, k), b(0, k)) - config_.sigma * next.log_prob[k];
      y[k] = batch.rewards[k] + config_.gamma * v;
    }
  }
  return y;
}

double SacReference::actor_loss(const Matrix& states, const Matrix& noise,
                                std::vector<double>* grad, double* entropy) const {
  const std::size_t m = states.cols();
  const double inv_m = 1.0 / static_cast<double>(m);
  auto heads = policy_.heads(states, grad != nullptr);
  const auto s = sample(policy_, heads, noise);
  const Matrix x = Matrix::stack(states, s.action);
  auto f1 = forward(q1_, x);
  auto f2 = forward(q2_, x);
  Matrix g1(1, m), g2(1, m);
  double loss = 0.0;
  for (std::size_t b = 0; b < m; ++b) {
    const bool first = f1.output(0, b) <= f2.output(0, b);
    const double q = first ? f1.output(0, b) : f2.output(0, b);
    (first ? g1 : g2)(0, b) = 1.0;
    loss += config_.sigma * s.log_prob[b] - q;
  }
  if (entropy != nullptr) {
    double h = 0.0;
    for (double lp : s.log_prob) h -= lp;
    *entropy = h * inv_m;
  }
  if (grad == nullptr) return loss * inv_m;

  const Matrix d1 = backward(f1.tape, g1, GradTarget::kInputOnly).input;
  const Matrix d2 = backward(f2.tape, g2, GradTarget::kInputOnly).input;
  const std::size_t obs = states.rows();
  Matrix ga(policy_.act_dim(), m);
  for (std::size_t j = 0; j < ga.rows(); ++j) {
    for (std::size_t b = 0; b < m; ++b) ga(j, b) = -inv_m * (d1(obs + j, b) + d2(obs + j, b));
  }
  const Matrix gu = squash_backward(policy_.bounds(), s.pre_squash, ga);
  const std::vector<double> glogp(m, config_.sigma * inv_m);
  *grad = backward_sample(policy_, heads, s, gu, glogp);
  return loss * inv_m;
}

UpdateMetrics SacReference::update_step(const TransitionBatch& batch) {
  const std::size_t m = batch.size();
  UpdateMetrics out;
  const Matrix td_noise = rng_.normal_matrix(policy_.act_dim(), m);
  const auto y = td_target(batch, td_noise);

  const Matrix x = Matrix::stack(batch.states, batch.actions);
  std::vector<double> g;
  out.critic_loss_1 = mse_step(q1_, x, y, g);
  q1_opt_.step(q1_.params(), g);
  out.critic_loss_2 = mse_step(q2_, x, y, g);
  q2_opt_.step(q2_.params(), g);

  const Matrix noise = rng_.normal_matrix(policy_.act_dim(), m);
  out.actor_loss = actor_loss(batch.states, noise, &g, &out.entropy);
  actor_opt_.step(policy_.net().params(), g);
  ++updates_;

  polyak_update(tq1_, q1_, config_.rho);
  polyak_update(tq2_, q2_, config_.rho);
  return out;
}

Json SacReference::to_json() const {
  return {{"format_version", kCheckpointFormatVersion},
          {"algorithm", "sac"},
          {"config", agent_config_to_json(config_)},
          {"action_low", policy_.bounds().low},
          {"action_high", policy_.bounds().high},
          {"policy", network_checkpoint(policy_.net(), actor_opt_)},
          {"q1", network_checkpoint(q1_, q1_opt_)},
          {"q2", network_checkpoint(q2_, q2_opt_)},
          {"target_q1", mlp_to_json(tq1_)},
          {"target_q2", mlp_to_json(tq2_)},
          {"rng", rng_.state()},
          {"updates", updates_}};
}

}  // namespace csac
