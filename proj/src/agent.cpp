#include "csac/agent.hpp"

#include <algorithm>
#include <cmath>

#include "csac/errors.hpp"

namespace csac {

void AgentConfig::validate() const {
  RegularizationConfig::make(sigma, tau);
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ValidationError("agent: gamma must be in [0, 1)");
  if (!(rho >= 0.0 && rho <= 1.0)) throw ValidationError("agent: rho must be in [0, 1]");
  if (!(actor_lr > 0.0) || !(critic_lr > 0.0)) {
    throw ValidationError("agent: learning rates must be positive");
  }
  for (std::size_t h : hidden) {
    if (h == 0) throw ValidationError("agent: hidden widths must be positive");
  }
  if (!(log_std_min < log_std_max)) throw ValidationError("agent: log_std_min must be < log_std_max");
}

Json agent_config_to_json(const AgentConfig& c) {
  return {{"sigma", c.sigma},         {"tau", c.tau},
          {"gamma", c.gamma},         {"rho", c.rho},
          {"actor_lr", c.actor_lr},   {"critic_lr", c.critic_lr},
          {"hidden", c.hidden},       {"log_std_min", c.log_std_min},
          {"log_std_max", c.log_std_max}, {"kl_through_action", c.kl_through_action}};
}

AgentConfig agent_config_from_json(const Json& j) {
  AgentConfig c;
  try {
    c.sigma = j.at("sigma").get<double>();
    c.tau = j.at("tau").get<double>();
    c.gamma = j.at("gamma").get<double>();
    c.rho = j.at("rho").get<double>();
    c.actor_lr = j.at("actor_lr").get<double>();
    c.critic_lr = j.at("critic_lr").get<double>();
    c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    c.log_std_min = j.at("log_std_min").get<double>();
    c.log_std_max = j.at("log_std_max").get<double>();
    c.kl_through_action = j.at("kl_through_action").get<bool>();
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("checkpoint: malformed agent config: ") + e.what());
  }
  c.validate();
  return c;
}

Matrix min_q_action_gradient(const TwinCritics& critics, const Matrix& states,
                             const Matrix& actions, std::vector<double>& min_q) {
  const Matrix input = critic_input(states, actions);
  const std::size_t m = input.cols();
  auto f1 = forward(critics.q1, input);
  auto f2 = forward(critics.q2, input);
  Matrix g1(1, m), g2(1, m);
  min_q.resize(m);
  for (std::size_t b = 0; b < m; ++b) {
    const double a = f1.output(0, b);
    const double c = f2.output(0, b);
    if (!std::isfinite(a) || !std::isfinite(c)) {
      throw NumericError("actor: non-finite critic output at batch index " + std::to_string(b));
    }
    if (a <= c) {
      min_q[b] = a;
      g1(0, b) = 1.0;
    } else {
      min_q[b] = c;
      g2(0, b) = 1.0;
    }
  }
  const Matrix d1 = backward(f1.tape, g1, GradTarget::kInputOnly).input;
  const Matrix d2 = backward(f2.tape, g2, GradTarget::kInputOnly).input;
  const std::size_t obs = states.rows();
  Matrix da(actions.rows(), m);
  for (std::size_t j = 0; j < da.rows(); ++j) {
    for (std::size_t b = 0; b < m; ++b) da(j, b) = d1(obs + j, b) + d2(obs + j, b);
  }
  return da;
}

CsacAgent::CsacAgent(std::size_t obs_dim, ActionBounds bounds, AgentConfig config,
                     std::uint64_t seed)
    : config_(std::move(config)), rng_(seed) {
  config_.validate();
  reg_ = RegularizationConfig::make(config_.sigma, config_.tau);
  policy_ = SquashedGaussianPolicy(obs_dim, std::move(bounds), config_.hidden, rng_,
                                   config_.log_std_min, config_.log_std_max);
  critics_ = TwinCritics::create(obs_dim, policy_.act_dim(), config_.hidden, rng_);
  prev_ = snapshot(policy_, 0);
  init_optimizers();
}

void CsacAgent::init_optimizers() {
  actor_opt_ = Adam(policy_.net().param_count(), {config_.actor_lr});
  q1_opt_ = Adam(critics_.q1.param_count(), {config_.critic_lr});
  q2_opt_ = Adam(critics_.q2.param_count(), {config_.critic_lr});
}

std::vector<double> CsacAgent::act(std::span<const double> observation, bool explore) {
  if (!explore) return policy_.deterministic_action(observation);
  std::vector<double> noise(policy_.act_dim());
  for (double& v : noise) v = rng_.normal();
  return sample(policy_, observation, noise).action;
}

void CsacAgent::refresh_snapshot() { prev_ = snapshot(policy_, updates_); }

ActorLoss CsacAgent::actor_loss(const Matrix& states, const Matrix& noise,
                                bool with_gradient) const {
  const std::size_t m = states.cols();
  if (m == 0) throw ValidationError("actor_loss: empty batch");
  const double inv_m = 1.0 / static_cast<double>(m);
  const double tau = reg_.rel_entropy_coef;
  const double sigma = reg_.entropy_coef;

  ActorLoss out;
  auto heads = policy_.heads(states, with_gradient);
  out.sample = sample(policy_, heads, noise);
  const auto& s = out.sample;

  std::vector<double> min_q;
  Matrix dq;
  if (with_gradient) {
    dq = min_q_action_gradient(critics_, states, s.action, min_q);
  } else {
    min_q = q_min(critics_, states, s.action, false);
  }

  const bool live_is_prev = tau != 0.0 && prev_.matches(policy_);
  std::vector<double> log_prev(m, 0.0);
  std::vector<unsigned char> floored(m, 0);
  if (tau != 0.0) {
    log_prev = live_is_prev ? s.log_prob : prev_.log_prob(states, s.pre_squash);
    for (std::size_t b = 0; b < m; ++b) {
      if (log_prev[b] < kPrevLogProbFloor) {
        log_prev[b] = kPrevLogProbFloor;
        floored[b] = 1;
      }
    }
  }

  double loss = 0.0;
  double neg_logp = 0.0;
  for (std::size_t b = 0; b < m; ++b) {
    loss += actor_objective(reg_, s.log_prob[b], log_prev[b], min_q[b]);
    neg_logp += -s.log_prob[b];
  }
  out.loss = loss * inv_m;
  out.entropy = neg_logp * inv_m;
  if (!std::isfinite(out.loss)) throw NumericError("actor_loss: non-finite loss");
  if (!with_gradient) return out;

  Matrix grad_action(dq.rows(), m);
  for (std::size_t j = 0; j < dq.rows(); ++j) {
    for (std::size_t b = 0; b < m; ++b) grad_action(j, b) = -inv_m * dq(j, b);
  }
  Matrix grad_u = squash_backward(policy_.bounds(), s.pre_squash, grad_action);
  if (tau != 0.0 && config_.kl_through_action) {
    std::vector<double> weight(m);
    for (std::size_t b = 0; b < m; ++b) weight[b] = floored[b] ? 0.0 : -tau * inv_m;
    const Matrix g_prev =
        live_is_prev ? log_prob_grad_pre_squash(heads, s.pre_squash, weight)
                     : log_prob_grad_pre_squash(prev_.heads(states), s.pre_squash, weight);
    for (std::size_t k = 0; k < grad_u.size(); ++k) grad_u.flat()[k] += g_prev.flat()[k];
  }
  const std::vector<double> grad_logp(m, (tau + sigma) * inv_m);
  out.grad = backward_sample(policy_, heads, s, grad_u, grad_logp);
  return out;
}

double CsacAgent::preference(std::span<const double> observation,
                             std::span<const double> action) const {
  const double min_q = q_min(critics_, observation, action, false);
  const double tau = reg_.rel_entropy_coef;
  if (tau == 0.0) return preference_value(0.0, 0.0, min_q);
  const Matrix u = unsquash(policy_.bounds(), Matrix::column_vector(action));
  const double lp = prev_.log_prob(Matrix::column_vector(observation), u)[0];
  return preference_value(tau, std::max(lp, kPrevLogProbFloor), min_q);
}

double CsacAgent::kl_estimate(const Matrix& states, const Matrix& noise) const {
  const auto heads = policy_.heads(states);
  const auto s = sample(policy_, heads, noise);
  const auto lp = prev_.log_prob(states, s.pre_squash);
  double total = 0.0;
  for (std::size_t b = 0; b < lp.size(); ++b) {
    total += std::clamp(s.log_prob[b] - lp[b], -100.0, 100.0);
  }
  return total / static_cast<double>(lp.size());
}

UpdateMetrics CsacAgent::update_step(const TransitionBatch& batch) {
  const std::size_t m = batch.size();
  if (m == 0) throw ValidationError("update_step: empty batch");
  UpdateMetrics metrics;

  refresh_snapshot();
  metrics.snapshot_version = prev_.version();

  const auto targets = td_target(batch, policy_, prev_, reg_, config_.gamma, critics_, rng_);
  const auto cl = critic_loss(critics_, batch, targets);
  q1_opt_.step(critics_.q1.params(), cl.grad1);
  q2_opt_.step(critics_.q2.params(), cl.grad2);
  metrics.critic_loss_1 = cl.loss1;
  metrics.critic_loss_2 = cl.loss2;

  const Matrix actor_noise = rng_.normal_matrix(policy_.act_dim(), m);
  const auto al = actor_loss(batch.states, actor_noise);
  actor_opt_.step(policy_.net().params(), al.grad);
  ++updates_;
  metrics.actor_loss = al.loss;
  metrics.entropy = al.entropy;

  critics_.polyak(config_.rho);
  metrics.kl = kl_estimate(batch.states, actor_noise);
  return metrics;
}

Json CsacAgent::to_json() const {
  return {{"format_version", kCheckpointFormatVersion},
          {"algorithm", "csac"},
          {"config", agent_config_to_json(config_)},
          {"action_low", policy_.bounds().low},
          {"action_high", policy_.bounds().high},
          {"policy", network_checkpoint(policy_.net(), actor_opt_)},
          {"prev_policy", mlp_to_json(prev_.policy().net())},
          {"prev_policy_version", prev_.version()},
          {"q1", network_checkpoint(critics_.q1, q1_opt_)},
          {"q2", network_checkpoint(critics_.q2, q2_opt_)},
          {"target_q1", mlp_to_json(critics_.target_q1)},
          {"target_q2", mlp_to_json(critics_.target_q2)},
          {"rng", rng_.state()},
          {"updates", updates_}};
}

CsacAgent CsacAgent::from_json(const Json& j) {
  check_format_version(j);
  try {
    if (j.at("algorithm") != "csac") throw ValidationError("checkpoint: not a csac agent");
    CsacAgent a;
    a.config_ = agent_config_from_json(j.at("config"));
    a.reg_ = RegularizationConfig::make(a.config_.sigma, a.config_.tau);
    ActionBounds bounds{j.at("action_low").get<std::vector<double>>(),
                        j.at("action_high").get<std::vector<double>>()};
    a.policy_ = SquashedGaussianPolicy(mlp_from_json(j.at("policy")), bounds,
                                       a.config_.log_std_min, a.config_.log_std_max);
    SquashedGaussianPolicy prev(mlp_from_json(j.at("prev_policy")), bounds, a.config_.log_std_min,
                                a.config_.log_std_max);
    a.prev_ = PolicySnapshot(prev, j.at("prev_policy_version").get<std::uint64_t>());
    a.critics_ = TwinCritics::from(mlp_from_json(j.at("q1")), mlp_from_json(j.at("q2")));
    a.critics_.target_q1 = mlp_from_json(j.at("target_q1"));
    a.critics_.target_q2 = mlp_from_json(j.at("target_q2"));
    if (!a.critics_.target_q1.same_architecture(a.critics_.q1) ||
        !a.critics_.target_q2.same_architecture(a.critics_.q2)) {
      throw ValidationError("checkpoint: target critic shape mismatch");
    }
    a.actor_opt_ = adam_from_json(j.at("policy").at("optimizer"));
    a.q1_opt_ = adam_from_json(j.at("q1").at("optimizer"));
    a.q2_opt_ = adam_from_json(j.at("q2").at("optimizer"));
    if (a.actor_opt_.first_moment().size() != a.policy_.net().param_count() ||
        a.q1_opt_.first_moment().size() != a.critics_.q1.param_count() ||
        a.q2_opt_.first_moment().size() != a.critics_.q2.param_count()) {
      throw ValidationError("checkpoint: optimizer state does not match its network");
    }
    a.rng_.set_state(j.at("rng").get<std::string>());
    a.updates_ = j.at("updates").get<std::uint64_t>();
    return a;
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("checkpoint: malformed agent: ") + e.what());
  }
}

}  // namespace csac
