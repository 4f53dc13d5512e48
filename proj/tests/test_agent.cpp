#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "csac/agent.hpp"
#include "csac/errors.hpp"
#include "csac/gradient_check.hpp"
#include "csac/sac_reference.hpp"
#include "test_util.hpp"

using namespace csac;
using csac::testing::random_batch;
using csac::testing::same_bits;

namespace {

AgentConfig small_config(double tau) {
  AgentConfig c;
  c.tau = tau;
  c.hidden = {16, 16};
  return c;
}

const ActionBounds kBounds = ActionBounds::symmetric(1, 2.0);

LossFn actor_loss_fn(const CsacAgent& agent, const Matrix& states, const Matrix& noise) {
  return [&agent, &states, &noise](const Mlp& net, std::vector<double>* grad) {
    CsacAgent probe = agent;
    std::copy(net.params().begin(), net.params().end(), probe.mutable_policy().net().params().begin());
    const auto l = probe.actor_loss(states, noise, grad != nullptr);
    if (grad) *grad = l.grad;
    return l.loss;
  };
}

}  // namespace

TEST_CASE("preference and actor objective: worked examples") {
  CHECK(preference_value(0.5, -1.0, 2.0) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(preference_value(0.0, -1.0, 2.0) == 2.0);
  CHECK(preference_value(0.5, -std::numbers::ln2, 2.0) ==
        doctest::Approx(2.0 - 0.5 * std::numbers::ln2).epsilon(1e-15));
  const auto cfg = RegularizationConfig::make(0.2, 0.5);
  CHECK(actor_objective(cfg, -1.0, -1.0, 2.0) == doctest::Approx(-2.2).epsilon(1e-15));
  const auto sac = RegularizationConfig::make(0.2, 0.0);
  CHECK(actor_objective(sac, -1.3, -9.0, 0.7) == 0.2 * -1.3 - 0.7);
}

TEST_CASE("agent preference: tau 0 is the min critic, otherwise adds tau log pi_prev") {
  CsacAgent sac(3, kBounds, small_config(0.0), 1);
  const std::vector<double> obs{0.1, 0.2, -0.3};
  const std::vector<double> act{0.4};
  CHECK(sac.preference(obs, act) == q_min(sac.critics(), obs, act, false));

  CsacAgent agent(3, kBounds, small_config(0.5), 1);
  const Matrix u = unsquash(kBounds, Matrix::column_vector(act));
  const double lp = log_prob(agent.prev_policy().policy(), obs, u.column(0));
  CHECK(agent.preference(obs, act) ==
        doctest::Approx(0.5 * lp + q_min(agent.critics(), obs, act, false)).epsilon(1e-13));
}

TEST_CASE("actor loss: tau 0 equals the SAC reference loss and gradient bitwise") {
  const AgentConfig cfg = small_config(0.0);
  CsacAgent agent(3, kBounds, cfg, 42);
  SacReference ref(3, kBounds, cfg, 42);
  Rng rng(1);
  const Matrix states = rng.normal_matrix(3, 64);
  const Matrix noise = rng.normal_matrix(1, 64);
  const auto l = agent.actor_loss(states, noise);
  std::vector<double> g;
  double entropy = 0.0;
  const double ref_loss = ref.actor_loss(states, noise, &g, &entropy);
  CHECK(same_bits(std::vector<double>{l.loss}, std::vector<double>{ref_loss}));
  CHECK(same_bits(l.grad, g));
  CHECK(l.entropy == entropy);
}

TEST_CASE("actor loss: gradient matches finite differences") {
  Rng rng(2);
  for (double tau : {0.0, 0.5, 5.0}) {
    CsacAgent agent(3, ActionBounds{{-1.0, 0.0}, {1.0, 2.0}}, small_config(tau), 7);
    const Matrix states = rng.normal_matrix(3, 32);
    const Matrix noise = rng.normal_matrix(2, 32);
    // Fresh snapshot: the previous policy coincides with the live one.
    auto r = gradient_check(agent.policy().net(), actor_loss_fn(agent, states, noise), 80, 1);
    CHECK_MESSAGE(r.max_relative_error < 1e-4, "tau ", tau, " fresh snapshot");
    // Move the live policy away from the snapshot.
    for (int k = 0; k < 3; ++k) agent.update_step(random_batch(3, 2, 32, rng));
    r = gradient_check(agent.policy().net(), actor_loss_fn(agent, states, noise), 80, 2);
    CHECK_MESSAGE(r.max_relative_error < 1e-4, "tau ", tau, " stale snapshot");
  }
}

TEST_CASE("actor loss: shifting both critics by c shifts the loss by -c, not the gradient") {
  CsacAgent agent(3, kBounds, small_config(0.5), 3);
  Rng rng(3);
  const Matrix states = rng.normal_matrix(3, 32);
  const Matrix noise = rng.normal_matrix(1, 32);
  const auto before = agent.actor_loss(states, noise);
  const double c = 4.5;
  auto& cr = agent.critics();
  cr.q1.bias(cr.q1.num_layers() - 1)[0] += c;
  cr.q2.bias(cr.q2.num_layers() - 1)[0] += c;
  const auto after = agent.actor_loss(states, noise);
  CHECK(after.loss == doctest::Approx(before.loss - c).epsilon(1e-12));
  CHECK(same_bits(before.grad, after.grad));
}

TEST_CASE("KL diagnostic is exactly zero against a fresh snapshot") {
  CsacAgent agent(3, kBounds, small_config(0.5), 4);
  Rng rng(4);
  for (int k = 0; k < 3; ++k) agent.update_step(random_batch(3, 1, 32, rng));
  const Matrix states = rng.normal_matrix(3, 32);
  const Matrix noise = rng.normal_matrix(1, 32);
  CHECK(agent.kl_estimate(states, noise) != 0.0);
  agent.refresh_snapshot();
  CHECK(agent.kl_estimate(states, noise) == 0.0);
}

TEST_CASE("update_step: the snapshot is the policy as it stood at the start of the step") {
  CsacAgent agent(3, kBounds, small_config(0.5), 5);
  Rng rng(5);
  for (std::uint64_t k = 0; k < 5; ++k) {
    const SquashedGaussianPolicy before = agent.policy();
    const auto m = agent.update_step(random_batch(3, 1, 32, rng));
    CHECK(m.snapshot_version == k);
    CHECK(agent.prev_policy().version() == k);
    CHECK(agent.updates() == k + 1);
    CHECK(agent.prev_policy().policy() == before);
    CHECK_FALSE(agent.policy() == before);
  }
}

TEST_CASE("update_step: tau 0 follows the SAC reference bitwise") {
  const AgentConfig cfg = small_config(0.0);
  CsacAgent agent(3, kBounds, cfg, 11);
  SacReference ref(3, kBounds, cfg, 11);
  Rng rng(6);
  for (int k = 0; k < 20; ++k) {
    const auto batch = random_batch(3, 1, 64, rng, 2.0);
    const auto a = agent.update_step(batch);
    const auto b = ref.update_step(batch);
    CHECK(a.critic_loss_1 == b.critic_loss_1);
    CHECK(a.actor_loss == b.actor_loss);
    REQUIRE(same_bits(agent.policy().net().params(), ref.policy().net().params()));
    REQUIRE(same_bits(agent.critics().q1.params(), ref.q1().params()));
    REQUIRE(same_bits(agent.critics().q2.params(), ref.q2().params()));
    REQUIRE(same_bits(agent.critics().target_q1.params(), ref.target_q1().params()));
    REQUIRE(same_bits(agent.critics().target_q2.params(), ref.target_q2().params()));
  }
  const std::vector<double> obs{0.3, 0.1, -0.2};
  CHECK(agent.act(obs, true) == ref.act(obs, true));
}

TEST_CASE("td_target: tau 0 matches the SAC reference target bitwise") {
  const AgentConfig cfg = small_config(0.0);
  CsacAgent agent(3, kBounds, cfg, 12);
  SacReference ref(3, kBounds, cfg, 12);
  Rng rng(7);
  for (int k = 0; k < 5; ++k) {
    const auto batch = random_batch(3, 1, 50, rng, 2.0);
    const Matrix noise = rng.normal_matrix(1, 50);
    const auto a = td_target(batch, agent.policy(), agent.prev_policy(), agent.regularization(),
                             cfg.gamma, agent.critics(), noise);
    CHECK(same_bits(a, ref.td_target(batch, noise)));
  }
}

TEST_CASE("update_step: identical twins on identical transitions give equal critic losses") {
  CsacAgent agent(3, kBounds, small_config(0.5), 13);
  agent.critics() = TwinCritics::from(agent.critics().q1, agent.critics().q1);
  Rng rng(8);
  auto one = csac::testing::random_transitions(3, 1, 1, rng);
  const auto batch = TransitionBatch::from(std::vector<Transition>(32, one[0]));
  for (int k = 0; k < 3; ++k) {
    const auto m = agent.update_step(batch);
    CHECK(m.critic_loss_1 == m.critic_loss_2);
  }
}

TEST_CASE("update_step and act are deterministic for a fixed seed") {
  CsacAgent a(3, kBounds, small_config(0.5), 21);
  CsacAgent b(3, kBounds, small_config(0.5), 21);
  Rng ra(9), rb(9);
  for (int k = 0; k < 5; ++k) {
    const auto ma = a.update_step(random_batch(3, 1, 32, ra));
    const auto mb = b.update_step(random_batch(3, 1, 32, rb));
    CHECK(ma.actor_loss == mb.actor_loss);
    CHECK(ma.kl == mb.kl);
  }
  CHECK(a.to_json() == b.to_json());
  const std::vector<double> obs{1.0, 0.0, 0.5};
  CHECK(a.act(obs, false) == a.act(obs, false));
  CHECK(a.act(obs, true) == b.act(obs, true));
  for (int k = 0; k < 200; ++k) {
    const auto act = a.act(obs, true);
    CHECK((act[0] > -2.0 && act[0] < 2.0));
  }
}

TEST_CASE("agent checkpoint round-trips and resumes identically") {
  CsacAgent agent(3, kBounds, small_config(0.5), 31);
  Rng rng(10);
  for (int k = 0; k < 4; ++k) agent.update_step(random_batch(3, 1, 32, rng));
  agent.act(std::vector<double>{0.0, 0.0, 0.0}, true);  // leaves a cached normal in the stream
  const Json j = agent.to_json();
  CsacAgent restored = CsacAgent::from_json(Json::parse(j.dump()));
  CHECK(restored.to_json() == j);
  CHECK(restored.prev_policy().version() == agent.prev_policy().version());
  const auto batch = random_batch(3, 1, 32, rng);
  const auto m1 = agent.update_step(batch);
  const auto m2 = restored.update_step(batch);
  CHECK(m1.actor_loss == m2.actor_loss);
  CHECK(agent.to_json() == restored.to_json());

  Json bad = j;
  bad["q1"]["optimizer"]["m"] = Json::array({0.0});
  CHECK_THROWS_AS(CsacAgent::from_json(bad), DimensionError);
}

TEST_CASE("agent config validation") {
  AgentConfig c;
  c.sigma = 0.0;
  c.tau = 0.0;
  CHECK_THROWS_AS(CsacAgent(3, kBounds, c, 0), ValidationError);
  c = AgentConfig{};
  c.gamma = 1.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = AgentConfig{};
  c.hidden = {0};
  CHECK_THROWS_AS(c.validate(), ValidationError);
  CHECK(agent_config_from_json(agent_config_to_json(AgentConfig{})) == AgentConfig{});
}
