#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <vector>

#include "csac/adam.hpp"
#include "csac/checkpoint.hpp"
#include "csac/errors.hpp"
#include "csac/gradient_check.hpp"
#include "csac/kernels.hpp"
#include "csac/matrix.hpp"
#include "csac/mlp.hpp"
#include "csac/rng.hpp"

using namespace csac;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (double& v : m.flat()) v = rng.uniform(-1.0, 1.0);
  return m;
}

bool bitwise_equal(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (std::bit_cast<std::uint64_t>(a[k]) != std::bit_cast<std::uint64_t>(b[k])) return false;
  }
  return true;
}

// Sum of squares of the outputs against fixed targets.
LossFn regression_loss(const Matrix& x, const Matrix& y) {
  return [x, y](const Mlp& net, std::vector<double>* grad) {
    if (grad == nullptr) {
      const Matrix out = evaluate(net, x);
      double loss = 0.0;
      for (std::size_t k = 0; k < out.size(); ++k) {
        const double d = out.flat()[k] - y.flat()[k];
        loss += 0.5 * d * d;
      }
      return loss;
    }
    auto r = forward(net, x);
    Matrix g(r.output.rows(), r.output.cols());
    double loss = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double d = r.output.flat()[k] - y.flat()[k];
      loss += 0.5 * d * d;
      g.flat()[k] = d;
    }
    *grad = backward(r.tape, g).params;
    return loss;
  };
}

}  // namespace

TEST_CASE("forward: identity network returns its input") {
  Mlp net({2, 2});
  net.weight(0)[0] = 1.0;
  net.weight(0)[3] = 1.0;
  const std::vector<double> x{1.0, 2.0};
  auto [y, tape] = forward(net, x);
  CHECK(y == std::vector<double>{1.0, 2.0});
}

TEST_CASE("forward: zero network returns zero") {
  Mlp net({3, 5, 2});
  const std::vector<double> x{0.3, -7.0, 2.5};
  auto [y, tape] = forward(net, x);
  CHECK(y == std::vector<double>{0.0, 0.0});
}

TEST_CASE("forward: 2-4-1 network matches a hand-rolled dense oracle") {
  Rng rng(7);
  const Mlp net = Mlp::uniform_init({2, 4, 1}, rng);
  const std::vector<double> x{0.7, -1.3};
  const auto w0 = net.weight(0);
  const auto b0 = net.bias(0);
  const auto w1 = net.weight(1);
  const auto b1 = net.bias(1);
  double expected = b1[0];
  for (int h = 0; h < 4; ++h) {
    double z = b0[h] + w0[h * 2 + 0] * x[0] + w0[h * 2 + 1] * x[1];
    z = z > 0.0 ? z : 0.0;
    expected += w1[h] * z;
  }
  auto [y, tape] = forward(net, x);
  REQUIRE(y.size() == 1);
  CHECK(std::abs(y[0] - expected) <= 1e-12 * std::max(1.0, std::abs(expected)));
}

TEST_CASE("forward: rejects wrong width and non-finite input") {
  Mlp net({3, 2});
  CHECK_THROWS_AS(forward(net, std::vector<double>{1.0, 2.0}), DimensionError);
  CHECK_THROWS_AS(forward(net, std::vector<double>{1.0, NAN, 0.0}), NumericError);
  CHECK_THROWS_AS(Mlp({3}), ValidationError);
  CHECK_THROWS_AS(Mlp({3, 0, 1}), ValidationError);
}

TEST_CASE("forward is pure: repeated calls are bitwise identical") {
  Rng rng(3);
  const Mlp net = Mlp::uniform_init({5, 16, 16, 3}, rng);
  const Matrix x = random_matrix(5, 33, rng);
  const Matrix a = evaluate(net, x);
  const Matrix b = evaluate(net, x);
  auto c = forward(net, x);
  CHECK(bitwise_equal(a.flat(), b.flat()));
  CHECK(bitwise_equal(a.flat(), c.output.flat()));
}

TEST_CASE("backward: scalar linear net has analytic gradients") {
  Mlp net({1, 1});
  net.weight(0)[0] = 0.5;
  net.bias(0)[0] = -2.0;
  auto [y, tape] = forward(net, std::vector<double>{3.0});
  const auto g = backward(tape, std::vector<double>{1.0});
  CHECK(g.params[0] == 3.0);
  CHECK(g.params[1] == 1.0);
  CHECK(g.input(0, 0) == 0.5);
}

TEST_CASE("backward: zero output gradient gives zero gradients") {
  Rng rng(11);
  const Mlp net = Mlp::uniform_init({3, 8, 2}, rng);
  auto [y, tape] = forward(net, std::vector<double>{0.1, 0.2, 0.3});
  const auto g = backward(tape, std::vector<double>{0.0, 0.0});
  for (double v : g.params) CHECK(v == 0.0);
  for (double v : g.input.flat()) CHECK(v == 0.0);
}

TEST_CASE("backward: a tape is consumed by one backward pass") {
  Rng rng(1);
  const Mlp net = Mlp::uniform_init({2, 3, 1}, rng);
  auto [y, tape] = forward(net, std::vector<double>{1.0, 1.0});
  CHECK_THROWS_AS(backward(tape, std::vector<double>{1.0, 2.0}), DimensionError);
  backward(tape, std::vector<double>{1.0});
  CHECK(tape.used());
  CHECK_THROWS_AS(backward(tape, std::vector<double>{1.0}), ValidationError);
  Tape empty;
  CHECK_THROWS_AS(backward(empty, std::vector<double>{1.0}), ValidationError);
}

TEST_CASE("backward: 3-8-8-2 net matches central differences on every parameter") {
  Rng rng(2024);
  const Mlp net = Mlp::uniform_init({3, 8, 8, 2}, rng);
  const Matrix x = random_matrix(3, 6, rng);
  const Matrix y = random_matrix(2, 6, rng);
  const auto r = gradient_check(net, regression_loss(x, y), net.param_count(), 5, 1e-5);
  CHECK(r.probes == net.param_count());
  CHECK(r.max_relative_error < 1e-4);
}

TEST_CASE("backward: input gradient matches central differences") {
  Rng rng(99);
  const Mlp net = Mlp::uniform_init({4, 8, 1}, rng);
  std::vector<double> x{0.3, -0.2, 0.9, 0.4};
  auto [y, tape] = forward(net, x);
  const auto g = backward(tape, std::vector<double>{1.0});
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto xp = x;
    auto xm = x;
    xp[i] += 1e-6;
    xm[i] -= 1e-6;
    const double num = (forward(net, xp).first[0] - forward(net, xm).first[0]) / 2e-6;
    CHECK(g.input(i, 0) == doctest::Approx(num).epsilon(1e-6));
  }
}

TEST_CASE("gradient_check: linear least squares on a linear net is near exact") {
  Rng rng(5);
  const Mlp net = Mlp::uniform_init({4, 3}, rng);
  const Matrix x = random_matrix(4, 10, rng);
  const Matrix y = random_matrix(3, 10, rng);
  const auto r = gradient_check(net, regression_loss(x, y), 50, 1, 1e-4);
  CHECK(r.max_relative_error < 1e-8);
}

TEST_CASE("gradient_check: non-finite loss is an error") {
  Mlp net({1, 1});
  LossFn bad = [](const Mlp& n, std::vector<double>* g) {
    if (g) g->assign(n.param_count(), 0.0);
    return std::numeric_limits<double>::infinity();
  };
  CHECK_THROWS_AS(gradient_check(net, bad, 2), NumericError);
}

TEST_CASE("Adam: zero gradient leaves parameters unchanged") {
  Adam opt(3, {});
  std::vector<double> p{1.0, -2.0, 0.5};
  const auto before = p;
  opt.step(p, std::vector<double>{0.0, 0.0, 0.0});
  CHECK(p == before);
  CHECK(opt.steps() == 1);
}

TEST_CASE("Adam: first step with constant gradient moves by about the learning rate") {
  Adam opt(1, {3e-4, 0.9, 0.999, 1e-8});
  std::vector<double> p{1.0};
  opt.step(p, std::vector<double>{1.0});
  CHECK(1.0 - p[0] == doctest::Approx(3e-4).epsilon(1e-6));
}

TEST_CASE("Adam: identical runs are bitwise reproducible") {
  Rng rng(8);
  std::vector<double> g(20);
  for (double& v : g) v = rng.normal();
  std::vector<double> p1(20, 0.25), p2(20, 0.25);
  Adam a(20, {}), b(20, {});
  for (int k = 0; k < 2; ++k) {
    a.step(p1, g);
    b.step(p2, g);
  }
  CHECK(bitwise_equal(p1, p2));
  CHECK(a == b);
}

TEST_CASE("Adam: non-finite gradient is rejected without touching state") {
  Adam opt(2, {});
  std::vector<double> p{1.0, 2.0};
  opt.step(p, std::vector<double>{0.5, 0.5});
  const Adam saved = opt;
  const auto before = p;
  CHECK_THROWS_AS(opt.step(p, std::vector<double>{NAN, 0.0}), NumericError);
  CHECK(p == before);
  CHECK(opt == saved);
  CHECK_THROWS_AS(opt.step(p, std::vector<double>{1.0}), DimensionError);
}

TEST_CASE("polyak_update: rho 1 copies, rho 0 keeps, rho 0.005 mixes") {
  Rng rng(4);
  const Mlp online = Mlp::uniform_init({3, 4, 2}, rng);
  Mlp target = Mlp::uniform_init({3, 4, 2}, rng);
  const Mlp original = target;

  polyak_update(target, online, 0.0);
  CHECK(target == original);
  polyak_update(target, online, 1.0);
  CHECK(target == online);

  Mlp a({1, 1});
  Mlp b({1, 1});
  b.weight(0)[0] = 1.0;
  polyak_update(a, b, 0.005);
  CHECK(a.weight(0)[0] == doctest::Approx(0.005).epsilon(1e-15));

  CHECK_THROWS_AS(polyak_update(target, Mlp({3, 5, 2}), 0.5), DimensionError);
  CHECK_THROWS_AS(polyak_update(target, online, 1.5), ValidationError);
}

TEST_CASE("polyak_update: rho 1 then forward reproduces the online outputs bitwise") {
  Rng rng(12);
  const Mlp online = Mlp::uniform_init({6, 32, 32, 2}, rng);
  Mlp target = Mlp::uniform_init({6, 32, 32, 2}, rng);
  polyak_update(target, online, 1.0);
  const Matrix x = random_matrix(6, 40, rng);
  CHECK(bitwise_equal(evaluate(online, x).flat(), evaluate(target, x).flat()));
}

TEST_CASE("parameter count of a 17-256-256-(6+6) actor") {
  const std::vector<std::size_t> sizes{17, 256, 256, 12};
  const std::size_t expected = 17 * 256 + 256 + 256 * 256 + 256 + 256 * 6 * 2 + 6 * 2;
  CHECK(mlp_param_count(sizes) == expected);
  CHECK(Mlp(sizes).param_count() == expected);
}

TEST_CASE("uniform_init: weights within 1/sqrt(fan_in), biases zero") {
  Rng rng(0);
  const Mlp net = Mlp::uniform_init({16, 9, 4}, rng);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(net.layer_sizes()[l]));
    for (double w : net.weight(l)) CHECK(std::abs(w) <= bound);
    for (double b : net.bias(l)) CHECK(b == 0.0);
  }
}

TEST_CASE("kernels: serial and omp backends agree bitwise") {
  Rng rng(31);
  const std::vector<std::pair<std::size_t, std::size_t>> shapes{
      {1, 1}, {3, 5}, {7, 17}, {64, 256}, {13, 129}, {5, 300}};
  for (auto [out, in] : shapes) {
    for (std::size_t batch : {std::size_t{1}, std::size_t{9}, std::size_t{31}, std::size_t{64}}) {
      const Matrix w = random_matrix(out, in, rng);
      const Matrix b = random_matrix(out, 1, rng);
      const Matrix x = random_matrix(in, batch, rng);
      const Matrix dz = random_matrix(out, batch, rng);

      Matrix zs, zo, dxs, dxo;
      kernels::serial::affine_forward(w.flat(), b.flat(), x, zs);
      kernels::omp::affine_forward(w.flat(), b.flat(), x, zo);
      CHECK(bitwise_equal(zs.flat(), zo.flat()));

      kernels::serial::affine_backward_input(w.flat(), dz, dxs);
      kernels::omp::affine_backward_input(w.flat(), dz, dxo);
      CHECK(bitwise_equal(dxs.flat(), dxo.flat()));

      std::vector<double> dws(out * in), dwo(out * in), dbs(out), dbo(out);
      kernels::serial::affine_backward_params(dz, x, dws, dbs);
      kernels::omp::affine_backward_params(dz, x, dwo, dbo);
      CHECK(bitwise_equal(dws, dwo));
      CHECK(bitwise_equal(dbs, dbo));

      Matrix rs = zs, ro = zs;
      kernels::serial::relu_inplace(rs);
      kernels::omp::relu_inplace(ro);
      CHECK(bitwise_equal(rs.flat(), ro.flat()));
      Matrix gs = dz, go = dz;
      kernels::serial::relu_backward_inplace(rs, gs);
      kernels::omp::relu_backward_inplace(ro, go);
      CHECK(bitwise_equal(gs.flat(), go.flat()));
    }
  }
}

TEST_CASE("kernels: omp result does not depend on the thread count") {
  Rng rng(6);
  const Matrix w = random_matrix(64, 64, rng);
  const Matrix dz = random_matrix(64, 256, rng);
  const Matrix x = random_matrix(64, 256, rng);
  std::vector<double> dw1(64 * 64), db1(64), dw4(64 * 64), db4(64);
  const int saved = kernels::num_threads();
  kernels::set_num_threads(1);
  kernels::omp::affine_backward_params(dz, x, dw1, db1);
  kernels::set_num_threads(4);
  kernels::omp::affine_backward_params(dz, x, dw4, db4);
  kernels::set_num_threads(saved);
  CHECK(bitwise_equal(dw1, dw4));
  CHECK(bitwise_equal(db1, db4));
}

TEST_CASE("kernels: whole network gradients agree across backends") {
  Rng rng(17);
  const Mlp net = Mlp::uniform_init({9, 64, 64, 1}, rng);
  const Matrix x = random_matrix(9, 256, rng);
  const Matrix g = random_matrix(1, 256, rng);
  Gradients gs, go;
  {
    kernels::ScopedBackend scope(kernels::Backend::kSerial);
    auto r = forward(net, x);
    gs = backward(r.tape, g);
  }
  {
    kernels::ScopedBackend scope(kernels::Backend::kOmp);
    auto r = forward(net, x);
    go = backward(r.tape, g);
  }
  CHECK(bitwise_equal(gs.params, go.params));
  CHECK(bitwise_equal(gs.input.flat(), go.input.flat()));
}

TEST_CASE("lane_sum follows the documented order") {
  std::vector<double> v(19);
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = 1.0 / static_cast<double>(k + 1);
  double lanes[kernels::kLanes] = {};
  for (std::size_t k = 0; k < v.size(); ++k) lanes[k % kernels::kLanes] += v[k];
  const double expected = ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) +
                          ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]));
  CHECK(std::bit_cast<std::uint64_t>(kernels::lane_sum(v)) ==
        std::bit_cast<std::uint64_t>(expected));
}

TEST_CASE("checkpoint: network and optimizer round-trip value-exactly") {
  Rng rng(21);
  Mlp net = Mlp::uniform_init({4, 7, 3}, rng);
  Adam opt(net.param_count(), {1e-3, 0.8, 0.99, 1e-7});
  std::vector<double> g(net.param_count());
  for (double& v : g) v = rng.normal() * 1e-3;
  opt.step(net.params(), g);

  const auto path = std::filesystem::temp_directory_path() / "csac_diffcore_ckpt.json";
  save_json(path, network_checkpoint(net, opt));
  const Json j = load_json(path);
  std::filesystem::remove(path);
  CHECK(j.at("format_version").get<int>() == kCheckpointFormatVersion);
  const Mlp net2 = mlp_from_json(j);
  const Adam opt2 = adam_from_json(j.at("optimizer"));
  CHECK(net2 == net);
  CHECK(opt2 == opt);
  CHECK(bitwise_equal(net2.params(), net.params()));
}

TEST_CASE("checkpoint: wrong format version and malformed documents are rejected") {
  Rng rng(2);
  Json j = mlp_to_json(Mlp::uniform_init({2, 2}, rng));
  j["format_version"] = kCheckpointFormatVersion + 1;
  CHECK_THROWS_AS(mlp_from_json(j), ValidationError);
  Json bad = mlp_to_json(Mlp({2, 2}));
  bad["layers"][0]["weight"] = Json::array({1.0});
  CHECK_THROWS_AS(mlp_from_json(bad), ValidationError);
  CHECK_THROWS_AS(load_json("/nonexistent/dir/file.json"), ValidationError);
}
