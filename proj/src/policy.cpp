#include "csac/policy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>

#include "csac/errors.hpp"

namespace csac {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2 pi)

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

void require_finite(const Matrix& m, const char* what) {
  for (double v : m.flat()) {
    if (!std::isfinite(v)) throw NumericError(std::string("policy: non-finite ") + what);
  }
}

}  // namespace

ActionBounds ActionBounds::symmetric(std::size_t dim, double limit) {
  return {std::vector<double>(dim, -limit), std::vector<double>(dim, limit)};
}

void ActionBounds::validate() const {
  if (low.empty() || low.size() != high.size()) {
    throw ValidationError("ActionBounds: low/high must be non-empty and of equal length");
  }
  for (std::size_t j = 0; j < low.size(); ++j) {
    if (!std::isfinite(low[j]) || !std::isfinite(high[j]) || !(low[j] < high[j])) {
      throw ValidationError("ActionBounds: need finite low < high in every dimension");
    }
  }
}

double tanh_log_jacobian(double u) {
  return 2.0 * (std::numbers::ln2 - u - softplus(-2.0 * u));
}

SquashedGaussianPolicy::SquashedGaussianPolicy(std::size_t obs_dim, ActionBounds bounds,
                                               const std::vector<std::size_t>& hidden, Rng& rng,
                                               double log_std_min, double log_std_max)
    : bounds_(std::move(bounds)), log_std_min_(log_std_min), log_std_max_(log_std_max) {
  bounds_.validate();
  if (!(log_std_min < log_std_max)) throw ValidationError("policy: log_std_min must be < log_std_max");
  std::vector<std::size_t> sizes{obs_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(2 * bounds_.dim());
  net_ = Mlp::uniform_init(std::move(sizes), rng);
}

SquashedGaussianPolicy::SquashedGaussianPolicy(Mlp net, ActionBounds bounds, double log_std_min,
                                               double log_std_max)
    : net_(std::move(net)), bounds_(std::move(bounds)), log_std_min_(log_std_min),
      log_std_max_(log_std_max) {
  bounds_.validate();
  if (net_.output_size() != 2 * bounds_.dim()) {
    throw DimensionError("policy: network output must be twice the action dimension");
  }
  if (!(log_std_min < log_std_max)) throw ValidationError("policy: log_std_min must be < log_std_max");
}

GaussianHeads SquashedGaussianPolicy::heads(const Matrix& obs, bool record_tape) const {
  Matrix out;
  GaussianHeads h;
  if (record_tape) {
    auto r = forward(net_, obs);
    out = std::move(r.output);
    h.tape = std::move(r.tape);
  } else {
    out = evaluate(net_, obs);
  }
  require_finite(out, "network output");
  const std::size_t d = act_dim();
  const std::size_t n = obs.cols();
  h.mean = Matrix(d, n);
  h.log_std = Matrix(d, n);
  h.std = Matrix(d, n);
  h.clamped.assign(d * n, 0);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t b = 0; b < n; ++b) {
      h.mean(j, b) = out(j, b);
      const double raw = out(d + j, b);
      double ls = raw;
      if (raw < log_std_min_) {
        ls = log_std_min_;
        h.clamped[j * n + b] = 1;
      } else if (raw > log_std_max_) {
        ls = log_std_max_;
        h.clamped[j * n + b] = 1;
      }
      h.log_std(j, b) = ls;
      h.std(j, b) = std::exp(ls);
    }
  }
  return h;
}

std::vector<double> SquashedGaussianPolicy::deterministic_action(std::span<const double> obs) const {
  const auto h = heads(Matrix::column_vector(obs));
  return squash(bounds_, h.mean).column(0);
}

Matrix squash(const ActionBounds& bounds, const Matrix& pre_squash) {
  if (pre_squash.rows() != bounds.dim()) throw DimensionError("squash: dimension mismatch");
  Matrix a(pre_squash.rows(), pre_squash.cols());
  for (std::size_t j = 0; j < a.rows(); ++j) {
    const double c = bounds.center(j);
    const double h = bounds.half_range(j);
    const double lo = std::nextafter(bounds.low[j], bounds.high[j]);
    const double hi = std::nextafter(bounds.high[j], bounds.low[j]);
    for (std::size_t b = 0; b < a.cols(); ++b) {
      a(j, b) = std::clamp(c + h * std::tanh(pre_squash(j, b)), lo, hi);
    }
  }
  return a;
}

Matrix unsquash(const ActionBounds& bounds, const Matrix& action) {
  if (action.rows() != bounds.dim()) throw DimensionError("unsquash: dimension mismatch");
  Matrix u(action.rows(), action.cols());
  for (std::size_t j = 0; j < u.rows(); ++j) {
    const double c = bounds.center(j);
    const double h = bounds.half_range(j);
    for (std::size_t b = 0; b < u.cols(); ++b) {
      const double t = std::clamp((action(j, b) - c) / h, -1.0, 1.0);
      u(j, b) = std::atanh(t);
    }
  }
  return u;
}

Matrix squash_backward(const ActionBounds& bounds, const Matrix& pre_squash,
                       const Matrix& grad_action) {
  Matrix g(pre_squash.rows(), pre_squash.cols());
  for (std::size_t j = 0; j < g.rows(); ++j) {
    const double h = bounds.half_range(j);
    for (std::size_t b = 0; b < g.cols(); ++b) {
      const double t = std::tanh(pre_squash(j, b));
      g(j, b) = grad_action(j, b) * (h * (1.0 - t * t));
    }
  }
  return g;
}

std::vector<double> log_prob(const SquashedGaussianPolicy& policy, const GaussianHeads& heads,
                             const Matrix& pre_squash) {
  const std::size_t d = policy.act_dim();
  if (pre_squash.rows() != d || pre_squash.cols() != heads.mean.cols()) {
    throw DimensionError("log_prob: pre_squash shape mismatch");
  }
  require_finite(pre_squash, "pre_squash");
  const auto& bounds = policy.bounds();
  double rescale = 0.0;
  for (std::size_t j = 0; j < d; ++j) rescale += std::log(bounds.half_range(j));

  std::vector<double> out(pre_squash.cols());
  for (std::size_t b = 0; b < out.size(); ++b) {
    double gauss = 0.0;
    double jac = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double u = pre_squash(j, b);
      const double z = (u - heads.mean(j, b)) / heads.std(j, b);
      gauss += -0.5 * (z * z) - heads.log_std(j, b) - kHalfLog2Pi;
      jac += tanh_log_jacobian(u);
    }
    out[b] = gauss - jac - rescale;
  }
  return out;
}

double log_prob(const SquashedGaussianPolicy& policy, std::span<const double> obs,
                std::span<const double> pre_squash) {
  const auto h = policy.heads(Matrix::column_vector(obs));
  return log_prob(policy, h, Matrix::column_vector(pre_squash))[0];
}

PolicySample sample(const SquashedGaussianPolicy& policy, const GaussianHeads& heads,
                    const Matrix& noise) {
  if (noise.rows() != policy.act_dim() || noise.cols() != heads.mean.cols()) {
    throw DimensionError("sample: noise shape must be act_dim x batch");
  }
  PolicySample s;
  s.noise = noise;
  s.pre_squash = Matrix(noise.rows(), noise.cols());
  for (std::size_t j = 0; j < noise.rows(); ++j) {
    for (std::size_t b = 0; b < noise.cols(); ++b) {
      s.pre_squash(j, b) = heads.mean(j, b) + heads.std(j, b) * noise(j, b);
    }
  }
  s.action = squash(policy.bounds(), s.pre_squash);
  s.log_prob = log_prob(policy, heads, s.pre_squash);
  return s;
}

SingleSample sample(const SquashedGaussianPolicy& policy, std::span<const double> obs,
                    std::span<const double> noise) {
  const auto h = policy.heads(Matrix::column_vector(obs));
  auto s = sample(policy, h, Matrix::column_vector(noise));
  return {s.action.column(0), s.pre_squash.column(0), s.log_prob[0]};
}

Matrix log_prob_grad_pre_squash(const GaussianHeads& heads, const Matrix& pre_squash,
                                std::span<const double> weight) {
  Matrix g(pre_squash.rows(), pre_squash.cols());
  for (std::size_t j = 0; j < g.rows(); ++j) {
    for (std::size_t b = 0; b < g.cols(); ++b) {
      const double u = pre_squash(j, b);
      const double s = heads.std(j, b);
      const double z = (u - heads.mean(j, b)) / s;
      g(j, b) = weight[b] * (-z / s + 2.0 * std::tanh(u));
    }
  }
  return g;
}

std::vector<double> backward_sample(const SquashedGaussianPolicy& policy, GaussianHeads& heads,
                                    const PolicySample& s, const Matrix& grad_pre_squash,
                                    std::span<const double> grad_log_prob) {
  const std::size_t d = policy.act_dim();
  const std::size_t n = s.pre_squash.cols();
  if (grad_pre_squash.rows() != d || grad_pre_squash.cols() != n || grad_log_prob.size() != n) {
    throw DimensionError("backward_sample: gradient shape mismatch");
  }
  // Partials of log_prob(mean, log_std, u) hold the other two fixed; the
  // total derivative adds the path through u = mean + std * noise.
  Matrix out_grad(2 * d, n);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t b = 0; b < n; ++b) {
      const double u = s.pre_squash(j, b);
      const double sd = heads.std(j, b);
      const double z = (u - heads.mean(j, b)) / sd;
      const double gl = grad_log_prob[b];
      const double du = grad_pre_squash(j, b) + gl * (-z / sd + 2.0 * std::tanh(u));
      out_grad(j, b) = du + gl * (z / sd);
      const double dlog_std = du * (sd * s.noise(j, b)) + gl * (z * z - 1.0);
      out_grad(d + j, b) = heads.clamped[j * n + b] ? 0.0 : dlog_std;
    }
  }
  return backward(heads.tape, out_grad).params;
}

PolicySnapshot::PolicySnapshot(const SquashedGaussianPolicy& live, std::uint64_t version)
    : frozen_(std::make_shared<const SquashedGaussianPolicy>(live)), version_(version) {}

bool PolicySnapshot::matches(const SquashedGaussianPolicy& live) const {
  if (!frozen_ || !frozen_->net().same_architecture(live.net())) return false;
  const auto a = frozen_->net().params();
  const auto b = live.net().params();
  return std::equal(a.begin(), a.end(), b.begin(), [](double x, double y) {
    return std::bit_cast<std::uint64_t>(x) == std::bit_cast<std::uint64_t>(y);
  });
}

std::vector<double> PolicySnapshot::log_prob(const Matrix& obs, const Matrix& pre_squash) const {
  return csac::log_prob(*frozen_, heads(obs), pre_squash);
}

PolicySnapshot snapshot(const SquashedGaussianPolicy& policy, std::uint64_t version) {
  return PolicySnapshot(policy, version);
}

}  // namespace csac
