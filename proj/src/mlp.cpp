#include "csac/mlp.hpp"

#include <cmath>
#include <string>

#include "csac/errors.hpp"
#include "csac/kernels.hpp"

namespace csac {

struct TapeAccess {
  static Tape make(const Mlp& net) {
    Tape t;
    t.net_ = &net;
    t.layer_inputs_.reserve(net.num_layers());
    return t;
  }
  static std::vector<Matrix>& inputs(Tape& t) { return t.layer_inputs_; }
  static const Mlp* net(const Tape& t) { return t.net_; }
  static void mark_used(Tape& t) { t.used_ = true; }
};

namespace {

void check_input(const Mlp& net, const Matrix& input) {
  if (net.num_layers() == 0) throw ValidationError("forward: network has no layers");
  if (input.rows() != net.input_size()) {
    throw DimensionError("forward: input has " + std::to_string(input.rows()) +
                         " features, network expects " + std::to_string(net.input_size()));
  }
  for (double v : input.flat()) {
    if (!std::isfinite(v)) throw NumericError("forward: non-finite input");
  }
}

}  // namespace

std::size_t mlp_param_count(std::span<const std::size_t> layer_sizes) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    n += layer_sizes[l + 1] * layer_sizes[l] + layer_sizes[l + 1];
  }
  return n;
}

Mlp::Mlp(std::vector<std::size_t> layer_sizes) : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) throw ValidationError("Mlp: need at least input and output sizes");
  for (std::size_t s : sizes_) {
    if (s == 0) throw ValidationError("Mlp: layer sizes must be positive");
  }
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(offset);
    offset += sizes_[l + 1] * sizes_[l] + sizes_[l + 1];
  }
  params_.assign(offset, 0.0);
}

Mlp Mlp::uniform_init(std::vector<std::size_t> layer_sizes, Rng& rng) {
  Mlp net(std::move(layer_sizes));
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(net.sizes_[l]));
    for (double& w : net.weight(l)) w = rng.uniform(-bound, bound);
  }
  return net;
}

std::span<double> Mlp::weight(std::size_t layer) {
  return {params_.data() + offsets_.at(layer), sizes_[layer + 1] * sizes_[layer]};
}
std::span<const double> Mlp::weight(std::size_t layer) const {
  return {params_.data() + offsets_.at(layer), sizes_[layer + 1] * sizes_[layer]};
}
std::span<double> Mlp::bias(std::size_t layer) {
  return {params_.data() + offsets_.at(layer) + sizes_[layer + 1] * sizes_[layer],
          sizes_[layer + 1]};
}
std::span<const double> Mlp::bias(std::size_t layer) const {
  return {params_.data() + offsets_.at(layer) + sizes_[layer + 1] * sizes_[layer],
          sizes_[layer + 1]};
}

ForwardResult forward(const Mlp& net, const Matrix& input) {
  check_input(net, input);
  ForwardResult result{Matrix(), TapeAccess::make(net)};
  auto& inputs = TapeAccess::inputs(result.tape);
  inputs.push_back(input);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    Matrix z;
    kernels::affine_forward(net.weight(l), net.bias(l), inputs.back(), z);
    if (l + 1 < net.num_layers()) {
      kernels::relu_inplace(z);
      inputs.push_back(std::move(z));
    } else {
      result.output = std::move(z);
    }
  }
  return result;
}

Matrix evaluate(const Mlp& net, const Matrix& input) {
  check_input(net, input);
  Matrix a = input;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    Matrix z;
    kernels::affine_forward(net.weight(l), net.bias(l), a, z);
    if (l + 1 < net.num_layers()) kernels::relu_inplace(z);
    a = std::move(z);
  }
  return a;
}

std::pair<std::vector<double>, Tape> forward(const Mlp& net, std::span<const double> input) {
  auto r = forward(net, Matrix::column_vector(input));
  return {r.output.column(0), std::move(r.tape)};
}

Gradients backward(Tape& tape, const Matrix& output_grad, GradTarget target) {
  const Mlp* net = TapeAccess::net(tape);
  if (net == nullptr) throw ValidationError("backward: empty tape");
  if (tape.used()) throw ValidationError("backward: tape already consumed");
  auto& inputs = TapeAccess::inputs(tape);
  if (output_grad.rows() != net->output_size() || output_grad.cols() != tape.batch()) {
    throw DimensionError("backward: output gradient shape does not match forward output");
  }
  TapeAccess::mark_used(tape);

  Gradients grads;
  if (target == GradTarget::kParamsAndInput) grads.params.assign(net->param_count(), 0.0);
  const double* base = net->params().data();

  Matrix dz = output_grad;
  for (std::size_t l = net->num_layers(); l-- > 0;) {
    if (target == GradTarget::kParamsAndInput) {
      const auto w = net->weight(l);
      const auto b = net->bias(l);
      std::span<double> dw(grads.params.data() + (w.data() - base), w.size());
      std::span<double> db(grads.params.data() + (b.data() - base), b.size());
      kernels::affine_backward_params(dz, inputs[l], dw, db);
    }
    Matrix dx;
    kernels::affine_backward_input(net->weight(l), dz, dx);
    if (l > 0) kernels::relu_backward_inplace(inputs[l], dx);
    dz = std::move(dx);
  }
  grads.input = std::move(dz);
  inputs.clear();
  return grads;
}

Gradients backward(Tape& tape, std::span<const double> output_grad) {
  return backward(tape, Matrix::column_vector(output_grad));
}

void polyak_update(Mlp& target, const Mlp& online, double rho) {
  if (!target.same_architecture(online)) {
    throw DimensionError("polyak_update: architecture mismatch");
  }
  if (!(rho >= 0.0 && rho <= 1.0)) throw ValidationError("polyak_update: rho must be in [0, 1]");
  auto t = target.params();
  const auto o = online.params();
  const double keep = 1.0 - rho;
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = rho * o[k] + keep * t[k];
}

}  // namespace csac
