#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "csac/matrix.hpp"
#include "csac/rng.hpp"

namespace csac {

enum class Activation { kRelu, kIdentity };

/// Fully connected network: rectifier between layers, identity output.
///
/// All parameters live in one flat buffer, layer by layer, each layer's
/// weight matrix (out x in, row-major) followed by its bias vector. The
/// optimizer, Polyak averaging, gradient checks and checkpoints all work on
/// that flat view.
class Mlp {
 public:
  Mlp() = default;
  /// All-zero parameters. Throws ValidationError on fewer than two sizes or a
  /// zero width.
  explicit Mlp(std::vector<std::size_t> layer_sizes);

  /// Weights uniform in +-1/sqrt(fan_in), biases zero.
  static Mlp uniform_init(std::vector<std::size_t> layer_sizes, Rng& rng);

  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  std::size_t num_layers() const { return sizes_.size() - 1; }
  std::size_t input_size() const { return sizes_.front(); }
  std::size_t output_size() const { return sizes_.back(); }
  Activation hidden_activation() const { return Activation::kRelu; }
  Activation output_activation() const { return Activation::kIdentity; }

  std::span<double> weight(std::size_t layer);
  std::span<const double> weight(std::size_t layer) const;
  std::span<double> bias(std::size_t layer);
  std::span<const double> bias(std::size_t layer) const;

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::size_t param_count() const { return params_.size(); }

  bool same_architecture(const Mlp& other) const { return sizes_ == other.sizes_; }

  friend bool operator==(const Mlp&, const Mlp&) = default;

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;  // start of each layer's weight block
  std::vector<double> params_;
};

/// Parameter count of an MLP with the given layer sizes.
std::size_t mlp_param_count(std::span<const std::size_t> layer_sizes);

/// Activations recorded by one forward pass; consumed by exactly one backward.
///
/// The tape refers to the network it was recorded on. That network must
/// outlive the tape and stay unmodified until backward() has run.
class Tape {
 public:
  Tape() = default;
  bool used() const { return used_; }
  std::size_t batch() const { return layer_inputs_.empty() ? 0 : layer_inputs_.front().cols(); }

 private:
  friend struct TapeAccess;
  const Mlp* net_ = nullptr;
  std::vector<Matrix> layer_inputs_;  // [l] = input to affine layer l
  bool used_ = false;
};

struct ForwardResult {
  Matrix output;
  Tape tape;
};

/// Batched forward pass. `input` is (input_size x batch).
/// Throws DimensionError on a size mismatch, NumericError on non-finite input.
ForwardResult forward(const Mlp& net, const Matrix& input);

/// Forward pass without recording a tape.
Matrix evaluate(const Mlp& net, const Matrix& input);

/// Single-sample convenience overload.
std::pair<std::vector<double>, Tape> forward(const Mlp& net, std::span<const double> input);

enum class GradTarget { kParamsAndInput, kInputOnly };

/// Gradients of sum_b output_grad[:, b] . output[:, b].
struct Gradients {
  std::vector<double> params;  // flat, same layout as Mlp::params(); empty for kInputOnly
  Matrix input;                // (input_size x batch)
};

/// Reverse pass over a recorded tape. Throws ValidationError when the tape was
/// already consumed, DimensionError on a shape mismatch.
Gradients backward(Tape& tape, const Matrix& output_grad,
                   GradTarget target = GradTarget::kParamsAndInput);
Gradients backward(Tape& tape, std::span<const double> output_grad);

/// target <- rho * online + (1 - rho) * target, parameter by parameter.
void polyak_update(Mlp& target, const Mlp& online, double rho);

}  // namespace csac
