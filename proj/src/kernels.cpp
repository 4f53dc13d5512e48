#include "csac/kernels.hpp"

#include <algorithm>
#include <cstring>
#include <string>

#include <omp.h>

#include "csac/errors.hpp"

namespace csac::kernels {

namespace {

thread_local Backend tl_backend = Backend::kOmp;
thread_local int tl_threads = 1;

inline double combine_lanes(const double* acc) {
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}
static_assert(kLanes == 8, "combine_lanes assumes eight lanes");

struct AffineShape {
  std::size_t out;
  std::size_t in;
  std::size_t batch;
};

AffineShape check_forward(std::span<const double> weight, std::span<const double> bias,
                          const Matrix& input) {
  const std::size_t out = bias.size();
  const std::size_t in = input.rows();
  if (weight.size() != out * in) {
    throw DimensionError("affine_forward: weight has " + std::to_string(weight.size()) +
                         " entries, expected " + std::to_string(out) + "x" + std::to_string(in));
  }
  return {out, in, input.cols()};
}

AffineShape check_backward_input(std::span<const double> weight, const Matrix& grad_output) {
  const std::size_t out = grad_output.rows();
  if (out == 0 || weight.size() % out != 0) {
    throw DimensionError("affine_backward_input: weight size not divisible by output rows");
  }
  return {out, weight.size() / out, grad_output.cols()};
}

void check_backward_params(const Matrix& grad_output, const Matrix& input,
                           std::span<double> grad_weight, std::span<double> grad_bias) {
  if (grad_output.cols() != input.cols()) {
    throw DimensionError("affine_backward_params: batch sizes differ");
  }
  if (grad_bias.size() != grad_output.rows() ||
      grad_weight.size() != grad_output.rows() * input.rows()) {
    throw DimensionError("affine_backward_params: gradient buffers have wrong size");
  }
}

void ensure_shape(Matrix& m, std::size_t rows, std::size_t cols) {
  if (m.rows() != rows || m.cols() != cols) m = Matrix(rows, cols);
}

}  // namespace

void set_backend(Backend backend) { tl_backend = backend; }
Backend backend() { return tl_backend; }
void set_num_threads(int threads) { tl_threads = std::max(1, threads); }
int num_threads() { return tl_threads; }

double lane_sum(std::span<const double> values) {
  double acc[kLanes] = {};
  for (std::size_t b = 0; b < values.size(); ++b) acc[b % kLanes] += values[b];
  return combine_lanes(acc);
}

double lane_dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("lane_dot: length mismatch");
  double acc[kLanes] = {};
  for (std::size_t k = 0; k < a.size(); ++k) acc[k % kLanes] += a[k] * b[k];
  return combine_lanes(acc);
}

// ---------------------------------------------------------------------------
// Serial reference
// ---------------------------------------------------------------------------

namespace serial {

void affine_forward(std::span<const double> weight, std::span<const double> bias,
                    const Matrix& input, Matrix& output) {
  const auto [out, in, batch] = check_forward(weight, bias, input);
  ensure_shape(output, out, batch);
  for (std::size_t o = 0; o < out; ++o) {
    auto z = output.row(o);
    std::fill(z.begin(), z.end(), bias[o]);
    for (std::size_t i = 0; i < in; ++i) {
      const double w = weight[o * in + i];
      const auto x = input.row(i);
      for (std::size_t b = 0; b < batch; ++b) z[b] += w * x[b];
    }
  }
}

void affine_backward_input(std::span<const double> weight, const Matrix& grad_output,
                           Matrix& grad_input) {
  const auto [out, in, batch] = check_backward_input(weight, grad_output);
  ensure_shape(grad_input, in, batch);
  for (std::size_t i = 0; i < in; ++i) {
    auto dx = grad_input.row(i);
    std::fill(dx.begin(), dx.end(), 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      const double w = weight[o * in + i];
      const auto dz = grad_output.row(o);
      for (std::size_t b = 0; b < batch; ++b) dx[b] += w * dz[b];
    }
  }
}

void affine_backward_params(const Matrix& grad_output, const Matrix& input,
                            std::span<double> grad_weight, std::span<double> grad_bias) {
  check_backward_params(grad_output, input, grad_weight, grad_bias);
  const std::size_t out = grad_output.rows();
  const std::size_t in = input.rows();
  for (std::size_t o = 0; o < out; ++o) {
    for (std::size_t i = 0; i < in; ++i) {
      grad_weight[o * in + i] = lane_dot(grad_output.row(o), input.row(i));
    }
    grad_bias[o] = lane_sum(grad_output.row(o));
  }
}

void relu_inplace(Matrix& values) {
  for (double& v : values.flat()) v = v > 0.0 ? v : 0.0;
}

void relu_backward_inplace(const Matrix& activated, Matrix& grad) {
  if (activated.size() != grad.size()) throw DimensionError("relu_backward: size mismatch");
  const auto a = activated.flat();
  auto g = grad.flat();
  for (std::size_t k = 0; k < g.size(); ++k) g[k] = a[k] > 0.0 ? g[k] : 0.0;
}

}  // namespace serial

// ---------------------------------------------------------------------------
// Blocked OpenMP kernels
// ---------------------------------------------------------------------------

namespace omp {

namespace {

constexpr std::size_t kRowBlock = 4;
constexpr std::size_t kColBlock = 16;

// Eight doubles; lowered to whatever the target supports.
typedef double Vec8 __attribute__((vector_size(8 * sizeof(double))));

inline Vec8 load8(const double* p) {
  Vec8 v;
  std::memcpy(&v, p, sizeof v);
  return v;
}
inline void store8(double* p, Vec8 v) { std::memcpy(p, &v, sizeof v); }

// z[o0+r][col..col+16) for R output rows; per element: bias, then + w*x over i.
template <std::size_t R>
inline void forward_tile(const double* w_rows, std::size_t in, const double* bias,
                         const double* x, std::size_t batch, std::size_t col, double* z) {
  Vec8 lo[R], hi[R];
  for (std::size_t r = 0; r < R; ++r) lo[r] = hi[r] = Vec8{} + bias[r];
  for (std::size_t i = 0; i < in; ++i) {
    const Vec8 x0 = load8(x + i * batch + col);
    const Vec8 x1 = load8(x + i * batch + col + 8);
    for (std::size_t r = 0; r < R; ++r) {
      const double w = w_rows[r * in + i];
      lo[r] += w * x0;
      hi[r] += w * x1;
    }
  }
  for (std::size_t r = 0; r < R; ++r) {
    store8(z + r * batch + col, lo[r]);
    store8(z + r * batch + col + 8, hi[r]);
  }
}

template <std::size_t R>
inline void forward_rows(const double* w_rows, std::size_t in, const double* bias,
                         const double* x, double* z, std::size_t batch) {
  std::size_t c = 0;
  for (; c + kColBlock <= batch; c += kColBlock) forward_tile<R>(w_rows, in, bias, x, batch, c, z);
  for (; c < batch; ++c) {
    for (std::size_t r = 0; r < R; ++r) {
      double acc = bias[r];
      for (std::size_t i = 0; i < in; ++i) acc += w_rows[r * in + i] * x[i * batch + c];
      z[r * batch + c] = acc;
    }
  }
}

// dx[i0+r][col..col+16) for R input rows; per element: 0, then + w*dz over o.
template <std::size_t R>
inline void backward_input_tile(const double* weight, std::size_t out, std::size_t in,
                                std::size_t i0, const double* dz, std::size_t batch,
                                std::size_t col, double* dx) {
  Vec8 lo[R], hi[R];
  for (std::size_t r = 0; r < R; ++r) lo[r] = hi[r] = Vec8{};
  for (std::size_t o = 0; o < out; ++o) {
    const Vec8 d0 = load8(dz + o * batch + col);
    const Vec8 d1 = load8(dz + o * batch + col + 8);
    for (std::size_t r = 0; r < R; ++r) {
      const double w = weight[o * in + i0 + r];
      lo[r] += w * d0;
      hi[r] += w * d1;
    }
  }
  for (std::size_t r = 0; r < R; ++r) {
    store8(dx + (i0 + r) * batch + col, lo[r]);
    store8(dx + (i0 + r) * batch + col + 8, hi[r]);
  }
}

template <std::size_t R>
inline void backward_input_rows(const double* weight, std::size_t out, std::size_t in,
                                std::size_t i0, const double* dz, double* dx, std::size_t batch) {
  std::size_t c = 0;
  for (; c + kColBlock <= batch; c += kColBlock) {
    backward_input_tile<R>(weight, out, in, i0, dz, batch, c, dx);
  }
  for (; c < batch; ++c) {
    for (std::size_t r = 0; r < R; ++r) {
      double acc = 0.0;
      for (std::size_t o = 0; o < out; ++o) acc += weight[o * in + i0 + r] * dz[o * batch + c];
      dx[(i0 + r) * batch + c] = acc;
    }
  }
}

// dW[o0..o0+R)[i0..i0+C) via lane-interleaved dot products; vector lane k
// holds the partial sum of batch elements b with b % 8 == k.
template <std::size_t R, std::size_t C>
inline void backward_params_tile(const Matrix& grad_output, const Matrix& input, std::size_t o0,
                                 std::size_t i0, double* grad_weight, std::size_t in) {
  const std::size_t batch = input.cols();
  Vec8 acc[R][C];
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c) acc[r][c] = Vec8{};
  const double* dz[R];
  const double* x[C];
  for (std::size_t r = 0; r < R; ++r) dz[r] = grad_output.row(o0 + r).data();
  for (std::size_t c = 0; c < C; ++c) x[c] = input.row(i0 + c).data();
  std::size_t b = 0;
  for (; b + kLanes <= batch; b += kLanes) {
    Vec8 xv[C];
    for (std::size_t c = 0; c < C; ++c) xv[c] = load8(x[c] + b);
    for (std::size_t r = 0; r < R; ++r) {
      const Vec8 d = load8(dz[r] + b);
      for (std::size_t c = 0; c < C; ++c) acc[r][c] += d * xv[c];
    }
  }
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t c = 0; c < C; ++c) {
      double lanes[kLanes];
      store8(lanes, acc[r][c]);
      for (std::size_t k = 0; b + k < batch; ++k) lanes[k] += dz[r][b + k] * x[c][b + k];
      grad_weight[(o0 + r) * in + i0 + c] = combine_lanes(lanes);
    }
  }
}

template <std::size_t R>
inline void backward_params_rows(const Matrix& grad_output, const Matrix& input, std::size_t o0,
                                 double* grad_weight) {
  const std::size_t in = input.rows();
  std::size_t i = 0;
  for (; i + kRowBlock <= in; i += kRowBlock) {
    backward_params_tile<R, kRowBlock>(grad_output, input, o0, i, grad_weight, in);
  }
  for (; i < in; ++i) backward_params_tile<R, 1>(grad_output, input, o0, i, grad_weight, in);
}

}  // namespace

void affine_forward(std::span<const double> weight, std::span<const double> bias,
                    const Matrix& input, Matrix& output) {
  const auto [out, in, batch] = check_forward(weight, bias, input);
  ensure_shape(output, out, batch);
  const std::ptrdiff_t blocks = static_cast<std::ptrdiff_t>(out / kRowBlock);
  const int threads = tl_threads;
  const double* x = input.data();
  double* z = output.data();
#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1)
  for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
    const std::size_t o = static_cast<std::size_t>(blk) * kRowBlock;
    forward_rows<kRowBlock>(weight.data() + o * in, in, bias.data() + o, x, z + o * batch, batch);
  }
  for (std::size_t o = out / kRowBlock * kRowBlock; o < out; ++o) {
    forward_rows<1>(weight.data() + o * in, in, bias.data() + o, x, z + o * batch, batch);
  }
}

void affine_backward_input(std::span<const double> weight, const Matrix& grad_output,
                           Matrix& grad_input) {
  const auto [out, in, batch] = check_backward_input(weight, grad_output);
  ensure_shape(grad_input, in, batch);
  const std::ptrdiff_t blocks = static_cast<std::ptrdiff_t>(in / kRowBlock);
  const int threads = tl_threads;
  const double* dz = grad_output.data();
  double* dx = grad_input.data();
#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1)
  for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
    backward_input_rows<kRowBlock>(weight.data(), out, in, static_cast<std::size_t>(blk) * kRowBlock,
                                   dz, dx, batch);
  }
  for (std::size_t i = in / kRowBlock * kRowBlock; i < in; ++i) {
    backward_input_rows<1>(weight.data(), out, in, i, dz, dx, batch);
  }
}

void affine_backward_params(const Matrix& grad_output, const Matrix& input,
                            std::span<double> grad_weight, std::span<double> grad_bias) {
  check_backward_params(grad_output, input, grad_weight, grad_bias);
  const std::size_t out = grad_output.rows();
  const std::ptrdiff_t blocks = static_cast<std::ptrdiff_t>(out / kRowBlock);
  const int threads = tl_threads;
#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1)
  for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
    const std::size_t o = static_cast<std::size_t>(blk) * kRowBlock;
    backward_params_rows<kRowBlock>(grad_output, input, o, grad_weight.data());
    for (std::size_t r = 0; r < kRowBlock; ++r) grad_bias[o + r] = lane_sum(grad_output.row(o + r));
  }
  for (std::size_t o = out / kRowBlock * kRowBlock; o < out; ++o) {
    backward_params_rows<1>(grad_output, input, o, grad_weight.data());
    grad_bias[o] = lane_sum(grad_output.row(o));
  }
}

void relu_inplace(Matrix& values) {
  auto v = values.flat();
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(v.size());
  const int threads = tl_threads;
#pragma omp parallel for simd schedule(static) num_threads(threads) if (threads > 1)
  for (std::ptrdiff_t k = 0; k < n; ++k) v[k] = v[k] > 0.0 ? v[k] : 0.0;
}

void relu_backward_inplace(const Matrix& activated, Matrix& grad) {
  if (activated.size() != grad.size()) throw DimensionError("relu_backward: size mismatch");
  const auto a = activated.flat();
  auto g = grad.flat();
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(g.size());
  const int threads = tl_threads;
#pragma omp parallel for simd schedule(static) num_threads(threads) if (threads > 1)
  for (std::ptrdiff_t k = 0; k < n; ++k) g[k] = a[k] > 0.0 ? g[k] : 0.0;
}

}  // namespace omp

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

void affine_forward(std::span<const double> weight, std::span<const double> bias,
                    const Matrix& input, Matrix& output) {
  if (tl_backend == Backend::kSerial) return serial::affine_forward(weight, bias, input, output);
  omp::affine_forward(weight, bias, input, output);
}

void affine_backward_input(std::span<const double> weight, const Matrix& grad_output,
                           Matrix& grad_input) {
  if (tl_backend == Backend::kSerial) {
    return serial::affine_backward_input(weight, grad_output, grad_input);
  }
  omp::affine_backward_input(weight, grad_output, grad_input);
}

void affine_backward_params(const Matrix& grad_output, const Matrix& input,
                            std::span<double> grad_weight, std::span<double> grad_bias) {
  if (tl_backend == Backend::kSerial) {
    return serial::affine_backward_params(grad_output, input, grad_weight, grad_bias);
  }
  omp::affine_backward_params(grad_output, input, grad_weight, grad_bias);
}

void relu_inplace(Matrix& values) {
  if (tl_backend == Backend::kSerial) return serial::relu_inplace(values);
  omp::relu_inplace(values);
}

void relu_backward_inplace(const Matrix& activated, Matrix& grad) {
  if (tl_backend == Backend::kSerial) return serial::relu_backward_inplace(activated, grad);
  omp::relu_backward_inplace(activated, grad);
}

}  // namespace csac::kernels
