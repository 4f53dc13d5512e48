#pragma once

#include <cstddef>
#include <span>

#include "csac/matrix.hpp"

// Dense kernels behind the MLP engine.
//
// Every kernel exists twice: `serial` is the plain-loop reference, `omp` is
// register-blocked and parallelized across output rows with OpenMP. Both
// follow the same per-element summation order, so their results are equal
// bit for bit for any thread count. The canonical orders are:
//
//   affine_forward          z[o][b]  = b[o] + sum_{i ascending} W[o][i] * x[i][b]
//   affine_backward_input   dx[i][b] = 0 + sum_{o ascending} W[o][i] * dz[o][b]
//   affine_backward_params  dW[o][i] = lane_sum(dz[o][:] * x[i][:]),  db[o] = lane_sum(dz[o][:])
//
// lane_sum splits the batch into kLanes interleaved partial sums (element b
// goes to lane b % kLanes, ascending) and combines them pairwise.
//
// Weights are row-major (out x in); activations are feature-major
// (features x batch).

namespace csac::kernels {

inline constexpr std::size_t kLanes = 8;

enum class Backend { kSerial, kOmp };

/// Backend used by the dispatching overloads below, per calling thread.
/// Defaults to kOmp.
void set_backend(Backend backend);
Backend backend();

/// OpenMP team size for the kOmp backend on the calling thread (>= 1).
void set_num_threads(int threads);
int num_threads();

double lane_sum(std::span<const double> values);
double lane_dot(std::span<const double> a, std::span<const double> b);

namespace serial {
void affine_forward(std::span<const double> weight, std::span<const double> bias,
                    const Matrix& input, Matrix& output);
void affine_backward_input(std::span<const double> weight, const Matrix& grad_output,
                           Matrix& grad_input);
void affine_backward_params(const Matrix& grad_output, const Matrix& input,
                            std::span<double> grad_weight, std::span<double> grad_bias);
void relu_inplace(Matrix& values);
void relu_backward_inplace(const Matrix& activated, Matrix& grad);
}  // namespace serial

namespace omp {
void affine_forward(std::span<const double> weight, std::span<const double> bias,
                    const Matrix& input, Matrix& output);
void affine_backward_input(std::span<const double> weight, const Matrix& grad_output,
                           Matrix& grad_input);
void affine_backward_params(const Matrix& grad_output, const Matrix& input,
                            std::span<double> grad_weight, std::span<double> grad_bias);
void relu_inplace(Matrix& values);
void relu_backward_inplace(const Matrix& activated, Matrix& grad);
}  // namespace omp

// Dispatch on backend(). `output`/`grad_input` are resized as needed;
// `grad_weight`/`grad_bias` are overwritten (not accumulated).
void affine_forward(std::span<const double> weight, std::span<const double> bias,
                    const Matrix& input, Matrix& output);
void affine_backward_input(std::span<const double> weight, const Matrix& grad_output,
                           Matrix& grad_input);
void affine_backward_params(const Matrix& grad_output, const Matrix& input,
                            std::span<double> grad_weight, std::span<double> grad_bias);
void relu_inplace(Matrix& values);
void relu_backward_inplace(const Matrix& activated, Matrix& grad);

/// RAII override of the calling thread's backend.
class ScopedBackend {
 public:
  explicit ScopedBackend(Backend b) : previous_(backend()) { set_backend(b); }
  ~ScopedBackend() { set_backend(previous_); }
  ScopedBackend(const ScopedBackend&) = delete;
  ScopedBackend& operator=(const ScopedBackend&) = delete;

 private:
  Backend previous_;
};

}  // namespace csac::kernels
