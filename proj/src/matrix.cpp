#include "csac/matrix.hpp"

#include <algorithm>

#include "csac/errors.hpp"

namespace csac {

Matrix Matrix::stack(const Matrix& top, const Matrix& bottom) {
  if (top.cols() != bottom.cols()) throw DimensionError("Matrix::stack: column counts differ");
  Matrix out(top.rows() + bottom.rows(), top.cols());
  std::copy(top.data_.begin(), top.data_.end(), out.data_.begin());
  std::copy(bottom.data_.begin(), bottom.data_.end(),
            out.data_.begin() + static_cast<std::ptrdiff_t>(top.size()));
  return out;
}

}  // namespace csac
