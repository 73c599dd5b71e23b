#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "sprl/common/errors.h"

namespace sprl {

// Dense row-major matrix. Vectors are 1xN or Nx1; scalars are 1x1.
template <class S>
struct Tensor {
  int rows = 0, cols = 0;
  std::vector<S> data;

  Tensor() = default;
  Tensor(int r, int c, S fill = S(0))
      : rows(r), cols(c), data(size_t(r) * c, fill) {
    if (r < 0 || c < 0) throw DimensionError("tensor: negative dimension");
  }

  int size() const { return rows * cols; }
  S* ptr() { return data.data(); }
  const S* ptr() const { return data.data(); }
  S& at(int i, int j) { return data[size_t(i) * cols + j]; }
  S at(int i, int j) const { return data[size_t(i) * cols + j]; }

  bool same_shape(const Tensor& o) const {
    return rows == o.rows && cols == o.cols;
  }

  bool all_finite() const {
    for (S v : data)
      if (!std::isfinite(double(v))) return false;
    return true;
  }
};

}  // namespace sprl
