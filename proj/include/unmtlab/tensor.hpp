#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace unmtlab {

// Row-major 2D tensor. Plain value type; all model math lives in kernels.hpp
// and graph.hpp.
template <typename T>
struct Tensor {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(size_t r, size_t c, T fill = T{}) : rows(r), cols(c), data(r * c, fill) {}

  void resize(size_t r, size_t c, T fill = T{}) {
    rows = r;
    cols = c;
    data.assign(r * c, fill);
  }

  T* row(size_t i) { return data.data() + i * cols; }
  const T* row(size_t i) const { return data.data() + i * cols; }

  T& at(size_t i, size_t j) { return data[i * cols + j]; }
  const T& at(size_t i, size_t j) const { return data[i * cols + j]; }

  size_t size() const { return data.size(); }
  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  void zero() { std::fill(data.begin(), data.end(), T{}); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(rows, cols);
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace unmtlab
