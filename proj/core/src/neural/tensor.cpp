#include "groundlab/neural/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "groundlab/error.hpp"

namespace groundlab::nn {

Tensor::Tensor(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)) {
  for (auto d : shape_)
    if (d == 0) throw ShapeError("tensor dimensions must be positive");
  const auto n = std::accumulate(shape_.begin(), shape_.end(), std::size_t{1}, std::multiplies<>());
  data_.assign(n, fill);
}

Tensor Tensor::from(std::vector<double> values) {
  if (values.empty()) throw ShapeError("tensor dimensions must be positive");
  Tensor t;
  t.shape_ = {values.size()};
  t.data_ = std::move(values);
  return t;
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  if (values.size() != rows * cols) throw ShapeError("matrix data does not match its shape");
  Tensor t({rows, cols});
  t.data_ = std::move(values);
  return t;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

}  // namespace groundlab::nn
