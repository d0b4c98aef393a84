#include "ccd/tensorcore/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "ccd/common/error.hpp"

namespace ccd::tc {

namespace {

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

Shape::Shape(const std::size_t* dims, std::size_t rank) : rank_(rank) {
  if (rank > kMaxRank) throw ShapeError("tensor rank " + std::to_string(rank) + " exceeds " + std::to_string(kMaxRank));
  std::copy(dims, dims + rank, dims_.begin());
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(shape), values_(element_count(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(shape), values_(std::move(values)) {
  if (values_.size() != element_count(shape_)) {
    throw ShapeError("tensor of shape " + shape_string(shape_) + " given " +
                     std::to_string(values_.size()) + " values");
  }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t n_rows = rows.size();
  const std::size_t n_cols = n_rows == 0 ? 0 : rows.begin()->size();
  std::vector<double> values;
  values.reserve(n_rows * n_cols);
  for (const auto& r : rows) {
    if (r.size() != n_cols) throw ShapeError("ragged rows in Tensor::from_rows");
    values.insert(values.end(), r.begin(), r.end());
  }
  return Tensor({n_rows, n_cols}, std::move(values));
}

Tensor Tensor::row_vector(std::span<const double> values) {
  return Tensor({1, values.size()}, std::vector<double>(values.begin(), values.end()));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

void expect_shape(const Tensor& t, std::size_t rows, std::size_t cols, const char* what) {
  if (t.rank() > 2 || t.rows() != rows || t.cols() != cols) {
    throw ShapeError(std::string(what) + ": expected [" + std::to_string(rows) + "x" +
                     std::to_string(cols) + "], got " + shape_string(t.shape()));
  }
}

}  // namespace ccd::tc
