#pragma once

#include <array>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace ccd::tc {

/// Tensor extents stored inline; tensors are created on every autodiff op,
/// so the shape must not cost an allocation. Rank is at most kMaxRank.
class Shape {
 public:
  static constexpr std::size_t kMaxRank = 4;

  Shape() = default;
  /// Throws ShapeError above kMaxRank.
  Shape(std::initializer_list<std::size_t> dims) : Shape(dims.begin(), dims.size()) {}
  Shape(const std::vector<std::size_t>& dims) : Shape(dims.data(), dims.size()) {}  // NOLINT: implicit

  std::size_t size() const noexcept { return rank_; }
  bool empty() const noexcept { return rank_ == 0; }
  std::size_t operator[](std::size_t i) const noexcept { return dims_[i]; }
  std::size_t back() const noexcept { return dims_[rank_ - 1]; }
  const std::size_t* begin() const noexcept { return dims_.data(); }
  const std::size_t* end() const noexcept { return dims_.data() + rank_; }

  bool operator==(const Shape&) const = default;

 private:
  Shape(const std::size_t* dims, std::size_t rank);

  std::array<std::size_t, kMaxRank> dims_{};
  std::size_t rank_ = 0;
};

/// Dense row-major tensor of doubles.
///
/// Most of the engine works on rank-2 tensors; a rank-1 tensor of length n
/// is treated as a 1 x n row wherever a matrix is expected.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(std::size_t rows, std::size_t cols) { return Tensor({rows, cols}); }
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    return Tensor({rows, cols}, std::move(values));
  }
  /// Builds a matrix from nested initializer lists; all rows must be equally long.
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor row_vector(std::span<const double> values);
  static Tensor identity(std::size_t n);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  std::size_t rows() const noexcept {
    if (shape_.empty()) return values_.empty() ? 0 : 1;
    return shape_.size() == 1 ? 1 : shape_[0];
  }
  std::size_t cols() const noexcept {
    if (shape_.empty()) return values_.empty() ? 0 : 1;
    return shape_.back();
  }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> row(std::size_t r) { return {values_.data() + r * cols(), cols()}; }
  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols(), cols()}; }

  void fill(double v);
  bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<double> values_;
};

std::string shape_string(const Shape& shape);

/// Throws ShapeError unless `t` is a matrix (rank 1 or 2) with the given extents.
void expect_shape(const Tensor& t, std::size_t rows, std::size_t cols, const char* what);

}  // namespace ccd::tc
