#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace garnn {

/// Dense row-major array of 64-bit reals. Immutable after construction;
/// copies share storage, so Tensors are safe to pass across threads.
/// Rank 0 is a scalar, rank 1 a vector, rank 2 a matrix.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> data);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> data);
  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double value);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_ ? data_->size() : 0; }
  bool empty() const { return !data_; }

  /// Rows/cols of a rank-2 tensor (rank-1 counts as a single row).
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const {
    return data_ ? std::span<const double>(*data_) : std::span<const double>();
  }
  double operator[](std::size_t i) const { return (*data_)[i]; }
  double at(std::size_t r, std::size_t c) const { return (*data_)[r * cols() + c]; }

  /// Value of a single-element tensor; rejects anything larger.
  double scalar_value() const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

  /// "[3x4]" — used in shape-mismatch messages.
  std::string shape_str() const;
  static std::string shape_str(std::span<const std::size_t> shape);

 private:
  std::vector<std::size_t> shape_;
  std::shared_ptr<const std::vector<double>> data_;
};

std::size_t shape_numel(std::span<const std::size_t> shape);

}  // namespace garnn
