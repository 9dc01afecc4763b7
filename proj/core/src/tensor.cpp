#include "garnn/tensor.hpp"

#include <cmath>
#include <sstream>

#include "garnn/error.hpp"

namespace garnn {

std::size_t shape_numel(std::span<const std::size_t> shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data) {
  for (auto d : shape) {
    if (d == 0) {
      fail(ErrorCode::shape_mismatch,
           "tensor dimensions must be positive, got " + shape_str(shape));
    }
  }
  if (shape_numel(shape) != data.size()) {
    fail(ErrorCode::shape_mismatch,
         "data length " + std::to_string(data.size()) +
             " does not match shape " + shape_str(shape));
  }
  shape_ = std::move(shape);
  data_ = std::make_shared<const std::vector<double>>(std::move(data));
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::vector(std::vector<double> data) {
  const std::size_t n = data.size();
  return Tensor({n}, std::move(data));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> data) {
  return Tensor({rows, cols}, std::move(data));
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  std::vector<double> data(shape_numel(shape), 0.0);
  return Tensor(std::move(shape), std::move(data));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
  std::vector<double> data(shape_numel(shape), value);
  return Tensor(std::move(shape), std::move(data));
}

std::size_t Tensor::rows() const {
  if (rank() == 2) return shape_[0];
  return 1;
}

std::size_t Tensor::cols() const {
  if (rank() == 2) return shape_[1];
  if (rank() == 1) return shape_[0];
  return 1;
}

double Tensor::scalar_value() const {
  if (size() != 1) {
    fail(ErrorCode::shape_mismatch,
         "expected a scalar, got shape " + shape_str());
  }
  return (*data_)[0];
}

bool Tensor::all_finite() const {
  if (!data_) return true;
  for (double v : *data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor::shape_str(std::span<const std::size_t> shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::string Tensor::shape_str() const { return shape_str(shape_); }

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::shape_mismatch: return "E_SHAPE";
    case ErrorCode::invalid_argument: return "E_ARG";
    case ErrorCode::non_finite: return "E_NONFINITE";
    case ErrorCode::csv_parse: return "E_CSV";
    case ErrorCode::config: return "E_CONFIG";
    case ErrorCode::io: return "E_IO";
    case ErrorCode::diverged: return "E_DIVERGED";
  }
  return "E_UNKNOWN";
}

}  // namespace garnn
