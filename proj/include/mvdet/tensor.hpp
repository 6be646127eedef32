#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mvdet/errors.hpp"

namespace mvdet {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(std::span<const std::size_t> shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_str(std::span<const std::size_t> shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

/// Dense row-major array of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
    check_shape();
  }
  Tensor(Shape shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape();
    if (data_.size() != shape_size(shape_))
      throw ShapeMismatch("data length " + std::to_string(data_.size()) +
                          " does not match shape " + shape_str(shape_));
  }
  Tensor(std::initializer_list<std::size_t> shape, std::initializer_list<double> data)
      : Tensor(Shape(shape), std::vector<double>(data)) {}

  const Shape& shape() const noexcept { return shape_; }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  std::vector<double>& storage() noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  /// Contiguous slice along the leading dimension.
  std::span<double> row(std::size_t i) {
    const std::size_t stride = data_.size() / shape_.at(0);
    return {data_.data() + i * stride, stride};
  }
  std::span<const double> row(std::size_t i) const {
    const std::size_t stride = data_.size() / shape_.at(0);
    return {data_.data() + i * stride, stride};
  }

  Tensor reshaped(Shape shape) const {
    if (shape_size(shape) != data_.size())
      throw ShapeMismatch("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    return Tensor(std::move(shape), data_);
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool operator==(const Tensor& other) const = default;

 private:
  void check_shape() const {
    for (auto d : shape_)
      if (d == 0) throw ShapeMismatch("zero-sized dimension in " + shape_str(shape_));
  }

  Shape shape_;
  std::vector<double> data_;
};

/// Stacks equally shaped tensors along a new leading dimension.
inline Tensor stack(std::span<const Tensor* const> items) {
  if (items.empty()) throw ShapeMismatch("stack of zero tensors");
  Shape shape = items.front()->shape();
  const std::size_t n = items.front()->size();
  std::vector<double> data;
  data.reserve(n * items.size());
  for (const Tensor* t : items) {
    if (t->shape() != shape)
      throw ShapeMismatch("stack: " + shape_str(t->shape()) + " vs " + shape_str(shape));
    data.insert(data.end(), t->storage().begin(), t->storage().end());
  }
  shape.insert(shape.begin(), items.size());
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace mvdet
