#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "taillight/error.hpp"

namespace taillight {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

// Two numeric modes. Gradient checks run in the wide one.
enum class Precision : std::uint8_t { kTrain = 0, kTest = 1 };

template <typename T>
struct PrecisionOf;
template <>
struct PrecisionOf<float> {
  static constexpr Precision value = Precision::kTrain;
};
template <>
struct PrecisionOf<double> {
  static constexpr Precision value = Precision::kTest;
};

const char* precision_name(Precision p);
Precision parse_precision(const std::string& name);

template <typename T>
class Tape;

// Immutable n-d array, row-major. An attached tensor refers to the node on a
// Tape that produced it; the tape must outlive every tensor attached to it.
template <typename T>
class Tensor {
 public:
  using value_type = T;
  using Buffer = std::vector<T>;

  Tensor() = default;
  Tensor(Shape shape, Buffer values);
  Tensor(Shape shape, std::shared_ptr<const Buffer> values);

  static Tensor zeros(Shape shape) { return filled(std::move(shape), T(0)); }
  static Tensor filled(Shape shape, T value);
  static Tensor scalar(T value) { return Tensor(Shape{}, Buffer{value}); }

  bool defined() const { return values_ != nullptr; }
  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return values_ ? values_->size() : 0; }

  std::span<const T> values() const;
  const T* data() const { return values_->data(); }
  const std::shared_ptr<const Buffer>& buffer() const { return values_; }
  T operator[](std::size_t flat) const { return (*values_)[flat]; }
  T item() const;

  bool attached() const { return tape_ != nullptr; }
  Tape<T>* tape() const { return tape_; }
  std::int32_t node() const { return node_; }
  // Same values, no graph membership.
  Tensor detach() const { return Tensor(shape_, values_); }

 private:
  friend class Tape<T>;

  Shape shape_;
  std::shared_ptr<const Buffer> values_;
  Tape<T>* tape_ = nullptr;
  std::int32_t node_ = -1;
};

template <typename T>
Tensor<T>::Tensor(Shape shape, Buffer values)
    : Tensor(std::move(shape), std::make_shared<const Buffer>(std::move(values))) {}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::shared_ptr<const Buffer> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  for (auto extent : shape_) {
    if (extent == 0) throw ShapeError("tensor extents must be positive, got " + to_string(shape_));
  }
  if (!values_ || values_->size() != numel(shape_)) {
    throw ShapeError("tensor of shape " + to_string(shape_) + " needs " +
                     std::to_string(numel(shape_)) + " values, got " +
                     std::to_string(values_ ? values_->size() : 0));
  }
}

template <typename T>
Tensor<T> Tensor<T>::filled(Shape shape, T value) {
  const auto n = numel(shape);
  return Tensor(std::move(shape), Buffer(n, value));
}

template <typename T>
std::size_t Tensor<T>::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + to_string(shape_));
  }
  return shape_[axis];
}

template <typename T>
std::span<const T> Tensor<T>::values() const {
  if (!values_) return {};
  return {values_->data(), values_->size()};
}

template <typename T>
T Tensor<T>::item() const {
  if (size() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape_));
  return (*values_)[0];
}

}  // namespace taillight
