#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dsc/error.hpp"
#include "dsc/shape.hpp"

namespace dsc {

// N-dimensional row-major float tensor with an optional gradient buffer.
// A Tensor is a cheap handle onto a shared node, so copies alias the same
// storage; backward closures on a Tape keep their operands alive through
// these handles. Use clone() when a detached deep copy is needed.
//
// T is float in production and double in verification runs; that is the
// numeric-width switch.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, bool requires_grad = false)
      : node_(std::make_shared<Node>()) {
    node_->shape = std::move(shape);
    node_->values.assign(static_cast<size_t>(node_->shape.numel()), T(0));
    node_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  static Tensor full(Shape shape, T value) {
    Tensor t(std::move(shape));
    for (T& v : t.values()) v = value;
    return t;
  }

  static Tensor scalar(T value) { return full(Shape{1}, value); }

  static Tensor from_data(Shape shape, std::vector<T> data) {
    Tensor t;
    t.node_ = std::make_shared<Node>();
    t.node_->shape = std::move(shape);
    if (static_cast<int64_t>(data.size()) != t.node_->shape.numel()) {
      throw ShapeError("data length " + std::to_string(data.size()) +
                       " does not match shape " + t.node_->shape.str());
    }
    t.node_->values = std::move(data);
    return t;
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int rank() const { return node_->shape.rank(); }
  int64_t numel() const { return node_->shape.numel(); }
  int64_t dim(int i) const { return node_->shape[i]; }

  std::vector<T>& values() { return node_->values; }
  const std::vector<T>& values() const { return node_->values; }
  T* data() { return node_->values.data(); }
  const T* data() const { return node_->values.data(); }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool rg) { node_->requires_grad = rg; }

  // Gradient buffer; allocated (zeroed) on first touch so tensors that never
  // appear on a tape still read as zero-gradient.
  std::vector<T>& grad() {
    if (node_->grad.size() != node_->values.size()) {
      node_->grad.assign(node_->values.size(), T(0));
    }
    return node_->grad;
  }

  const std::vector<T>& grad() const {
    return const_cast<Tensor*>(this)->grad();
  }

  void zero_grad() { node_->grad.assign(node_->values.size(), T(0)); }

  // Deep copy with fresh storage; gradient state is not copied.
  Tensor clone() const {
    Tensor t;
    t.node_ = std::make_shared<Node>();
    t.node_->shape = node_->shape;
    t.node_->values = node_->values;
    t.node_->requires_grad = node_->requires_grad;
    return t;
  }

  bool shares_storage_with(const Tensor& other) const {
    return node_ == other.node_;
  }

  // 4-d accessors for NHWC image tensors (tests and kernels).
  T& at(int64_t n, int64_t h, int64_t w, int64_t c) {
    const Shape& s = node_->shape;
    return node_->values[static_cast<size_t>(
        ((n * s[1] + h) * s[2] + w) * s[3] + c)];
  }
  T at(int64_t n, int64_t h, int64_t w, int64_t c) const {
    return const_cast<Tensor*>(this)->at(n, h, w, c);
  }

  T& at(int64_t i, int64_t j) {
    return node_->values[static_cast<size_t>(i * node_->shape[1] + j)];
  }
  T at(int64_t i, int64_t j) const {
    return const_cast<Tensor*>(this)->at(i, j);
  }

  T item() const {
    if (numel() != 1) {
      throw UsageError("item() requires a scalar tensor, shape is " +
                       shape().str());
    }
    return node_->values[0];
  }

  void throw_if_not_finite(const std::string& op) const {
    for (T v : node_->values) {
      if (!std::isfinite(static_cast<double>(v))) {
        throw NumericError(op + " produced a non-finite value");
      }
    }
  }

 private:
  struct Node {
    Shape shape;
    std::vector<T> values;
    std::vector<T> grad;
    bool requires_grad = false;
  };

  std::shared_ptr<Node> node_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace dsc
