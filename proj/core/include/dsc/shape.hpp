#pragma once

#include <cstdint>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "dsc/error.hpp"

namespace dsc {

// Ordered list of positive extents. Image tensors follow the
// batch-height-width-channels convention.
class Shape {
 public:
  Shape() = default;

  Shape(std::initializer_list<int64_t> dims)
      : Shape(std::vector<int64_t>(dims)) {}

  explicit Shape(std::vector<int64_t> dims) : dims_(std::move(dims)) {
    for (int64_t d : dims_) {
      if (d < 1) {
        throw ShapeError("shape extent must be >= 1, got " + str());
      }
    }
  }

  int rank() const { return static_cast<int>(dims_.size()); }

  int64_t operator[](int i) const { return dims_[static_cast<size_t>(i)]; }

  const std::vector<int64_t>& dims() const { return dims_; }

  int64_t numel() const {
    int64_t n = 1;
    for (int64_t d : dims_) n *= d;
    return n;
  }

  bool operator==(const Shape& other) const { return dims_ == other.dims_; }
  bool operator!=(const Shape& other) const { return dims_ != other.dims_; }

  std::string str() const {
    std::ostringstream os;
    os << '(';
    for (size_t i = 0; i < dims_.size(); ++i) {
      if (i) os << ',';
      os << dims_[i];
    }
    os << ')';
    return os.str();
  }

 private:
  std::vector<int64_t> dims_;
};

}  // namespace dsc
