#pragma once

#include <functional>
#include <vector>

#include "dsc/error.hpp"
#include "dsc/tensor.hpp"

namespace dsc {

// Reverse-mode tape. Each differentiable op appends one closure that reads
// the gradient of its output and accumulates into the gradients of its
// inputs. backward() replays the closures in exact reverse execution order.
// The trainer uses one tape per step and discards it.
template <typename T>
class Tape {
 public:
  void record(std::function<void()> backward_fn) {
    entries_.push_back(std::move(backward_fn));
  }

  size_t size() const { return entries_.size(); }

  void clear() { entries_.clear(); }

  // Seeds d(loss)/d(loss) = 1 and propagates. Loss must be scalar.
  void backward(Tensor<T>& loss) {
    if (loss.numel() != 1) {
      throw UsageError("backward requires a scalar loss, shape is " +
                       loss.shape().str());
    }
    loss.grad()[0] = T(1);
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
      (*it)();
    }
  }

 private:
  std::vector<std::function<void()>> entries_;
};

using TapeF = Tape<float>;
using TapeD = Tape<double>;

}  // namespace dsc
