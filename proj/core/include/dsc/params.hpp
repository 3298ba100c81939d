#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "dsc/rng.hpp"
#include "dsc/tensor.hpp"

namespace dsc {

enum class Init { kFanInUniform, kZeros, kOnes };

// Named parameter tensors in registration order. Kernels, biases and
// batch-norm gamma/beta plus the running statistics all live here; the
// trainable flag decides what the optimizers touch, and requires_grad
// mirrors it so backward skips frozen subgraphs entirely.
template <typename T>
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Tensor<T> tensor;
    bool trainable;
  };

  struct Counts {
    int64_t total = 0;
    int64_t trainable = 0;
    int64_t frozen = 0;
  };

  Tensor<T> create(const std::string& name, Shape shape, bool trainable,
                   Init init, int64_t fan_in, Rng& rng) {
    Tensor<T> t(std::move(shape), trainable);
    switch (init) {
      case Init::kFanInUniform: {
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (T& v : t.values()) {
          v = static_cast<T>(rng.uniform(-bound, bound));
        }
        break;
      }
      case Init::kZeros:
        break;
      case Init::kOnes:
        for (T& v : t.values()) v = T(1);
        break;
    }
    add(name, t, trainable);
    return t;
  }

  void add(const std::string& name, Tensor<T> tensor, bool trainable) {
    if (index_.count(name)) {
      throw UsageError("duplicate parameter name: " + name);
    }
    tensor.set_requires_grad(trainable);
    index_[name] = entries_.size();
    entries_.push_back(Entry{name, std::move(tensor), trainable});
  }

  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }

  bool contains(const std::string& name) const { return index_.count(name); }

  Tensor<T>& find(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw UsageError("unknown parameter: " + name);
    return entries_[it->second].tensor;
  }

  Counts counts() const {
    Counts c;
    for (const Entry& e : entries_) {
      c.total += e.tensor.numel();
      (e.trainable ? c.trainable : c.frozen) += e.tensor.numel();
    }
    return c;
  }

  void zero_grads() {
    for (Entry& e : entries_) {
      if (e.trainable) e.tensor.zero_grad();
    }
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, size_t> index_;
};

}  // namespace dsc
