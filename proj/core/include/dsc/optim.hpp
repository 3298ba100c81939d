#pragma once

#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dsc/params.hpp"
#include "dsc/tape.hpp"
#include "dsc/tensor.hpp"

namespace dsc {

// Mean over the batch of -log(probability of the true class), with the
// probability clamped to >= 1e-12 before the log. Differentiable through
// the softmax that produced `probs`.
template <typename T>
Tensor<T> scce_loss(const Tensor<T>& probs, std::span<const int> labels,
                    Tape<T>* tape = nullptr);

struct SgdConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
};

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

using OptimizerConfig = std::variant<SgdConfig, AdamConfig>;

// Updates the trainable entries of a ParameterStore in registration order.
// Per-parameter state lives inside the optimizer; constructing a new
// optimizer starts from zeroed state.
template <typename T>
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void step(ParameterStore<T>& store) = 0;
  virtual std::string label() const = 0;
  // Flat view of all internal state slots, for boundary instrumentation.
  virtual std::vector<const std::vector<T>*> state_slots() const = 0;
  virtual int64_t steps_taken() const = 0;
};

// Classical momentum: v <- momentum*v + g; p <- p - lr*v.
// With momentum 0 this is the plain gradient-descent update.
template <typename T>
class SgdOptimizer final : public Optimizer<T> {
 public:
  explicit SgdOptimizer(SgdConfig cfg);
  void step(ParameterStore<T>& store) override;
  std::string label() const override { return "sgd"; }
  std::vector<const std::vector<T>*> state_slots() const override;
  int64_t steps_taken() const override { return steps_; }
  const SgdConfig& config() const { return cfg_; }

 private:
  SgdConfig cfg_;
  std::vector<std::vector<T>> velocity_;  // one slot per trainable entry
  int64_t steps_ = 0;
};

// Adam with bias correction:
//   m <- beta1*m + (1-beta1)*g
//   v <- beta2*v + (1-beta2)*g^2
//   p <- p - lr * (m/(1-beta1^t)) / (sqrt(v/(1-beta2^t)) + eps)
template <typename T>
class AdamOptimizer final : public Optimizer<T> {
 public:
  explicit AdamOptimizer(AdamConfig cfg);
  void step(ParameterStore<T>& store) override;
  std::string label() const override { return "adam"; }
  std::vector<const std::vector<T>*> state_slots() const override;
  int64_t steps_taken() const override { return steps_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::vector<std::vector<T>> first_moment_;
  std::vector<std::vector<T>> second_moment_;
  int64_t steps_ = 0;
};

template <typename T>
std::unique_ptr<Optimizer<T>> make_optimizer(const OptimizerConfig& cfg);

std::string optimizer_label(const OptimizerConfig& cfg);

// Consecutive epoch segments trained with different optimizers. Model
// parameters carry across segment boundaries; optimizer state does not.
struct ScheduleSegment {
  OptimizerConfig optimizer;
  int epochs = 0;
};
using Schedule = std::vector<ScheduleSegment>;

int schedule_total_epochs(const Schedule& schedule);

// Maps each epoch (0-based) to the index of the segment that trains it.
// Throws ConfigError on an empty schedule or non-positive segment length.
std::vector<int> expand_schedule(const Schedule& schedule);

}  // namespace dsc
