#include "dsc/optim.hpp"

#include <cmath>

#include "dsc/error.hpp"

namespace dsc {

template <typename T>
Tensor<T> scce_loss(const Tensor<T>& probs, std::span<const int> labels,
                    Tape<T>* tape) {
  if (probs.rank() != 2) {
    throw ShapeError("scce_loss expects probabilities [N,K], got " +
                     probs.shape().str());
  }
  const int64_t n = probs.dim(0), k = probs.dim(1);
  if (static_cast<int64_t>(labels.size()) != n) {
    throw ShapeError("scce_loss got " + std::to_string(labels.size()) +
                     " labels for batch of " + std::to_string(n));
  }
  for (int64_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= k) {
      throw DataError("scce_loss label " + std::to_string(labels[i]) +
                      " out of range [0," + std::to_string(k) + ")");
    }
  }
  constexpr double kClamp = 1e-12;
  Tensor<T> out(Shape{1});
  const T* p = probs.data();
  T acc = 0;
  for (int64_t i = 0; i < n; ++i) {
    const T pi = p[i * k + labels[i]];
    acc += -std::log(std::max(pi, static_cast<T>(kClamp)));
  }
  out.values()[0] = acc / static_cast<T>(n);
  out.throw_if_not_finite("scce_loss");

  if (tape && probs.requires_grad()) {
    out.set_requires_grad(true);
    Tensor<T> probs_t = probs, out_t = out;
    std::vector<int> labels_copy(labels.begin(), labels.end());
    tape->record([=]() mutable {
      const T g = out_t.grad()[0];
      T* gp = probs_t.grad().data();
      const T* p = probs_t.data();
      for (int64_t i = 0; i < n; ++i) {
        const int64_t idx = i * k + labels_copy[static_cast<size_t>(i)];
        const T pi = p[idx];
        // below the clamp the loss is constant in the probability
        if (pi >= static_cast<T>(kClamp)) {
          gp[idx] += g * (-T(1) / pi) / static_cast<T>(n);
        }
      }
    });
  }
  return out;
}

namespace {

template <typename T>
void check_grad_finite(const ParameterStore<T>& store) {
  for (const auto& e : store.entries()) {
    if (!e.trainable) continue;
    for (T g : e.tensor.grad()) {
      if (!std::isfinite(static_cast<double>(g))) {
        throw NumericError("non-finite gradient for parameter " + e.name);
      }
    }
  }
}

}  // namespace

template <typename T>
SgdOptimizer<T>::SgdOptimizer(SgdConfig cfg) : cfg_(cfg) {
  if (cfg_.learning_rate <= 0.0) {
    throw ConfigError("sgd learning rate must be > 0");
  }
  if (cfg_.momentum < 0.0 || cfg_.momentum >= 1.0) {
    throw ConfigError("sgd momentum must be in [0,1)");
  }
}

template <typename T>
void SgdOptimizer<T>::step(ParameterStore<T>& store) {
  check_grad_finite(store);
  auto& entries = store.entries();
  if (velocity_.empty()) {
    for (const auto& e : entries) {
      velocity_.emplace_back(
          e.trainable ? static_cast<size_t>(e.tensor.numel()) : 0, T(0));
    }
  }
  const T lr = static_cast<T>(cfg_.learning_rate);
  const T mu = static_cast<T>(cfg_.momentum);
  for (size_t i = 0; i < entries.size(); ++i) {
    if (!entries[i].trainable) continue;
    Tensor<T>& p = entries[i].tensor;
    const std::vector<T>& g = p.grad();
    std::vector<T>& v = velocity_[i];
    T* pv = p.data();
    for (size_t j = 0; j < g.size(); ++j) {
      v[j] = mu * v[j] + g[j];
      pv[j] -= lr * v[j];
    }
  }
  ++steps_;
}

template <typename T>
std::vector<const std::vector<T>*> SgdOptimizer<T>::state_slots() const {
  std::vector<const std::vector<T>*> out;
  for (const auto& v : velocity_) out.push_back(&v);
  return out;
}

template <typename T>
AdamOptimizer<T>::AdamOptimizer(AdamConfig cfg) : cfg_(cfg) {
  if (cfg_.learning_rate <= 0.0) {
    throw ConfigError("adam learning rate must be > 0");
  }
  if (cfg_.beta1 < 0.0 || cfg_.beta1 >= 1.0 || cfg_.beta2 < 0.0 ||
      cfg_.beta2 >= 1.0) {
    throw ConfigError("adam decay rates must be in [0,1)");
  }
  if (cfg_.epsilon <= 0.0) {
    throw ConfigError("adam epsilon must be > 0");
  }
}

template <typename T>
void AdamOptimizer<T>::step(ParameterStore<T>& store) {
  check_grad_finite(store);
  auto& entries = store.entries();
  if (first_moment_.empty()) {
    for (const auto& e : entries) {
      const size_t len =
          e.trainable ? static_cast<size_t>(e.tensor.numel()) : 0;
      first_moment_.emplace_back(len, T(0));
      second_moment_.emplace_back(len, T(0));
    }
  }
  ++steps_;
  const T lr = static_cast<T>(cfg_.learning_rate);
  const T b1 = static_cast<T>(cfg_.beta1);
  const T b2 = static_cast<T>(cfg_.beta2);
  const T eps = static_cast<T>(cfg_.epsilon);
  const T bias1 = T(1) - std::pow(b1, static_cast<T>(steps_));
  const T bias2 = T(1) - std::pow(b2, static_cast<T>(steps_));
  for (size_t i = 0; i < entries.size(); ++i) {
    if (!entries[i].trainable) continue;
    Tensor<T>& p = entries[i].tensor;
    const std::vector<T>& g = p.grad();
    std::vector<T>& m = first_moment_[i];
    std::vector<T>& v = second_moment_[i];
    T* pv = p.data();
    for (size_t j = 0; j < g.size(); ++j) {
      m[j] = b1 * m[j] + (T(1) - b1) * g[j];
      v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
      const T m_hat = m[j] / bias1;
      const T v_hat = v[j] / bias2;
      pv[j] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

template <typename T>
std::vector<const std::vector<T>*> AdamOptimizer<T>::state_slots() const {
  std::vector<const std::vector<T>*> out;
  for (const auto& m : first_moment_) out.push_back(&m);
  for (const auto& v : second_moment_) out.push_back(&v);
  return out;
}

template <typename T>
std::unique_ptr<Optimizer<T>> make_optimizer(const OptimizerConfig& cfg) {
  if (std::holds_alternative<SgdConfig>(cfg)) {
    return std::make_unique<SgdOptimizer<T>>(std::get<SgdConfig>(cfg));
  }
  return std::make_unique<AdamOptimizer<T>>(std::get<AdamConfig>(cfg));
}

std::string optimizer_label(const OptimizerConfig& cfg) {
  return std::holds_alternative<SgdConfig>(cfg) ? "sgd" : "adam";
}

int schedule_total_epochs(const Schedule& schedule) {
  int total = 0;
  for (const ScheduleSegment& s : schedule) total += s.epochs;
  return total;
}

std::vector<int> expand_schedule(const Schedule& schedule) {
  if (schedule.empty()) {
    throw ConfigError("schedule must contain at least one segment");
  }
  std::vector<int> plan;
  for (size_t i = 0; i < schedule.size(); ++i) {
    if (schedule[i].epochs < 1) {
      throw ConfigError("schedule segment " + std::to_string(i + 1) +
                        " must run for at least one epoch");
    }
    for (int e = 0; e < schedule[i].epochs; ++e) {
      plan.push_back(static_cast<int>(i));
    }
  }
  return plan;
}

#define DSC_INSTANTIATE_OPTIM(T)                                          \
  template Tensor<T> scce_loss<T>(const Tensor<T>&, std::span<const int>, \
                                  Tape<T>*);                              \
  template class SgdOptimizer<T>;                                         \
  template class AdamOptimizer<T>;                                        \
  template std::unique_ptr<Optimizer<T>> make_optimizer<T>(               \
      const OptimizerConfig&);

DSC_INSTANTIATE_OPTIM(float)
DSC_INSTANTIATE_OPTIM(double)
#undef DSC_INSTANTIATE_OPTIM

}  // namespace dsc
