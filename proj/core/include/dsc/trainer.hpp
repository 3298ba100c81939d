#pragma once

#include <filesystem>
#include <functional>
#include <vector>

#include "dsc/augment.hpp"
#include "dsc/dataset.hpp"
#include "dsc/metrics.hpp"
#include "dsc/network.hpp"
#include "dsc/optim.hpp"

namespace dsc {

struct TrainConfig {
  int epochs = 5;
  int batch_size = 32;
  uint64_t seed = 0;
  Schedule schedule;
  bool eval_every_epoch = true;
  std::filesystem::path checkpoint_path;  // empty: no checkpoint written
  AugmentConfig augment;
};

// Hooks for instrumentation; any member may stay empty.
struct FitObserver {
  // Fires when a schedule segment begins, after its optimizer is created
  // with zeroed state and before any step of the segment runs.
  std::function<void(int segment_index, const Optimizer<float>& optimizer)>
      on_segment_start;
  std::function<void(const History::Row& row)> on_epoch_end;
};

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
  ClassReport report;
  ConfusionMatrix cm;
  RocResult roc;
};

// Per epoch: augment + rescale + forward + loss + backward + step over the
// train batches, then rescale-only evaluation on the validation set.
// The same config and data always produce the same History and checkpoint.
History fit(Network<float>& network, const std::vector<LabeledSample>& train,
            const std::vector<LabeledSample>& validation,
            const TrainConfig& cfg, const std::vector<std::string>& classes,
            const FitObserver* observer = nullptr);

// Inference-mode metrics over a sample set; never mutates parameters.
EvalResult evaluate(const Network<float>& network,
                    const std::vector<LabeledSample>& samples,
                    int batch_size = 32);

struct Prediction {
  std::string class_name;
  std::vector<float> probabilities;
  double elapsed_ms = 0.0;
};

// Resize + rescale + forward for a single image file.
Prediction predict(const Network<float>& network,
                   const std::vector<std::string>& classes,
                   const std::filesystem::path& image_path);

}  // namespace dsc
