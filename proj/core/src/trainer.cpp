#include "dsc/trainer.hpp"

#include <chrono>
#include <set>

#include "dsc/checkpoint.hpp"
#include "dsc/error.hpp"

namespace dsc {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct PassMetrics {
  double loss = 0.0;
  double accuracy = 0.0;
};

// One inference pass over a loader epoch: rescale only, no augmentation.
PassMetrics run_validation(const Network<float>& network, BatchLoader& loader,
                           std::vector<int>* all_labels = nullptr,
                           std::vector<float>* all_probs = nullptr) {
  PassMetrics out;
  int64_t total = 0, correct = 0;
  double loss_sum = 0.0;
  Context<float> ctx;  // inference
  auto epoch = loader.epoch(0);
  while (auto batch = epoch.next()) {
    Tensor<float> x = rescale(batch->images);
    Tensor<float> probs = network.forward(ctx, x);
    Tensor<float> loss = scce_loss<float>(probs, batch->labels, nullptr);
    const int64_t n = probs.dim(0);
    loss_sum += static_cast<double>(loss.item()) * static_cast<double>(n);
    const std::vector<int> preds = predictions(probs);
    for (size_t i = 0; i < preds.size(); ++i) {
      correct += preds[i] == batch->labels[i];
    }
    total += n;
    if (all_labels) {
      all_labels->insert(all_labels->end(), batch->labels.begin(),
                         batch->labels.end());
    }
    if (all_probs) {
      all_probs->insert(all_probs->end(), probs.values().begin(),
                        probs.values().end());
    }
  }
  if (total == 0) throw UsageError("evaluation set is empty");
  out.loss = loss_sum / static_cast<double>(total);
  out.accuracy = static_cast<double>(correct) / static_cast<double>(total);
  return out;
}

void check_disjoint(const std::vector<LabeledSample>& train,
                    const std::vector<LabeledSample>& validation) {
  std::set<std::string> paths;
  for (const auto& s : train) paths.insert(s.image_path.string());
  for (const auto& s : validation) {
    if (paths.count(s.image_path.string())) {
      throw UsageError("train and validation sets overlap at " +
                       s.image_path.string());
    }
  }
}

}  // namespace

History fit(Network<float>& network, const std::vector<LabeledSample>& train,
            const std::vector<LabeledSample>& validation,
            const TrainConfig& cfg, const std::vector<std::string>& classes,
            const FitObserver* observer) {
  History history;
  if (cfg.epochs == 0) {
    if (!cfg.checkpoint_path.empty()) {
      save_checkpoint(cfg.checkpoint_path, network, classes);
    }
    return history;
  }
  if (cfg.epochs != schedule_total_epochs(cfg.schedule)) {
    throw ConfigError("train epochs (" + std::to_string(cfg.epochs) +
                      ") must equal the schedule total (" +
                      std::to_string(schedule_total_epochs(cfg.schedule)) +
                      ")");
  }
  check_disjoint(train, validation);
  const std::vector<int> plan = expand_schedule(cfg.schedule);

  const auto& spec = network.spec();
  BatchPlan train_plan;
  train_plan.batch_size = cfg.batch_size;
  train_plan.epoch_shuffle = true;
  BatchLoader train_loader(train, train_plan, spec.input_h, spec.input_w,
                           cfg.seed);
  BatchPlan val_plan;
  val_plan.batch_size = cfg.batch_size;
  val_plan.epoch_shuffle = false;
  BatchLoader val_loader(validation, val_plan, spec.input_h, spec.input_w,
                         cfg.seed);

  std::unique_ptr<Optimizer<float>> optimizer;
  int active_segment = -1;
  const Rng augment_base = Rng(cfg.augment.seed).fork("augment");

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto epoch_start = Clock::now();
    if (plan[static_cast<size_t>(epoch)] != active_segment) {
      // segment boundary: parameters carry over, optimizer state does not
      active_segment = plan[static_cast<size_t>(epoch)];
      optimizer = make_optimizer<float>(
          cfg.schedule[static_cast<size_t>(active_segment)].optimizer);
      if (observer && observer->on_segment_start) {
        observer->on_segment_start(active_segment, *optimizer);
      }
    }

    int64_t seen = 0, correct = 0;
    double loss_sum = 0.0;
    Rng epoch_rng = augment_base.fork(static_cast<uint64_t>(epoch));
    auto batches = train_loader.epoch(epoch);
    int batch_index = 0;
    while (auto batch = batches.next()) {
      Rng batch_rng = epoch_rng.fork(static_cast<uint64_t>(batch_index));
      Tensor<float> x = augment_batch(batch->images, cfg.augment, batch_rng);
      x = rescale(x);

      Tape<float> tape;
      Context<float> ctx{&tape, /*training=*/true};
      Tensor<float> probs;
      Tensor<float> loss;
      try {
        probs = network.forward(ctx, x);
        loss = scce_loss<float>(probs, batch->labels, &tape);
        network.params().zero_grads();
        tape.backward(loss);
        optimizer->step(network.params());
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch + 1) + ", batch " +
                           std::to_string(batch_index + 1) + ": " + e.what());
      }

      const int64_t n = probs.dim(0);
      loss_sum += static_cast<double>(loss.item()) * static_cast<double>(n);
      const std::vector<int> preds = predictions(probs);
      for (size_t i = 0; i < preds.size(); ++i) {
        correct += preds[i] == batch->labels[i];
      }
      seen += n;
      ++batch_index;
    }

    History::Row row;
    row.epoch = epoch + 1;
    row.optimizer = optimizer->label();
    row.train_loss = loss_sum / static_cast<double>(seen);
    row.train_accuracy =
        static_cast<double>(correct) / static_cast<double>(seen);
    if (cfg.eval_every_epoch && !validation.empty()) {
      const PassMetrics val = run_validation(network, val_loader);
      row.val_loss = val.loss;
      row.val_accuracy = val.accuracy;
    }
    row.seconds = seconds_since(epoch_start);
    history.rows.push_back(row);
    if (observer && observer->on_epoch_end) {
      observer->on_epoch_end(row);
    }
  }

  if (!cfg.checkpoint_path.empty()) {
    std::map<std::string, std::string> metadata;
    metadata["epochs"] = std::to_string(cfg.epochs);
    std::string sched;
    for (const ScheduleSegment& seg : cfg.schedule) {
      if (!sched.empty()) sched += ",";
      sched += optimizer_label(seg.optimizer) + ":" +
               std::to_string(seg.epochs);
    }
    metadata["schedule"] = sched;
    save_checkpoint(cfg.checkpoint_path, network, classes, metadata);
  }
  return history;
}

EvalResult evaluate(const Network<float>& network,
                    const std::vector<LabeledSample>& samples,
                    int batch_size) {
  if (samples.empty()) throw UsageError("evaluate: sample set is empty");
  const auto& spec = network.spec();
  BatchPlan plan;
  plan.batch_size = batch_size;
  plan.epoch_shuffle = false;
  BatchLoader loader(samples, plan, spec.input_h, spec.input_w, 0);

  std::vector<int> labels;
  std::vector<float> probs_flat;
  const PassMetrics pass = run_validation(network, loader, &labels,
                                          &probs_flat);
  const auto n = static_cast<int64_t>(labels.size());
  const int64_t k = spec.num_classes;
  Tensor<float> probs = Tensor<float>::from_data(Shape{n, k},
                                                 std::move(probs_flat));
  EvalResult out;
  out.loss = pass.loss;
  out.accuracy = pass.accuracy;
  const std::vector<int> preds = predictions(probs);
  out.cm = confusion(labels, preds, static_cast<int>(k));
  out.report = class_report(out.cm);
  out.roc = roc_auc(probs, labels);
  return out;
}

Prediction predict(const Network<float>& network,
                   const std::vector<std::string>& classes,
                   const std::filesystem::path& image_path) {
  const auto& spec = network.spec();
  const auto start = Clock::now();
  Tensor<float> image = decode_image(image_path);
  image = resize_bilinear(image, spec.input_h, spec.input_w);
  Tensor<float> batch(Shape{1, spec.input_h, spec.input_w, 3});
  std::copy(image.values().begin(), image.values().end(),
            batch.values().begin());
  batch = rescale(batch);
  Context<float> ctx;
  Tensor<float> probs = network.forward(ctx, batch);

  Prediction out;
  out.probabilities = probs.values();
  const int best = argmax_row(probs.data(), spec.num_classes);
  out.class_name = static_cast<size_t>(best) < classes.size()
                       ? classes[static_cast<size_t>(best)]
                       : "class_" + std::to_string(best);
  out.elapsed_ms = seconds_since(start) * 1000.0;
  return out;
}

}  // namespace dsc
