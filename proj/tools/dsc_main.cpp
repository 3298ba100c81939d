// dsc: train, evaluate, run and inspect DeepSeqCoco-style classifiers.

#include <cstdio>
#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "dsc/checkpoint.hpp"
#include "dsc/config.hpp"
#include "dsc/dataset.hpp"
#include "dsc/error.hpp"
#include "dsc/tensor_io.hpp"
#include "dsc/trainer.hpp"

namespace {

namespace fs = std::filesystem;

// 0 success, 1 partial prediction failure, 2 config error, 3 numeric
// abort, 4 checkpoint mismatch, 5 data error.
constexpr int kExitPartial = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitCheckpoint = 4;
constexpr int kExitData = 5;

fs::path default_out_dir(const fs::path& requested) {
  if (!requested.empty()) return requested;
  if (const char* env = std::getenv("DSC_OUT_DIR")) return fs::path(env);
  return fs::path(".");
}

dsc::ScanResult scan_samples(const fs::path& root, const fs::path& manifest) {
  dsc::ScanResult scan =
      manifest.empty() ? dsc::scan_dataset(root) : dsc::load_manifest(manifest);
  for (const std::string& w : scan.warnings) {
    std::cerr << "warning: " << w << "\n";
  }
  return scan;
}

int cmd_train(const fs::path& config_path, const std::string& preset,
              const fs::path& out_flag, bool has_seed, uint64_t seed) {
  dsc::RunConfig cfg = dsc::load_run_config(config_path);
  if (!preset.empty()) {
    cfg.network = dsc::network_preset(preset);
    cfg.preset = preset;
  }
  if (has_seed) dsc::apply_seed(cfg, seed);
  if (!out_flag.empty()) cfg.output_dir = out_flag;
  cfg.output_dir = default_out_dir(cfg.output_dir);

  // scan before creating anything, so the output dir cannot leak into the
  // class roster when it nests inside the dataset root
  dsc::ScanResult scan = scan_samples(cfg.dataset_root, cfg.dataset_manifest);
  if (static_cast<int64_t>(scan.classes.size()) != cfg.network.num_classes) {
    throw dsc::ConfigError(
        "dataset has " + std::to_string(scan.classes.size()) +
        " classes but the network expects " +
        std::to_string(cfg.network.num_classes));
  }
  dsc::DatasetSplit split = dsc::split_dataset(scan.samples, cfg.split);

  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (cfg.train.checkpoint_path.empty()) {
    cfg.train.checkpoint_path = cfg.output_dir / "model.dsqc";
  }
  std::cout << "dataset: " << scan.samples.size() << " samples, "
            << scan.classes.size() << " classes (" << split.train.size()
            << " train / " << split.validation.size() << " validation)\n";

  dsc::Network<float> network(cfg.network, cfg.train.seed);
  const auto counts = network.params().counts();
  std::cout << "network: " << cfg.preset << ", " << counts.total
            << " params (" << counts.trainable << " trainable)\n";

  dsc::FitObserver observer;
  observer.on_epoch_end = [](const dsc::History::Row& row) {
    std::printf(
        "epoch %d [%s]  train loss %.4f acc %.4f  val loss %.4f acc %.4f  "
        "(%.1fs)\n",
        row.epoch, row.optimizer.c_str(), row.train_loss, row.train_accuracy,
        row.val_loss, row.val_accuracy, row.seconds);
    std::fflush(stdout);
  };
  dsc::History history = dsc::fit(network, split.train, split.validation,
                                  cfg.train, scan.classes, &observer);

  dsc::EvalResult eval =
      dsc::evaluate(network, split.validation, cfg.train.batch_size);
  dsc::emit_report(eval.report, history, eval.cm, eval.roc, scan.classes,
                   eval.loss, cfg.output_dir);
  std::cout << "checkpoint: " << cfg.train.checkpoint_path.string() << "\n";
  std::cout << "reports: " << cfg.output_dir.string() << "\n";
  return 0;
}

int cmd_evaluate(const fs::path& checkpoint, const fs::path& data_root,
                 const fs::path& manifest, const fs::path& out_flag,
                 int batch_size) {
  dsc::CheckpointMeta meta;
  dsc::Network<float> network = dsc::load_checkpoint(checkpoint, &meta);
  dsc::ScanResult scan = scan_samples(data_root, manifest);
  if (scan.classes != meta.classes) {
    std::string got;
    for (const auto& c : scan.classes) got += (got.empty() ? "" : ",") + c;
    throw dsc::CheckpointError(
        "dataset classes [" + got + "] do not match the checkpoint roster (" +
        std::to_string(meta.classes.size()) + " classes)");
  }

  dsc::EvalResult eval = dsc::evaluate(network, scan.samples, batch_size);
  const fs::path out_dir = default_out_dir(out_flag);
  dsc::emit_report(eval.report, dsc::History{}, eval.cm, eval.roc,
                   scan.classes, eval.loss, out_dir);
  std::printf("samples %zu  loss %.4f  accuracy %.4f  macro_f1 %.4f\n",
              scan.samples.size(), eval.loss, eval.accuracy,
              eval.report.macro.f1);
  std::cout << "reports: " << out_dir.string() << "\n";
  return 0;
}

int cmd_predict(const fs::path& checkpoint,
                const std::vector<std::string>& images,
                const fs::path& dump_dir) {
  dsc::CheckpointMeta meta;
  dsc::Network<float> network = dsc::load_checkpoint(checkpoint, &meta);
  if (!dump_dir.empty()) {
    std::error_code ec;
    fs::create_directories(dump_dir, ec);
  }

  bool any_failed = false;
  int ok = 0;
  double total_ms = 0.0;
  for (const std::string& image : images) {
    try {
      dsc::Prediction p = dsc::predict(network, meta.classes, image);
      std::cout << image << ' ' << p.class_name;
      for (float prob : p.probabilities) {
        std::printf(" %.6f", prob);
      }
      std::printf(" %.3f\n", p.elapsed_ms);
      total_ms += p.elapsed_ms;
      ++ok;
      if (!dump_dir.empty()) {
        dsc::Tensor<float> img = dsc::decode_image(image);
        img = dsc::resize_bilinear(img, network.spec().input_h,
                                   network.spec().input_w);
        dsc::Tensor<float> batch(dsc::Shape{1, network.spec().input_h,
                                            network.spec().input_w, 3});
        std::copy(img.values().begin(), img.values().end(),
                  batch.values().begin());
        batch = dsc::rescale(batch);
        dsc::Context<float> ctx;
        dsc::Tensor<float> features = network.forward_features(ctx, batch);
        dsc::write_dsqt(dump_dir / (fs::path(image).stem().string() + ".dsqt"),
                        features);
      }
    } catch (const dsc::Error& e) {
      std::cout << image << " error: " << e.what() << "\n";
      any_failed = true;
    }
  }
  if (images.size() > 1 && ok > 0) {
    std::printf("predicted %d images, mean per-image time %.3f ms\n", ok,
                total_ms / ok);
  }
  return any_failed ? kExitPartial : 0;
}

int cmd_inspect(const std::string& preset, const fs::path& checkpoint) {
  std::unique_ptr<dsc::Network<float>> network;
  if (!checkpoint.empty()) {
    network = std::make_unique<dsc::Network<float>>(
        dsc::load_checkpoint(checkpoint));
  } else {
    network = std::make_unique<dsc::Network<float>>(
        dsc::network_preset(preset.empty() ? "fidelity-b3" : preset), 0);
  }

  const auto rows = network->layer_table();
  size_t name_w = 10, shape_w = 12;
  for (const auto& r : rows) {
    name_w = std::max(name_w, r.name.size());
    shape_w = std::max(shape_w, r.output_shape.size());
  }
  std::printf("%-*s  %-*s  %s\n", static_cast<int>(name_w), "Layer",
              static_cast<int>(shape_w), "Output Shape", "Params");
  for (const auto& r : rows) {
    std::printf("%-*s  %-*s  %lld\n", static_cast<int>(name_w),
                r.name.c_str(), static_cast<int>(shape_w),
                r.output_shape.c_str(),
                static_cast<long long>(r.param_count));
  }
  const auto counts = network->params().counts();
  std::printf("Total params: %lld\n", static_cast<long long>(counts.total));
  std::printf("Trainable params: %lld\n",
              static_cast<long long>(counts.trainable));
  std::printf("Non-trainable params: %lld\n",
              static_cast<long long>(counts.frozen));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DeepSeqCoco training and inference engine"};
  app.require_subcommand(1);

  std::string config_path, preset, out_dir, checkpoint, data_root, manifest;
  std::string dump_dir;
  std::vector<std::string> images;
  uint64_t seed = 0;
  int batch_size = 32;

  CLI::App* train = app.add_subcommand("train", "Train from a run config");
  train->add_option("--config", config_path, "Run configuration file")
      ->required();
  auto* seed_opt = train->add_option("--seed", seed, "Override every seed");
  train->add_option("--preset", preset, "Override the network preset");
  train->add_option("--out", out_dir, "Output directory");

  CLI::App* evaluate =
      app.add_subcommand("evaluate", "Evaluate a checkpoint on a dataset");
  evaluate->add_option("--checkpoint", checkpoint, "DSQC checkpoint")
      ->required();
  evaluate->add_option("--data", data_root, "Dataset root directory");
  evaluate->add_option("--manifest", manifest, "Dataset manifest file");
  evaluate->add_option("--out", out_dir, "Output directory");
  evaluate->add_option("--batch-size", batch_size, "Evaluation batch size");

  CLI::App* predict =
      app.add_subcommand("predict", "Classify images with a checkpoint");
  predict->add_option("--checkpoint", checkpoint, "DSQC checkpoint")
      ->required();
  predict->add_option("images", images, "Image files")->required();
  predict->add_option("--dump-features", dump_dir,
                      "Write pooled feature tensors (DSQT) here");

  CLI::App* inspect =
      app.add_subcommand("inspect", "Print the layer table and totals");
  inspect->add_option("--preset", preset, "Network preset");
  inspect->add_option("--checkpoint", checkpoint, "DSQC checkpoint");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (app.got_subcommand(train)) {
      return cmd_train(config_path, preset, out_dir, seed_opt->count() > 0,
                       seed);
    }
    if (app.got_subcommand(evaluate)) {
      if (data_root.empty() == manifest.empty()) {
        throw dsc::ConfigError(
            "evaluate: provide exactly one of --data or --manifest");
      }
      return cmd_evaluate(checkpoint, data_root, manifest, out_dir,
                          batch_size);
    }
    if (app.got_subcommand(predict)) {
      return cmd_predict(checkpoint, images, dump_dir);
    }
    if (app.got_subcommand(inspect)) {
      if (!preset.empty() && !checkpoint.empty()) {
        throw dsc::ConfigError(
            "inspect: provide only one of --preset or --checkpoint");
      }
      return cmd_inspect(preset, checkpoint);
    }
  } catch (const dsc::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const dsc::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const dsc::CheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCheckpoint;
  } catch (const dsc::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
