#include "dsc/config.hpp"

#include <fstream>
#include <sstream>

#include "dsc/error.hpp"
#include "spec_json.hpp"

namespace dsc {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

size_t line_of_offset(const std::string& text, size_t byte) {
  size_t line = 1;
  for (size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') ++line;
  }
  return line;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

AugmentConfig parse_augment(const json& j) {
  detail::check_keys(j,
                     {"flip_probability", "rotation_factor", "zoom_factor",
                      "interpolation", "fill", "seed"},
                     "augment");
  AugmentConfig cfg;
  cfg.flip_probability = j.value("flip_probability", cfg.flip_probability);
  cfg.rotation_factor = j.value("rotation_factor", cfg.rotation_factor);
  cfg.zoom_factor = j.value("zoom_factor", cfg.zoom_factor);
  if (j.contains("interpolation") &&
      j.at("interpolation").get<std::string>() != "bilinear") {
    throw ConfigError("augment.interpolation: only 'bilinear' is supported");
  }
  if (j.contains("fill") && j.at("fill").get<std::string>() != "reflect") {
    throw ConfigError("augment.fill: only 'reflect' is supported");
  }
  if (j.contains("seed")) cfg.seed = j.at("seed").get<uint64_t>();
  if (cfg.flip_probability < 0.0 || cfg.flip_probability > 1.0) {
    throw ConfigError("augment.flip_probability must be in [0,1]");
  }
  if (cfg.rotation_factor < 0.0 || cfg.zoom_factor < 0.0) {
    throw ConfigError("augment factors must be >= 0");
  }
  return cfg;
}

}  // namespace

RunConfig parse_run_config(const std::string& text,
                           const fs::path& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error at line " +
                      std::to_string(line_of_offset(text, e.byte)) + ": " +
                      e.what());
  }

  detail::check_keys(
      root, {"dataset", "network", "augment", "split", "train", "seed",
             "output_dir"},
      "config");

  RunConfig cfg;
  const uint64_t default_seed =
      root.contains("seed") ? root.at("seed").get<uint64_t>() : 0;
  cfg.split.seed = default_seed;
  cfg.train.seed = default_seed;
  cfg.train.augment.seed = default_seed;

  if (!root.contains("dataset")) {
    throw ConfigError("config: missing 'dataset'");
  }
  {
    const json& j = root.at("dataset");
    detail::check_keys(j, {"root", "manifest"}, "dataset");
    if (j.contains("root") == j.contains("manifest")) {
      throw ConfigError(
          "dataset: provide exactly one of 'root' or 'manifest'");
    }
    if (j.contains("root")) {
      cfg.dataset_root = resolve(base_dir, j.at("root").get<std::string>());
      if (!fs::is_directory(cfg.dataset_root)) {
        throw ConfigError("dataset.root does not exist: " +
                          cfg.dataset_root.string());
      }
    } else {
      cfg.dataset_manifest =
          resolve(base_dir, j.at("manifest").get<std::string>());
      if (!fs::is_regular_file(cfg.dataset_manifest)) {
        throw ConfigError("dataset.manifest does not exist: " +
                          cfg.dataset_manifest.string());
      }
    }
  }

  if (!root.contains("network")) {
    throw ConfigError("config: missing 'network'");
  }
  {
    const json& j = root.at("network");
    detail::check_keys(j, {"preset", "spec"}, "network");
    if (j.contains("preset") == j.contains("spec")) {
      throw ConfigError("network: provide exactly one of 'preset' or 'spec'");
    }
    if (j.contains("preset")) {
      cfg.preset = j.at("preset").get<std::string>();
      cfg.network = network_preset(cfg.preset);
    } else {
      cfg.preset = "inline";
      cfg.network = detail::network_spec_from_json(j.at("spec"),
                                                   "network.spec");
    }
  }

  if (root.contains("augment")) {
    const uint64_t seed = cfg.train.augment.seed;
    cfg.train.augment = parse_augment(root.at("augment"));
    if (!root.at("augment").contains("seed")) cfg.train.augment.seed = seed;
  }

  if (root.contains("split")) {
    const json& j = root.at("split");
    detail::check_keys(j, {"train_fraction", "shuffle", "seed"}, "split");
    cfg.split.train_fraction =
        j.value("train_fraction", cfg.split.train_fraction);
    cfg.split.shuffle = j.value("shuffle", cfg.split.shuffle);
    if (j.contains("seed")) cfg.split.seed = j.at("seed").get<uint64_t>();
    if (!(cfg.split.train_fraction > 0.0 && cfg.split.train_fraction < 1.0)) {
      throw ConfigError("split.train_fraction must be in (0,1)");
    }
  }

  if (!root.contains("train")) {
    throw ConfigError("config: missing 'train'");
  }
  {
    const json& j = root.at("train");
    detail::check_keys(j,
                       {"epochs", "batch_size", "seed", "schedule",
                        "eval_every_epoch", "checkpoint"},
                       "train");
    if (!j.contains("schedule")) {
      throw ConfigError("train: missing 'schedule'");
    }
    cfg.train.schedule =
        detail::schedule_from_json(j.at("schedule"), "train.schedule");
    cfg.train.epochs = j.value(
        "epochs", schedule_total_epochs(cfg.train.schedule));
    if (cfg.train.epochs != schedule_total_epochs(cfg.train.schedule)) {
      throw ConfigError("train.epochs must equal the schedule total");
    }
    cfg.train.batch_size = j.value("batch_size", cfg.train.batch_size);
    if (cfg.train.batch_size < 1) {
      throw ConfigError("train.batch_size must be >= 1");
    }
    if (j.contains("seed")) cfg.train.seed = j.at("seed").get<uint64_t>();
    cfg.train.eval_every_epoch =
        j.value("eval_every_epoch", cfg.train.eval_every_epoch);
    if (j.contains("checkpoint")) {
      cfg.train.checkpoint_path =
          resolve(base_dir, j.at("checkpoint").get<std::string>());
    }
  }

  if (root.contains("output_dir")) {
    cfg.output_dir = resolve(base_dir, root.at("output_dir").get<std::string>());
  }
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config: " + path.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_run_config(buf.str(), path.parent_path());
}

void apply_seed(RunConfig& cfg, uint64_t seed) {
  cfg.split.seed = seed;
  cfg.train.seed = seed;
  cfg.train.augment.seed = seed;
}

}  // namespace dsc
