#pragma once

#include <filesystem>
#include <string>

#include "dsc/dataset.hpp"
#include "dsc/trainer.hpp"

namespace dsc {

// Declarative description of one run: dataset, network, augmentation,
// split and training schedule. Loaded from a JSON file; unknown keys are
// rejected and parse failures report the line number.
struct RunConfig {
  std::filesystem::path dataset_root;      // exactly one of root/manifest
  std::filesystem::path dataset_manifest;
  NetworkSpec network;
  std::string preset;  // preset name, or "inline"
  SplitConfig split;
  TrainConfig train;   // includes the augment config
  std::filesystem::path output_dir;
};

// Parses config text. Relative paths resolve against base_dir; referenced
// dataset paths must exist.
RunConfig parse_run_config(const std::string& text,
                           const std::filesystem::path& base_dir);

RunConfig load_run_config(const std::filesystem::path& path);

// Points every seeded component (split, augment, training) at one value.
void apply_seed(RunConfig& cfg, uint64_t seed);

}  // namespace dsc
