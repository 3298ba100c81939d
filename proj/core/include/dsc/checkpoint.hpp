#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dsc/network.hpp"

namespace dsc {

struct CheckpointMeta {
  NetworkSpec spec;
  uint64_t init_seed = 0;
  std::vector<std::string> classes;
  std::map<std::string, std::string> metadata;
};

// Checkpoint format "DSQC": magic `DSQC`, u32 LE version, u32 LE header
// length, UTF-8 JSON header (network spec, class roster, seed, metadata,
// parameter index with byte offsets), then concatenated little-endian f32
// payloads. Same inputs always produce the same bytes.
void save_checkpoint(const std::filesystem::path& path,
                     const Network<float>& network,
                     const std::vector<std::string>& classes,
                     const std::map<std::string, std::string>& metadata = {});

// Rebuilds the network from the stored spec and restores every parameter
// bit-exactly. Throws CheckpointError on malformed or inconsistent files.
Network<float> load_checkpoint(const std::filesystem::path& path,
                               CheckpointMeta* meta = nullptr);

}  // namespace dsc
