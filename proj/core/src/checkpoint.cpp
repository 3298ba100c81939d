#include "dsc/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "dsc/error.hpp"
#include "spec_json.hpp"

namespace dsc {

namespace {

constexpr uint32_t kDsqcVersion = 1;

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is, const std::filesystem::path& path) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) {
    throw CheckpointError("truncated checkpoint: " + path.string());
  }
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const Network<float>& network,
                     const std::vector<std::string>& classes,
                     const std::map<std::string, std::string>& metadata) {
  using nlohmann::json;
  json params = json::array();
  uint64_t offset = 0;
  for (const auto& e : network.params().entries()) {
    params.push_back({{"name", e.name},
                      {"shape", e.tensor.shape().dims()},
                      {"trainable", e.trainable},
                      {"offset", offset}});
    offset += static_cast<uint64_t>(e.tensor.numel()) * 4;
  }
  json header = {{"format_version", kDsqcVersion},
                 {"spec", detail::network_spec_to_json(network.spec())},
                 {"seed", network.init_seed()},
                 {"classes", classes},
                 {"metadata", metadata},
                 {"params", params}};
  const std::string header_text = header.dump();

  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for write: " + path.string());
  os.write("DSQC", 4);
  put_u32(os, kDsqcVersion);
  put_u32(os, static_cast<uint32_t>(header_text.size()));
  os.write(header_text.data(),
           static_cast<std::streamsize>(header_text.size()));
  static_assert(sizeof(float) == 4);
  for (const auto& e : network.params().entries()) {
    for (float v : e.tensor.values()) {
      uint32_t bits;
      std::memcpy(&bits, &v, 4);
      put_u32(os, bits);
    }
  }
  if (!os) throw IoError("write failed: " + path.string());
}

Network<float> load_checkpoint(const std::filesystem::path& path,
                               CheckpointMeta* meta) {
  using nlohmann::json;
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint: " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "DSQC", 4) != 0) {
    throw CheckpointError("not a DSQC checkpoint: " + path.string());
  }
  const uint32_t version = get_u32(is, path);
  if (version != kDsqcVersion) {
    throw CheckpointError("unsupported checkpoint version " +
                          std::to_string(version) + ": " + path.string());
  }
  const uint32_t header_len = get_u32(is, path);
  std::string header_text(header_len, '\0');
  if (!is.read(header_text.data(), header_len)) {
    throw CheckpointError("truncated checkpoint header: " + path.string());
  }

  json header;
  try {
    header = json::parse(header_text);
  } catch (const json::parse_error& e) {
    throw CheckpointError("corrupt checkpoint header: " + path.string() +
                          " (" + e.what() + ")");
  }

  NetworkSpec spec;
  uint64_t seed = 0;
  std::vector<std::string> classes;
  std::map<std::string, std::string> metadata;
  try {
    spec = detail::network_spec_from_json(header.at("spec"), "checkpoint");
    seed = header.at("seed").get<uint64_t>();
    classes = header.at("classes").get<std::vector<std::string>>();
    if (header.contains("metadata")) {
      metadata =
          header.at("metadata").get<std::map<std::string, std::string>>();
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError("bad checkpoint header: " + path.string() + " (" +
                          e.what() + ")");
  }

  Network<float> network(spec, seed);
  auto& entries = network.params().entries();
  const json& params = header.at("params");
  if (params.size() != entries.size()) {
    throw CheckpointError("checkpoint parameter count " +
                          std::to_string(params.size()) +
                          " does not match network (" +
                          std::to_string(entries.size()) + ")");
  }
  for (size_t i = 0; i < entries.size(); ++i) {
    const json& p = params[i];
    if (p.at("name").get<std::string>() != entries[i].name) {
      throw CheckpointError("checkpoint parameter " +
                            p.at("name").get<std::string>() +
                            " does not match network parameter " +
                            entries[i].name);
    }
    const auto dims = p.at("shape").get<std::vector<int64_t>>();
    if (Shape(dims) != entries[i].tensor.shape()) {
      throw CheckpointError("checkpoint shape mismatch for " +
                            entries[i].name);
    }
    for (float& v : entries[i].tensor.values()) {
      const uint32_t bits = get_u32(is, path);
      std::memcpy(&v, &bits, 4);
    }
  }

  if (meta) {
    meta->spec = spec;
    meta->init_seed = seed;
    meta->classes = std::move(classes);
    meta->metadata = std::move(metadata);
  }
  return network;
}

}  // namespace dsc
