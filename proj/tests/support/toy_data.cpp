#include "toy_data.hpp"

#include <unistd.h>

#include <algorithm>
#include <fstream>

#include "dsc/rng.hpp"

namespace dsc_test {

namespace fs = std::filesystem;

const std::vector<std::string>& toy_class_names() {
  static const std::vector<std::string> names = {"blight", "mold", "rot",
                                                 "rust", "spot"};
  return names;
}

namespace {

struct Color {
  int r, g, b;
};

// Far-apart anchors; color survives every augmentation in the chain.
const Color kAnchors[5] = {
    {205, 40, 40}, {40, 205, 40}, {45, 45, 205}, {205, 205, 40},
    {150, 40, 205}};

void write_ppm(const fs::path& path, const std::vector<unsigned char>& rgb,
               int hw) {
  std::ofstream os(path, std::ios::binary);
  os << "P6\n" << hw << " " << hw << "\n255\n";
  os.write(reinterpret_cast<const char*>(rgb.data()),
           static_cast<std::streamsize>(rgb.size()));
}

}  // namespace

void write_toy_dataset(const fs::path& dir, int total, int hw,
                       uint64_t seed) {
  const auto& names = toy_class_names();
  for (const std::string& name : names) {
    fs::create_directories(dir / name);
  }
  dsc::Rng rng(seed);
  for (int i = 0; i < total; ++i) {
    const int cls = i % static_cast<int>(names.size());
    const Color anchor = kAnchors[cls];
    std::vector<unsigned char> rgb(static_cast<size_t>(hw) * hw * 3);
    for (size_t p = 0; p < rgb.size(); p += 3) {
      const int noise_r = static_cast<int>(rng.uniform(-28.0, 28.0));
      const int noise_g = static_cast<int>(rng.uniform(-28.0, 28.0));
      const int noise_b = static_cast<int>(rng.uniform(-28.0, 28.0));
      rgb[p + 0] = static_cast<unsigned char>(
          std::clamp(anchor.r + noise_r, 0, 255));
      rgb[p + 1] = static_cast<unsigned char>(
          std::clamp(anchor.g + noise_g, 0, 255));
      rgb[p + 2] = static_cast<unsigned char>(
          std::clamp(anchor.b + noise_b, 0, 255));
    }
    char name[32];
    std::snprintf(name, sizeof(name), "img_%04d.ppm", i);
    write_ppm(dir / names[static_cast<size_t>(cls)] / name, rgb, hw);
  }
}

fs::path make_temp_dir(const std::string& tag) {
  static int counter = 0;
  const fs::path dir = fs::temp_directory_path() /
                       ("dsc_test_" + tag + "_" + std::to_string(counter++) +
                        "_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

}  // namespace dsc_test
