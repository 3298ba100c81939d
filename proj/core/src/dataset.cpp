#include "dsc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "dsc/error.hpp"
#include "dsc/rng.hpp"

namespace dsc {

namespace fs = std::filesystem;

ScanResult scan_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) {
    throw DataError("dataset root is not a directory: " + root.string());
  }
  std::vector<std::string> classes;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) {
      classes.push_back(entry.path().filename().string());
    }
  }
  std::sort(classes.begin(), classes.end());
  if (classes.empty()) {
    throw DataError("dataset root contains no class directories: " +
                    root.string());
  }

  ScanResult result;
  result.classes = classes;
  for (size_t k = 0; k < classes.size(); ++k) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(root / classes[k])) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
      result.warnings.push_back("class directory is empty: " + classes[k]);
      continue;
    }
    for (const fs::path& f : files) {
      result.samples.push_back(
          LabeledSample{f, static_cast<int>(k), classes[k]});
    }
  }
  return result;
}

ScanResult load_manifest(const fs::path& manifest) {
  std::ifstream is(manifest);
  if (!is) throw DataError("cannot open manifest: " + manifest.string());
  const fs::path base = manifest.parent_path();

  std::vector<std::pair<fs::path, std::string>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError("manifest line " + std::to_string(line_no) +
                      " has no tab separator: " + manifest.string());
    }
    fs::path p = line.substr(0, tab);
    if (p.is_relative()) p = base / p;
    rows.emplace_back(std::move(p), line.substr(tab + 1));
  }
  if (rows.empty()) {
    throw DataError("manifest is empty: " + manifest.string());
  }

  std::vector<std::string> classes;
  for (const auto& [path, cls] : rows) classes.push_back(cls);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  std::map<std::string, int> index;
  for (size_t k = 0; k < classes.size(); ++k) {
    index[classes[k]] = static_cast<int>(k);
  }

  ScanResult result;
  result.classes = classes;
  for (auto& [path, cls] : rows) {
    result.samples.push_back(LabeledSample{path, index[cls], cls});
  }
  return result;
}

DatasetSplit split_dataset(std::vector<LabeledSample> samples,
                           const SplitConfig& cfg) {
  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) {
    throw ConfigError("train fraction must be in (0,1)");
  }
  if (samples.size() < 2) {
    throw DataError("need at least two samples to split");
  }
  if (cfg.shuffle) {
    Rng rng(cfg.seed);
    rng.shuffle(samples);
  }
  const auto n = static_cast<int64_t>(samples.size());
  const auto train_n = static_cast<int64_t>(
      std::ceil(cfg.train_fraction * static_cast<double>(n)));
  DatasetSplit out;
  out.train.assign(samples.begin(), samples.begin() + train_n);
  out.validation.assign(samples.begin() + train_n, samples.end());
  return out;
}

namespace {

// Reads one PNM header token, skipping whitespace and # comments.
std::string pnm_token(std::istream& is, const fs::path& path) {
  std::string tok;
  int c;
  while ((c = is.get()) != EOF) {
    if (c == '#') {
      while ((c = is.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  if (tok.empty()) {
    throw DataError("truncated image header: " + path.string());
  }
  return tok;
}

int64_t pnm_int(std::istream& is, const fs::path& path) {
  const std::string tok = pnm_token(is, path);
  try {
    return std::stoll(tok);
  } catch (const std::exception&) {
    throw DataError("bad image header value '" + tok + "': " + path.string());
  }
}

}  // namespace

Tensor<float> decode_image(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open image: " + path.string());
  char m0 = 0, m1 = 0;
  is.get(m0);
  is.get(m1);
  if (m0 != 'P' || (m1 != '5' && m1 != '6')) {
    throw DataError("unsupported image format (want binary PPM/PGM): " +
                    path.string());
  }
  const bool gray = m1 == '5';
  const int64_t w = pnm_int(is, path);
  const int64_t h = pnm_int(is, path);
  const int64_t maxval = pnm_int(is, path);
  if (w < 1 || h < 1 || maxval < 1 || maxval > 255) {
    throw DataError("unsupported image dimensions or depth: " + path.string());
  }
  const int64_t channels_in = gray ? 1 : 3;
  const int64_t payload = w * h * channels_in;
  std::vector<unsigned char> raw(static_cast<size_t>(payload));
  if (!is.read(reinterpret_cast<char*>(raw.data()), payload)) {
    throw DataError("truncated image data: " + path.string());
  }

  const float scale = 255.0f / static_cast<float>(maxval);
  Tensor<float> out(Shape{h, w, 3});
  float* dst = out.data();
  for (int64_t i = 0; i < h * w; ++i) {
    if (gray) {
      const float v = static_cast<float>(raw[static_cast<size_t>(i)]) * scale;
      dst[i * 3 + 0] = v;
      dst[i * 3 + 1] = v;
      dst[i * 3 + 2] = v;
    } else {
      for (int64_t c = 0; c < 3; ++c) {
        dst[i * 3 + c] =
            static_cast<float>(raw[static_cast<size_t>(i * 3 + c)]) * scale;
      }
    }
  }
  return out;
}

Tensor<float> resize_bilinear(const Tensor<float>& image, int64_t out_h,
                              int64_t out_w) {
  if (image.rank() != 3) {
    throw ShapeError("resize expects [H,W,C], got " + image.shape().str());
  }
  if (out_h < 1 || out_w < 1) {
    throw UsageError("resize target must be at least 1x1");
  }
  const int64_t h = image.dim(0), w = image.dim(1), channels = image.dim(2);
  if (h == out_h && w == out_w) return image.clone();

  Tensor<float> out(Shape{out_h, out_w, channels});
  const float* src = image.data();
  float* dst = out.data();
  const double sy = static_cast<double>(h) / static_cast<double>(out_h);
  const double sx = static_cast<double>(w) / static_cast<double>(out_w);
  for (int64_t y = 0; y < out_h; ++y) {
    // half-pixel centers, clamped to the edges
    double fy = (static_cast<double>(y) + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(h - 1));
    const int64_t y0 = static_cast<int64_t>(fy);
    const int64_t y1 = std::min(y0 + 1, h - 1);
    const double wy = fy - static_cast<double>(y0);
    for (int64_t x = 0; x < out_w; ++x) {
      double fx = (static_cast<double>(x) + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(w - 1));
      const int64_t x0 = static_cast<int64_t>(fx);
      const int64_t x1 = std::min(x0 + 1, w - 1);
      const double wx = fx - static_cast<double>(x0);
      float* orow = dst + (y * out_w + x) * channels;
      for (int64_t c = 0; c < channels; ++c) {
        const double v00 = src[(y0 * w + x0) * channels + c];
        const double v01 = src[(y0 * w + x1) * channels + c];
        const double v10 = src[(y1 * w + x0) * channels + c];
        const double v11 = src[(y1 * w + x1) * channels + c];
        const double top = v00 + (v01 - v00) * wx;
        const double bot = v10 + (v11 - v10) * wx;
        orow[c] = static_cast<float>(top + (bot - top) * wy);
      }
    }
  }
  return out;
}

BatchLoader::BatchLoader(std::vector<LabeledSample> samples, BatchPlan plan,
                         int64_t target_h, int64_t target_w, uint64_t seed,
                         bool cache)
    : samples_(std::move(samples)),
      plan_(plan),
      target_h_(target_h),
      target_w_(target_w),
      seed_(seed),
      cache_enabled_(cache) {
  if (plan_.batch_size < 1) {
    throw ConfigError("batch size must be at least 1");
  }
}

int64_t BatchLoader::batch_count() const {
  const auto n = static_cast<int64_t>(samples_.size());
  if (plan_.drop_last) return n / plan_.batch_size;
  return (n + plan_.batch_size - 1) / plan_.batch_size;
}

const Tensor<float>& BatchLoader::image(int64_t sample_index) {
  if (cache_enabled_) {
    auto it = cache_.find(sample_index);
    if (it != cache_.end()) return it->second;
  }
  ++file_reads_;
  Tensor<float> img =
      decode_image(samples_[static_cast<size_t>(sample_index)].image_path);
  img = resize_bilinear(img, target_h_, target_w_);
  if (!cache_enabled_) {
    scratch_slot_ = std::move(img);
    return scratch_slot_;
  }
  return cache_.emplace(sample_index, std::move(img)).first->second;
}

BatchLoader::Epoch BatchLoader::epoch(int epoch_index) {
  std::vector<int64_t> order;
  const auto n = static_cast<int64_t>(samples_.size());
  if (plan_.epoch_shuffle) {
    order = Rng(seed_).fork("batches").fork(
        static_cast<uint64_t>(epoch_index)).permutation(n);
  } else {
    order.resize(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  }
  return Epoch(this, std::move(order));
}

std::optional<Batch> BatchLoader::Epoch::next() {
  const auto n = static_cast<int64_t>(order_.size());
  if (pos_ >= n) return std::nullopt;
  const int64_t bs = loader_->plan_.batch_size;
  int64_t count = std::min<int64_t>(bs, n - pos_);
  if (loader_->plan_.drop_last && count < bs) return std::nullopt;

  const int64_t h = loader_->target_h_, w = loader_->target_w_;
  Batch batch;
  batch.images = Tensor<float>(Shape{count, h, w, 3});
  batch.labels.resize(static_cast<size_t>(count));
  float* dst = batch.images.data();
  const int64_t image_len = h * w * 3;
  for (int64_t i = 0; i < count; ++i) {
    const int64_t idx = order_[static_cast<size_t>(pos_ + i)];
    const Tensor<float>& img = loader_->image(idx);
    std::copy(img.data(), img.data() + image_len, dst + i * image_len);
    batch.labels[static_cast<size_t>(i)] =
        loader_->samples_[static_cast<size_t>(idx)].class_index;
  }
  pos_ += count;
  return batch;
}

}  // namespace dsc
