#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "dsc/tensor.hpp"

namespace dsc {

struct LabeledSample {
  std::filesystem::path image_path;
  int class_index = 0;
  std::string class_name;
};

struct ScanResult {
  std::vector<LabeledSample> samples;
  std::vector<std::string> classes;  // sorted; index = class_index
  std::vector<std::string> warnings;
};

// Expects <root>/<class_name>/<image files>. Classes are the sorted
// subdirectory names; files are visited in sorted path order.
ScanResult scan_dataset(const std::filesystem::path& root);

// Alternative ingestion: one `path<TAB>class` line per sample. Relative
// paths resolve against the manifest's directory.
ScanResult load_manifest(const std::filesystem::path& manifest);

struct SplitConfig {
  double train_fraction = 0.8;
  uint64_t seed = 0;
  bool shuffle = true;
};

struct DatasetSplit {
  std::vector<LabeledSample> train;
  std::vector<LabeledSample> validation;
};

// Seeded shuffle, then train takes ceil(train_fraction * N); the rounding
// that maps 5858 samples onto a 4687/1171 split.
DatasetSplit split_dataset(std::vector<LabeledSample> samples,
                           const SplitConfig& cfg);

// Decodes a PPM image (binary P6; P5 grayscale replicates to 3 channels)
// into an [H,W,3] tensor with values in [0,255].
Tensor<float> decode_image(const std::filesystem::path& path);

// Plain bilinear resize of an [H,W,3] image; aspect ratio not preserved.
Tensor<float> resize_bilinear(const Tensor<float>& image, int64_t out_h,
                              int64_t out_w);

struct BatchPlan {
  int batch_size = 32;
  bool drop_last = false;
  bool epoch_shuffle = true;
};

struct Batch {
  Tensor<float> images;  // [N,H,W,3], values in [0,255]
  std::vector<int> labels;
};

// Decodes, resizes and batches samples. Each epoch reshuffles with a
// substream of the seed, so a given (seed, epoch) pair always yields the
// same batch sequence. Decoded images are cached in memory after first
// use; file_reads() exposes the cache behavior to tests.
class BatchLoader {
 public:
  BatchLoader(std::vector<LabeledSample> samples, BatchPlan plan,
              int64_t target_h, int64_t target_w, uint64_t seed,
              bool cache = true);

  int64_t batch_count() const;
  int64_t sample_count() const { return static_cast<int64_t>(samples_.size()); }
  int64_t file_reads() const { return file_reads_; }

  class Epoch {
   public:
    // Returns batches in order until exhausted.
    std::optional<Batch> next();

   private:
    friend class BatchLoader;
    Epoch(BatchLoader* loader, std::vector<int64_t> order)
        : loader_(loader), order_(std::move(order)) {}
    BatchLoader* loader_;
    std::vector<int64_t> order_;
    int64_t pos_ = 0;
  };

  Epoch epoch(int epoch_index);

 private:
  const Tensor<float>& image(int64_t sample_index);

  std::vector<LabeledSample> samples_;
  BatchPlan plan_;
  int64_t target_h_, target_w_;
  uint64_t seed_;
  bool cache_enabled_;
  std::unordered_map<int64_t, Tensor<float>> cache_;
  Tensor<float> scratch_slot_;  // holds the last decode when caching is off
  int64_t file_reads_ = 0;
};

}  // namespace dsc
