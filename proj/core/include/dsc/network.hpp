#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dsc/layers.hpp"

namespace dsc {

// One stage of mobile inverted bottleneck blocks. The stride applies to the
// first block of the stage; repeats run at stride 1.
struct MBConvSpec {
  int expansion_factor = 6;  // 1 or 6 in the shipped presets
  int64_t out_channels = 0;
  int repeat = 1;
  int stride = 1;
  int dw_kernel = 3;
  double se_ratio = 0.25;  // of the block's input channels
};

struct NetworkSpec {
  std::string name = "custom";
  int64_t input_h = 300;
  int64_t input_w = 300;
  int64_t input_c = 3;
  int64_t stem_filters = 40;  // 3x3 kernel
  int stem_stride = 2;
  std::vector<MBConvSpec> stages;
  int64_t head_channels = 1536;  // final 1x1 convolution width
  int64_t num_classes = 5;
  bool extractor_frozen = false;
};

// Throws ConfigError on an invalid stage list or non-positive dimensions.
void validate_network_spec(const NetworkSpec& spec);

// Shipped presets: "fidelity-b3", "desk", "b1-like", "b2-like".
NetworkSpec network_preset(const std::string& name);
std::vector<std::string> network_preset_names();

// The full model: stem convolution, MBConv stages, 1x1 head convolution,
// global average pool, dense classifier, softmax. Input is expected
// rescaled to [0,1]; augmentation and normalization happen upstream.
template <typename T>
class Network {
 public:
  Network(NetworkSpec spec, uint64_t init_seed);

  const NetworkSpec& spec() const { return spec_; }
  uint64_t init_seed() const { return init_seed_; }
  ParameterStore<T>& params() { return store_; }
  const ParameterStore<T>& params() const { return store_; }

  // Class probabilities [N, num_classes]; rows sum to 1.
  Tensor<T> forward(const Context<T>& ctx, const Tensor<T>& batch) const;

  // Pooled pre-classifier features [N, head_channels].
  Tensor<T> forward_features(const Context<T>& ctx,
                             const Tensor<T>& batch) const;

  // Forward pass that also reports the shape after each component
  // (stem, each stage, head conv, features, probabilities).
  std::vector<std::pair<std::string, Shape>> forward_trace(
      const Tensor<T>& batch) const;

  struct LayerRow {
    std::string name;
    std::string output_shape;  // Keras-style, e.g. "(None, 5)"
    int64_t param_count = 0;
  };
  // Summary table for the inspect command.
  std::vector<LayerRow> layer_table() const;

 private:
  Tensor<T> run_extractor(
      const Context<T>& ctx, const Tensor<T>& batch,
      std::vector<std::pair<std::string, Shape>>* trace) const;
  void check_input(const Tensor<T>& batch) const;

  NetworkSpec spec_;
  uint64_t init_seed_ = 0;
  ParameterStore<T> store_;
  Conv2dLayer<T> stem_conv_;
  BatchNormLayer<T> stem_bn_;
  std::vector<std::vector<MBConvBlock<T>>> stages_;
  Conv2dLayer<T> head_conv_;
  BatchNormLayer<T> head_bn_;
  DenseLayer<T> classifier_;
};

using NetworkF = Network<float>;
using NetworkD = Network<double>;

}  // namespace dsc
