#include "dsc/network.hpp"

#include <sstream>

#include "dsc/error.hpp"

namespace dsc {

void validate_network_spec(const NetworkSpec& spec) {
  if (spec.input_h < 1 || spec.input_w < 1 || spec.input_c < 1) {
    throw ConfigError("network spec: input size must be positive");
  }
  if (spec.stem_filters < 1) {
    throw ConfigError("network spec: stem filter count must be positive");
  }
  if (spec.stem_stride < 1) {
    throw ConfigError("network spec: stem stride must be positive");
  }
  if (spec.stages.empty()) {
    throw ConfigError("network spec: stage list is empty");
  }
  for (size_t i = 0; i < spec.stages.size(); ++i) {
    const MBConvSpec& s = spec.stages[i];
    const std::string where = "network spec: stage " + std::to_string(i + 1);
    if (s.expansion_factor != 1 && s.expansion_factor != 6) {
      throw ConfigError(where + ": expansion factor must be 1 or 6");
    }
    if (s.out_channels < 1) {
      throw ConfigError(where + ": output channels must be positive");
    }
    if (s.repeat < 1) {
      throw ConfigError(where + ": repeat count must be positive");
    }
    if (s.stride != 1 && s.stride != 2) {
      throw ConfigError(where + ": stride must be 1 or 2");
    }
    if (s.dw_kernel < 1 || s.dw_kernel % 2 == 0) {
      throw ConfigError(where + ": depthwise kernel must be odd");
    }
    if (!(s.se_ratio > 0.0 && s.se_ratio <= 1.0)) {
      throw ConfigError(where + ": se ratio must be in (0,1]");
    }
  }
  if (spec.head_channels < 1) {
    throw ConfigError("network spec: head channels must be positive");
  }
  if (spec.num_classes < 2) {
    throw ConfigError("network spec: need at least two classes");
  }
}

NetworkSpec network_preset(const std::string& name) {
  auto stages = [](std::vector<int> exp, std::vector<int64_t> ch,
                   std::vector<int> rep, std::vector<int> str) {
    std::vector<MBConvSpec> out;
    for (size_t i = 0; i < ch.size(); ++i) {
      MBConvSpec s;
      s.expansion_factor = exp[i];
      s.out_channels = ch[i];
      s.repeat = rep[i];
      s.stride = str[i];
      out.push_back(s);
    }
    return out;
  };

  NetworkSpec spec;
  spec.name = name;
  if (name == "fidelity-b3") {
    spec.input_h = spec.input_w = 300;
    spec.stem_filters = 40;
    spec.stages = stages({1, 6, 6, 6, 6, 6, 6}, {24, 32, 48, 96, 136, 232, 384},
                         {3, 3, 3, 5, 5, 5, 3}, {1, 2, 2, 2, 1, 2, 1});
    spec.head_channels = 1536;
    spec.extractor_frozen = true;
  } else if (name == "desk") {
    spec.input_h = spec.input_w = 64;
    spec.stem_filters = 8;
    spec.stages = stages({1, 6}, {8, 16}, {1, 1}, {1, 2});
    spec.head_channels = 32;
    spec.extractor_frozen = false;
  } else if (name == "b1-like") {
    spec.input_h = spec.input_w = 240;
    spec.stem_filters = 32;
    spec.stages = stages({1, 6, 6, 6, 6, 6, 6}, {16, 24, 40, 80, 112, 192, 320},
                         {2, 3, 3, 4, 4, 5, 2}, {1, 2, 2, 2, 1, 2, 1});
    spec.head_channels = 1280;
    spec.extractor_frozen = true;
  } else if (name == "b2-like") {
    spec.input_h = spec.input_w = 260;
    spec.stem_filters = 32;
    spec.stages = stages({1, 6, 6, 6, 6, 6, 6}, {16, 24, 48, 88, 120, 208, 352},
                         {2, 3, 3, 4, 4, 5, 2}, {1, 2, 2, 2, 1, 2, 1});
    spec.head_channels = 1408;
    spec.extractor_frozen = true;
  } else {
    throw ConfigError("unknown network preset: " + name);
  }
  spec.num_classes = 5;
  validate_network_spec(spec);
  return spec;
}

std::vector<std::string> network_preset_names() {
  return {"fidelity-b3", "desk", "b1-like", "b2-like"};
}

template <typename T>
Network<T>::Network(NetworkSpec spec, uint64_t init_seed)
    : spec_(std::move(spec)), init_seed_(init_seed) {
  validate_network_spec(spec_);
  Rng rng(init_seed_);
  const bool extractor_trainable = !spec_.extractor_frozen;

  stem_conv_ = Conv2dLayer<T>(store_, rng, "stem.conv", 3, 3, spec_.input_c,
                              spec_.stem_filters, spec_.stem_stride,
                              Padding::kSame, extractor_trainable);
  stem_bn_ = BatchNormLayer<T>(store_, rng, "stem.bn", spec_.stem_filters,
                               extractor_trainable);

  int64_t channels = spec_.stem_filters;
  for (size_t si = 0; si < spec_.stages.size(); ++si) {
    const MBConvSpec& stage = spec_.stages[si];
    std::vector<MBConvBlock<T>> blocks;
    for (int bi = 0; bi < stage.repeat; ++bi) {
      const int stride = bi == 0 ? stage.stride : 1;
      const int64_t c_in = channels;
      const int64_t reduced = se_reduced_width(c_in, stage.se_ratio);
      std::ostringstream prefix;
      prefix << "stage" << (si + 1) << ".block" << (bi + 1);
      blocks.emplace_back(store_, rng, prefix.str(), c_in, stage.out_channels,
                          stage.expansion_factor, stage.dw_kernel, stride,
                          reduced, extractor_trainable);
      channels = stage.out_channels;
    }
    stages_.push_back(std::move(blocks));
  }

  head_conv_ = Conv2dLayer<T>(store_, rng, "head.conv", 1, 1, channels,
                              spec_.head_channels, 1, Padding::kSame,
                              extractor_trainable);
  head_bn_ = BatchNormLayer<T>(store_, rng, "head.bn", spec_.head_channels,
                               extractor_trainable);
  classifier_ = DenseLayer<T>(store_, rng, "classifier", spec_.head_channels,
                              spec_.num_classes, /*trainable=*/true);
}

template <typename T>
void Network<T>::check_input(const Tensor<T>& batch) const {
  if (batch.rank() != 4 || batch.dim(1) != spec_.input_h ||
      batch.dim(2) != spec_.input_w || batch.dim(3) != spec_.input_c) {
    throw ShapeError("network expects input (N," +
                     std::to_string(spec_.input_h) + "," +
                     std::to_string(spec_.input_w) + "," +
                     std::to_string(spec_.input_c) + "), got " +
                     batch.shape().str());
  }
}

template <typename T>
Tensor<T> Network<T>::run_extractor(
    const Context<T>& ctx, const Tensor<T>& batch,
    std::vector<std::pair<std::string, Shape>>* trace) const {
  check_input(batch);
  Tensor<T> h = stem_conv_.forward(ctx, batch);
  h = stem_bn_.forward(ctx, h);
  h = ops::relu6(h, ctx.tape);
  if (trace) trace->emplace_back("stem", h.shape());
  for (size_t si = 0; si < stages_.size(); ++si) {
    for (const MBConvBlock<T>& block : stages_[si]) {
      h = block.forward(ctx, h);
    }
    if (trace) {
      trace->emplace_back("stage" + std::to_string(si + 1), h.shape());
    }
  }
  h = head_conv_.forward(ctx, h);
  h = head_bn_.forward(ctx, h);
  h = ops::relu6(h, ctx.tape);
  if (trace) trace->emplace_back("head_conv", h.shape());
  return h;
}

template <typename T>
Tensor<T> Network<T>::forward_features(const Context<T>& ctx,
                                       const Tensor<T>& batch) const {
  Tensor<T> maps = run_extractor(ctx, batch, nullptr);
  return ops::global_avg_pool(maps, ctx.tape);
}

template <typename T>
Tensor<T> Network<T>::forward(const Context<T>& ctx,
                              const Tensor<T>& batch) const {
  Tensor<T> features = forward_features(ctx, batch);
  Tensor<T> logits = classifier_.forward(ctx, features);
  return ops::softmax(logits, ctx.tape);
}

template <typename T>
std::vector<std::pair<std::string, Shape>> Network<T>::forward_trace(
    const Tensor<T>& batch) const {
  Context<T> ctx;  // inference, no tape
  std::vector<std::pair<std::string, Shape>> trace;
  trace.emplace_back("input", batch.shape());
  Tensor<T> maps = run_extractor(ctx, batch, &trace);
  Tensor<T> features = ops::global_avg_pool<T>(maps, nullptr);
  trace.emplace_back("features", features.shape());
  Tensor<T> logits = classifier_.forward(ctx, features);
  Tensor<T> probs = ops::softmax<T>(logits, nullptr);
  trace.emplace_back("probabilities", probs.shape());
  return trace;
}

template <typename T>
std::vector<typename Network<T>::LayerRow> Network<T>::layer_table() const {
  // shape propagation without running tensors
  auto spatial = [](int64_t in, int64_t k, int stride) {
    return pad_spec(in, k, stride, Padding::kSame).out;
  };
  auto shape4 = [](int64_t h, int64_t w, int64_t c) {
    std::ostringstream os;
    os << "(None, " << h << ", " << w << ", " << c << ")";
    return os.str();
  };
  auto count_prefix = [this](const std::string& prefix) {
    int64_t n = 0;
    for (const auto& e : store_.entries()) {
      if (e.name.rfind(prefix, 0) == 0) n += e.tensor.numel();
    }
    return n;
  };

  std::vector<LayerRow> rows;
  int64_t h = spec_.input_h, w = spec_.input_w;
  rows.push_back({"input", shape4(h, w, spec_.input_c), 0});
  h = spatial(h, 3, spec_.stem_stride);
  w = spatial(w, 3, spec_.stem_stride);
  rows.push_back({"stem", shape4(h, w, spec_.stem_filters),
                  count_prefix("stem.")});
  for (size_t si = 0; si < spec_.stages.size(); ++si) {
    const MBConvSpec& stage = spec_.stages[si];
    h = spatial(h, stage.dw_kernel, stage.stride);
    w = spatial(w, stage.dw_kernel, stage.stride);
    const std::string name = "stage" + std::to_string(si + 1);
    rows.push_back({name, shape4(h, w, stage.out_channels),
                    count_prefix(name + ".")});
  }
  rows.push_back({"head_conv", shape4(h, w, spec_.head_channels),
                  count_prefix("head.")});
  rows.push_back({"global_avg_pool",
                  "(None, " + std::to_string(spec_.head_channels) + ")", 0});
  rows.push_back({"dense",
                  "(None, " + std::to_string(spec_.num_classes) + ")",
                  count_prefix("classifier.")});
  return rows;
}

template class Network<float>;
template class Network<double>;

}  // namespace dsc
