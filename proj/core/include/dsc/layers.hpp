#pragma once

#include <cstdint>
#include <string>

#include "dsc/ops.hpp"
#include "dsc/params.hpp"
#include "dsc/rng.hpp"

namespace dsc {

// Per-call execution context. `tape` enables gradient recording; `training`
// selects batch-statistics mode for batch norm (frozen layers ignore it).
template <typename T>
struct Context {
  Tape<T>* tape = nullptr;
  bool training = false;
};

// Batch-norm constants used across the extractor. The momentum is sized
// for desk-scale runs: running statistics must converge within the ~65
// optimizer steps of a 5-epoch toy training, or inference-mode evaluation
// sees uncalibrated normalization.
inline constexpr double kBatchNormEpsilon = 1e-3;
inline constexpr double kBatchNormMomentum = 0.9;

template <typename T>
class Conv2dLayer {
 public:
  Conv2dLayer() = default;
  // kernel [kh,kw,cin,cout]; extractor convs carry no bias, batch norm
  // provides the shift.
  Conv2dLayer(ParameterStore<T>& store, Rng& rng, const std::string& prefix,
              int64_t kh, int64_t kw, int64_t c_in, int64_t c_out, int stride,
              Padding padding, bool trainable)
      : stride_(stride), padding_(padding) {
    kernel_ = store.create(prefix + ".kernel", Shape{kh, kw, c_in, c_out},
                           trainable, Init::kFanInUniform, kh * kw * c_in, rng);
  }

  Tensor<T> forward(const Context<T>& ctx, const Tensor<T>& x) const {
    return ops::conv2d<T>(x, kernel_, nullptr, stride_, padding_, ctx.tape);
  }

  const Tensor<T>& kernel() const { return kernel_; }

 private:
  Tensor<T> kernel_;
  int stride_ = 1;
  Padding padding_ = Padding::kSame;
};

template <typename T>
class DepthwiseConv2dLayer {
 public:
  DepthwiseConv2dLayer() = default;
  DepthwiseConv2dLayer(ParameterStore<T>& store, Rng& rng,
                       const std::string& prefix, int64_t k, int64_t channels,
                       int stride, bool trainable)
      : stride_(stride) {
    kernel_ = store.create(prefix + ".kernel", Shape{k, k, channels},
                           trainable, Init::kFanInUniform, k * k, rng);
  }

  Tensor<T> forward(const Context<T>& ctx, const Tensor<T>& x) const {
    return ops::depthwise_conv2d(x, kernel_, stride_, Padding::kSame,
                                 ctx.tape);
  }

 private:
  Tensor<T> kernel_;
  int stride_ = 1;
};

template <typename T>
class BatchNormLayer {
 public:
  BatchNormLayer() = default;
  BatchNormLayer(ParameterStore<T>& store, Rng& rng, const std::string& prefix,
                 int64_t channels, bool trainable)
      : trainable_(trainable) {
    gamma_ = store.create(prefix + ".gamma", Shape{channels}, trainable,
                          Init::kOnes, channels, rng);
    beta_ = store.create(prefix + ".beta", Shape{channels}, trainable,
                         Init::kZeros, channels, rng);
    // running statistics are folded, never optimized
    running_mean_ = store.create(prefix + ".running_mean", Shape{channels},
                                 false, Init::kZeros, channels, rng);
    running_var_ = store.create(prefix + ".running_var", Shape{channels},
                                false, Init::kOnes, channels, rng);
  }

  // Frozen layers normalize with running statistics even while the rest of
  // the model trains, and never update them.
  Tensor<T> forward(const Context<T>& ctx, const Tensor<T>& x) const {
    const auto mode = (ctx.training && trainable_)
                          ? ops::BatchNormMode::kTrain
                          : ops::BatchNormMode::kInference;
    return ops::batch_norm(x, gamma_, beta_, running_mean_, running_var_,
                           mode, static_cast<T>(kBatchNormEpsilon),
                           static_cast<T>(kBatchNormMomentum), ctx.tape);
  }

 private:
  Tensor<T> gamma_, beta_;
  mutable Tensor<T> running_mean_, running_var_;
  bool trainable_ = true;
};

template <typename T>
class DenseLayer {
 public:
  DenseLayer() = default;
  DenseLayer(ParameterStore<T>& store, Rng& rng, const std::string& prefix,
             int64_t features, int64_t units, bool trainable) {
    weight_ = store.create(prefix + ".weight", Shape{features, units},
                           trainable, Init::kFanInUniform, features, rng);
    bias_ = store.create(prefix + ".bias", Shape{units}, trainable,
                         Init::kZeros, features, rng);
  }

  Tensor<T> forward(const Context<T>& ctx, const Tensor<T>& x) const {
    return ops::dense(x, weight_, bias_, ctx.tape);
  }

 private:
  Tensor<T> weight_, bias_;
};

// Reduced width of the squeeze-and-excitation bottleneck.
inline int64_t se_reduced_width(int64_t channels, double ratio) {
  const auto w = static_cast<int64_t>(
      std::llround(static_cast<double>(channels) * ratio));
  return std::max<int64_t>(1, w);
}

// Channel attention: squeeze via global average pool, excite via a
// two-layer bottleneck, gate each channel with a sigmoid in (0,1).
template <typename T>
class SqueezeExciteLayer {
 public:
  SqueezeExciteLayer() = default;
  SqueezeExciteLayer(ParameterStore<T>& store, Rng& rng,
                     const std::string& prefix, int64_t channels,
                     int64_t reduced, bool trainable)
      : reduce_(store, rng, prefix + ".reduce", channels, reduced, trainable),
        expand_(store, rng, prefix + ".expand", reduced, channels, trainable) {
  }

  Tensor<T> forward(const Context<T>& ctx, const Tensor<T>& x) const {
    Tensor<T> squeezed = ops::global_avg_pool(x, ctx.tape);
    Tensor<T> gates = reduce_.forward(ctx, squeezed);
    gates = ops::relu(gates, ctx.tape);
    gates = expand_.forward(ctx, gates);
    gates = ops::sigmoid(gates, ctx.tape);
    return ops::scale_channels(x, gates, ctx.tape);
  }

 private:
  DenseLayer<T> reduce_, expand_;
};

// Mobile inverted bottleneck block: optional 1x1 expansion, depthwise
// convolution, squeeze-and-excitation, linear 1x1 projection, identity
// skip when the block preserves resolution and width.
template <typename T>
class MBConvBlock {
 public:
  MBConvBlock() = default;
  MBConvBlock(ParameterStore<T>& store, Rng& rng, const std::string& prefix,
              int64_t c_in, int64_t c_out, int expansion, int dw_kernel,
              int stride, int64_t se_reduced, bool trainable)
      : c_in_(c_in),
        c_out_(c_out),
        has_expand_(expansion > 1),
        use_residual_(stride == 1 && c_in == c_out) {
    const int64_t expanded = c_in * expansion;
    if (has_expand_) {
      expand_ = Conv2dLayer<T>(store, rng, prefix + ".expand", 1, 1, c_in,
                               expanded, 1, Padding::kSame, trainable);
      expand_bn_ = BatchNormLayer<T>(store, rng, prefix + ".expand_bn",
                                     expanded, trainable);
    }
    dw_ = DepthwiseConv2dLayer<T>(store, rng, prefix + ".dw", dw_kernel,
                                  expanded, stride, trainable);
    dw_bn_ =
        BatchNormLayer<T>(store, rng, prefix + ".dw_bn", expanded, trainable);
    se_ = SqueezeExciteLayer<T>(store, rng, prefix + ".se", expanded,
                                se_reduced, trainable);
    project_ = Conv2dLayer<T>(store, rng, prefix + ".project", 1, 1, expanded,
                              c_out, 1, Padding::kSame, trainable);
    project_bn_ = BatchNormLayer<T>(store, rng, prefix + ".project_bn", c_out,
                                    trainable);
  }

  Tensor<T> forward(const Context<T>& ctx, const Tensor<T>& x) const {
    if (x.rank() != 4 || x.dim(3) != c_in_) {
      throw ShapeError("mbconv block expects " + std::to_string(c_in_) +
                       " input channels, got " + x.shape().str());
    }
    Tensor<T> h = x;
    if (has_expand_) {
      h = expand_.forward(ctx, h);
      h = expand_bn_.forward(ctx, h);
      h = ops::relu6(h, ctx.tape);
    }
    h = dw_.forward(ctx, h);
    h = dw_bn_.forward(ctx, h);
    h = ops::relu6(h, ctx.tape);
    h = se_.forward(ctx, h);
    h = project_.forward(ctx, h);
    h = project_bn_.forward(ctx, h);  // linear bottleneck, no activation
    if (use_residual_) {
      h = ops::add(h, x, ctx.tape);
    }
    return h;
  }

  int64_t in_channels() const { return c_in_; }
  int64_t out_channels() const { return c_out_; }
  bool has_residual() const { return use_residual_; }

 private:
  int64_t c_in_ = 0, c_out_ = 0;
  bool has_expand_ = false, use_residual_ = false;
  Conv2dLayer<T> expand_;
  BatchNormLayer<T> expand_bn_;
  DepthwiseConv2dLayer<T> dw_;
  BatchNormLayer<T> dw_bn_;
  SqueezeExciteLayer<T> se_;
  Conv2dLayer<T> project_;
  BatchNormLayer<T> project_bn_;
};

}  // namespace dsc
