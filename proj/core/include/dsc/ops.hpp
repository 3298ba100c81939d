#pragma once

#include <functional>
#include <span>

#include "dsc/tape.hpp"
#include "dsc/tensor.hpp"

namespace dsc {

enum class Padding { kSame, kValid };

// Output extent and begin/end padding for one spatial dimension.
// Same padding follows the ceil rule and puts the extra pixel at the
// bottom/right, which is what maps 300 -> 150 with a 3x3 stride-2 kernel.
struct PadSpec {
  int64_t out = 0;
  int64_t begin = 0;
  int64_t end = 0;
};
PadSpec pad_spec(int64_t in, int64_t kernel, int64_t stride, Padding padding);

namespace ops {

// All ops allocate their output, run the forward kernel, and, when `tape`
// is non-null and an input requires grad, record one backward closure.
// Loops are fixed-order and single-threaded; results are bit-deterministic.

// input [N,H,W,Cin], kernel [kh,kw,Cin,Cout], bias [Cout] or nullptr.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel,
                 const Tensor<T>* bias, int stride, Padding padding,
                 Tape<T>* tape = nullptr);

// input [N,H,W,C], kernel [kh,kw,C]; one filter per channel, no mixing.
template <typename T>
Tensor<T> depthwise_conv2d(const Tensor<T>& input, const Tensor<T>& kernel,
                           int stride, Padding padding,
                           Tape<T>* tape = nullptr);

// [N,H,W,C] -> [N,C], arithmetic mean over the spatial window.
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& input, Tape<T>* tape = nullptr);

// input [N,F], weight [F,K], bias [K] -> [N,K].
template <typename T>
Tensor<T> dense(const Tensor<T>& input, const Tensor<T>& weight,
                const Tensor<T>& bias, Tape<T>* tape = nullptr);

template <typename T>
Tensor<T> relu(const Tensor<T>& x, Tape<T>* tape = nullptr);

template <typename T>
Tensor<T> relu6(const Tensor<T>& x, Tape<T>* tape = nullptr);

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x, Tape<T>* tape = nullptr);

// Row softmax over [N,K] with max subtraction; rows sum to 1.
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits, Tape<T>* tape = nullptr);

// Elementwise helpers (same shape both sides).
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b, Tape<T>* tape = nullptr);

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b, Tape<T>* tape = nullptr);

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T c, Tape<T>* tape = nullptr);

template <typename T>
Tensor<T> sum(const Tensor<T>& x, Tape<T>* tape = nullptr);

// x [N,H,W,C] scaled per channel by gates s [N,C]; the excitation step of
// squeeze-and-excitation.
template <typename T>
Tensor<T> scale_channels(const Tensor<T>& x, const Tensor<T>& s,
                         Tape<T>* tape = nullptr);

enum class BatchNormMode { kTrain, kInference };

// Per-channel batch normalization over [N,H,W,C] (or [N,C]).
// Train mode uses batch statistics and folds them into running_mean/var
// with the given momentum; inference mode reads the running statistics.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& input, const Tensor<T>& gamma,
                     const Tensor<T>& beta, Tensor<T>& running_mean,
                     Tensor<T>& running_var, BatchNormMode mode, T epsilon,
                     T momentum, Tape<T>* tape = nullptr);

}  // namespace ops

// Scalar-valued tensor function: records on the tape when given one.
template <typename T>
using ScalarFn = std::function<Tensor<T>(Tensor<T>& x, Tape<T>* tape)>;

// Central-difference gradient check. Runs f once under a tape to get the
// analytic gradient of x, then perturbs every element of x by +-step and
// returns max over elements of |analytic - numeric| / max(1,|a|,|n|).
template <typename T>
T finite_diff_check(const ScalarFn<T>& f, Tensor<T>& x, T step);

}  // namespace dsc
