#include "dsc/ops.hpp"

#include <algorithm>
#include <cmath>

namespace dsc {

PadSpec pad_spec(int64_t in, int64_t kernel, int64_t stride, Padding padding) {
  PadSpec p;
  if (padding == Padding::kSame) {
    p.out = (in + stride - 1) / stride;  // ceil(in/stride)
    const int64_t total = std::max<int64_t>(0, (p.out - 1) * stride + kernel - in);
    p.begin = total / 2;
    p.end = total - p.begin;  // extra pixel goes bottom/right
  } else {
    if (in < kernel) {
      throw ShapeError("valid convolution needs extent >= kernel, got extent " +
                       std::to_string(in) + " vs kernel " +
                       std::to_string(kernel));
    }
    p.out = (in - kernel) / stride + 1;
    p.begin = 0;
    p.end = 0;
  }
  return p;
}

namespace ops {
namespace {

template <typename T>
void check_rank(const Tensor<T>& t, int rank, const char* op, const char* arg) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": " + arg + " must have rank " +
                     std::to_string(rank) + ", got " + t.shape().str());
  }
}

template <typename T>
bool finite(T v) {
  return std::isfinite(static_cast<double>(v));
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel,
                 const Tensor<T>* bias, int stride, Padding padding,
                 Tape<T>* tape) {
  check_rank(input, 4, "conv2d", "input");
  check_rank(kernel, 4, "conv2d", "kernel");
  if (stride < 1) throw UsageError("conv2d stride must be >= 1");
  const int64_t n_batch = input.dim(0), in_h = input.dim(1),
                in_w = input.dim(2), c_in = input.dim(3);
  const int64_t k_h = kernel.dim(0), k_w = kernel.dim(1);
  if (kernel.dim(2) != c_in) {
    throw ShapeError("conv2d channel mismatch: input " + input.shape().str() +
                     " vs kernel " + kernel.shape().str());
  }
  const int64_t c_out = kernel.dim(3);
  if (bias && (bias->rank() != 1 || bias->dim(0) != c_out)) {
    throw ShapeError("conv2d bias shape " + bias->shape().str() +
                     " does not match kernel " + kernel.shape().str());
  }
  const PadSpec ph = pad_spec(in_h, k_h, stride, padding);
  const PadSpec pw = pad_spec(in_w, k_w, stride, padding);
  const int64_t out_h = ph.out, out_w = pw.out;

  Tensor<T> out(Shape{n_batch, out_h, out_w, c_out});
  {
    const T* in = input.data();
    const T* k = kernel.data();
    T* o = out.data();
    for (int64_t n = 0; n < n_batch; ++n) {
      for (int64_t oy = 0; oy < out_h; ++oy) {
        for (int64_t ox = 0; ox < out_w; ++ox) {
          T* orow = o + ((n * out_h + oy) * out_w + ox) * c_out;
          if (bias) {
            const T* b = bias->data();
            for (int64_t co = 0; co < c_out; ++co) orow[co] = b[co];
          }
          for (int64_t ky = 0; ky < k_h; ++ky) {
            const int64_t iy = oy * stride - ph.begin + ky;
            if (iy < 0 || iy >= in_h) continue;
            for (int64_t kx = 0; kx < k_w; ++kx) {
              const int64_t ix = ox * stride - pw.begin + kx;
              if (ix < 0 || ix >= in_w) continue;
              const T* irow = in + ((n * in_h + iy) * in_w + ix) * c_in;
              const T* krow = k + ((ky * k_w + kx) * c_in) * c_out;
              for (int64_t ci = 0; ci < c_in; ++ci) {
                const T iv = irow[ci];
                const T* kc = krow + ci * c_out;
                for (int64_t co = 0; co < c_out; ++co) {
                  orow[co] += iv * kc[co];
                }
              }
            }
          }
        }
      }
    }
  }
  out.throw_if_not_finite("conv2d");

  const bool needs_grad = input.requires_grad() || kernel.requires_grad() ||
                          (bias && bias->requires_grad());
  if (tape && needs_grad) {
    out.set_requires_grad(true);
    Tensor<T> in_t = input, k_t = kernel, out_t = out;
    Tensor<T> b_t = bias ? *bias : Tensor<T>();
    const int64_t s = stride;
    tape->record([=]() mutable {
      const std::vector<T>& go = out_t.grad();
      const T* gop = go.data();
      if (in_t.requires_grad()) {
        T* gi = in_t.grad().data();
        const T* k = k_t.data();
        for (int64_t n = 0; n < n_batch; ++n) {
          for (int64_t iy = 0; iy < in_h; ++iy) {
            for (int64_t ix = 0; ix < in_w; ++ix) {
              T* girow = gi + ((n * in_h + iy) * in_w + ix) * c_in;
              for (int64_t ky = 0; ky < k_h; ++ky) {
                const int64_t ty = iy + ph.begin - ky;
                if (ty < 0 || ty % s) continue;
                const int64_t oy = ty / s;
                if (oy >= out_h) continue;
                for (int64_t kx = 0; kx < k_w; ++kx) {
                  const int64_t tx = ix + pw.begin - kx;
                  if (tx < 0 || tx % s) continue;
                  const int64_t ox = tx / s;
                  if (ox >= out_w) continue;
                  const T* gorow = gop + ((n * out_h + oy) * out_w + ox) * c_out;
                  const T* krow = k + ((ky * k_w + kx) * c_in) * c_out;
                  for (int64_t ci = 0; ci < c_in; ++ci) {
                    const T* kc = krow + ci * c_out;
                    T acc = 0;
                    for (int64_t co = 0; co < c_out; ++co) {
                      acc += gorow[co] * kc[co];
                    }
                    girow[ci] += acc;
                  }
                }
              }
            }
          }
        }
      }
      if (k_t.requires_grad()) {
        T* gk = k_t.grad().data();
        const T* in = in_t.data();
        for (int64_t n = 0; n < n_batch; ++n) {
          for (int64_t oy = 0; oy < out_h; ++oy) {
            for (int64_t ox = 0; ox < out_w; ++ox) {
              const T* gorow = gop + ((n * out_h + oy) * out_w + ox) * c_out;
              for (int64_t ky = 0; ky < k_h; ++ky) {
                const int64_t iy = oy * s - ph.begin + ky;
                if (iy < 0 || iy >= in_h) continue;
                for (int64_t kx = 0; kx < k_w; ++kx) {
                  const int64_t ix = ox * s - pw.begin + kx;
                  if (ix < 0 || ix >= in_w) continue;
                  const T* irow = in + ((n * in_h + iy) * in_w + ix) * c_in;
                  T* gkrow = gk + ((ky * k_w + kx) * c_in) * c_out;
                  for (int64_t ci = 0; ci < c_in; ++ci) {
                    const T iv = irow[ci];
                    T* gkc = gkrow + ci * c_out;
                    for (int64_t co = 0; co < c_out; ++co) {
                      gkc[co] += iv * gorow[co];
                    }
                  }
                }
              }
            }
          }
        }
      }
      if (b_t.defined() && b_t.requires_grad()) {
        T* gb = b_t.grad().data();
        for (int64_t n = 0; n < n_batch; ++n) {
          for (int64_t oy = 0; oy < out_h; ++oy) {
            for (int64_t ox = 0; ox < out_w; ++ox) {
              const T* gorow = gop + ((n * out_h + oy) * out_w + ox) * c_out;
              for (int64_t co = 0; co < c_out; ++co) gb[co] += gorow[co];
            }
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> depthwise_conv2d(const Tensor<T>& input, const Tensor<T>& kernel,
                           int stride, Padding padding, Tape<T>* tape) {
  check_rank(input, 4, "depthwise_conv2d", "input");
  check_rank(kernel, 3, "depthwise_conv2d", "kernel");
  if (stride < 1) throw UsageError("depthwise_conv2d stride must be >= 1");
  const int64_t n_batch = input.dim(0), in_h = input.dim(1),
                in_w = input.dim(2), channels = input.dim(3);
  const int64_t k_h = kernel.dim(0), k_w = kernel.dim(1);
  if (kernel.dim(2) != channels) {
    throw ShapeError("depthwise_conv2d channel mismatch: input " +
                     input.shape().str() + " vs kernel " +
                     kernel.shape().str());
  }
  const PadSpec ph = pad_spec(in_h, k_h, stride, padding);
  const PadSpec pw = pad_spec(in_w, k_w, stride, padding);
  const int64_t out_h = ph.out, out_w = pw.out;

  Tensor<T> out(Shape{n_batch, out_h, out_w, channels});
  {
    const T* in = input.data();
    const T* k = kernel.data();
    T* o = out.data();
    for (int64_t n = 0; n < n_batch; ++n) {
      for (int64_t oy = 0; oy < out_h; ++oy) {
        for (int64_t ox = 0; ox < out_w; ++ox) {
          T* orow = o + ((n * out_h + oy) * out_w + ox) * channels;
          for (int64_t ky = 0; ky < k_h; ++ky) {
            const int64_t iy = oy * stride - ph.begin + ky;
            if (iy < 0 || iy >= in_h) continue;
            for (int64_t kx = 0; kx < k_w; ++kx) {
              const int64_t ix = ox * stride - pw.begin + kx;
              if (ix < 0 || ix >= in_w) continue;
              const T* irow = in + ((n * in_h + iy) * in_w + ix) * channels;
              const T* krow = k + (ky * k_w + kx) * channels;
              for (int64_t c = 0; c < channels; ++c) {
                orow[c] += irow[c] * krow[c];
              }
            }
          }
        }
      }
    }
  }
  out.throw_if_not_finite("depthwise_conv2d");

  if (tape && (input.requires_grad() || kernel.requires_grad())) {
    out.set_requires_grad(true);
    Tensor<T> in_t = input, k_t = kernel, out_t = out;
    const int64_t s = stride;
    tape->record([=]() mutable {
      const T* gop = out_t.grad().data();
      if (in_t.requires_grad()) {
        T* gi = in_t.grad().data();
        const T* k = k_t.data();
        for (int64_t n = 0; n < n_batch; ++n) {
          for (int64_t iy = 0; iy < in_h; ++iy) {
            for (int64_t ix = 0; ix < in_w; ++ix) {
              T* girow = gi + ((n * in_h + iy) * in_w + ix) * channels;
              for (int64_t ky = 0; ky < k_h; ++ky) {
                const int64_t ty = iy + ph.begin - ky;
                if (ty < 0 || ty % s) continue;
                const int64_t oy = ty / s;
                if (oy >= out_h) continue;
                for (int64_t kx = 0; kx < k_w; ++kx) {
                  const int64_t tx = ix + pw.begin - kx;
                  if (tx < 0 || tx % s) continue;
                  const int64_t ox = tx / s;
                  if (ox >= out_w) continue;
                  const T* gorow =
                      gop + ((n * out_h + oy) * out_w + ox) * channels;
                  const T* krow = k + (ky * k_w + kx) * channels;
                  for (int64_t c = 0; c < channels; ++c) {
                    girow[c] += gorow[c] * krow[c];
                  }
                }
              }
            }
          }
        }
      }
      if (k_t.requires_grad()) {
        T* gk = k_t.grad().data();
        const T* in = in_t.data();
        for (int64_t n = 0; n < n_batch; ++n) {
          for (int64_t oy = 0; oy < out_h; ++oy) {
            for (int64_t ox = 0; ox < out_w; ++ox) {
              const T* gorow = gop + ((n * out_h + oy) * out_w + ox) * channels;
              for (int64_t ky = 0; ky < k_h; ++ky) {
                const int64_t iy = oy * s - ph.begin + ky;
                if (iy < 0 || iy >= in_h) continue;
                for (int64_t kx = 0; kx < k_w; ++kx) {
                  const int64_t ix = ox * s - pw.begin + kx;
                  if (ix < 0 || ix >= in_w) continue;
                  const T* irow = in + ((n * in_h + iy) * in_w + ix) * channels;
                  T* gkrow = gk + (ky * k_w + kx) * channels;
                  for (int64_t c = 0; c < channels; ++c) {
                    gkrow[c] += irow[c] * gorow[c];
                  }
                }
              }
            }
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& input, Tape<T>* tape) {
  check_rank(input, 4, "global_avg_pool", "input");
  const int64_t n_batch = input.dim(0), in_h = input.dim(1),
                in_w = input.dim(2), channels = input.dim(3);
  const int64_t window = in_h * in_w;
  Tensor<T> out(Shape{n_batch, channels});
  {
    const T* in = input.data();
    T* o = out.data();
    for (int64_t n = 0; n < n_batch; ++n) {
      T* orow = o + n * channels;
      for (int64_t y = 0; y < in_h; ++y) {
        for (int64_t x = 0; x < in_w; ++x) {
          const T* irow = in + ((n * in_h + y) * in_w + x) * channels;
          for (int64_t c = 0; c < channels; ++c) orow[c] += irow[c];
        }
      }
      for (int64_t c = 0; c < channels; ++c) orow[c] /= static_cast<T>(window);
    }
  }
  if (tape && input.requires_grad()) {
    out.set_requires_grad(true);
    Tensor<T> in_t = input, out_t = out;
    tape->record([=]() mutable {
      const T* gop = out_t.grad().data();
      T* gi = in_t.grad().data();
      const T inv = T(1) / static_cast<T>(window);
      for (int64_t n = 0; n < n_batch; ++n) {
        const T* gorow = gop + n * channels;
        for (int64_t y = 0; y < in_h; ++y) {
          for (int64_t x = 0; x < in_w; ++x) {
            T* girow = gi + ((n * in_h + y) * in_w + x) * channels;
            for (int64_t c = 0; c < channels; ++c) girow[c] += gorow[c] * inv;
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> dense(const Tensor<T>& input, const Tensor<T>& weight,
                const Tensor<T>& bias, Tape<T>* tape) {
  check_rank(input, 2, "dense", "input");
  check_rank(weight, 2, "dense", "weight");
  check_rank(bias, 1, "dense", "bias");
  const int64_t n_batch = input.dim(0), features = input.dim(1);
  if (weight.dim(0) != features) {
    throw ShapeError("dense shape mismatch: input " + input.shape().str() +
                     " vs weight " + weight.shape().str());
  }
  const int64_t units = weight.dim(1);
  if (bias.dim(0) != units) {
    throw ShapeError("dense bias shape " + bias.shape().str() +
                     " does not match weight " + weight.shape().str());
  }
  Tensor<T> out(Shape{n_batch, units});
  {
    const T* in = input.data();
    const T* w = weight.data();
    const T* b = bias.data();
    T* o = out.data();
    for (int64_t n = 0; n < n_batch; ++n) {
      T* orow = o + n * units;
      for (int64_t k = 0; k < units; ++k) orow[k] = b[k];
      const T* irow = in + n * features;
      for (int64_t f = 0; f < features; ++f) {
        const T iv = irow[f];
        const T* wrow = w + f * units;
        for (int64_t k = 0; k < units; ++k) orow[k] += iv * wrow[k];
      }
    }
  }
  out.throw_if_not_finite("dense");

  if (tape && (input.requires_grad() || weight.requires_grad() ||
               bias.requires_grad())) {
    out.set_requires_grad(true);
    Tensor<T> in_t = input, w_t = weight, b_t = bias, out_t = out;
    tape->record([=]() mutable {
      const T* gop = out_t.grad().data();
      if (in_t.requires_grad()) {
        T* gi = in_t.grad().data();
        const T* w = w_t.data();
        for (int64_t n = 0; n < n_batch; ++n) {
          const T* gorow = gop + n * units;
          T* girow = gi + n * features;
          for (int64_t f = 0; f < features; ++f) {
            const T* wrow = w + f * units;
            T acc = 0;
            for (int64_t k = 0; k < units; ++k) acc += gorow[k] * wrow[k];
            girow[f] += acc;
          }
        }
      }
      if (w_t.requires_grad()) {
        T* gw = w_t.grad().data();
        const T* in = in_t.data();
        for (int64_t n = 0; n < n_batch; ++n) {
          const T* gorow = gop + n * units;
          const T* irow = in + n * features;
          for (int64_t f = 0; f < features; ++f) {
            const T iv = irow[f];
            T* gwrow = gw + f * units;
            for (int64_t k = 0; k < units; ++k) gwrow[k] += iv * gorow[k];
          }
        }
      }
      if (b_t.requires_grad()) {
        T* gb = b_t.grad().data();
        for (int64_t n = 0; n < n_batch; ++n) {
          const T* gorow = gop + n * units;
          for (int64_t k = 0; k < units; ++k) gb[k] += gorow[k];
        }
      }
    });
  }
  return out;
}

namespace {

// Shared scaffold for elementwise unary ops.
template <typename T, typename Fwd, typename Bwd>
Tensor<T> unary_op(const Tensor<T>& x, Tape<T>* tape, Fwd fwd, Bwd bwd) {
  Tensor<T> out(x.shape());
  const T* xp = x.data();
  T* op = out.data();
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) op[i] = fwd(xp[i]);
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    Tensor<T> x_t = x, out_t = out;
    tape->record([=]() mutable {
      const T* go = out_t.grad().data();
      const T* xv = x_t.data();
      const T* ov = out_t.data();
      T* gx = x_t.grad().data();
      for (int64_t i = 0; i < n; ++i) gx[i] += go[i] * bwd(xv[i], ov[i]);
    });
  }
  return out;
}

}  // namespace

template <typename T>
Tensor<T> relu(const Tensor<T>& x, Tape<T>* tape) {
  return unary_op(
      x, tape, [](T v) { return v > T(0) ? v : T(0); },
      [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> relu6(const Tensor<T>& x, Tape<T>* tape) {
  return unary_op(
      x, tape,
      [](T v) { return std::min(std::max(v, T(0)), T(6)); },
      [](T v, T) { return (v > T(0) && v < T(6)) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x, Tape<T>* tape) {
  return unary_op(
      x, tape,
      [](T v) {
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits, Tape<T>* tape) {
  check_rank(logits, 2, "softmax", "logits");
  const int64_t n_batch = logits.dim(0), classes = logits.dim(1);
  Tensor<T> out(logits.shape());
  {
    const T* in = logits.data();
    T* o = out.data();
    for (int64_t n = 0; n < n_batch; ++n) {
      const T* row = in + n * classes;
      T* orow = o + n * classes;
      T mx = row[0];
      for (int64_t k = 1; k < classes; ++k) mx = std::max(mx, row[k]);
      T total = 0;
      for (int64_t k = 0; k < classes; ++k) {
        orow[k] = std::exp(row[k] - mx);
        total += orow[k];
      }
      for (int64_t k = 0; k < classes; ++k) orow[k] /= total;
    }
  }
  out.throw_if_not_finite("softmax");
  if (tape && logits.requires_grad()) {
    out.set_requires_grad(true);
    Tensor<T> x_t = logits, out_t = out;
    tape->record([=]() mutable {
      const T* go = out_t.grad().data();
      const T* y = out_t.data();
      T* gx = x_t.grad().data();
      for (int64_t n = 0; n < n_batch; ++n) {
        const T* grow = go + n * classes;
        const T* yrow = y + n * classes;
        T* gxrow = gx + n * classes;
        T dot = 0;
        for (int64_t k = 0; k < classes; ++k) dot += grow[k] * yrow[k];
        for (int64_t k = 0; k < classes; ++k) {
          gxrow[k] += yrow[k] * (grow[k] - dot);
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b, Tape<T>* tape) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add shape mismatch: " + a.shape().str() + " vs " +
                     b.shape().str());
  }
  Tensor<T> out(a.shape());
  const T* ap = a.data();
  const T* bp = b.data();
  T* op = out.data();
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) op[i] = ap[i] + bp[i];
  if (tape && (a.requires_grad() || b.requires_grad())) {
    out.set_requires_grad(true);
    Tensor<T> a_t = a, b_t = b, out_t = out;
    tape->record([=]() mutable {
      const T* go = out_t.grad().data();
      if (a_t.requires_grad()) {
        T* ga = a_t.grad().data();
        for (int64_t i = 0; i < n; ++i) ga[i] += go[i];
      }
      if (b_t.requires_grad()) {
        T* gb = b_t.grad().data();
        for (int64_t i = 0; i < n; ++i) gb[i] += go[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b, Tape<T>* tape) {
  if (a.shape() != b.shape()) {
    throw ShapeError("mul shape mismatch: " + a.shape().str() + " vs " +
                     b.shape().str());
  }
  Tensor<T> out(a.shape());
  const T* ap = a.data();
  const T* bp = b.data();
  T* op = out.data();
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) op[i] = ap[i] * bp[i];
  if (tape && (a.requires_grad() || b.requires_grad())) {
    out.set_requires_grad(true);
    Tensor<T> a_t = a, b_t = b, out_t = out;
    tape->record([=]() mutable {
      const T* go = out_t.grad().data();
      if (a_t.requires_grad()) {
        T* ga = a_t.grad().data();
        const T* bv = b_t.data();
        for (int64_t i = 0; i < n; ++i) ga[i] += go[i] * bv[i];
      }
      if (b_t.requires_grad()) {
        T* gb = b_t.grad().data();
        const T* av = a_t.data();
        for (int64_t i = 0; i < n; ++i) gb[i] += go[i] * av[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T c, Tape<T>* tape) {
  return unary_op(
      x, tape, [c](T v) { return v * c; }, [c](T, T) { return c; });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x, Tape<T>* tape) {
  Tensor<T> out(Shape{1});
  const T* xp = x.data();
  T acc = 0;
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) acc += xp[i];
  out.values()[0] = acc;
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    Tensor<T> x_t = x, out_t = out;
    tape->record([=]() mutable {
      const T g = out_t.grad()[0];
      T* gx = x_t.grad().data();
      for (int64_t i = 0; i < n; ++i) gx[i] += g;
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale_channels(const Tensor<T>& x, const Tensor<T>& s,
                         Tape<T>* tape) {
  check_rank(x, 4, "scale_channels", "input");
  check_rank(s, 2, "scale_channels", "gates");
  const int64_t n_batch = x.dim(0), in_h = x.dim(1), in_w = x.dim(2),
                channels = x.dim(3);
  if (s.dim(0) != n_batch || s.dim(1) != channels) {
    throw ShapeError("scale_channels gate shape " + s.shape().str() +
                     " does not match input " + x.shape().str());
  }
  Tensor<T> out(x.shape());
  {
    const T* xp = x.data();
    const T* sp = s.data();
    T* op = out.data();
    for (int64_t n = 0; n < n_batch; ++n) {
      const T* srow = sp + n * channels;
      for (int64_t y = 0; y < in_h; ++y) {
        for (int64_t w = 0; w < in_w; ++w) {
          const int64_t base = ((n * in_h + y) * in_w + w) * channels;
          for (int64_t c = 0; c < channels; ++c) {
            op[base + c] = xp[base + c] * srow[c];
          }
        }
      }
    }
  }
  if (tape && (x.requires_grad() || s.requires_grad())) {
    out.set_requires_grad(true);
    Tensor<T> x_t = x, s_t = s, out_t = out;
    tape->record([=]() mutable {
      const T* go = out_t.grad().data();
      if (x_t.requires_grad()) {
        T* gx = x_t.grad().data();
        const T* sp = s_t.data();
        for (int64_t n = 0; n < n_batch; ++n) {
          const T* srow = sp + n * channels;
          for (int64_t y = 0; y < in_h; ++y) {
            for (int64_t w = 0; w < in_w; ++w) {
              const int64_t base = ((n * in_h + y) * in_w + w) * channels;
              for (int64_t c = 0; c < channels; ++c) {
                gx[base + c] += go[base + c] * srow[c];
              }
            }
          }
        }
      }
      if (s_t.requires_grad()) {
        T* gs = s_t.grad().data();
        const T* xp = x_t.data();
        for (int64_t n = 0; n < n_batch; ++n) {
          T* gsrow = gs + n * channels;
          for (int64_t y = 0; y < in_h; ++y) {
            for (int64_t w = 0; w < in_w; ++w) {
              const int64_t base = ((n * in_h + y) * in_w + w) * channels;
              for (int64_t c = 0; c < channels; ++c) {
                gsrow[c] += go[base + c] * xp[base + c];
              }
            }
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& input, const Tensor<T>& gamma,
                     const Tensor<T>& beta, Tensor<T>& running_mean,
                     Tensor<T>& running_var, BatchNormMode mode, T epsilon,
                     T momentum, Tape<T>* tape) {
  if (input.rank() != 4 && input.rank() != 2) {
    throw ShapeError("batch_norm input must have rank 2 or 4, got " +
                     input.shape().str());
  }
  const int64_t channels = input.dim(input.rank() - 1);
  const Tensor<T>* bn_params[] = {&gamma, &beta, &running_mean, &running_var};
  for (const Tensor<T>* t : bn_params) {
    if (t->rank() != 1 || t->dim(0) != channels) {
      throw ShapeError("batch_norm parameter shape " + t->shape().str() +
                       " does not match channel count " +
                       std::to_string(channels));
    }
  }
  const int64_t n = input.numel();
  const int64_t rows = n / channels;  // batch * spatial positions

  Tensor<T> mean(Shape{channels});
  Tensor<T> var(Shape{channels});
  if (mode == BatchNormMode::kTrain) {
    if (rows < 2) {
      throw UsageError(
          "batch_norm train mode needs more than one element per channel "
          "(degenerate statistics)");
    }
    T* m = mean.data();
    T* v = var.data();
    const T* xp = input.data();
    for (int64_t r = 0; r < rows; ++r) {
      const T* row = xp + r * channels;
      for (int64_t c = 0; c < channels; ++c) m[c] += row[c];
    }
    for (int64_t c = 0; c < channels; ++c) m[c] /= static_cast<T>(rows);
    for (int64_t r = 0; r < rows; ++r) {
      const T* row = xp + r * channels;
      for (int64_t c = 0; c < channels; ++c) {
        const T d = row[c] - m[c];
        v[c] += d * d;
      }
    }
    for (int64_t c = 0; c < channels; ++c) v[c] /= static_cast<T>(rows);
    // fold batch statistics into the running estimates
    T* rm = running_mean.data();
    T* rv = running_var.data();
    for (int64_t c = 0; c < channels; ++c) {
      rm[c] = momentum * rm[c] + (T(1) - momentum) * m[c];
      rv[c] = momentum * rv[c] + (T(1) - momentum) * v[c];
    }
  } else {
    mean.values() = running_mean.values();
    var.values() = running_var.values();
  }

  Tensor<T> inv_std(Shape{channels});
  for (int64_t c = 0; c < channels; ++c) {
    inv_std.values()[static_cast<size_t>(c)] =
        T(1) / std::sqrt(var.values()[static_cast<size_t>(c)] + epsilon);
  }

  Tensor<T> xhat(input.shape());
  Tensor<T> out(input.shape());
  {
    const T* xp = input.data();
    const T* m = mean.data();
    const T* is = inv_std.data();
    const T* g = gamma.data();
    const T* b = beta.data();
    T* xh = xhat.data();
    T* o = out.data();
    for (int64_t r = 0; r < rows; ++r) {
      const T* row = xp + r * channels;
      T* xhrow = xh + r * channels;
      T* orow = o + r * channels;
      for (int64_t c = 0; c < channels; ++c) {
        xhrow[c] = (row[c] - m[c]) * is[c];
        orow[c] = g[c] * xhrow[c] + b[c];
      }
    }
  }
  out.throw_if_not_finite("batch_norm");

  if (tape && (input.requires_grad() || gamma.requires_grad() ||
               beta.requires_grad())) {
    out.set_requires_grad(true);
    Tensor<T> x_t = input, g_t = gamma, b_t = beta, out_t = out;
    Tensor<T> xhat_t = xhat, inv_std_t = inv_std;
    const bool train = mode == BatchNormMode::kTrain;
    tape->record([=]() mutable {
      const T* go = out_t.grad().data();
      const T* xh = xhat_t.data();
      const T* is = inv_std_t.data();
      const T* g = g_t.data();
      // per-channel reductions of dy and dy*xhat
      std::vector<T> sum_dy(static_cast<size_t>(channels), T(0));
      std::vector<T> sum_dy_xhat(static_cast<size_t>(channels), T(0));
      for (int64_t r = 0; r < rows; ++r) {
        const T* grow = go + r * channels;
        const T* xhrow = xh + r * channels;
        for (int64_t c = 0; c < channels; ++c) {
          sum_dy[static_cast<size_t>(c)] += grow[c];
          sum_dy_xhat[static_cast<size_t>(c)] += grow[c] * xhrow[c];
        }
      }
      if (b_t.requires_grad()) {
        T* gb = b_t.grad().data();
        for (int64_t c = 0; c < channels; ++c) {
          gb[c] += sum_dy[static_cast<size_t>(c)];
        }
      }
      if (g_t.requires_grad()) {
        T* gg = g_t.grad().data();
        for (int64_t c = 0; c < channels; ++c) {
          gg[c] += sum_dy_xhat[static_cast<size_t>(c)];
        }
      }
      if (x_t.requires_grad()) {
        T* gx = x_t.grad().data();
        if (train) {
          const T inv_rows = T(1) / static_cast<T>(rows);
          for (int64_t r = 0; r < rows; ++r) {
            const T* grow = go + r * channels;
            const T* xhrow = xh + r * channels;
            T* gxrow = gx + r * channels;
            for (int64_t c = 0; c < channels; ++c) {
              const size_t cc = static_cast<size_t>(c);
              gxrow[c] += g[c] * is[c] *
                          (grow[c] - sum_dy[cc] * inv_rows -
                           xhrow[c] * sum_dy_xhat[cc] * inv_rows);
            }
          }
        } else {
          // running statistics are constants here
          for (int64_t r = 0; r < rows; ++r) {
            const T* grow = go + r * channels;
            T* gxrow = gx + r * channels;
            for (int64_t c = 0; c < channels; ++c) {
              gxrow[c] += grow[c] * g[c] * is[c];
            }
          }
        }
      }
    });
  }
  return out;
}

#define DSC_INSTANTIATE_OPS(T)                                                \
  template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&,            \
                               const Tensor<T>*, int, Padding, Tape<T>*);     \
  template Tensor<T> depthwise_conv2d<T>(const Tensor<T>&, const Tensor<T>&,  \
                                         int, Padding, Tape<T>*);             \
  template Tensor<T> global_avg_pool<T>(const Tensor<T>&, Tape<T>*);          \
  template Tensor<T> dense<T>(const Tensor<T>&, const Tensor<T>&,             \
                              const Tensor<T>&, Tape<T>*);                    \
  template Tensor<T> relu<T>(const Tensor<T>&, Tape<T>*);                     \
  template Tensor<T> relu6<T>(const Tensor<T>&, Tape<T>*);                    \
  template Tensor<T> sigmoid<T>(const Tensor<T>&, Tape<T>*);                  \
  template Tensor<T> softmax<T>(const Tensor<T>&, Tape<T>*);                  \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&, Tape<T>*);    \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&, Tape<T>*);    \
  template Tensor<T> scale<T>(const Tensor<T>&, T, Tape<T>*);                 \
  template Tensor<T> sum<T>(const Tensor<T>&, Tape<T>*);                      \
  template Tensor<T> scale_channels<T>(const Tensor<T>&, const Tensor<T>&,    \
                                       Tape<T>*);                             \
  template Tensor<T> batch_norm<T>(const Tensor<T>&, const Tensor<T>&,        \
                                   const Tensor<T>&, Tensor<T>&, Tensor<T>&,  \
                                   BatchNormMode, T, T, Tape<T>*);

DSC_INSTANTIATE_OPS(float)
DSC_INSTANTIATE_OPS(double)
#undef DSC_INSTANTIATE_OPS

}  // namespace ops

template <typename T>
T finite_diff_check(const ScalarFn<T>& f, Tensor<T>& x, T step) {
  if (step <= T(0)) throw UsageError("finite_diff_check step must be > 0");
  const bool old_rg = x.requires_grad();
  x.set_requires_grad(true);
  x.zero_grad();
  {
    Tape<T> tape;
    Tensor<T> loss = f(x, &tape);
    if (loss.numel() != 1) {
      throw UsageError("finite_diff_check requires a scalar-valued function");
    }
    tape.backward(loss);
  }
  const std::vector<T> analytic = x.grad();
  x.set_requires_grad(old_rg);

  T max_err = 0;
  std::vector<T>& vals = x.values();
  for (size_t i = 0; i < vals.size(); ++i) {
    const T orig = vals[i];
    vals[i] = orig + step;
    const T plus = f(x, nullptr).item();
    vals[i] = orig - step;
    const T minus = f(x, nullptr).item();
    vals[i] = orig;
    if (!std::isfinite(static_cast<double>(plus)) ||
        !std::isfinite(static_cast<double>(minus))) {
      throw NumericError("finite_diff_check saw a non-finite evaluation");
    }
    const T numeric = (plus - minus) / (T(2) * step);
    const T a = analytic[i];
    const T denom =
        std::max(T(1), std::max(std::abs(a), std::abs(numeric)));
    max_err = std::max(max_err, std::abs(a - numeric) / denom);
  }
  return max_err;
}

template float finite_diff_check<float>(const ScalarFn<float>&,
                                        Tensor<float>&, float);
template double finite_diff_check<double>(const ScalarFn<double>&,
                                          Tensor<double>&, double);

}  // namespace dsc
