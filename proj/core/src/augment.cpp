#include "dsc/augment.hpp"

#include <algorithm>
#include <cmath>

#include "dsc/error.hpp"

namespace dsc {

namespace {

constexpr double kTau = 6.283185307179586476925286766559;

// Symmetric reflection of an integer index into [0, n):
// for n=4 the extension reads ... d c b a | a b c d | d c b a ...
int64_t reflect_index(int64_t i, int64_t n) {
  if (n == 1) return 0;
  const int64_t period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

template <typename T>
T sample_bilinear(const T* img, int64_t h, int64_t w, int64_t channels,
                  double sy, double sx, int64_t c) {
  const auto y0f = std::floor(sy);
  const auto x0f = std::floor(sx);
  const double wy = sy - y0f;
  const double wx = sx - x0f;
  const int64_t y0 = reflect_index(static_cast<int64_t>(y0f), h);
  const int64_t y1 = reflect_index(static_cast<int64_t>(y0f) + 1, h);
  const int64_t x0 = reflect_index(static_cast<int64_t>(x0f), w);
  const int64_t x1 = reflect_index(static_cast<int64_t>(x0f) + 1, w);
  const double v00 = img[(y0 * w + x0) * channels + c];
  const double v01 = img[(y0 * w + x1) * channels + c];
  const double v10 = img[(y1 * w + x0) * channels + c];
  const double v11 = img[(y1 * w + x1) * channels + c];
  const double top = v00 + (v01 - v00) * wx;
  const double bot = v10 + (v11 - v10) * wx;
  return static_cast<T>(top + (bot - top) * wy);
}

// Resamples one image through the inverse affine map
// src = center + M * (dst - center).
template <typename T>
Tensor<T> affine_resample(const Tensor<T>& image, double m00, double m01,
                          double m10, double m11) {
  const int64_t h = image.dim(0), w = image.dim(1), channels = image.dim(2);
  const double cy = static_cast<double>(h - 1) / 2.0;
  const double cx = static_cast<double>(w - 1) / 2.0;
  Tensor<T> out(image.shape());
  const T* src = image.data();
  T* dst = out.data();
  for (int64_t y = 0; y < h; ++y) {
    const double dy = static_cast<double>(y) - cy;
    for (int64_t x = 0; x < w; ++x) {
      const double dx = static_cast<double>(x) - cx;
      const double sy = cy + m00 * dy + m01 * dx;
      const double sx = cx + m10 * dy + m11 * dx;
      T* orow = dst + (y * w + x) * channels;
      for (int64_t c = 0; c < channels; ++c) {
        orow[c] = sample_bilinear(src, h, w, channels, sy, sx, c);
      }
    }
  }
  return out;
}

template <typename T>
void check_image(const Tensor<T>& image, const char* op) {
  if (image.rank() != 3) {
    throw ShapeError(std::string(op) + " expects an [H,W,C] image, got " +
                     image.shape().str());
  }
}

}  // namespace

template <typename T>
Tensor<T> flip_image_horizontal(const Tensor<T>& image) {
  check_image(image, "flip_image_horizontal");
  const int64_t h = image.dim(0), w = image.dim(1), channels = image.dim(2);
  Tensor<T> out(image.shape());
  const T* src = image.data();
  T* dst = out.data();
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      const T* irow = src + (y * w + (w - 1 - x)) * channels;
      T* orow = dst + (y * w + x) * channels;
      for (int64_t c = 0; c < channels; ++c) orow[c] = irow[c];
    }
  }
  return out;
}

template <typename T>
Tensor<T> rotate_image(const Tensor<T>& image, double angle_radians) {
  check_image(image, "rotate_image");
  // inverse map: rotate sampling coordinates by -angle
  const double c = std::cos(angle_radians);
  const double s = std::sin(angle_radians);
  return affine_resample(image, c, -s, s, c);
}

template <typename T>
Tensor<T> zoom_image(const Tensor<T>& image, double zoom) {
  check_image(image, "zoom_image");
  if (zoom <= 0.0) throw UsageError("zoom factor must be positive");
  const double inv = 1.0 / zoom;
  return affine_resample(image, inv, 0.0, 0.0, inv);
}

template <typename T>
Tensor<T> augment_batch(const Tensor<T>& batch, const AugmentConfig& cfg,
                        Rng& rng) {
  if (batch.rank() != 4) {
    throw ShapeError("augment_batch expects [N,H,W,C], got " +
                     batch.shape().str());
  }
  if (cfg.flip_probability < 0.0 || cfg.flip_probability > 1.0 ||
      cfg.rotation_factor < 0.0 || cfg.zoom_factor < 0.0) {
    throw ConfigError("augment config: factors out of range");
  }
  const int64_t n = batch.dim(0), h = batch.dim(1), w = batch.dim(2),
                channels = batch.dim(3);
  const int64_t image_len = h * w * channels;

  Tensor<T> out(batch.shape());
  for (int64_t i = 0; i < n; ++i) {
    // fixed draw order per image: flip, angle, zoom
    const double flip_draw = rng.uniform();
    const double angle =
        rng.uniform(-cfg.rotation_factor, cfg.rotation_factor) * kTau;
    const double zoom = 1.0 + rng.uniform(-cfg.zoom_factor, cfg.zoom_factor);

    Tensor<T> image = Tensor<T>::from_data(
        Shape{h, w, channels},
        std::vector<T>(batch.data() + i * image_len,
                       batch.data() + (i + 1) * image_len));
    if (flip_draw < cfg.flip_probability) {
      image = flip_image_horizontal(image);
    }
    if (cfg.rotation_factor > 0.0) {
      image = rotate_image(image, angle);
    }
    if (cfg.zoom_factor > 0.0) {
      image = zoom_image(image, zoom);
    }
    T* dst = out.data() + i * image_len;
    const T* src = image.data();
    for (int64_t j = 0; j < image_len; ++j) {
      // interpolation is convex; the clamp only removes rounding spill
      dst[j] = std::clamp(src[j], T(0), T(255));
    }
  }
  return out;
}

template <typename T>
Tensor<T> rescale(const Tensor<T>& batch) {
  Tensor<T> out(batch.shape());
  const T* src = batch.data();
  T* dst = out.data();
  const int64_t n = batch.numel();
  for (int64_t i = 0; i < n; ++i) dst[i] = src[i] / T(255);
  return out;
}

#define DSC_INSTANTIATE_AUGMENT(T)                                         \
  template Tensor<T> flip_image_horizontal<T>(const Tensor<T>&);           \
  template Tensor<T> rotate_image<T>(const Tensor<T>&, double);            \
  template Tensor<T> zoom_image<T>(const Tensor<T>&, double);              \
  template Tensor<T> augment_batch<T>(const Tensor<T>&,                    \
                                      const AugmentConfig&, Rng&);         \
  template Tensor<T> rescale<T>(const Tensor<T>&);

DSC_INSTANTIATE_AUGMENT(float)
DSC_INSTANTIATE_AUGMENT(double)
#undef DSC_INSTANTIATE_AUGMENT

}  // namespace dsc
