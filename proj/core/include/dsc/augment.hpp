#pragma once

#include <cstdint>

#include "dsc/rng.hpp"
#include "dsc/tensor.hpp"

namespace dsc {

enum class Interpolation { kBilinear };
enum class FillMode { kReflect };

// Training-set transformation chain. rotation_factor and zoom_factor are
// fractions: 0.2 means rotations up to +-0.2 of a full turn (+-72 degrees)
// and scales drawn from [0.8, 1.2].
struct AugmentConfig {
  double flip_probability = 0.5;
  double rotation_factor = 0.2;
  double zoom_factor = 0.2;
  Interpolation interpolation = Interpolation::kBilinear;
  FillMode fill = FillMode::kReflect;
  uint64_t seed = 0;
};

// Per-image primitives on [H,W,C] tensors, bilinear sampling with
// symmetric-reflect fill. Values stay inside the input range.
template <typename T>
Tensor<T> flip_image_horizontal(const Tensor<T>& image);

template <typename T>
Tensor<T> rotate_image(const Tensor<T>& image, double angle_radians);

template <typename T>
Tensor<T> zoom_image(const Tensor<T>& image, double zoom);

// Applies flip, then rotation, then zoom to every image of a [N,H,W,C]
// batch with values in [0,255]. Exactly three draws advance the stream per
// image, in that order, whether or not each transform triggers.
template <typename T>
Tensor<T> augment_batch(const Tensor<T>& batch, const AugmentConfig& cfg,
                        Rng& rng);

// x -> x/255, mapping [0,255] onto [0,1].
template <typename T>
Tensor<T> rescale(const Tensor<T>& batch);

}  // namespace dsc
