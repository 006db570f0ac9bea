#pragma once

#include <span>
#include <utility>

#include "latdis/rng.hpp"
#include "latdis/slice.hpp"

namespace latdis {

// Training-time augmentation knobs. Probabilities of zero and a zero noise
// standard deviation turn the whole transform into the identity.
struct AugmentConfig {
    double flip_prob = 0.5;
    double brightness_delta = 0.1;
    double brightness_prob = 0.3;
    double noise_std = 0.05;
};

// Affine per-volume rescale sending the volume minimum to -1 and the
// maximum to +1. A volume already spanning [-1, 1] exactly is returned
// unchanged. Throws DataError for constant volumes.
void normalize_range(std::span<SliceImage> volume);

// Quantile mapping of mask-interior pixels onto the reference interior
// distribution, 256 bins over [-1, 1]. Outside-mask pixels are untouched.
SliceImage histogram_match(const SliceImage& img, const BrainMask& img_mask,
                           const SliceImage& reference, const BrainMask& ref_mask);

// Square crop of side crop_extent centered on the mask bounding box,
// then resize to output_extent x output_extent: bilinear for the image
// (half-pixel centers, clamped to [-1,1]), nearest-neighbor for the mask.
std::pair<SliceImage, BrainMask> crop_resize(const SliceImage& img, const BrainMask& mask,
                                             int crop_extent, int output_extent);

// Horizontal flip (image and mask together), interior brightness shift of
// +-delta, then additive interior Gaussian noise, clamped to [-1, 1].
// Draw order: flip uniform, brightness uniform, brightness sign, one
// normal per interior pixel in row-major order.
std::pair<SliceImage, BrainMask> augment(const SliceImage& img, const BrainMask& mask, Rng& rng,
                                         const AugmentConfig& cfg = {});

}  // namespace latdis
