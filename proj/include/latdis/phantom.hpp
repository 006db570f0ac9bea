#pragma once

#include <cstdint>
#include <utility>

#include "latdis/slice.hpp"

namespace latdis {

// Synthetic slice generator settings. Extents are in pixels at native
// resolution; lesion radii and intensities refer to the raw [0,1]
// intensity space before the [-1,1] mapping.
struct PhantomConfig {
    int native_resolution = 64;
    int output_resolution = 32;
    int subjects_per_cohort = 60;
    int slices_per_subject = 30;
    double lesion_probability = 0.5;   // unlabelled cohort only
    double lesion_radius_min = 3.0;
    double lesion_radius_max = 8.0;
    double lesion_intensity_min = 0.25;
    double lesion_intensity_max = 0.55;
    double bias_field_amplitude = 0.12;
    double texture_noise_scale = 0.03;
    std::uint64_t seed = 0;

    void validate() const;
};

// One native-resolution slice: elliptical brain region with smooth
// low-frequency texture, a bright rim band at the mask edge, a
// multiplicative low-order polynomial bias field and additive pixel noise.
// With `with_lesion`, one bright elliptical blob is placed fully inside
// the mask and its exact rasterized pixel count recorded in lesion_px.
// Deterministic in (cfg, subject_seed, slice_index, with_lesion).
std::pair<SliceImage, BrainMask> generate_phantom(const PhantomConfig& cfg,
                                                  std::uint64_t subject_seed, int slice_index,
                                                  bool with_lesion);

// Generates both cohorts at native resolution, normalizes each subject
// volume to [-1,1], histogram-matches every slice to a reference slice
// from the unlabelled cohort, crops/resizes to the output resolution and
// splits subjects 70/15/15. Healthy cohort is lesion-free; unlabelled
// slices carry lesions at the configured probability.
std::pair<DatasetSplit, DatasetSplit> make_dataset(const PhantomConfig& cfg);

}  // namespace latdis
