#pragma once

#include <cstdint>
#include <vector>

namespace latdis {

// One 2-D slice with pixels in [-1, 1]. lesion_px is the annotated
// anomalous pixel count at native resolution and stays attached to the
// slice through resizing; 0 for healthy slices.
struct SliceImage {
    int height = 0;
    int width = 0;
    std::vector<float> pixels;  // row-major
    std::uint32_t subject = 0;
    std::uint16_t slice_index = 0;
    std::uint32_t lesion_px = 0;

    float at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    float& at(int y, int x) { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

struct BrainMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> inside;  // 0/1, row-major, same extents as the slice

    bool at(int y, int x) const { return inside[static_cast<std::size_t>(y) * width + x] != 0; }
    void set(int y, int x, bool v) { inside[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }

    std::size_t interior_count() const {
        std::size_t n = 0;
        for (auto v : inside) n += v != 0;
        return n;
    }
};

struct LabeledSlice {
    SliceImage image;
    BrainMask mask;
};

// Subject-disjoint train/validation/test partition of one cohort.
struct DatasetSplit {
    std::vector<LabeledSlice> train;
    std::vector<LabeledSlice> validation;
    std::vector<LabeledSlice> test;

    std::size_t total() const { return train.size() + validation.size() + test.size(); }
};

}  // namespace latdis
