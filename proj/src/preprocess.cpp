#include "latdis/preprocess.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "latdis/errors.hpp"

namespace latdis {

namespace {

constexpr int kBins = 256;

int bin_of(float v) {
    int b = static_cast<int>((static_cast<double>(v) + 1.0) / 2.0 * kBins);
    return std::clamp(b, 0, kBins - 1);
}

float bin_center(int b) {
    return static_cast<float>(-1.0 + (b + 0.5) * (2.0 / kBins));
}

}  // namespace

void normalize_range(std::span<SliceImage> volume) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& s : volume)
        for (float v : s.pixels) {
            lo = std::min(lo, static_cast<double>(v));
            hi = std::max(hi, static_cast<double>(v));
        }
    if (volume.empty() || !(hi > lo))
        throw DataError("normalize_range: volume is constant or empty");
    if (lo == -1.0 && hi == 1.0) return;  // endpoints attained, exact identity

    const double scale = 2.0 / (hi - lo);
    for (auto& s : volume)
        for (float& v : s.pixels) v = static_cast<float>(-1.0 + (v - lo) * scale);
}

SliceImage histogram_match(const SliceImage& img, const BrainMask& img_mask,
                           const SliceImage& reference, const BrainMask& ref_mask) {
    std::array<double, kBins> src_hist{}, ref_hist{};
    std::size_t src_n = 0, ref_n = 0;
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        if (img_mask.inside[i]) {
            ++src_hist[bin_of(img.pixels[i])];
            ++src_n;
        }
    for (std::size_t i = 0; i < reference.pixels.size(); ++i)
        if (ref_mask.inside[i]) {
            ++ref_hist[bin_of(reference.pixels[i])];
            ++ref_n;
        }
    if (src_n == 0 || ref_n == 0)
        throw DataError("histogram_match: empty mask interior");

    std::array<double, kBins> src_cdf{}, ref_cdf{};
    double acc = 0.0;
    for (int b = 0; b < kBins; ++b) {
        acc += src_hist[b] / static_cast<double>(src_n);
        src_cdf[b] = acc;
    }
    acc = 0.0;
    for (int b = 0; b < kBins; ++b) {
        acc += ref_hist[b] / static_cast<double>(ref_n);
        ref_cdf[b] = acc;
    }

    // Monotone bin-to-bin map: each source bin goes to the first reference
    // bin whose CDF reaches the source CDF position.
    std::array<int, kBins> mapped{};
    int j = 0;
    for (int b = 0; b < kBins; ++b) {
        while (j < kBins - 1 && ref_cdf[j] < src_cdf[b]) ++j;
        mapped[b] = j;
    }

    SliceImage out = img;
    for (std::size_t i = 0; i < out.pixels.size(); ++i)
        if (img_mask.inside[i]) out.pixels[i] = bin_center(mapped[bin_of(img.pixels[i])]);
    return out;
}

std::pair<SliceImage, BrainMask> crop_resize(const SliceImage& img, const BrainMask& mask,
                                             int crop_extent, int output_extent) {
    if (mask.height != img.height || mask.width != img.width)
        throw DataError("crop_resize: mask geometry mismatch");
    if (output_extent > crop_extent || output_extent < 1)
        throw DataError("crop_resize: output extent must be in [1, crop extent]");
    if (crop_extent > std::min(img.height, img.width))
        throw DataError("crop_resize: crop extent exceeds image extents");

    int y0 = img.height, y1 = -1, x0 = img.width, x1 = -1;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            if (mask.at(y, x)) {
                y0 = std::min(y0, y);
                y1 = std::max(y1, y);
                x0 = std::min(x0, x);
                x1 = std::max(x1, x);
            }
    if (y1 < 0) throw DataError("crop_resize: empty mask");

    auto window_start = [&](int c0, int c1, int extent) {
        const double center = (c0 + c1) / 2.0;
        int start = static_cast<int>(std::llround(center - (crop_extent - 1) / 2.0));
        return std::clamp(start, 0, extent - crop_extent);
    };
    const int top = window_start(y0, y1, img.height);
    const int left = window_start(x0, x1, img.width);

    SliceImage out;
    out.height = out.width = output_extent;
    out.pixels.assign(static_cast<std::size_t>(output_extent) * output_extent, 0.0f);
    out.subject = img.subject;
    out.slice_index = img.slice_index;
    out.lesion_px = img.lesion_px;
    BrainMask out_mask;
    out_mask.height = out_mask.width = output_extent;
    out_mask.inside.assign(out.pixels.size(), 0);

    const double scale = static_cast<double>(crop_extent) / output_extent;
    for (int oy = 0; oy < output_extent; ++oy) {
        const double sy = std::clamp((oy + 0.5) * scale - 0.5, 0.0, crop_extent - 1.0);
        const int fy = static_cast<int>(sy);
        const int cy = std::min(fy + 1, crop_extent - 1);
        const double wy = sy - fy;
        const int ny = std::min(static_cast<int>(std::floor(sy + 0.5)), crop_extent - 1);
        for (int ox = 0; ox < output_extent; ++ox) {
            const double sx = std::clamp((ox + 0.5) * scale - 0.5, 0.0, crop_extent - 1.0);
            const int fx = static_cast<int>(sx);
            const int cx = std::min(fx + 1, crop_extent - 1);
            const double wx = sx - fx;
            const double v00 = img.at(top + fy, left + fx);
            const double v01 = img.at(top + fy, left + cx);
            const double v10 = img.at(top + cy, left + fx);
            const double v11 = img.at(top + cy, left + cx);
            const double v = (1 - wy) * ((1 - wx) * v00 + wx * v01) +
                             wy * ((1 - wx) * v10 + wx * v11);
            out.at(oy, ox) = static_cast<float>(std::clamp(v, -1.0, 1.0));

            const int nx = std::min(static_cast<int>(std::floor(sx + 0.5)), crop_extent - 1);
            out_mask.set(oy, ox, mask.at(top + ny, left + nx));
        }
    }
    return {std::move(out), std::move(out_mask)};
}

std::pair<SliceImage, BrainMask> augment(const SliceImage& img, const BrainMask& mask, Rng& rng,
                                         const AugmentConfig& cfg) {
    SliceImage out = img;
    BrainMask m = mask;

    if (rng.uniform() < cfg.flip_prob) {
        for (int y = 0; y < out.height; ++y)
            for (int x = 0; x < out.width / 2; ++x) {
                std::swap(out.at(y, x), out.at(y, out.width - 1 - x));
                auto a = m.at(y, x);
                m.set(y, x, m.at(y, m.width - 1 - x));
                m.set(y, m.width - 1 - x, a);
            }
    }
    if (rng.uniform() < cfg.brightness_prob) {
        const float delta = static_cast<float>(rng.bernoulli(0.5) ? cfg.brightness_delta
                                                                  : -cfg.brightness_delta);
        for (std::size_t i = 0; i < out.pixels.size(); ++i)
            if (m.inside[i]) out.pixels[i] += delta;
    }
    if (cfg.noise_std > 0.0) {
        for (std::size_t i = 0; i < out.pixels.size(); ++i)
            if (m.inside[i])
                out.pixels[i] += static_cast<float>(rng.normal(0.0, cfg.noise_std));
    }
    for (std::size_t i = 0; i < out.pixels.size(); ++i)
        if (m.inside[i]) out.pixels[i] = std::clamp(out.pixels[i], -1.0f, 1.0f);
    return {std::move(out), std::move(m)};
}

}  // namespace latdis
