#include "latdis/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "latdis/errors.hpp"
#include "latdis/preprocess.hpp"
#include "latdis/rng.hpp"

namespace latdis {

namespace {

constexpr std::uint64_t kSubjectTag = 0x50485355ULL;
constexpr std::uint64_t kSliceTag = 0x50485343ULL;
constexpr std::uint64_t kLesionTag = 0x50484C45ULL;
constexpr std::uint64_t kCohortTag = 0x504843ULL;

struct SubjectParams {
    double axis_a, axis_b;    // semi-axes as a fraction of the extent
    double center_x, center_y;
    double rim_frac;          // rim band width as a fraction of the radius
    double rim_gain;
    double tex_amp[4], tex_fy[4], tex_fx[4], tex_phase[4];
    double bias_cx, bias_cy, bias_cxy, bias_cx2, bias_cy2;
};

SubjectParams draw_subject(std::uint64_t subject_seed) {
    Rng rng(derive_seed(subject_seed, kSubjectTag));
    SubjectParams p;
    p.axis_a = rng.uniform(0.30, 0.40);
    p.axis_b = rng.uniform(0.28, 0.38);
    p.center_x = rng.uniform(-0.03, 0.03);
    p.center_y = rng.uniform(-0.03, 0.03);
    p.rim_frac = rng.uniform(0.08, 0.14);
    p.rim_gain = rng.uniform(0.25, 0.35);
    for (int k = 0; k < 4; ++k) {
        p.tex_amp[k] = rng.uniform(0.02, 0.06);
        p.tex_fy[k] = rng.uniform(1.0, 3.5);
        p.tex_fx[k] = rng.uniform(1.0, 3.5);
        p.tex_phase[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }
    p.bias_cx = rng.uniform(-1, 1);
    p.bias_cy = rng.uniform(-1, 1);
    p.bias_cxy = rng.uniform(-1, 1);
    p.bias_cx2 = rng.uniform(-1, 1);
    p.bias_cy2 = rng.uniform(-1, 1);
    return p;
}

}  // namespace

void PhantomConfig::validate() const {
    if (native_resolution < 16) throw ConfigError("phantom: native_resolution must be >= 16");
    if (output_resolution < 8 || output_resolution > native_resolution)
        throw ConfigError("phantom: output_resolution must lie in [8, native_resolution]");
    if (slices_per_subject < 1) throw ConfigError("phantom: slices_per_subject must be >= 1");
    if (lesion_probability < 0.0 || lesion_probability > 1.0)
        throw ConfigError("phantom: lesion_probability must lie in [0, 1]");
    if (lesion_radius_min <= 0.0 || lesion_radius_max < lesion_radius_min)
        throw ConfigError("phantom: lesion radius range is invalid");
    if (lesion_intensity_max < lesion_intensity_min)
        throw ConfigError("phantom: lesion intensity range is invalid");
    if (bias_field_amplitude < 0.0 || texture_noise_scale < 0.0)
        throw ConfigError("phantom: amplitudes must be nonnegative");
}

std::pair<SliceImage, BrainMask> generate_phantom(const PhantomConfig& cfg,
                                                  std::uint64_t subject_seed, int slice_index,
                                                  bool with_lesion) {
    cfg.validate();
    const int r = cfg.native_resolution;
    const SubjectParams sp = draw_subject(subject_seed);
    Rng rng(derive_seed(subject_seed, kSliceTag, static_cast<std::uint64_t>(slice_index)));

    // Slices of one subject shrink towards the volume ends.
    const double through = (slice_index % cfg.slices_per_subject + 0.5) / cfg.slices_per_subject;
    const double shrink = 0.80 + 0.20 * std::sin(std::numbers::pi * through);
    const double ax = sp.axis_a * shrink * r;
    const double ay = sp.axis_b * shrink * r;
    const double cx = (0.5 + sp.center_x) * r;
    const double cy = (0.5 + sp.center_y) * r;

    const double phase_jitter = rng.uniform(0.0, 2.0 * std::numbers::pi);

    SliceImage img;
    img.height = img.width = r;
    img.pixels.assign(static_cast<std::size_t>(r) * r, -1.0f);
    img.subject = 0;
    img.slice_index = static_cast<std::uint16_t>(slice_index);
    BrainMask mask;
    mask.height = mask.width = r;
    mask.inside.assign(img.pixels.size(), 0);

    std::vector<float> raw(img.pixels.size(), 0.0f);  // [0,1] intensity space
    for (int y = 0; y < r; ++y) {
        for (int x = 0; x < r; ++x) {
            const double ex = (x - cx) / ax;
            const double ey = (y - cy) / ay;
            const double rho = std::sqrt(ex * ex + ey * ey);
            if (rho > 1.0) continue;
            mask.set(y, x, true);

            double v = 0.45;
            for (int k = 0; k < 4; ++k)
                v += sp.tex_amp[k] *
                     std::cos(sp.tex_fy[k] * std::numbers::pi * y / r +
                              sp.tex_fx[k] * std::numbers::pi * x / r + sp.tex_phase[k] +
                              phase_jitter);
            if (rho > 1.0 - sp.rim_frac) v += sp.rim_gain;  // skull-like bright band

            const double nx = 2.0 * x / r - 1.0, ny = 2.0 * y / r - 1.0;
            const double poly = 0.5 * (sp.bias_cx * nx + sp.bias_cy * ny + sp.bias_cxy * nx * ny +
                                       sp.bias_cx2 * nx * nx + sp.bias_cy2 * ny * ny);
            v *= 1.0 + cfg.bias_field_amplitude * poly;
            raw[static_cast<std::size_t>(y) * r + x] = static_cast<float>(v);
        }
    }

    // Additive pixel noise over the interior, row-major draw order.
    if (cfg.texture_noise_scale > 0.0)
        for (std::size_t i = 0; i < raw.size(); ++i)
            if (mask.inside[i])
                raw[i] += static_cast<float>(rng.normal(0.0, cfg.texture_noise_scale));

    if (with_lesion) {
        Rng lesion_rng(derive_seed(subject_seed, kLesionTag,
                                   static_cast<std::uint64_t>(slice_index)));
        double radius_lo = cfg.lesion_radius_min;
        double radius_hi = cfg.lesion_radius_max;
        const double offset = lesion_rng.uniform(cfg.lesion_intensity_min,
                                                 cfg.lesion_intensity_max);
        bool placed = false;
        for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
            const double rx = lesion_rng.uniform(radius_lo, radius_hi);
            const double ry = lesion_rng.uniform(radius_lo, radius_hi);
            const double lx = cx + lesion_rng.uniform(-ax, ax);
            const double ly = cy + lesion_rng.uniform(-ay, ay);

            std::vector<std::size_t> blob;
            bool fits = true;
            const int y0 = std::max(0, static_cast<int>(std::floor(ly - ry)));
            const int y1 = std::min(r - 1, static_cast<int>(std::ceil(ly + ry)));
            const int x0 = std::max(0, static_cast<int>(std::floor(lx - rx)));
            const int x1 = std::min(r - 1, static_cast<int>(std::ceil(lx + rx)));
            for (int y = y0; y <= y1 && fits; ++y)
                for (int x = x0; x <= x1; ++x) {
                    const double dx = (x - lx) / rx, dy = (y - ly) / ry;
                    if (dx * dx + dy * dy > 1.0) continue;
                    if (!mask.at(y, x)) {
                        fits = false;
                        break;
                    }
                    blob.push_back(static_cast<std::size_t>(y) * r + x);
                }
            if (!fits || blob.empty()) {
                // shrink the requested radius every few failed placements
                if (attempt % 10 == 9) {
                    radius_lo = std::max(1.0, radius_lo * 0.85);
                    radius_hi = std::max(radius_lo, radius_hi * 0.85);
                }
                continue;
            }
            for (std::size_t i : blob) raw[i] += static_cast<float>(offset);
            img.lesion_px = static_cast<std::uint32_t>(blob.size());
            placed = true;
        }
        if (!placed)
            throw DataError("generate_phantom: lesion placement failed after 100 attempts");
    }

    for (std::size_t i = 0; i < raw.size(); ++i)
        if (mask.inside[i])
            img.pixels[i] =
                static_cast<float>(2.0 * std::clamp(static_cast<double>(raw[i]), 0.02, 0.98) - 1.0);
    return {std::move(img), std::move(mask)};
}

std::pair<DatasetSplit, DatasetSplit> make_dataset(const PhantomConfig& cfg) {
    cfg.validate();
    if (cfg.subjects_per_cohort < 10)
        throw ConfigError("phantom: subjects_per_cohort must be >= 10");

    struct Volume {
        std::uint32_t subject;
        std::vector<LabeledSlice> slices;
    };

    auto build_cohort = [&cfg](int cohort, std::uint32_t id_base) {
        std::vector<Volume> vols;
        vols.reserve(cfg.subjects_per_cohort);
        const bool unlabelled = cohort == 1;
        for (int s = 0; s < cfg.subjects_per_cohort; ++s) {
            const std::uint64_t subject_seed =
                derive_seed(cfg.seed, kCohortTag, static_cast<std::uint64_t>(cohort),
                            static_cast<std::uint64_t>(s));
            Volume vol;
            vol.subject = id_base + static_cast<std::uint32_t>(s);
            for (int k = 0; k < cfg.slices_per_subject; ++k) {
                bool with_lesion = false;
                if (unlabelled) {
                    Rng flag_rng(derive_seed(subject_seed, kLesionTag + 1,
                                             static_cast<std::uint64_t>(k)));
                    with_lesion = flag_rng.bernoulli(cfg.lesion_probability);
                }
                auto [img, msk] = generate_phantom(cfg, subject_seed, k, with_lesion);
                img.subject = vol.subject;
                vol.slices.push_back({std::move(img), std::move(msk)});
            }
            // per-subject volume normalization
            std::vector<SliceImage> imgs;
            imgs.reserve(vol.slices.size());
            for (auto& ls : vol.slices) imgs.push_back(std::move(ls.image));
            normalize_range(imgs);
            for (std::size_t i = 0; i < imgs.size(); ++i) vol.slices[i].image = std::move(imgs[i]);
            vols.push_back(std::move(vol));
        }
        return vols;
    };

    std::vector<Volume> unlabelled = build_cohort(1, 100000);
    std::vector<Volume> healthy = build_cohort(0, 0);

    // Histogram reference: first slice of the first unlabelled subject.
    const SliceImage ref_img = unlabelled.front().slices.front().image;
    const BrainMask ref_mask = unlabelled.front().slices.front().mask;
    const int crop = std::max(cfg.output_resolution, cfg.native_resolution * 7 / 8);

    auto finalize = [&](std::vector<Volume>& vols) {
        DatasetSplit split;
        const int n = static_cast<int>(vols.size());
        const int n_train = static_cast<int>(std::llround(0.70 * n));
        const int n_val = static_cast<int>(std::llround(0.15 * n));
        for (int s = 0; s < n; ++s) {
            auto* bucket = s < n_train             ? &split.train
                           : s < n_train + n_val   ? &split.validation
                                                   : &split.test;
            for (auto& ls : vols[s].slices) {
                SliceImage matched = histogram_match(ls.image, ls.mask, ref_img, ref_mask);
                int bbox = 0;
                {
                    int y0 = matched.height, y1 = -1, x0 = matched.width, x1 = -1;
                    for (int y = 0; y < matched.height; ++y)
                        for (int x = 0; x < matched.width; ++x)
                            if (ls.mask.at(y, x)) {
                                y0 = std::min(y0, y);
                                y1 = std::max(y1, y);
                                x0 = std::min(x0, x);
                                x1 = std::max(x1, x);
                            }
                    bbox = std::max(y1 - y0 + 1, x1 - x0 + 1);
                }
                auto [out_img, out_mask] =
                    crop_resize(matched, ls.mask, std::max(crop, bbox), cfg.output_resolution);
                bucket->push_back({std::move(out_img), std::move(out_mask)});
            }
        }
        return split;
    };

    DatasetSplit healthy_split = finalize(healthy);
    DatasetSplit unlabelled_split = finalize(unlabelled);
    return {std::move(healthy_split), std::move(unlabelled_split)};
}

}  // namespace latdis
