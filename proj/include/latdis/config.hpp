#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "latdis/phantom.hpp"
#include "latdis/vae.hpp"
#include "latdis/vae_train.hpp"

namespace latdis {

struct DetectorConfig {
    std::string scorer = "all";  // latent | residual | all
    double percentile_min = 50.0;
    double percentile_max = 99.5;
    double percentile_step = 0.5;
    int folds = 5;

    std::vector<double> grid() const;
};

struct ModelConfig {
    VaeArch arch;       // input_extent comes from phantom.output_resolution
    TrainConfig train;
};

// Whole-run settings parsed from one JSON file. Defaults mirror the
// trained setup: clip 0.01 with scalar covariance for the healthy model,
// clip 0.001 with per-pixel covariance for the unlabelled one, Adam at
// 1e-4 over 100 epochs of batches of 32, three latent samples.
struct RunConfig {
    std::uint64_t seed = 1;
    std::string output_dir = ".";
    int threads = 0;
    PhantomConfig phantom;
    ModelConfig vae_h;
    ModelConfig vae;
    DetectorConfig detector;
    std::vector<double> size_thresholds;  // defaults to {0,20,50,150} scaled by
                                          // (output_res/native_res)^2

    static RunConfig from_file(const std::string& path);
    static RunConfig from_json_text(const std::string& text, const std::string& origin);

    void validate() const;
};

TrainVariant parse_variant(const std::string& name);
std::string variant_name(TrainVariant v);

}  // namespace latdis
