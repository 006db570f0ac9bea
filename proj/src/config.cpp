#include "latdis/config.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "latdis/errors.hpp"

namespace latdis {

namespace {

using nlohmann::json;

// Typed field access that names the offending field on any mismatch.
template <typename T>
T get_or(const json& j, const std::string& scope, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("config field '" + scope + key + "': " + e.what());
    }
}

void parse_phantom(const json& j, PhantomConfig& p) {
    const std::string s = "phantom.";
    p.native_resolution = get_or(j, s, "native_resolution", p.native_resolution);
    p.output_resolution = get_or(j, s, "output_resolution", p.output_resolution);
    p.subjects_per_cohort = get_or(j, s, "subjects_per_cohort", p.subjects_per_cohort);
    p.slices_per_subject = get_or(j, s, "slices_per_subject", p.slices_per_subject);
    p.lesion_probability = get_or(j, s, "lesion_probability", p.lesion_probability);
    p.lesion_radius_min = get_or(j, s, "lesion_radius_min", p.lesion_radius_min);
    p.lesion_radius_max = get_or(j, s, "lesion_radius_max", p.lesion_radius_max);
    p.lesion_intensity_min = get_or(j, s, "lesion_intensity_min", p.lesion_intensity_min);
    p.lesion_intensity_max = get_or(j, s, "lesion_intensity_max", p.lesion_intensity_max);
    p.bias_field_amplitude = get_or(j, s, "bias_field_amplitude", p.bias_field_amplitude);
    p.texture_noise_scale = get_or(j, s, "texture_noise_scale", p.texture_noise_scale);
}

void parse_model(const json& j, const std::string& scope, ModelConfig& m) {
    m.arch.latent_dim = get_or(j, scope, "latent_dim", m.arch.latent_dim);
    m.arch.encoder_channels =
        get_or(j, scope, "encoder_channels", m.arch.encoder_channels);
    const std::string cov = get_or<std::string>(
        j, scope, "covariance",
        m.arch.covariance == Covariance::PerPixel ? "per-pixel" : "scalar");
    if (cov == "scalar")
        m.arch.covariance = Covariance::Scalar;
    else if (cov == "per-pixel")
        m.arch.covariance = Covariance::PerPixel;
    else
        throw ConfigError("config field '" + scope +
                          "covariance': must be 'scalar' or 'per-pixel', got '" + cov + "'");
    m.arch.mean_clip = get_or(j, scope, "clip", m.arch.mean_clip);
    m.arch.variance_floor = get_or(j, scope, "variance_floor", m.arch.variance_floor);

    m.train.epochs = get_or(j, scope, "epochs", m.train.epochs);
    m.train.batch_size = get_or(j, scope, "batch_size", m.train.batch_size);
    m.train.learning_rate = get_or(j, scope, "learning_rate", m.train.learning_rate);
    m.train.latent_samples = get_or(j, scope, "latent_samples", m.train.latent_samples);
    m.train.variant = parse_variant(
        get_or<std::string>(j, scope, "variant", variant_name(m.train.variant)));
    m.train.mask_size = get_or(j, scope, "mask_size", m.train.mask_size);
    m.train.mask_count = get_or(j, scope, "mask_count", m.train.mask_count);
    m.train.ce_lambda = get_or(j, scope, "ce_lambda", m.train.ce_lambda);

    if (j.contains("augment")) {
        const json& a = j.at("augment");
        if (a.is_boolean()) {
            m.train.augment = a.get<bool>();
        } else if (a.is_object()) {
            const std::string as = scope + "augment.";
            m.train.augment = get_or(a, as, "enabled", true);
            m.train.augment_cfg.flip_prob = get_or(a, as, "flip_prob", 0.5);
            m.train.augment_cfg.brightness_delta = get_or(a, as, "brightness_delta", 0.1);
            m.train.augment_cfg.brightness_prob = get_or(a, as, "brightness_prob", 0.3);
            m.train.augment_cfg.noise_std = get_or(a, as, "noise_std", 0.05);
        } else {
            throw ConfigError("config field '" + scope + "augment': must be bool or object");
        }
    }
}

}  // namespace

std::vector<double> DetectorConfig::grid() const {
    std::vector<double> g;
    for (double p = percentile_min; p <= percentile_max + 1e-9; p += percentile_step)
        g.push_back(p);
    return g;
}

TrainVariant parse_variant(const std::string& name) {
    if (name == "plain") return TrainVariant::Plain;
    if (name == "ce-dvae") return TrainVariant::CeDvae;
    if (name == "ce-reg") return TrainVariant::CeReg;
    throw ConfigError("unknown training variant '" + name +
                      "', expected plain, ce-dvae or ce-reg");
}

std::string variant_name(TrainVariant v) {
    switch (v) {
        case TrainVariant::Plain: return "plain";
        case TrainVariant::CeDvae: return "ce-dvae";
        case TrainVariant::CeReg: return "ce-reg";
    }
    return "plain";
}

RunConfig RunConfig::from_json_text(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(origin + ": invalid JSON: " + e.what());
    }

    RunConfig cfg;
    cfg.vae.arch.mean_clip = 0.001;  // unlabelled-cohort default
    cfg.vae.arch.covariance = Covariance::PerPixel;

    cfg.seed = get_or<std::uint64_t>(j, "", "seed", cfg.seed);
    cfg.output_dir = get_or<std::string>(j, "", "output_dir", cfg.output_dir);
    cfg.threads = get_or(j, "", "threads", cfg.threads);
    if (j.contains("phantom")) parse_phantom(j.at("phantom"), cfg.phantom);
    if (j.contains("vae_h")) parse_model(j.at("vae_h"), "vae_h.", cfg.vae_h);
    if (j.contains("vae")) parse_model(j.at("vae"), "vae.", cfg.vae);
    if (j.contains("detector")) {
        const json& d = j.at("detector");
        cfg.detector.scorer = get_or<std::string>(d, "detector.", "scorer", cfg.detector.scorer);
        cfg.detector.percentile_min =
            get_or(d, "detector.", "percentile_min", cfg.detector.percentile_min);
        cfg.detector.percentile_max =
            get_or(d, "detector.", "percentile_max", cfg.detector.percentile_max);
        cfg.detector.percentile_step =
            get_or(d, "detector.", "percentile_step", cfg.detector.percentile_step);
        cfg.detector.folds = get_or(d, "detector.", "folds", cfg.detector.folds);
    }
    if (j.contains("size_thresholds")) {
        cfg.size_thresholds = get_or(j, "", "size_thresholds", cfg.size_thresholds);
    } else {
        const double scale = static_cast<double>(cfg.phantom.output_resolution) /
                             cfg.phantom.native_resolution;
        for (double t : {0.0, 20.0, 50.0, 150.0}) cfg.size_thresholds.push_back(t * scale * scale);
    }

    cfg.vae_h.arch.input_extent = cfg.phantom.output_resolution;
    cfg.vae.arch.input_extent = cfg.phantom.output_resolution;
    cfg.validate();
    return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json_text(text, path);
}

void RunConfig::validate() const {
    phantom.validate();
    vae_h.arch.validate();
    vae.arch.validate();
    if (detector.scorer != "all" && detector.scorer != "latent" &&
        detector.scorer != "residual")
        throw ConfigError("config field 'detector.scorer': must be latent, residual or all");
    if (detector.folds < 2) throw ConfigError("config field 'detector.folds': must be >= 2");
    if (!(detector.percentile_step > 0))
        throw ConfigError("config field 'detector.percentile_step': must be > 0");
    if (detector.percentile_min > detector.percentile_max ||
        !(detector.percentile_min > 0) || detector.percentile_max > 100)
        throw ConfigError("config field 'detector.percentile_min/max': need 0 < min <= max <= 100");
    for (double t : size_thresholds)
        if (t < 0) throw ConfigError("config field 'size_thresholds': entries must be >= 0");
    for (const ModelConfig* m : {&vae_h, &vae}) {
        if (m->train.epochs < 1) throw ConfigError("config field 'epochs': must be >= 1");
        if (m->train.batch_size < 1) throw ConfigError("config field 'batch_size': must be >= 1");
        if (m->train.latent_samples < 1)
            throw ConfigError("config field 'latent_samples': must be >= 1");
        if (!(m->train.learning_rate > 0))
            throw ConfigError("config field 'learning_rate': must be > 0");
    }
}

}  // namespace latdis
