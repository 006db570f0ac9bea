#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "latdis/errors.hpp"
#include "latdis/layers.hpp"
#include "latdis/rng.hpp"
#include "latdis/slice.hpp"
#include "latdis/tensor.hpp"

namespace latdis {

enum class Covariance { Scalar, PerPixel };

// Architecture descriptor. The encoder is a stack of stride-2 4x4
// convolutions followed by two dense heads (mean, log-variance); the
// decoder mirrors it: dense from the latent, stride-2 transposed
// convolutions with the reversed channel list, and 1x1 output heads.
struct VaeArch {
    int input_extent = 128;
    std::vector<int> encoder_channels{64, 128, 256, 512};
    int latent_dim = 128;
    Covariance covariance = Covariance::Scalar;
    double mean_clip = 0.01;
    double variance_floor = 0.01;

    int levels() const { return static_cast<int>(encoder_channels.size()); }
    int feature_extent() const { return input_extent >> levels(); }
    int feature_channels() const { return encoder_channels.back(); }
    int flat_features() const { return feature_channels() * feature_extent() * feature_extent(); }

    std::vector<int> decoder_channels() const {
        return {encoder_channels.rbegin(), encoder_channels.rend()};
    }

    void validate() const {
        if (encoder_channels.empty()) throw ConfigError("architecture: no encoder layers");
        if (latent_dim < 1) throw ConfigError("architecture: latent_dim must be >= 1");
        if (input_extent % (1 << levels()) != 0 || feature_extent() < 1)
            throw ConfigError("architecture: input extent " + std::to_string(input_extent) +
                              " is not divisible by 2^" + std::to_string(levels()));
        if (mean_clip <= 0.0 || mean_clip >= 0.5)
            throw ConfigError("architecture: mean_clip must lie in (0, 0.5)");
        if (variance_floor <= 0.0) throw ConfigError("architecture: variance_floor must be > 0");
    }

    std::vector<LayerSpec> encoder_layers() const {
        std::vector<LayerSpec> specs;
        int c_prev = 1;
        for (int c : encoder_channels) {
            specs.push_back({LayerKind::Conv, c_prev, c});
            specs.push_back({LayerKind::Activation, c, c});
            c_prev = c;
        }
        specs.push_back({LayerKind::Dense, flat_features(), latent_dim});
        specs.push_back({LayerKind::StochasticGaussian, latent_dim, latent_dim});
        return specs;
    }

    std::vector<LayerSpec> decoder_layers() const {
        std::vector<LayerSpec> specs;
        specs.push_back({LayerKind::Dense, latent_dim, flat_features()});
        auto dec = decoder_channels();
        int c_prev = feature_channels();
        for (int c : dec) {
            specs.push_back({LayerKind::TConv, c_prev, c});
            specs.push_back({LayerKind::Activation, c, c});
            c_prev = c;
        }
        specs.push_back({LayerKind::Conv1x1, c_prev, covariance == Covariance::PerPixel ? 2 : 1,
                         1, 1});
        return specs;
    }
};

template <typename S>
struct GaussianPosteriorT {
    std::vector<S> mean;
    std::vector<S> log_variance;
};

using GaussianPosterior = GaussianPosteriorT<float>;

// Decoder output distribution on the open unit interval: per-pixel
// logit-normal mean (clipped to [clip, 1-clip]) and a variance that is a
// single element in scalar mode or one per pixel otherwise.
template <typename S>
struct LogitNormalOutputT {
    TensorT<S> mean_unit;  // [1,H,W]
    TensorT<S> variance;   // [1] or [1,H,W]

    bool scalar_covariance() const { return variance.numel() == 1; }
};

using LogitNormalOutput = LogitNormalOutputT<float>;

template <typename S>
struct ParamBlockT {
    std::string name;
    TensorT<S>* tensor;
};

template <typename S>
struct ConstParamBlockT {
    std::string name;
    const TensorT<S>* tensor;
};

template <typename S>
struct VaeModelT {
    VaeArch arch;

    std::vector<TensorT<S>> enc_w, enc_b;
    TensorT<S> mean_w, mean_b;
    TensorT<S> logvar_w, logvar_b;
    TensorT<S> dec_w, dec_b;
    std::vector<TensorT<S>> tconv_w, tconv_b;
    TensorT<S> out_mean_w, out_mean_b;
    TensorT<S> out_var_w, out_var_b;  // per-pixel covariance mode
    TensorT<S> out_var_raw;           // scalar covariance mode, one element

    // Allocates all parameter blocks with Glorot-uniform weights and zero
    // biases, drawn from the given seed in enumeration order.
    static VaeModelT create(const VaeArch& arch, std::uint64_t seed) {
        arch.validate();
        VaeModelT m;
        m.arch = arch;
        int c_prev = 1;
        for (int c : arch.encoder_channels) {
            m.enc_w.emplace_back(std::vector<int>{c, c_prev, 4, 4});
            m.enc_b.emplace_back(std::vector<int>{c});
            c_prev = c;
        }
        const int flat = arch.flat_features();
        m.mean_w = TensorT<S>({arch.latent_dim, flat});
        m.mean_b = TensorT<S>({arch.latent_dim});
        m.logvar_w = TensorT<S>({arch.latent_dim, flat});
        m.logvar_b = TensorT<S>({arch.latent_dim});
        m.dec_w = TensorT<S>({flat, arch.latent_dim});
        m.dec_b = TensorT<S>({flat});
        auto dec = arch.decoder_channels();
        c_prev = arch.feature_channels();
        for (int c : dec) {
            m.tconv_w.emplace_back(std::vector<int>{c_prev, c, 4, 4});
            m.tconv_b.emplace_back(std::vector<int>{c});
            c_prev = c;
        }
        m.out_mean_w = TensorT<S>({1, c_prev});
        m.out_mean_b = TensorT<S>({1});
        if (arch.covariance == Covariance::PerPixel) {
            m.out_var_w = TensorT<S>({1, c_prev});
            m.out_var_b = TensorT<S>({1});
        } else {
            m.out_var_raw = TensorT<S>({1});
        }
        m.init_glorot(seed);
        return m;
    }

    static VaeModelT zeros_like(const VaeModelT& other) {
        VaeModelT m = other;
        for (auto block : m.parameters()) block.tensor->fill(S(0));
        return m;
    }

    std::vector<ParamBlockT<S>> parameters() {
        std::vector<ParamBlockT<S>> blocks;
        for (std::size_t i = 0; i < enc_w.size(); ++i) {
            blocks.push_back({"enc_conv" + std::to_string(i) + "_w", &enc_w[i]});
            blocks.push_back({"enc_conv" + std::to_string(i) + "_b", &enc_b[i]});
        }
        blocks.push_back({"enc_mean_w", &mean_w});
        blocks.push_back({"enc_mean_b", &mean_b});
        blocks.push_back({"enc_logvar_w", &logvar_w});
        blocks.push_back({"enc_logvar_b", &logvar_b});
        blocks.push_back({"dec_dense_w", &dec_w});
        blocks.push_back({"dec_dense_b", &dec_b});
        for (std::size_t i = 0; i < tconv_w.size(); ++i) {
            blocks.push_back({"dec_tconv" + std::to_string(i) + "_w", &tconv_w[i]});
            blocks.push_back({"dec_tconv" + std::to_string(i) + "_b", &tconv_b[i]});
        }
        blocks.push_back({"out_mean_w", &out_mean_w});
        blocks.push_back({"out_mean_b", &out_mean_b});
        if (arch.covariance == Covariance::PerPixel) {
            blocks.push_back({"out_var_w", &out_var_w});
            blocks.push_back({"out_var_b", &out_var_b});
        } else {
            blocks.push_back({"out_var_raw", &out_var_raw});
        }
        return blocks;
    }

    std::vector<ConstParamBlockT<S>> parameters() const {
        auto blocks = const_cast<VaeModelT*>(this)->parameters();
        std::vector<ConstParamBlockT<S>> out;
        out.reserve(blocks.size());
        for (auto& b : blocks) out.push_back({b.name, b.tensor});
        return out;
    }

private:
    void init_glorot(std::uint64_t seed) {
        Rng rng(derive_seed(seed, 0x1217));
        auto fill_uniform = [&rng](TensorT<S>& t, int fan_in, int fan_out) {
            const double a = std::sqrt(6.0 / (fan_in + fan_out));
            for (auto& v : t.data) v = static_cast<S>(rng.uniform(-a, a));
        };
        for (auto& w : enc_w) fill_uniform(w, w.shape[1] * 16, w.shape[0] * 16);
        fill_uniform(mean_w, mean_w.shape[1], mean_w.shape[0]);
        fill_uniform(logvar_w, logvar_w.shape[1], logvar_w.shape[0]);
        fill_uniform(dec_w, dec_w.shape[1], dec_w.shape[0]);
        for (auto& w : tconv_w) fill_uniform(w, w.shape[0] * 16, w.shape[1] * 16);
        fill_uniform(out_mean_w, out_mean_w.shape[1], out_mean_w.shape[0]);
        if (arch.covariance == Covariance::PerPixel)
            fill_uniform(out_var_w, out_var_w.shape[1], out_var_w.shape[0]);
    }
};

using VaeModel = VaeModelT<float>;

namespace vae_detail {

template <typename S>
S sigmoid(S x) {
    if (x >= S(0)) return S(1) / (S(1) + std::exp(-x));
    const S e = std::exp(x);
    return e / (S(1) + e);
}

template <typename S>
S softplus(S x) {
    return std::max(x, S(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <typename S>
void axpy(TensorT<S>& dst, const TensorT<S>& src) {
    for (std::size_t i = 0; i < dst.numel(); ++i) dst.data[i] += src.data[i];
}

template <typename S>
TensorT<S> slice_to_tensor(const VaeArch& arch, const SliceImage& x) {
    if (x.height != arch.input_extent || x.width != arch.input_extent)
        throw DataError("slice geometry " + std::to_string(x.height) + "x" +
                        std::to_string(x.width) + " does not match model input extent " +
                        std::to_string(arch.input_extent));
    TensorT<S> t({1, x.height, x.width});
    for (std::size_t i = 0; i < x.pixels.size(); ++i) t.data[i] = static_cast<S>(x.pixels[i]);
    return t;
}

}  // namespace vae_detail

// ---------------------------------------------------------------------------
// Encoder
// ---------------------------------------------------------------------------

template <typename S>
struct EncoderTrace {
    TensorT<S> input;
    std::vector<TensorT<S>> pre;   // conv outputs before the activation
    std::vector<TensorT<S>> post;  // after the activation
    TensorT<S> flat;
};

template <typename S>
GaussianPosteriorT<S> encode_forward(const VaeModelT<S>& model, const SliceImage& x,
                                     EncoderTrace<S>* trace) {
    TensorT<S> cur = vae_detail::slice_to_tensor<S>(model.arch, x);
    if (trace) trace->input = cur;
    for (std::size_t l = 0; l < model.enc_w.size(); ++l) {
        TensorT<S> pre = conv2d(cur, model.enc_w[l], model.enc_b[l]);
        cur = activation(pre);
        if (trace) {
            trace->pre.push_back(std::move(pre));
            trace->post.push_back(cur);
        }
    }
    TensorT<S> flat({static_cast<int>(cur.numel())});
    flat.data = std::move(cur.data);
    if (trace) trace->flat = flat;

    TensorT<S> mean = dense(flat, model.mean_w, model.mean_b);
    TensorT<S> logvar = dense(flat, model.logvar_w, model.logvar_b);
    GaussianPosteriorT<S> post;
    post.mean = std::move(mean.data);
    post.log_variance = std::move(logvar.data);
    return post;
}

// Deterministic posterior for a slice: mean and log-variance from the two
// dense heads on the flattened final feature map.
template <typename S>
GaussianPosteriorT<S> encode(const VaeModelT<S>& model, const SliceImage& x) {
    return encode_forward<S>(model, x, nullptr);
}

// Backpropagates head gradients through the conv stack, accumulating
// parameter gradients into `grads`.
template <typename S>
void encode_backward(const VaeModelT<S>& model, const EncoderTrace<S>& trace,
                     const std::vector<S>& d_mean, const std::vector<S>& d_logvar,
                     VaeModelT<S>& grads) {
    TensorT<S> d_mean_t({model.arch.latent_dim});
    d_mean_t.data = d_mean;
    TensorT<S> d_logvar_t({model.arch.latent_dim});
    d_logvar_t.data = d_logvar;

    auto g_mean = dense_backward(trace.flat, model.mean_w, d_mean_t);
    auto g_logvar = dense_backward(trace.flat, model.logvar_w, d_logvar_t);
    vae_detail::axpy(grads.mean_w, g_mean.weights);
    vae_detail::axpy(grads.mean_b, g_mean.bias);
    vae_detail::axpy(grads.logvar_w, g_logvar.weights);
    vae_detail::axpy(grads.logvar_b, g_logvar.bias);

    const int n_layers = static_cast<int>(model.enc_w.size());
    TensorT<S> d_post(trace.post.back().shape);
    for (std::size_t i = 0; i < d_post.numel(); ++i)
        d_post.data[i] = g_mean.input.data[i] + g_logvar.input.data[i];

    for (int l = n_layers - 1; l >= 0; --l) {
        TensorT<S> d_pre = activation_backward(trace.pre[l], d_post);
        const TensorT<S>& layer_in = (l == 0) ? trace.input : trace.post[l - 1];
        auto g = conv2d_backward(layer_in, model.enc_w[l], d_pre);
        vae_detail::axpy(grads.enc_w[l], g.weights);
        vae_detail::axpy(grads.enc_b[l], g.bias);
        d_post = std::move(g.input);
    }
}

// ---------------------------------------------------------------------------
// Latent sampling (reparameterized)
// ---------------------------------------------------------------------------

// z = mean + exp(log_variance / 2) * eps.
template <typename S>
std::vector<S> latent_from_eps(const GaussianPosteriorT<S>& post, const std::vector<S>& eps) {
    std::vector<S> z(post.mean.size());
    for (std::size_t i = 0; i < z.size(); ++i)
        z[i] = post.mean[i] + std::exp(post.log_variance[i] / S(2)) * eps[i];
    return z;
}

template <typename S>
std::vector<std::vector<S>> draw_eps(std::size_t latent_dim, Rng& rng, int k) {
    std::vector<std::vector<S>> eps(k, std::vector<S>(latent_dim));
    for (auto& e : eps)
        for (auto& v : e) v = static_cast<S>(rng.normal());
    return eps;
}

template <typename S>
std::vector<std::vector<S>> sample_latent(const GaussianPosteriorT<S>& post, Rng& rng, int k) {
    if (k < 1) throw std::invalid_argument("sample_latent: k must be >= 1");
    auto eps = draw_eps<S>(post.mean.size(), rng, k);
    std::vector<std::vector<S>> samples;
    samples.reserve(k);
    for (auto& e : eps) samples.push_back(latent_from_eps(post, e));
    return samples;
}

// ---------------------------------------------------------------------------
// Decoder
// ---------------------------------------------------------------------------

template <typename S>
struct DecoderTrace {
    TensorT<S> z;
    TensorT<S> dense_pre;  // [flat]
    std::vector<TensorT<S>> tpre, tpost;
    TensorT<S> head_in;   // final feature map [C,H,W]
    TensorT<S> mean_pre;  // [1,H,W] before the logistic squash
    TensorT<S> sig;       // logistic output before clipping
    TensorT<S> var_raw;   // [1,H,W] (per-pixel) or [1] (scalar)
};

template <typename S>
LogitNormalOutputT<S> decode_forward(const VaeModelT<S>& model, const std::vector<S>& z,
                                     DecoderTrace<S>* trace) {
    const VaeArch& arch = model.arch;
    if (static_cast<int>(z.size()) != arch.latent_dim)
        throw DataError("latent vector dimension " + std::to_string(z.size()) +
                        " does not match model latent dimension " +
                        std::to_string(arch.latent_dim));

    TensorT<S> zt({arch.latent_dim});
    zt.data = z;
    TensorT<S> dense_pre = dense(zt, model.dec_w, model.dec_b);
    if (trace) {
        trace->z = zt;
        trace->dense_pre = dense_pre;
    }
    TensorT<S> act = activation(dense_pre);
    TensorT<S> cur({arch.feature_channels(), arch.feature_extent(), arch.feature_extent()});
    cur.data = std::move(act.data);

    for (std::size_t l = 0; l < model.tconv_w.size(); ++l) {
        TensorT<S> pre = tconv2d(cur, model.tconv_w[l], model.tconv_b[l]);
        cur = activation(pre);
        if (trace) {
            trace->tpre.push_back(std::move(pre));
            trace->tpost.push_back(cur);
        }
    }
    if (trace) trace->head_in = cur;

    TensorT<S> mean_pre = conv1x1(cur, model.out_mean_w, model.out_mean_b);
    LogitNormalOutputT<S> out;
    out.mean_unit = TensorT<S>(mean_pre.shape);
    TensorT<S> sig(mean_pre.shape);
    const S clip = static_cast<S>(arch.mean_clip);
    for (std::size_t i = 0; i < mean_pre.numel(); ++i) {
        const S s = vae_detail::sigmoid(mean_pre.data[i]);
        sig.data[i] = s;
        out.mean_unit.data[i] = std::min(std::max(s, clip), S(1) - clip);
    }

    const S floor = static_cast<S>(arch.variance_floor);
    if (arch.covariance == Covariance::PerPixel) {
        TensorT<S> var_raw = conv1x1(cur, model.out_var_w, model.out_var_b);
        out.variance = TensorT<S>(var_raw.shape);
        for (std::size_t i = 0; i < var_raw.numel(); ++i)
            out.variance.data[i] = std::max(vae_detail::softplus(var_raw.data[i]), floor);
        if (trace) trace->var_raw = std::move(var_raw);
    } else {
        out.variance = TensorT<S>({1});
        out.variance.data[0] = std::max(vae_detail::softplus(model.out_var_raw.data[0]), floor);
        if (trace) trace->var_raw = model.out_var_raw;
    }
    if (trace) {
        trace->mean_pre = std::move(mean_pre);
        trace->sig = std::move(sig);
    }
    return out;
}

template <typename S>
LogitNormalOutputT<S> decode(const VaeModelT<S>& model, const std::vector<S>& z) {
    return decode_forward<S>(model, z, nullptr);
}

// Backpropagates output-distribution gradients to parameter gradients and
// the latent input gradient. Clip and variance-floor saturations have zero
// subgradient.
template <typename S>
std::vector<S> decode_backward(const VaeModelT<S>& model, const DecoderTrace<S>& trace,
                               const TensorT<S>& d_mean_unit, const TensorT<S>& d_variance,
                               VaeModelT<S>& grads) {
    const VaeArch& arch = model.arch;
    const S clip = static_cast<S>(arch.mean_clip);
    const S floor = static_cast<S>(arch.variance_floor);

    TensorT<S> d_mean_pre(trace.mean_pre.shape);
    for (std::size_t i = 0; i < d_mean_pre.numel(); ++i) {
        const S s = trace.sig.data[i];
        const bool clipped = s < clip || s > S(1) - clip;
        d_mean_pre.data[i] = clipped ? S(0) : d_mean_unit.data[i] * s * (S(1) - s);
    }
    auto g_mean_head = conv1x1_backward(trace.head_in, model.out_mean_w, d_mean_pre);
    vae_detail::axpy(grads.out_mean_w, g_mean_head.weights);
    vae_detail::axpy(grads.out_mean_b, g_mean_head.bias);
    TensorT<S> d_head = std::move(g_mean_head.input);

    if (arch.covariance == Covariance::PerPixel) {
        TensorT<S> d_var_raw(trace.var_raw.shape);
        for (std::size_t i = 0; i < d_var_raw.numel(); ++i) {
            const S raw = trace.var_raw.data[i];
            const bool floored = vae_detail::softplus(raw) <= floor;
            d_var_raw.data[i] = floored ? S(0) : d_variance.data[i] * vae_detail::sigmoid(raw);
        }
        auto g_var_head = conv1x1_backward(trace.head_in, model.out_var_w, d_var_raw);
        vae_detail::axpy(grads.out_var_w, g_var_head.weights);
        vae_detail::axpy(grads.out_var_b, g_var_head.bias);
        vae_detail::axpy(d_head, g_var_head.input);
    } else {
        const S raw = trace.var_raw.data[0];
        const bool floored = vae_detail::softplus(raw) <= floor;
        if (!floored) grads.out_var_raw.data[0] += d_variance.data[0] * vae_detail::sigmoid(raw);
    }

    TensorT<S> d_post = std::move(d_head);
    for (int l = static_cast<int>(model.tconv_w.size()) - 1; l >= 0; --l) {
        TensorT<S> d_pre = activation_backward(trace.tpre[l], d_post);
        TensorT<S> first_in;
        if (l == 0) {
            TensorT<S> act = activation(trace.dense_pre);
            first_in = TensorT<S>({arch.feature_channels(), arch.feature_extent(),
                                   arch.feature_extent()});
            first_in.data = std::move(act.data);
        }
        const TensorT<S>& layer_in = (l == 0) ? first_in : trace.tpost[l - 1];
        auto g = tconv2d_backward(layer_in, model.tconv_w[l], d_pre);
        vae_detail::axpy(grads.tconv_w[l], g.weights);
        vae_detail::axpy(grads.tconv_b[l], g.bias);
        d_post = std::move(g.input);
    }

    TensorT<S> d_dense_flat({static_cast<int>(d_post.numel())});
    d_dense_flat.data = std::move(d_post.data);
    TensorT<S> d_dense_pre = activation_backward(trace.dense_pre, d_dense_flat);
    auto g_dense = dense_backward(trace.z, model.dec_w, d_dense_pre);
    vae_detail::axpy(grads.dec_w, g_dense.weights);
    vae_detail::axpy(grads.dec_b, g_dense.bias);
    return std::move(g_dense.input.data);
}

// ---------------------------------------------------------------------------
// Logit-normal likelihood over the mask interior
// ---------------------------------------------------------------------------

constexpr double kUnitClamp = 1e-3;  // clamp for the data-to-unit-interval map

// Sum over mask-interior pixels of the logit-normal log density of
// t = (x+1)/2 under (mean_unit, variance). Out-of-mask pixels never enter
// the accumulation, so the result is exactly invariant to them.
template <typename S>
double logit_normal_loglik(const SliceImage& x, const LogitNormalOutputT<S>& out,
                           const BrainMask& mask) {
    const int h = x.height, w = x.width;
    if (out.mean_unit.shape != std::vector<int>({1, h, w}))
        throw DataError("logit_normal_loglik: output geometry mismatch");
    if (mask.height != h || mask.width != w)
        throw DataError("logit_normal_loglik: mask geometry mismatch");
    if (mask.interior_count() == 0)
        throw DataError("logit_normal_loglik: empty brain mask (degenerate slice)");

    const bool scalar_cov = out.scalar_covariance();
    const double two_pi = 2.0 * 3.14159265358979323846;
    double acc = 0.0;
    for (int i = 0; i < h * w; ++i) {
        if (!mask.inside[i]) continue;
        double t = (static_cast<double>(x.pixels[i]) + 1.0) / 2.0;
        t = std::min(std::max(t, kUnitClamp), 1.0 - kUnitClamp);
        const double m = static_cast<double>(out.mean_unit.data[i]);
        const double v = static_cast<double>(scalar_cov ? out.variance.data[0]
                                                        : out.variance.data[i]);
        const double diff = std::log(t / (1.0 - t)) - std::log(m / (1.0 - m));
        acc += -0.5 * std::log(two_pi * v) - diff * diff / (2.0 * v) - std::log(t * (1.0 - t));
    }
    return acc;
}

// d loglik / d mean_unit and d loglik / d variance, zero outside the mask.
template <typename S>
void logit_normal_loglik_backward(const SliceImage& x, const LogitNormalOutputT<S>& out,
                                  const BrainMask& mask, TensorT<S>& d_mean_unit,
                                  TensorT<S>& d_variance) {
    const int h = x.height, w = x.width;
    const bool scalar_cov = out.scalar_covariance();
    d_mean_unit = TensorT<S>(out.mean_unit.shape);
    d_variance = TensorT<S>(out.variance.shape);
    for (int i = 0; i < h * w; ++i) {
        if (!mask.inside[i]) continue;
        double t = (static_cast<double>(x.pixels[i]) + 1.0) / 2.0;
        t = std::min(std::max(t, kUnitClamp), 1.0 - kUnitClamp);
        const double m = static_cast<double>(out.mean_unit.data[i]);
        const double v = static_cast<double>(scalar_cov ? out.variance.data[0]
                                                        : out.variance.data[i]);
        const double diff = std::log(t / (1.0 - t)) - std::log(m / (1.0 - m));
        const double dm = diff / v / (m * (1.0 - m));
        const double dv = -0.5 / v + diff * diff / (2.0 * v * v);
        d_mean_unit.data[i] += static_cast<S>(dm);
        if (scalar_cov)
            d_variance.data[0] += static_cast<S>(dv);
        else
            d_variance.data[i] += static_cast<S>(dv);
    }
}

// ---------------------------------------------------------------------------
// KL divergence to the standard normal prior
// ---------------------------------------------------------------------------

template <typename S>
double kl_standard(const GaussianPosteriorT<S>& post) {
    double acc = 0.0;
    for (std::size_t i = 0; i < post.mean.size(); ++i) {
        const double mu = static_cast<double>(post.mean[i]);
        const double lv = static_cast<double>(post.log_variance[i]);
        acc += 0.5 * (mu * mu + std::exp(lv) - lv - 1.0);
    }
    return acc;
}

template <typename S>
void kl_standard_backward(const GaussianPosteriorT<S>& post, std::vector<S>& d_mean,
                          std::vector<S>& d_logvar) {
    for (std::size_t i = 0; i < post.mean.size(); ++i) {
        d_mean[i] += post.mean[i];
        d_logvar[i] += S(0.5) * (std::exp(post.log_variance[i]) - S(1));
    }
}

// ---------------------------------------------------------------------------
// ELBO loss
// ---------------------------------------------------------------------------

struct ElboParts {
    double recon = 0.0;  // -(1/K) sum_k loglik
    double kl = 0.0;
    double total = 0.0;
};

// Negative ELBO with explicit (frozen) noise. `x_enc` feeds the encoder
// while the likelihood targets `x_target`; they coincide except for the
// denoising training variant. Gradients accumulate into `grads` when given.
template <typename S>
ElboParts elbo_with_eps(const VaeModelT<S>& model, const SliceImage& x_enc,
                        const SliceImage& x_target, const BrainMask& mask,
                        const std::vector<std::vector<S>>& eps, VaeModelT<S>* grads) {
    const int k = static_cast<int>(eps.size());
    if (k < 1) throw std::invalid_argument("elbo: need at least one latent sample");

    EncoderTrace<S> etrace;
    GaussianPosteriorT<S> post = encode_forward(model, x_enc, grads ? &etrace : nullptr);

    std::vector<S> d_mean(post.mean.size(), S(0));
    std::vector<S> d_logvar(post.mean.size(), S(0));

    double recon_acc = 0.0;
    for (const auto& e : eps) {
        std::vector<S> z = latent_from_eps(post, e);
        DecoderTrace<S> dtrace;
        LogitNormalOutputT<S> out = decode_forward(model, z, grads ? &dtrace : nullptr);
        recon_acc += logit_normal_loglik(x_target, out, mask);
        if (grads) {
            TensorT<S> d_mean_unit, d_variance;
            logit_normal_loglik_backward(x_target, out, mask, d_mean_unit, d_variance);
            const S scale = static_cast<S>(-1.0 / k);
            for (auto& v : d_mean_unit.data) v *= scale;
            for (auto& v : d_variance.data) v *= scale;
            std::vector<S> d_z = decode_backward(model, dtrace, d_mean_unit, d_variance, *grads);
            for (std::size_t i = 0; i < d_z.size(); ++i) {
                d_mean[i] += d_z[i];
                d_logvar[i] += d_z[i] * e[i] * S(0.5) * std::exp(post.log_variance[i] / S(2));
            }
        }
    }

    ElboParts parts;
    parts.recon = -recon_acc / k;
    parts.kl = kl_standard(post);
    parts.total = parts.recon + parts.kl;
    if (!std::isfinite(parts.total)) {
        const char* term = !std::isfinite(parts.recon) ? "reconstruction" : "KL";
        throw DivergenceError(std::string("elbo_loss: non-finite ") + term + " term");
    }

    if (grads) {
        kl_standard_backward(post, d_mean, d_logvar);
        encode_backward(model, etrace, d_mean, d_logvar, *grads);
    }
    return parts;
}

// Negative ELBO estimated with K reparameterized samples drawn from `rng`.
template <typename S>
ElboParts elbo_loss(const VaeModelT<S>& model, const SliceImage& x, const BrainMask& mask,
                    Rng& rng, int k, VaeModelT<S>* grads = nullptr) {
    if (k < 1) throw std::invalid_argument("elbo_loss: k must be >= 1");
    auto eps = draw_eps<S>(static_cast<std::size_t>(model.arch.latent_dim), rng, k);
    return elbo_with_eps(model, x, x, mask, eps, grads);
}

// ---------------------------------------------------------------------------
// Square-mask corruption (context-encoding variants)
// ---------------------------------------------------------------------------

// Overwrites `count` axis-aligned squares with uniform random gray levels;
// draws are (top, left, gray) per square. Returns a copy.
inline SliceImage apply_square_masks(const SliceImage& x, int mask_size, int count, Rng& rng) {
    if (count > 0 && mask_size > std::min(x.height, x.width))
        throw std::invalid_argument("apply_square_masks: mask size exceeds image extent");
    SliceImage out = x;
    for (int s = 0; s < count; ++s) {
        const int top = static_cast<int>(rng.index(x.height - mask_size + 1));
        const int left = static_cast<int>(rng.index(x.width - mask_size + 1));
        const float gray = static_cast<float>(rng.uniform(-1.0, 1.0));
        for (int y = top; y < top + mask_size; ++y)
            for (int xx = left; xx < left + mask_size; ++xx) out.at(y, xx) = gray;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reconstruction (posterior mean, decoded, mask overlay)
// ---------------------------------------------------------------------------

// Deterministic reconstruction: decode the posterior mean, map the unit
// mean back to [-1,1], and overlay the mask (background pixels forced
// to -1).
template <typename S>
SliceImage reconstruct(const VaeModelT<S>& model, const SliceImage& x, const BrainMask& mask) {
    if (mask.height != x.height || mask.width != x.width)
        throw DataError("reconstruct: mask geometry mismatch");
    GaussianPosteriorT<S> post = encode(model, x);
    LogitNormalOutputT<S> out = decode(model, post.mean);
    SliceImage rec = x;
    for (int i = 0; i < x.height * x.width; ++i)
        rec.pixels[i] = mask.inside[i]
                            ? static_cast<float>(2.0 * static_cast<double>(out.mean_unit.data[i]) - 1.0)
                            : -1.0f;
    return rec;
}

}  // namespace latdis
