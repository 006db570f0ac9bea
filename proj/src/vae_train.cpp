#include "latdis/vae_train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "latdis/adam.hpp"
#include "latdis/errors.hpp"
#include "latdis/parallel.hpp"

namespace latdis {

namespace {

// Stream tags for derived seeds, distinct per purpose so draw sequences
// never alias across uses.
constexpr std::uint64_t kShuffleTag = 0x53484641ULL;
constexpr std::uint64_t kSliceTag = 0x534C4943ULL;
constexpr std::uint64_t kValTag = 0x56414C00ULL;

double slice_loss(const VaeModelT<float>& model, const LabeledSlice& ls, const TrainConfig& cfg,
                  std::uint64_t slice_seed, VaeModelT<float>* grads) {
    Rng rng(slice_seed);
    SliceImage img = ls.image;
    BrainMask msk = ls.mask;
    if (cfg.augment) std::tie(img, msk) = augment(img, msk, rng, cfg.augment_cfg);

    switch (cfg.variant) {
        case TrainVariant::Plain:
            return elbo_loss(model, img, msk, rng, cfg.latent_samples, grads).total;
        case TrainVariant::CeDvae: {
            SliceImage corrupted = apply_square_masks(img, cfg.mask_size, cfg.mask_count, rng);
            auto eps = draw_eps<float>(static_cast<std::size_t>(model.arch.latent_dim), rng,
                                       cfg.latent_samples);
            // Corrupted input feeds the encoder, likelihood targets the clean slice.
            return elbo_with_eps(model, corrupted, img, msk, eps, grads).total;
        }
        case TrainVariant::CeReg: {
            double loss = elbo_loss(model, img, msk, rng, cfg.latent_samples, grads).total;
            SliceImage corrupted = apply_square_masks(img, cfg.mask_size, cfg.mask_count, rng);
            return loss + ce_reg_penalty(model, img, corrupted, msk, cfg.ce_lambda, grads);
        }
    }
    throw ConfigError("train: unknown variant");
}

}  // namespace

double ce_reg_penalty(const VaeModelT<float>& model, const SliceImage& clean,
                      const SliceImage& corrupted, const BrainMask& mask, double lambda,
                      VaeModelT<float>* grads) {
    EncoderTrace<float> etrace;
    GaussianPosteriorT<float> post = encode_forward(model, corrupted, grads ? &etrace : nullptr);
    DecoderTrace<float> dtrace;
    LogitNormalOutputT<float> out = decode_forward(model, post.mean, grads ? &dtrace : nullptr);

    double acc = 0.0;
    TensorT<float> d_mean_unit(out.mean_unit.shape);
    for (int i = 0; i < clean.height * clean.width; ++i) {
        if (!mask.inside[i]) continue;
        const double r = 2.0 * static_cast<double>(out.mean_unit.data[i]) - 1.0;
        const double e = static_cast<double>(clean.pixels[i]) - r;
        acc += e * e;
        // d/d mean_unit of lambda*(x - (2m-1))^2 = -4*lambda*(x - r)
        d_mean_unit.data[i] = static_cast<float>(-4.0 * lambda * e);
    }
    if (grads) {
        TensorT<float> d_variance(out.variance.shape);
        std::vector<float> d_z = decode_backward(model, dtrace, d_mean_unit, d_variance, *grads);
        std::vector<float> d_logvar(d_z.size(), 0.0f);
        encode_backward(model, etrace, d_z, d_logvar, *grads);
    }
    return lambda * acc;
}

std::vector<EpochRecord> train(VaeModelT<float>& model, std::span<const LabeledSlice> train_set,
                               std::span<const LabeledSlice> val_set, const TrainConfig& cfg) {
    if (train_set.empty()) throw DataError("train: empty training set");
    if (cfg.epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (cfg.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (cfg.latent_samples < 1) throw ConfigError("train: latent_samples must be >= 1");
    const int extent = model.arch.input_extent;
    for (const auto& ls : train_set)
        if (ls.image.height != extent || ls.image.width != extent)
            throw DataError("train: slice geometry does not match model input extent");

    const std::size_t n = train_set.size();
    const std::size_t batch = std::min<std::size_t>(cfg.batch_size, n);

    auto blocks = model.parameters();
    std::vector<AdamState> states(blocks.size());
    for (auto& st : states) st.learning_rate = cfg.learning_rate;

    // One gradient buffer per in-flight batch slot; reduction then walks
    // the slots in slice order, so the sum never depends on scheduling.
    std::vector<VaeModelT<float>> grad_bufs(batch, VaeModelT<float>::zeros_like(model));
    VaeModelT<float> grad_sum = VaeModelT<float>::zeros_like(model);
    std::vector<double> losses(batch, 0.0);

    std::vector<std::vector<TensorT<float>*>> buf_blocks(batch);
    for (std::size_t i = 0; i < batch; ++i)
        for (auto blk : grad_bufs[i].parameters()) buf_blocks[i].push_back(blk.tensor);
    std::vector<TensorT<float>*> sum_blocks;
    for (auto blk : grad_sum.parameters()) sum_blocks.push_back(blk.tensor);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    std::vector<EpochRecord> curve;
    curve.reserve(cfg.epochs);
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(cfg.seed, kShuffleTag, static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < n; start += batch, ++batch_index) {
            const std::size_t bsz = std::min(batch, n - start);
            parallel_for(bsz, cfg.threads, [&](std::size_t i) {
                for (auto* t : buf_blocks[i]) t->fill(0.0f);
                const std::size_t pos = start + i;
                const std::uint64_t sseed =
                    derive_seed(cfg.seed, kSliceTag, static_cast<std::uint64_t>(epoch), pos);
                losses[i] = slice_loss(model, train_set[order[pos]], cfg, sseed, &grad_bufs[i]);
            });

            double batch_loss = 0.0;
            for (std::size_t i = 0; i < bsz; ++i) batch_loss += losses[i];
            if (!std::isfinite(batch_loss))
                throw DivergenceError("train: non-finite loss at epoch " +
                                      std::to_string(epoch) + " batch " +
                                      std::to_string(batch_index));
            epoch_loss += batch_loss;

            for (std::size_t b = 0; b < sum_blocks.size(); ++b) {
                TensorT<float>& dst = *sum_blocks[b];
                dst.fill(0.0f);
                for (std::size_t i = 0; i < bsz; ++i) {
                    const TensorT<float>& src = *buf_blocks[i][b];
                    for (std::size_t e = 0; e < dst.numel(); ++e) dst.data[e] += src.data[e];
                }
                const float inv = 1.0f / static_cast<float>(bsz);
                for (auto& v : dst.data) v *= inv;
                adam_step(*blocks[b].tensor, dst, states[b], blocks[b].name);
            }
        }

        double val_loss = 0.0;
        if (!val_set.empty()) {
            std::vector<double> val_losses(val_set.size(), 0.0);
            parallel_for(val_set.size(), cfg.threads, [&](std::size_t i) {
                Rng rng(derive_seed(cfg.seed, kValTag, static_cast<std::uint64_t>(epoch), i));
                val_losses[i] = elbo_loss(model, val_set[i].image, val_set[i].mask, rng,
                                          cfg.latent_samples)
                                    .total;
            });
            for (double v : val_losses) val_loss += v;
            val_loss /= static_cast<double>(val_set.size());
        }

        curve.push_back({epoch, epoch_loss / static_cast<double>(n), val_loss});
    }
    return curve;
}

}  // namespace latdis
