#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "latdis/preprocess.hpp"
#include "latdis/slice.hpp"
#include "latdis/vae.hpp"

namespace latdis {

enum class TrainVariant { Plain, CeDvae, CeReg };

struct TrainConfig {
    int epochs = 100;
    int batch_size = 32;
    double learning_rate = 1e-4;
    int latent_samples = 3;  // K
    TrainVariant variant = TrainVariant::Plain;
    int mask_size = 40;      // square-mask edge for the ce variants
    int mask_count = 1;
    double ce_lambda = 1.0;  // weight of the ce-reg clean-vs-masked penalty
    std::uint64_t seed = 0;
    bool augment = true;
    AugmentConfig augment_cfg;
    int threads = 0;  // 0 = hardware concurrency
};

struct EpochRecord {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
};

// Clean-vs-masked reconstruction penalty of the ce-reg variant:
// lambda * sum over mask-interior pixels of (x - reconstruct(corrupted))^2,
// through the deterministic posterior-mean decode path. Gradients
// accumulate into `grads` when given.
double ce_reg_penalty(const VaeModelT<float>& model, const SliceImage& clean,
                      const SliceImage& corrupted, const BrainMask& mask, double lambda,
                      VaeModelT<float>* grads);

// Minimizes the negative ELBO over shuffled mini-batches with Adam.
// Per-slice randomness is derived from (seed, epoch, position) so results
// are bit-identical for a fixed config regardless of thread count.
// Throws DivergenceError with the epoch/batch index if the loss goes
// non-finite.
std::vector<EpochRecord> train(VaeModelT<float>& model, std::span<const LabeledSlice> train_set,
                               std::span<const LabeledSlice> val_set, const TrainConfig& cfg);

}  // namespace latdis
