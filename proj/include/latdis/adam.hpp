#pragma once

#include <cmath>
#include <string>

#include "latdis/errors.hpp"
#include "latdis/tensor.hpp"

namespace latdis {

// Adam state for one parameter block. Moment arrays are lazily sized on
// the first step and must then keep the parameter shape.
template <typename S>
struct AdamStateT {
    long step = 0;
    TensorT<S> first_moment;
    TensorT<S> second_moment;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double learning_rate = 1e-4;
};

using AdamState = AdamStateT<float>;

// One Adam update with bias-corrected moments. `block_name` only feeds the
// non-finite-gradient diagnostic.
template <typename S>
void adam_step(TensorT<S>& params, const TensorT<S>& grads, AdamStateT<S>& state,
               const std::string& block_name = "params") {
    if (!params.same_shape(grads))
        throw std::invalid_argument("adam_step: parameter/gradient shape mismatch for " +
                                    block_name);
    if (state.first_moment.numel() == 0) {
        state.first_moment = TensorT<S>(params.shape);
        state.second_moment = TensorT<S>(params.shape);
    }
    if (!state.first_moment.same_shape(params))
        throw std::invalid_argument("adam_step: moment shape mismatch for " + block_name);

    ++state.step;
    const double b1 = state.beta1, b2 = state.beta2;
    const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.numel(); ++i) {
        const double g = static_cast<double>(grads.data[i]);
        if (!std::isfinite(g))
            throw DivergenceError("adam_step: non-finite gradient in block '" + block_name +
                                  "' at element " + std::to_string(i));
        double m = b1 * state.first_moment.data[i] + (1.0 - b1) * g;
        double v = b2 * state.second_moment.data[i] + (1.0 - b2) * g * g;
        state.first_moment.data[i] = static_cast<S>(m);
        state.second_moment.data[i] = static_cast<S>(v);
        const double m_hat = m / corr1;
        const double v_hat = v / corr2;
        params.data[i] = static_cast<S>(params.data[i] -
                                        state.learning_rate * m_hat /
                                            (std::sqrt(v_hat) + state.epsilon));
    }
}

}  // namespace latdis
