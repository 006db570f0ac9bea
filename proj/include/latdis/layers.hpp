#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "latdis/tensor.hpp"

namespace latdis {

// Layer kinds used by the architecture descriptors. Stride-2 4x4
// convolutions with "same" zero padding exactly halve (conv) or double
// (tconv) the spatial extents; the 1x1 output heads use conv1x1.
enum class LayerKind { Conv, TConv, Conv1x1, Dense, Activation, StochasticGaussian };

struct LayerSpec {
    LayerKind kind;
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 4;
    int stride = 2;
};

constexpr double kLeakySlope = 0.2;

namespace detail {

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// conv2d: input [C_in,H,W], weights [C_out,C_in,4,4], bias [C_out]
// -> [C_out,H/2,W/2]. Zero "same" padding of 1 on each side.
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> conv2d(const TensorT<S>& input, const TensorT<S>& weights,
                  const TensorT<S>& bias) {
    detail::require(input.shape.size() == 3, "conv2d: input must be rank 3");
    detail::require(weights.shape.size() == 4 && weights.shape[2] == 4 && weights.shape[3] == 4,
                    "conv2d: weights must be [C_out,C_in,4,4]");
    const int c_in = input.shape[0], h = input.shape[1], w = input.shape[2];
    const int c_out = weights.shape[0];
    detail::require(weights.shape[1] == c_in,
                    "conv2d: weight input channels " + std::to_string(weights.shape[1]) +
                        " do not match input channels " + std::to_string(c_in));
    detail::require(bias.shape.size() == 1 && bias.shape[0] == c_out,
                    "conv2d: bias must be [C_out]");
    detail::require(h % 2 == 0 && w % 2 == 0, "conv2d: spatial extents must be even");

    const int oh = h / 2, ow = w / 2;
    TensorT<S> out({c_out, oh, ow});
    for (int co = 0; co < c_out; ++co) {
        const S b = bias.data[co];
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                S acc = b;
                for (int ci = 0; ci < c_in; ++ci) {
                    const S* in_plane = input.data.data() + static_cast<std::size_t>(ci) * h * w;
                    const S* wk = weights.data.data() +
                                  (static_cast<std::size_t>(co) * c_in + ci) * 16;
                    for (int ky = 0; ky < 4; ++ky) {
                        const int iy = 2 * oy + ky - 1;
                        if (static_cast<unsigned>(iy) >= static_cast<unsigned>(h)) continue;
                        const S* row = in_plane + static_cast<std::size_t>(iy) * w;
                        for (int kx = 0; kx < 4; ++kx) {
                            const int ix = 2 * ox + kx - 1;
                            if (static_cast<unsigned>(ix) >= static_cast<unsigned>(w)) continue;
                            acc += row[ix] * wk[ky * 4 + kx];
                        }
                    }
                }
                out.data[(static_cast<std::size_t>(co) * oh + oy) * ow + ox] = acc;
            }
        }
    }
    return out;
}

template <typename S>
struct Conv2dGrads {
    TensorT<S> input, weights, bias;
};

// Gradients of sum(upstream * conv2d(input, weights, bias)).
template <typename S>
Conv2dGrads<S> conv2d_backward(const TensorT<S>& input, const TensorT<S>& weights,
                               const TensorT<S>& upstream) {
    const int c_in = input.shape[0], h = input.shape[1], w = input.shape[2];
    const int c_out = weights.shape[0];
    const int oh = h / 2, ow = w / 2;
    detail::require(upstream.shape == std::vector<int>({c_out, oh, ow}),
                    "conv2d_backward: upstream shape mismatch, expected " +
                        shape_string({c_out, oh, ow}) + " got " + shape_string(upstream.shape));

    Conv2dGrads<S> g{TensorT<S>(input.shape), TensorT<S>(weights.shape), TensorT<S>({c_out})};
    for (int co = 0; co < c_out; ++co) {
        const S* up_plane = upstream.data.data() + static_cast<std::size_t>(co) * oh * ow;
        S bias_acc = S(0);
        for (int i = 0; i < oh * ow; ++i) bias_acc += up_plane[i];
        g.bias.data[co] = bias_acc;

        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                const S u = up_plane[static_cast<std::size_t>(oy) * ow + ox];
                if (u == S(0)) continue;
                for (int ci = 0; ci < c_in; ++ci) {
                    const S* in_plane = input.data.data() + static_cast<std::size_t>(ci) * h * w;
                    S* gin_plane = g.input.data.data() + static_cast<std::size_t>(ci) * h * w;
                    const std::size_t wbase = (static_cast<std::size_t>(co) * c_in + ci) * 16;
                    for (int ky = 0; ky < 4; ++ky) {
                        const int iy = 2 * oy + ky - 1;
                        if (static_cast<unsigned>(iy) >= static_cast<unsigned>(h)) continue;
                        for (int kx = 0; kx < 4; ++kx) {
                            const int ix = 2 * ox + kx - 1;
                            if (static_cast<unsigned>(ix) >= static_cast<unsigned>(w)) continue;
                            const std::size_t ii = static_cast<std::size_t>(iy) * w + ix;
                            g.weights.data[wbase + ky * 4 + kx] += u * in_plane[ii];
                            gin_plane[ii] += u * weights.data[wbase + ky * 4 + kx];
                        }
                    }
                }
            }
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// tconv2d: input [C_in,H,W], weights [C_in,C_out,4,4], bias [C_out]
// -> [C_out,2H,2W]. Adjoint of conv2d for the same geometry, so
// <tconv(x), y> == <x, conv(y)> when the weights are shared and bias is 0.
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> tconv2d(const TensorT<S>& input, const TensorT<S>& weights,
                   const TensorT<S>& bias) {
    detail::require(input.shape.size() == 3, "tconv2d: input must be rank 3");
    detail::require(weights.shape.size() == 4 && weights.shape[2] == 4 && weights.shape[3] == 4,
                    "tconv2d: weights must be [C_in,C_out,4,4]");
    const int c_in = input.shape[0], h = input.shape[1], w = input.shape[2];
    const int c_out = weights.shape[1];
    detail::require(weights.shape[0] == c_in,
                    "tconv2d: weight input channels " + std::to_string(weights.shape[0]) +
                        " do not match input channels " + std::to_string(c_in));
    detail::require(bias.shape.size() == 1 && bias.shape[0] == c_out,
                    "tconv2d: bias must be [C_out]");

    const int ohh = 2 * h, oww = 2 * w;
    TensorT<S> out({c_out, ohh, oww});
    for (int co = 0; co < c_out; ++co) {
        S* out_plane = out.data.data() + static_cast<std::size_t>(co) * ohh * oww;
        const S b = bias.data[co];
        for (int i = 0; i < ohh * oww; ++i) out_plane[i] = b;
    }
    for (int ci = 0; ci < c_in; ++ci) {
        const S* in_plane = input.data.data() + static_cast<std::size_t>(ci) * h * w;
        for (int co = 0; co < c_out; ++co) {
            S* out_plane = out.data.data() + static_cast<std::size_t>(co) * ohh * oww;
            const S* wk = weights.data.data() + (static_cast<std::size_t>(ci) * c_out + co) * 16;
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    const S v = in_plane[static_cast<std::size_t>(y) * w + x];
                    if (v == S(0)) continue;
                    for (int ky = 0; ky < 4; ++ky) {
                        const int iy = 2 * y + ky - 1;
                        if (static_cast<unsigned>(iy) >= static_cast<unsigned>(ohh)) continue;
                        S* row = out_plane + static_cast<std::size_t>(iy) * oww;
                        for (int kx = 0; kx < 4; ++kx) {
                            const int ix = 2 * x + kx - 1;
                            if (static_cast<unsigned>(ix) >= static_cast<unsigned>(oww)) continue;
                            row[ix] += v * wk[ky * 4 + kx];
                        }
                    }
                }
            }
        }
    }
    return out;
}

template <typename S>
struct TConv2dGrads {
    TensorT<S> input, weights, bias;
};

template <typename S>
TConv2dGrads<S> tconv2d_backward(const TensorT<S>& input, const TensorT<S>& weights,
                                 const TensorT<S>& upstream) {
    const int c_in = input.shape[0], h = input.shape[1], w = input.shape[2];
    const int c_out = weights.shape[1];
    const int ohh = 2 * h, oww = 2 * w;
    detail::require(upstream.shape == std::vector<int>({c_out, ohh, oww}),
                    "tconv2d_backward: upstream shape mismatch, expected " +
                        shape_string({c_out, ohh, oww}) + " got " + shape_string(upstream.shape));

    TConv2dGrads<S> g{TensorT<S>(input.shape), TensorT<S>(weights.shape),
                      TensorT<S>({c_out})};
    for (int co = 0; co < c_out; ++co) {
        const S* up_plane = upstream.data.data() + static_cast<std::size_t>(co) * ohh * oww;
        S bias_acc = S(0);
        for (int i = 0; i < ohh * oww; ++i) bias_acc += up_plane[i];
        g.bias.data[co] = bias_acc;
    }
    for (int ci = 0; ci < c_in; ++ci) {
        const S* in_plane = input.data.data() + static_cast<std::size_t>(ci) * h * w;
        S* gin_plane = g.input.data.data() + static_cast<std::size_t>(ci) * h * w;
        for (int co = 0; co < c_out; ++co) {
            const S* up_plane = upstream.data.data() + static_cast<std::size_t>(co) * ohh * oww;
            const std::size_t wbase = (static_cast<std::size_t>(ci) * c_out + co) * 16;
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    const std::size_t ii = static_cast<std::size_t>(y) * w + x;
                    const S v = in_plane[ii];
                    S gin_acc = S(0);
                    for (int ky = 0; ky < 4; ++ky) {
                        const int iy = 2 * y + ky - 1;
                        if (static_cast<unsigned>(iy) >= static_cast<unsigned>(ohh)) continue;
                        const S* row = up_plane + static_cast<std::size_t>(iy) * oww;
                        for (int kx = 0; kx < 4; ++kx) {
                            const int ix = 2 * x + kx - 1;
                            if (static_cast<unsigned>(ix) >= static_cast<unsigned>(oww)) continue;
                            const S u = row[ix];
                            gin_acc += u * weights.data[wbase + ky * 4 + kx];
                            g.weights.data[wbase + ky * 4 + kx] += u * v;
                        }
                    }
                    gin_plane[ii] += gin_acc;
                }
            }
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// conv1x1: per-pixel linear map over channels, used by the decoder output
// heads. input [C_in,H,W], weights [C_out,C_in], bias [C_out] -> [C_out,H,W].
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> conv1x1(const TensorT<S>& input, const TensorT<S>& weights,
                   const TensorT<S>& bias) {
    detail::require(input.shape.size() == 3, "conv1x1: input must be rank 3");
    const int c_in = input.shape[0], h = input.shape[1], w = input.shape[2];
    detail::require(weights.shape.size() == 2 && weights.shape[1] == c_in,
                    "conv1x1: weights must be [C_out,C_in]");
    const int c_out = weights.shape[0];
    detail::require(bias.shape == std::vector<int>({c_out}), "conv1x1: bias must be [C_out]");

    const std::size_t hw = static_cast<std::size_t>(h) * w;
    TensorT<S> out({c_out, h, w});
    for (int co = 0; co < c_out; ++co) {
        S* out_plane = out.data.data() + co * hw;
        for (std::size_t i = 0; i < hw; ++i) out_plane[i] = bias.data[co];
        for (int ci = 0; ci < c_in; ++ci) {
            const S wv = weights.data[static_cast<std::size_t>(co) * c_in + ci];
            const S* in_plane = input.data.data() + ci * hw;
            for (std::size_t i = 0; i < hw; ++i) out_plane[i] += wv * in_plane[i];
        }
    }
    return out;
}

template <typename S>
struct Conv1x1Grads {
    TensorT<S> input, weights, bias;
};

template <typename S>
Conv1x1Grads<S> conv1x1_backward(const TensorT<S>& input, const TensorT<S>& weights,
                                 const TensorT<S>& upstream) {
    const int c_in = input.shape[0], h = input.shape[1], w = input.shape[2];
    const int c_out = weights.shape[0];
    detail::require(upstream.shape == std::vector<int>({c_out, h, w}),
                    "conv1x1_backward: upstream shape mismatch");
    const std::size_t hw = static_cast<std::size_t>(h) * w;

    Conv1x1Grads<S> g{TensorT<S>(input.shape), TensorT<S>(weights.shape), TensorT<S>({c_out})};
    for (int co = 0; co < c_out; ++co) {
        const S* up_plane = upstream.data.data() + co * hw;
        S bias_acc = S(0);
        for (std::size_t i = 0; i < hw; ++i) bias_acc += up_plane[i];
        g.bias.data[co] = bias_acc;
        for (int ci = 0; ci < c_in; ++ci) {
            const S* in_plane = input.data.data() + ci * hw;
            S* gin_plane = g.input.data.data() + ci * hw;
            const S wv = weights.data[static_cast<std::size_t>(co) * c_in + ci];
            S wacc = S(0);
            for (std::size_t i = 0; i < hw; ++i) {
                wacc += up_plane[i] * in_plane[i];
                gin_plane[i] += wv * up_plane[i];
            }
            g.weights.data[static_cast<std::size_t>(co) * c_in + ci] += wacc;
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// dense: y = W x + b with W [m,n], x [n], b [m].
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> dense(const TensorT<S>& input, const TensorT<S>& weights,
                 const TensorT<S>& bias) {
    detail::require(weights.shape.size() == 2, "dense: weights must be rank 2");
    const int m = weights.shape[0], n = weights.shape[1];
    detail::require(static_cast<int>(input.numel()) == n,
                    "dense: input extent " + std::to_string(input.numel()) +
                        " does not match weight columns " + std::to_string(n));
    detail::require(bias.shape == std::vector<int>({m}), "dense: bias must be [m]");

    TensorT<S> out({m});
    for (int i = 0; i < m; ++i) {
        const S* row = weights.data.data() + static_cast<std::size_t>(i) * n;
        S acc = bias.data[i];
        for (int j = 0; j < n; ++j) acc += row[j] * input.data[j];
        out.data[i] = acc;
    }
    return out;
}

template <typename S>
struct DenseGrads {
    TensorT<S> input, weights, bias;
};

template <typename S>
DenseGrads<S> dense_backward(const TensorT<S>& input, const TensorT<S>& weights,
                             const TensorT<S>& upstream) {
    const int m = weights.shape[0], n = weights.shape[1];
    detail::require(static_cast<int>(upstream.numel()) == m,
                    "dense_backward: upstream extent mismatch");

    DenseGrads<S> g{TensorT<S>(input.shape), TensorT<S>(weights.shape), TensorT<S>({m})};
    for (int i = 0; i < m; ++i) {
        const S u = upstream.data[i];
        g.bias.data[i] = u;
        const S* row = weights.data.data() + static_cast<std::size_t>(i) * n;
        S* wrow = g.weights.data.data() + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            wrow[j] = u * input.data[j];
            g.input.data[j] += u * row[j];
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// activation: elementwise leaky rectifier, negative slope 0.2.
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> activation(const TensorT<S>& x) {
    TensorT<S> out(x.shape);
    const S slope = static_cast<S>(kLeakySlope);
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const S v = x.data[i];
        out.data[i] = v > S(0) ? v : slope * v;
    }
    return out;
}

template <typename S>
TensorT<S> activation_backward(const TensorT<S>& x, const TensorT<S>& upstream) {
    detail::require(x.same_shape(upstream), "activation_backward: shape mismatch");
    TensorT<S> g(x.shape);
    const S slope = static_cast<S>(kLeakySlope);
    for (std::size_t i = 0; i < x.numel(); ++i)
        g.data[i] = upstream.data[i] * (x.data[i] > S(0) ? S(1) : slope);
    return g;
}

}  // namespace latdis
