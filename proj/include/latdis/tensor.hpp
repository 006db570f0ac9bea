#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace latdis {

// Dense row-major n-dimensional tensor. Scalar type S is float for
// training/inference and double for gradient-check runs.
template <typename S>
struct TensorT {
    std::vector<int> shape;
    std::vector<S> data;

    TensorT() = default;

    explicit TensorT(std::vector<int> extents, S fill = S(0))
        : shape(std::move(extents)) {
        std::size_t n = 1;
        for (int e : shape) {
            if (e <= 0) throw std::invalid_argument("tensor extent must be positive");
            n *= static_cast<std::size_t>(e);
        }
        data.assign(n, fill);
    }

    static TensorT zeros_like(const TensorT& other) { return TensorT(other.shape); }

    std::size_t numel() const { return data.size(); }

    int extent(std::size_t axis) const { return shape.at(axis); }

    S& operator[](std::size_t i) { return data[i]; }
    const S& operator[](std::size_t i) const { return data[i]; }

    bool same_shape(const TensorT& other) const { return shape == other.shape; }

    bool all_finite() const {
        for (S v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    void fill(S v) { std::fill(data.begin(), data.end(), v); }
};

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

inline std::string shape_string(const std::vector<int>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

}  // namespace latdis
