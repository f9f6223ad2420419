#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace rpnet {

// probability clipping floor shared by ground-truth loading and the losses
inline constexpr double kProbEps = 1e-7;

inline std::string shape_str(const std::vector<int>& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

// Flat n-dimensional array; the currency of the network core. Row-major,
// fixed iteration order everywhere for reproducibility.
template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), v(numel_of(shape), T(0)) {}

    static std::size_t numel_of(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int d : s) {
            if (d <= 0) throw std::invalid_argument("tensor dims must be positive");
            n *= static_cast<std::size_t>(d);
        }
        return s.empty() ? 0 : n;
    }

    std::size_t size() const { return v.size(); }
    T* data() { return v.data(); }
    const T* data() const { return v.data(); }

    int dim(std::size_t i) const { return shape[i]; }
    std::size_t ndims() const { return shape.size(); }

    void fill(T x) { std::fill(v.begin(), v.end(), x); }
    void zero() { fill(T(0)); }

    bool finite() const {
        for (T x : v) {
            if (!std::isfinite(static_cast<double>(x))) return false;
        }
        return true;
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    std::string shape_str() const { return rpnet::shape_str(shape); }
};

template <typename T>
void require_shape(const Tensor<T>& t, const std::vector<int>& shape, const char* what) {
    if (t.shape != shape) {
        throw std::invalid_argument(std::string(what) + ": expected shape " + shape_str(shape) +
                                    ", got " + t.shape_str());
    }
}

template <typename From, typename To>
Tensor<To> cast_tensor(const Tensor<From>& t) {
    Tensor<To> out(t.shape);
    for (std::size_t i = 0; i < t.size(); ++i) out.v[i] = static_cast<To>(t.v[i]);
    return out;
}

} // namespace rpnet
