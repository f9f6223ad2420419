#pragma once

// Layer forward/backward kernels. All loops give every output element exactly
// one writer and run inner reductions in a fixed order, so results are
// bit-identical regardless of the number of OpenMP threads.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "rpnet/tensor.hpp"

namespace rpnet {

#ifndef NDEBUG
template <typename T>
inline void debug_check_finite(const Tensor<T>& t, const char* what) {
    if (!t.finite()) throw std::runtime_error(std::string(what) + ": non-finite value");
}
#else
template <typename T>
inline void debug_check_finite(const Tensor<T>&, const char*) {}
#endif

inline int conv_out_dim(int in, int kernel, int stride, int pad, int dilation) {
    int span = dilation * (kernel - 1) + 1;
    int num = in + 2 * pad - span;
    if (num < 0) return 0;
    return num / stride + 1;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& t, std::vector<int> shape) {
    if (Tensor<T>::numel_of(shape) != t.size()) {
        throw std::invalid_argument("reshape: element count mismatch " + t.shape_str() + " -> " +
                                    shape_str(shape));
    }
    Tensor<T> out = t;
    out.shape = std::move(shape);
    return out;
}

namespace detail {

template <typename T>
std::vector<T> pad_nchw(const Tensor<T>& x, int pad) {
    int b = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3];
    int hp = h + 2 * pad, wp = w + 2 * pad;
    std::vector<T> out(static_cast<std::size_t>(b) * c * hp * wp, T(0));
#pragma omp parallel for collapse(2) schedule(static)
    for (int bi = 0; bi < b; ++bi) {
        for (int ci = 0; ci < c; ++ci) {
            const T* src = x.data() + (static_cast<std::size_t>(bi) * c + ci) * h * w;
            T* dst = out.data() + (static_cast<std::size_t>(bi) * c + ci) * hp * wp;
            for (int y = 0; y < h; ++y) {
                T* row = dst + static_cast<std::size_t>(y + pad) * wp + pad;
                const T* srow = src + static_cast<std::size_t>(y) * w;
                for (int xx = 0; xx < w; ++xx) row[xx] = srow[xx];
            }
        }
    }
    return out;
}

inline void check_conv_args(const std::vector<int>& in, const std::vector<int>& w,
                            const std::vector<int>& bias, int stride, int pad, int dilation) {
    if (in.size() != 4) throw std::invalid_argument("conv2d: input must be BxCxHxW");
    if (w.size() != 4) throw std::invalid_argument("conv2d: weight must be CoxCixKxK");
    if (bias.size() != 1 || bias[0] != w[0]) {
        throw std::invalid_argument("conv2d: bias must have one entry per output channel");
    }
    if (w[1] != in[1]) {
        throw std::invalid_argument("conv2d: weight expects " + std::to_string(w[1]) +
                                    " input channels, input has " + std::to_string(in[1]));
    }
    if (w[2] != w[3] || w[2] < 1) throw std::invalid_argument("conv2d: kernel must be square, K>=1");
    if (stride < 1 || pad < 0 || dilation < 1) {
        throw std::invalid_argument("conv2d: need stride>=1, pad>=0, dilation>=1");
    }
}

} // namespace detail

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                         int stride, int pad, int dilation) {
    detail::check_conv_args(input.shape, weight.shape, bias.shape, stride, pad, dilation);
    int b = input.shape[0], c = input.shape[1], h = input.shape[2], w = input.shape[3];
    int co = weight.shape[0], k = weight.shape[2];
    int ho = conv_out_dim(h, k, stride, pad, dilation);
    int wo = conv_out_dim(w, k, stride, pad, dilation);
    if (ho < 1 || wo < 1) {
        throw std::invalid_argument("conv2d: kernel span exceeds padded input " + input.shape_str());
    }
    int hp = h + 2 * pad, wp = w + 2 * pad;

    std::vector<T> padded;
    const T* pin = input.data();
    if (pad > 0) {
        padded = detail::pad_nchw(input, pad);
        pin = padded.data();
    }

    Tensor<T> out({b, co, ho, wo});
#pragma omp parallel for collapse(2) schedule(static)
    for (int bi = 0; bi < b; ++bi) {
        for (int oc = 0; oc < co; ++oc) {
            T* plane = out.data() + (static_cast<std::size_t>(bi) * co + oc) * ho * wo;
            T bv = bias.v[static_cast<std::size_t>(oc)];
            for (std::size_t i = 0; i < static_cast<std::size_t>(ho) * wo; ++i) plane[i] = bv;
            for (int ic = 0; ic < c; ++ic) {
                const T* in_plane = pin + (static_cast<std::size_t>(bi) * c + ic) * hp * wp;
                const T* wbase =
                    weight.data() + (static_cast<std::size_t>(oc) * c + ic) * k * k;
                for (int ky = 0; ky < k; ++ky) {
                    for (int kx = 0; kx < k; ++kx) {
                        T wv = wbase[ky * k + kx];
                        for (int oy = 0; oy < ho; ++oy) {
                            const T* irow = in_plane +
                                            static_cast<std::size_t>(oy * stride + ky * dilation) * wp +
                                            kx * dilation;
                            T* orow = plane + static_cast<std::size_t>(oy) * wo;
                            if (stride == 1) {
                                for (int ox = 0; ox < wo; ++ox) orow[ox] += wv * irow[ox];
                            } else {
                                for (int ox = 0; ox < wo; ++ox)
                                    orow[ox] += wv * irow[static_cast<std::size_t>(ox) * stride];
                            }
                        }
                    }
                }
            }
        }
    }
    debug_check_finite(out, "conv2d_forward");
    return out;
}

template <typename T>
struct Conv2dGrads {
    Tensor<T> input;
    Tensor<T> weight;
    Tensor<T> bias;
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& weight,
                               const Tensor<T>& grad_out, int stride, int pad, int dilation) {
    Tensor<T> bias_probe({weight.shape[0]});
    detail::check_conv_args(input.shape, weight.shape, bias_probe.shape, stride, pad, dilation);
    int b = input.shape[0], c = input.shape[1], h = input.shape[2], w = input.shape[3];
    int co = weight.shape[0], k = weight.shape[2];
    int ho = conv_out_dim(h, k, stride, pad, dilation);
    int wo = conv_out_dim(w, k, stride, pad, dilation);
    require_shape(grad_out, {b, co, ho, wo}, "conv2d_backward grad_out");
    int hp = h + 2 * pad, wp = w + 2 * pad;

    std::vector<T> padded;
    const T* pin = input.data();
    if (pad > 0) {
        padded = detail::pad_nchw(input, pad);
        pin = padded.data();
    }

    Conv2dGrads<T> g{Tensor<T>(input.shape), Tensor<T>(weight.shape), Tensor<T>({co})};

#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < co; ++oc) {
        T acc = T(0);
        for (int bi = 0; bi < b; ++bi) {
            const T* plane = grad_out.data() + (static_cast<std::size_t>(bi) * co + oc) * ho * wo;
            for (std::size_t i = 0; i < static_cast<std::size_t>(ho) * wo; ++i) acc += plane[i];
        }
        g.bias.v[static_cast<std::size_t>(oc)] = acc;
    }

#pragma omp parallel for collapse(2) schedule(static)
    for (int oc = 0; oc < co; ++oc) {
        for (int ic = 0; ic < c; ++ic) {
            T* wplane = g.weight.data() + (static_cast<std::size_t>(oc) * c + ic) * k * k;
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    T acc = T(0);
                    for (int bi = 0; bi < b; ++bi) {
                        const T* go_plane =
                            grad_out.data() + (static_cast<std::size_t>(bi) * co + oc) * ho * wo;
                        const T* in_plane = pin + (static_cast<std::size_t>(bi) * c + ic) * hp * wp;
                        for (int oy = 0; oy < ho; ++oy) {
                            const T* irow = in_plane +
                                            static_cast<std::size_t>(oy * stride + ky * dilation) * wp +
                                            kx * dilation;
                            const T* gorow = go_plane + static_cast<std::size_t>(oy) * wo;
                            if (stride == 1) {
                                for (int ox = 0; ox < wo; ++ox) acc += gorow[ox] * irow[ox];
                            } else {
                                for (int ox = 0; ox < wo; ++ox)
                                    acc += gorow[ox] * irow[static_cast<std::size_t>(ox) * stride];
                            }
                        }
                    }
                    wplane[ky * k + kx] = acc;
                }
            }
        }
    }

    std::vector<T> gin_pad(static_cast<std::size_t>(b) * c * hp * wp, T(0));
#pragma omp parallel for collapse(2) schedule(static)
    for (int bi = 0; bi < b; ++bi) {
        for (int ic = 0; ic < c; ++ic) {
            T* gplane = gin_pad.data() + (static_cast<std::size_t>(bi) * c + ic) * hp * wp;
            for (int oc = 0; oc < co; ++oc) {
                const T* go_plane =
                    grad_out.data() + (static_cast<std::size_t>(bi) * co + oc) * ho * wo;
                const T* wbase = weight.data() + (static_cast<std::size_t>(oc) * c + ic) * k * k;
                for (int ky = 0; ky < k; ++ky) {
                    for (int kx = 0; kx < k; ++kx) {
                        T wv = wbase[ky * k + kx];
                        for (int oy = 0; oy < ho; ++oy) {
                            T* grow = gplane +
                                      static_cast<std::size_t>(oy * stride + ky * dilation) * wp +
                                      kx * dilation;
                            const T* gorow = go_plane + static_cast<std::size_t>(oy) * wo;
                            if (stride == 1) {
                                for (int ox = 0; ox < wo; ++ox) grow[ox] += wv * gorow[ox];
                            } else {
                                for (int ox = 0; ox < wo; ++ox)
                                    grow[static_cast<std::size_t>(ox) * stride] += wv * gorow[ox];
                            }
                        }
                    }
                }
            }
            if (pad > 0) {
                T* dst = g.input.data() + (static_cast<std::size_t>(bi) * c + ic) * h * w;
                for (int y = 0; y < h; ++y) {
                    const T* row = gplane + static_cast<std::size_t>(y + pad) * wp + pad;
                    for (int xx = 0; xx < w; ++xx) dst[static_cast<std::size_t>(y) * w + xx] = row[xx];
                }
            }
        }
    }
    if (pad == 0) {
        std::copy(gin_pad.begin(), gin_pad.end(), g.input.v.begin());
    }
    return g;
}

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
    if (input.ndims() != 2 || weight.ndims() != 2) {
        throw std::invalid_argument("dense: input BxN and weight MxN required");
    }
    int b = input.shape[0], n = input.shape[1], m = weight.shape[0];
    if (weight.shape[1] != n) {
        throw std::invalid_argument("dense: weight expects " + std::to_string(weight.shape[1]) +
                                    " inputs, got " + std::to_string(n));
    }
    require_shape(bias, {m}, "dense bias");
    Tensor<T> out({b, m});
#pragma omp parallel for collapse(2) schedule(static)
    for (int bi = 0; bi < b; ++bi) {
        for (int mi = 0; mi < m; ++mi) {
            const T* in_row = input.data() + static_cast<std::size_t>(bi) * n;
            const T* w_row = weight.data() + static_cast<std::size_t>(mi) * n;
            T acc = bias.v[static_cast<std::size_t>(mi)];
            for (int i = 0; i < n; ++i) acc += in_row[i] * w_row[i];
            out.v[static_cast<std::size_t>(bi) * m + mi] = acc;
        }
    }
    debug_check_finite(out, "dense_forward");
    return out;
}

template <typename T>
struct DenseGrads {
    Tensor<T> input;
    Tensor<T> weight;
    Tensor<T> bias;
};

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& input, const Tensor<T>& weight,
                             const Tensor<T>& grad_out) {
    int b = input.shape[0], n = input.shape[1], m = weight.shape[0];
    require_shape(grad_out, {b, m}, "dense_backward grad_out");
    DenseGrads<T> g{Tensor<T>({b, n}), Tensor<T>({m, n}), Tensor<T>({m})};
#pragma omp parallel for schedule(static)
    for (int bi = 0; bi < b; ++bi) {
        T* gin_row = g.input.data() + static_cast<std::size_t>(bi) * n;
        const T* go_row = grad_out.data() + static_cast<std::size_t>(bi) * m;
        for (int mi = 0; mi < m; ++mi) {
            T gv = go_row[mi];
            const T* w_row = weight.data() + static_cast<std::size_t>(mi) * n;
            for (int i = 0; i < n; ++i) gin_row[i] += gv * w_row[i];
        }
    }
#pragma omp parallel for schedule(static)
    for (int mi = 0; mi < m; ++mi) {
        T* gw_row = g.weight.data() + static_cast<std::size_t>(mi) * n;
        T gb = T(0);
        for (int bi = 0; bi < b; ++bi) {
            T gv = grad_out.v[static_cast<std::size_t>(bi) * m + mi];
            gb += gv;
            const T* in_row = input.data() + static_cast<std::size_t>(bi) * n;
            for (int i = 0; i < n; ++i) gw_row[i] += gv * in_row[i];
        }
        g.bias.v[static_cast<std::size_t>(mi)] = gb;
    }
    return g;
}

template <typename T>
struct MaxPoolResult {
    Tensor<T> output;
    std::vector<int> argmax; // flat index into the HxW input plane, per output element
};

template <typename T>
MaxPoolResult<T> maxpool_forward(const Tensor<T>& input, int kernel, int stride) {
    if (input.ndims() != 4) throw std::invalid_argument("maxpool: input must be BxCxHxW");
    if (kernel < 1 || stride < 1) throw std::invalid_argument("maxpool: kernel/stride >= 1");
    int b = input.shape[0], c = input.shape[1], h = input.shape[2], w = input.shape[3];
    int ho = (h - kernel) / stride + 1, wo = (w - kernel) / stride + 1;
    if (h < kernel || w < kernel) {
        throw std::invalid_argument("maxpool: window larger than input " + input.shape_str());
    }
    MaxPoolResult<T> r{Tensor<T>({b, c, ho, wo}),
                       std::vector<int>(static_cast<std::size_t>(b) * c * ho * wo, 0)};
#pragma omp parallel for collapse(2) schedule(static)
    for (int bi = 0; bi < b; ++bi) {
        for (int ci = 0; ci < c; ++ci) {
            const T* plane = input.data() + (static_cast<std::size_t>(bi) * c + ci) * h * w;
            std::size_t out_base = (static_cast<std::size_t>(bi) * c + ci) * ho * wo;
            for (int oy = 0; oy < ho; ++oy) {
                for (int ox = 0; ox < wo; ++ox) {
                    int iy0 = oy * stride, ix0 = ox * stride;
                    T best = plane[static_cast<std::size_t>(iy0) * w + ix0];
                    int best_idx = iy0 * w + ix0;
                    for (int wy = 0; wy < kernel; ++wy) {
                        for (int wx = 0; wx < kernel; ++wx) {
                            int idx = (iy0 + wy) * w + (ix0 + wx);
                            T v = plane[static_cast<std::size_t>(idx)];
                            if (v > best) { // ties keep the first row-major index
                                best = v;
                                best_idx = idx;
                            }
                        }
                    }
                    r.output.v[out_base + static_cast<std::size_t>(oy) * wo + ox] = best;
                    r.argmax[out_base + static_cast<std::size_t>(oy) * wo + ox] = best_idx;
                }
            }
        }
    }
    return r;
}

template <typename T>
Tensor<T> maxpool_backward(const Tensor<T>& grad_out, const std::vector<int>& argmax,
                           const std::vector<int>& input_shape) {
    if (grad_out.ndims() != 4 || input_shape.size() != 4) {
        throw std::invalid_argument("maxpool_backward: 4-d tensors required");
    }
    if (argmax.size() != grad_out.size()) {
        throw std::invalid_argument("maxpool_backward: argmax size mismatch");
    }
    int b = input_shape[0], c = input_shape[1], h = input_shape[2], w = input_shape[3];
    int ho = grad_out.shape[2], wo = grad_out.shape[3];
    if (grad_out.shape[0] != b || grad_out.shape[1] != c) {
        throw std::invalid_argument("maxpool_backward: batch/channel mismatch");
    }
    Tensor<T> gin({b, c, h, w});
#pragma omp parallel for collapse(2) schedule(static)
    for (int bi = 0; bi < b; ++bi) {
        for (int ci = 0; ci < c; ++ci) {
            T* gplane = gin.data() + (static_cast<std::size_t>(bi) * c + ci) * h * w;
            std::size_t out_base = (static_cast<std::size_t>(bi) * c + ci) * ho * wo;
            for (std::size_t i = 0; i < static_cast<std::size_t>(ho) * wo; ++i) {
                gplane[static_cast<std::size_t>(argmax[out_base + i])] += grad_out.v[out_base + i];
            }
        }
    }
    return gin;
}

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x) {
    Tensor<T> y(x.shape);
    const std::size_t n = x.size();
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        y.v[static_cast<std::size_t>(i)] = x.v[static_cast<std::size_t>(i)] > T(0)
                                               ? x.v[static_cast<std::size_t>(i)]
                                               : T(0);
    }
    return y;
}

// derivative at exactly 0 is defined as 0
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& grad_out) {
    if (!x.same_shape(grad_out)) throw std::invalid_argument("relu_backward: shape mismatch");
    Tensor<T> g(x.shape);
    const std::size_t n = x.size();
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        std::size_t u = static_cast<std::size_t>(i);
        g.v[u] = x.v[u] > T(0) ? grad_out.v[u] : T(0);
    }
    return g;
}

template <typename T>
Tensor<T> sigmoid_forward(const Tensor<T>& x) {
    Tensor<T> y(x.shape);
    const std::size_t n = x.size();
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        std::size_t u = static_cast<std::size_t>(i);
        T v = x.v[u];
        if (v >= T(0)) {
            y.v[u] = T(1) / (T(1) + std::exp(-v));
        } else {
            T e = std::exp(v);
            y.v[u] = e / (T(1) + e);
        }
    }
    debug_check_finite(y, "sigmoid_forward");
    return y;
}

template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& y, const Tensor<T>& grad_out) {
    if (!y.same_shape(grad_out)) throw std::invalid_argument("sigmoid_backward: shape mismatch");
    Tensor<T> g(y.shape);
    const std::size_t n = y.size();
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        std::size_t u = static_cast<std::size_t>(i);
        g.v[u] = grad_out.v[u] * y.v[u] * (T(1) - y.v[u]);
    }
    return g;
}

// row-wise softmax over the last dimension of a BxC tensor, max-subtracted
template <typename T>
Tensor<T> softmax_forward(const Tensor<T>& x) {
    if (x.ndims() != 2) throw std::invalid_argument("softmax: input must be BxC");
    int b = x.shape[0], c = x.shape[1];
    Tensor<T> y(x.shape);
#pragma omp parallel for schedule(static)
    for (int bi = 0; bi < b; ++bi) {
        const T* row = x.data() + static_cast<std::size_t>(bi) * c;
        T* out = y.data() + static_cast<std::size_t>(bi) * c;
        T mx = row[0];
        for (int i = 1; i < c; ++i) mx = std::max(mx, row[i]);
        T sum = T(0);
        for (int i = 0; i < c; ++i) {
            out[i] = std::exp(row[i] - mx);
            sum += out[i];
        }
        for (int i = 0; i < c; ++i) out[i] /= sum;
    }
    debug_check_finite(y, "softmax_forward");
    return y;
}

template <typename T>
Tensor<T> softmax_backward(const Tensor<T>& y, const Tensor<T>& grad_out) {
    if (!y.same_shape(grad_out)) throw std::invalid_argument("softmax_backward: shape mismatch");
    int b = y.shape[0], c = y.shape[1];
    Tensor<T> g(y.shape);
#pragma omp parallel for schedule(static)
    for (int bi = 0; bi < b; ++bi) {
        const T* yr = y.data() + static_cast<std::size_t>(bi) * c;
        const T* gr = grad_out.data() + static_cast<std::size_t>(bi) * c;
        T* out = g.data() + static_cast<std::size_t>(bi) * c;
        T dot = T(0);
        for (int i = 0; i < c; ++i) dot += gr[i] * yr[i];
        for (int i = 0; i < c; ++i) out[i] = yr[i] * (gr[i] - dot);
    }
    return g;
}

template <typename T>
Tensor<T> elementwise_add(const Tensor<T>& a, const Tensor<T>& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("add: shape mismatch");
    Tensor<T> out(a.shape);
    const std::size_t n = a.size();
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        std::size_t u = static_cast<std::size_t>(i);
        out.v[u] = a.v[u] + b.v[u];
    }
    return out;
}

// backward of add: the upstream gradient flows unchanged to both operands

} // namespace rpnet
