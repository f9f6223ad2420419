#pragma once

// Naive single-threaded layer implementations. Deliberately structured
// differently from the fast kernels (per-output accumulation with explicit
// bounds checks instead of padded buffers and axpy loops); they serve as
// oracles in tests and as the baseline in the kernel benchmark.

#include <stdexcept>

#include "rpnet/tensor.hpp"

namespace rpnet::reference {

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                         int stride, int pad, int dilation) {
    if (input.ndims() != 4 || weight.ndims() != 4) {
        throw std::invalid_argument("reference conv2d: 4-d tensors required");
    }
    int b = input.shape[0], c = input.shape[1], h = input.shape[2], w = input.shape[3];
    int co = weight.shape[0], k = weight.shape[2];
    int span = dilation * (k - 1) + 1;
    int ho = (h + 2 * pad - span) / stride + 1;
    int wo = (w + 2 * pad - span) / stride + 1;

    Tensor<T> out({b, co, ho, wo});
    for (int bi = 0; bi < b; ++bi) {
        for (int oc = 0; oc < co; ++oc) {
            for (int oy = 0; oy < ho; ++oy) {
                for (int ox = 0; ox < wo; ++ox) {
                    T acc = bias.v[static_cast<std::size_t>(oc)];
                    for (int ic = 0; ic < c; ++ic) {
                        for (int ky = 0; ky < k; ++ky) {
                            for (int kx = 0; kx < k; ++kx) {
                                int iy = oy * stride - pad + ky * dilation;
                                int ix = ox * stride - pad + kx * dilation;
                                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                                T xv = input.v[((static_cast<std::size_t>(bi) * c + ic) * h + iy) * w +
                                               ix];
                                T wv = weight.v[((static_cast<std::size_t>(oc) * c + ic) * k + ky) * k +
                                                kx];
                                acc += xv * wv;
                            }
                        }
                    }
                    out.v[((static_cast<std::size_t>(bi) * co + oc) * ho + oy) * wo + ox] = acc;
                }
            }
        }
    }
    return out;
}

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
    int b = input.shape[0], n = input.shape[1], m = weight.shape[0];
    Tensor<T> out({b, m});
    for (int bi = 0; bi < b; ++bi) {
        for (int mi = 0; mi < m; ++mi) {
            T acc = bias.v[static_cast<std::size_t>(mi)];
            for (int i = 0; i < n; ++i) {
                acc += input.v[static_cast<std::size_t>(bi) * n + i] *
                       weight.v[static_cast<std::size_t>(mi) * n + i];
            }
            out.v[static_cast<std::size_t>(bi) * m + mi] = acc;
        }
    }
    return out;
}

} // namespace rpnet::reference
