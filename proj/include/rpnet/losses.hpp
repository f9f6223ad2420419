#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <stdexcept>

#include "rpnet/batches.hpp"
#include "rpnet/tensor.hpp"

namespace rpnet {

struct ClassWeights {
    double w_fg = 1.0;
    double w_bg = 1.0;
};

struct LossWeights {
    double mask = 1.0;
    double jcoords = 1.5;
    double bcoords = 1.5;
    double type = 0.3;

    void validate() const {
        if (mask < 0 || jcoords < 0 || bcoords < 0 || type < 0) {
            throw std::invalid_argument("loss weights must be nonnegative");
        }
        if (mask == 0 && jcoords == 0 && bcoords == 0 && type == 0) {
            throw std::invalid_argument("at least one loss weight must be positive");
        }
    }
};

struct LossBreakdown {
    double l_mask = 0.0;
    double l_jcoords = 0.0;
    double l_bcoords = 0.0;
    double l_type = 0.0;
    double l_final = 0.0;
};

// The usual weighted-BCE orientation minimized at est = gt is the default;
// Literal keeps the source formulation's printed per-pixel form (linear in
// the estimate), selectable for fidelity experiments.
enum class MaskLossMode { Standard, Literal };

// Inverse class probabilities of a binary mask, probabilities clamped to
// [eps, 1-eps] so empty/full masks stay finite.
template <typename T>
ClassWeights class_weights(const Tensor<T>& gt_mask) {
    if (gt_mask.size() == 0) throw std::invalid_argument("class_weights: empty mask");
    std::size_t fg = 0;
    for (T v : gt_mask.v) fg += v > T(0.5) ? 1 : 0;
    double f = static_cast<double>(fg) / static_cast<double>(gt_mask.size());
#ifndef NDEBUG
    if (f < kProbEps || f > 1.0 - kProbEps) {
        std::fprintf(stderr, "class_weights: degenerate mask (fg fraction %.3g)\n", f);
    }
#endif
    double p_fg = std::clamp(f, kProbEps, 1.0 - kProbEps);
    double p_bg = std::clamp(1.0 - f, kProbEps, 1.0 - kProbEps);
    return {1.0 / p_fg, 1.0 / p_bg};
}

namespace detail {

template <typename T>
ClassWeights row_class_weights(const T* gt, std::size_t n) {
    std::size_t fg = 0;
    for (std::size_t i = 0; i < n; ++i) fg += gt[i] > T(0.5) ? 1 : 0;
    double f = static_cast<double>(fg) / static_cast<double>(n);
    double p_fg = std::clamp(f, kProbEps, 1.0 - kProbEps);
    double p_bg = std::clamp(1.0 - f, kProbEps, 1.0 - kProbEps);
    return {1.0 / p_fg, 1.0 / p_bg};
}

// per-image mean over pixels; gradient written with the extra `scale` factor
// (used for the batch mean)
template <typename T>
double mask_loss_row(const T* est, const T* gt, std::size_t n, const ClassWeights& w,
                     MaskLossMode mode, double scale, T* grad) {
    double acc = 0.0;
    double inv_n = 1.0 / static_cast<double>(n);
    double g_scale = scale * inv_n;
    for (std::size_t i = 0; i < n; ++i) {
        double e = static_cast<double>(est[i]);
        if (!(e > 0.0 && e < 1.0)) {
            throw std::invalid_argument("mask_loss: estimate must lie strictly inside (0,1)");
        }
        double g = static_cast<double>(gt[i]);
        double gc = std::clamp(g, kProbEps, 1.0 - kProbEps);
        double l, dl;
        if (mode == MaskLossMode::Standard) {
            l = -w.w_fg * g * std::log(e) - w.w_bg * (1.0 - g) * std::log(1.0 - e);
            dl = -w.w_fg * g / e + w.w_bg * (1.0 - g) / (1.0 - e);
        } else {
            l = -w.w_fg * e * std::log(gc) - w.w_bg * (1.0 - e) * std::log(1.0 - gc);
            dl = -w.w_fg * std::log(gc) + w.w_bg * std::log(1.0 - gc);
        }
        acc += l;
        if (grad) grad[i] = static_cast<T>(dl * g_scale);
    }
    return acc * inv_n;
}

template <typename T>
double point_set_loss_row(const T* est, const T* gt, int points, double scale, T* grad) {
    double acc = 0.0;
    double inv = 1.0 / static_cast<double>(points);
    for (int j = 0; j < points; ++j) {
        double dx = static_cast<double>(est[j * 3 + 0]) - static_cast<double>(gt[j * 3 + 0]);
        double dy = static_cast<double>(est[j * 3 + 1]) - static_cast<double>(gt[j * 3 + 1]);
        double dz = static_cast<double>(est[j * 3 + 2]) - static_cast<double>(gt[j * 3 + 2]);
        double d = std::sqrt(dx * dx + dy * dy + dz * dz);
        acc += d * inv;
        if (grad) {
            // subgradient at coincidence is zero
            double k = d > 0.0 ? scale * inv / d : 0.0;
            grad[j * 3 + 0] = static_cast<T>(dx * k);
            grad[j * 3 + 1] = static_cast<T>(dy * k);
            grad[j * 3 + 2] = static_cast<T>(dz * k);
        }
    }
    return acc;
}

template <typename T>
double type_loss_row(const T* pred, const T* gt, int classes, double scale, T* grad) {
    double sum = 0.0;
    for (int c = 0; c < classes; ++c) sum += static_cast<double>(pred[c]);
    if (std::abs(sum - 1.0) > 1e-6) {
        throw std::invalid_argument("type_loss: prediction must sum to 1");
    }
    double acc = 0.0;
    for (int c = 0; c < classes; ++c) {
        double q = static_cast<double>(pred[c]);
        double p = static_cast<double>(gt[c]);
        double qc = std::clamp(q, kProbEps, 1.0 - kProbEps);
        acc -= p * std::log(qc);
        if (grad) {
            double dq = (q > kProbEps && q < 1.0 - kProbEps) ? -p / qc : 0.0;
            grad[c] = static_cast<T>(dq * scale);
        }
    }
    return acc;
}

} // namespace detail

// Rebalanced per-pixel cross-entropy, normalized by the pixel count and
// averaged over the batch. `fixed` supplies dataset-level class weights;
// by default weights are recomputed per image from its own mask.
template <typename T>
std::pair<double, Tensor<T>> mask_loss(const Tensor<T>& est, const Tensor<T>& gt,
                                       MaskLossMode mode = MaskLossMode::Standard,
                                       const std::optional<ClassWeights>& fixed = {}) {
    if (!est.same_shape(gt)) throw std::invalid_argument("mask_loss: shape mismatch");
    if (est.ndims() != 2 && est.ndims() != 3) {
        throw std::invalid_argument("mask_loss: HxW or BxHxW tensors required");
    }
    int b = est.ndims() == 3 ? est.shape[0] : 1;
    std::size_t n = est.size() / static_cast<std::size_t>(b);
    Tensor<T> grad(est.shape);
    double scale = 1.0 / static_cast<double>(b);
    double total = 0.0;
    for (int bi = 0; bi < b; ++bi) {
        const T* e = est.data() + static_cast<std::size_t>(bi) * n;
        const T* g = gt.data() + static_cast<std::size_t>(bi) * n;
        ClassWeights w = fixed ? *fixed : detail::row_class_weights(g, n);
        total += detail::mask_loss_row(e, g, n, w, mode, scale,
                                       grad.data() + static_cast<std::size_t>(bi) * n);
    }
    return {total * scale, std::move(grad)};
}

// mean over the 6 per-joint Euclidean distances, batch-averaged
template <typename T>
std::pair<double, Tensor<T>> joint_coord_loss(const Tensor<T>& est, const Tensor<T>& gt) {
    if (!est.same_shape(gt)) throw std::invalid_argument("joint_coord_loss: shape mismatch");
    bool single = est.shape == std::vector<int>{6, 3} || est.shape == std::vector<int>{18};
    if (!single && (est.ndims() != 2 || est.shape[1] != 18)) {
        throw std::invalid_argument("joint_coord_loss: expected 6x3, 18, or Bx18");
    }
    int b = single ? 1 : est.shape[0];
    Tensor<T> grad(est.shape);
    double scale = 1.0 / static_cast<double>(b);
    double total = 0.0;
    for (int bi = 0; bi < b; ++bi) {
        total += detail::point_set_loss_row(est.data() + static_cast<std::size_t>(bi) * 18,
                                            gt.data() + static_cast<std::size_t>(bi) * 18, 6, scale,
                                            grad.data() + static_cast<std::size_t>(bi) * 18);
    }
    return {total * scale, std::move(grad)};
}

// Euclidean distance to the true base position, batch-averaged
template <typename T>
std::pair<double, Tensor<T>> base_coord_loss(const Tensor<T>& est, const Tensor<T>& gt) {
    if (!est.same_shape(gt)) throw std::invalid_argument("base_coord_loss: shape mismatch");
    bool single = est.shape == std::vector<int>{3};
    if (!single && (est.ndims() != 2 || est.shape[1] != 3)) {
        throw std::invalid_argument("base_coord_loss: expected 3 or Bx3");
    }
    int b = single ? 1 : est.shape[0];
    Tensor<T> grad(est.shape);
    double scale = 1.0 / static_cast<double>(b);
    double total = 0.0;
    for (int bi = 0; bi < b; ++bi) {
        total += detail::point_set_loss_row(est.data() + static_cast<std::size_t>(bi) * 3,
                                            gt.data() + static_cast<std::size_t>(bi) * 3, 1, scale,
                                            grad.data() + static_cast<std::size_t>(bi) * 3);
    }
    return {total * scale, std::move(grad)};
}

// categorical cross-entropy over {UR3, UR5, UR10}, batch-averaged
template <typename T>
std::pair<double, Tensor<T>> type_loss(const Tensor<T>& pred, const Tensor<T>& gt) {
    if (!pred.same_shape(gt)) throw std::invalid_argument("type_loss: shape mismatch");
    bool single = pred.shape == std::vector<int>{3};
    if (!single && (pred.ndims() != 2 || pred.shape[1] != 3)) {
        throw std::invalid_argument("type_loss: expected 3 or Bx3");
    }
    int b = single ? 1 : pred.shape[0];
    Tensor<T> grad(pred.shape);
    double scale = 1.0 / static_cast<double>(b);
    double total = 0.0;
    for (int bi = 0; bi < b; ++bi) {
        total += detail::type_loss_row(pred.data() + static_cast<std::size_t>(bi) * 3,
                                       gt.data() + static_cast<std::size_t>(bi) * 3, 3, scale,
                                       grad.data() + static_cast<std::size_t>(bi) * 3);
    }
    return {total * scale, std::move(grad)};
}

template <typename T>
struct CombinedLossResult {
    LossBreakdown breakdown;
    Tensor<T> grad_mask;   // BxHxW, d L_final / d mask estimate
    Tensor<T> grad_joints; // Bx18
    Tensor<T> grad_base;   // Bx3
    Tensor<T> grad_type;   // Bx3
};

template <typename T>
CombinedLossResult<T> combined_loss(const Tensor<T>& mask_est, const Tensor<T>& joints_est,
                                    const Tensor<T>& base_est, const Tensor<T>& type_est,
                                    const Minibatch<T>& target, const LossWeights& w,
                                    MaskLossMode mode = MaskLossMode::Standard,
                                    const std::optional<ClassWeights>& fixed = {}) {
    w.validate();
    auto [lm, gm] = mask_loss(mask_est, target.masks, mode, fixed);
    auto [lj, gj] = joint_coord_loss(joints_est, target.joints);
    auto [lb, gb] = base_coord_loss(base_est, target.bases);
    auto [lt, gt] = type_loss(type_est, target.types);

    CombinedLossResult<T> r;
    r.breakdown.l_mask = lm;
    r.breakdown.l_jcoords = lj;
    r.breakdown.l_bcoords = lb;
    r.breakdown.l_type = lt;
    r.breakdown.l_final = w.mask * lm + w.jcoords * lj + w.bcoords * lb + w.type * lt;
    for (T& v : gm.v) v = static_cast<T>(v * w.mask);
    for (T& v : gj.v) v = static_cast<T>(v * w.jcoords);
    for (T& v : gb.v) v = static_cast<T>(v * w.bcoords);
    for (T& v : gt.v) v = static_cast<T>(v * w.type);
    r.grad_mask = std::move(gm);
    r.grad_joints = std::move(gj);
    r.grad_base = std::move(gb);
    r.grad_type = std::move(gt);
    return r;
}

} // namespace rpnet
