#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "rpnet/batches.hpp"
#include "rpnet/losses.hpp"
#include "rpnet/model.hpp"
#include "rpnet/rng.hpp"

namespace rpnet {

inline double gradcheck_rel_err(double analytic, double numeric) {
    return std::abs(analytic - numeric) /
           std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

// central difference (f(x+h) - f(x-h)) / 2h on one coordinate
inline double central_difference(const std::function<double()>& eval, double& coord, double h) {
    if (h <= 0.0) throw std::invalid_argument("central_difference: h must be positive");
    double saved = coord;
    coord = saved + h;
    double fp = eval();
    coord = saved - h;
    double fm = eval();
    coord = saved;
    return (fp - fm) / (2.0 * h);
}

struct GradCheckEntry {
    std::string block;
    double max_rel_err = 0.0;
    std::size_t coords_checked = 0;
    std::size_t coords_skipped = 0; // difference quotient invalid (kink straddled)
};

struct GradCheckReport {
    std::vector<GradCheckEntry> blocks;
    double max_rel_err = 0.0;
    std::size_t coords_checked = 0;
    std::size_t coords_skipped = 0;

    bool passed(double tolerance) const {
        return std::isfinite(max_rel_err) && max_rel_err < tolerance && coords_checked > 0;
    }
};

// Order-stable hash of the network's activation pattern: the sign of every
// ReLU unit, the argmax of every pooling window, and whether any mask
// probability sits inside the loss clipping band. Two parameter points with
// equal signatures lie on the same smooth piece of the loss.
template <typename T>
std::uint64_t activation_signature(const typename Model<T>::Trace& t) {
    std::uint64_t h = 0x9e3779b97f4a7c15ull;
    auto mix = [&](std::uint64_t x) {
        std::uint64_t s = h ^ x;
        h = splitmix64(s);
    };
    std::uint64_t word = 0;
    int nbits = 0;
    auto push_bit = [&](bool b) {
        word = (word << 1) | static_cast<std::uint64_t>(b);
        if (++nbits == 64) {
            mix(word);
            word = 0;
            nbits = 0;
        }
    };
    auto push_signs = [&](const Tensor<T>& x) {
        for (const T& v : x.v) push_bit(v > T(0));
    };
    for (const auto& x : t.trunk_act) push_signs(x);
    for (const auto& x : t.mask_act) push_signs(x);
    push_signs(t.reg_act1);
    push_signs(t.reg_act2);
    push_signs(t.sum_act);
    push_signs(t.fuse_act);
    for (const T& p : t.mask_prob.v) {
        push_bit(p < T(kProbEps) || p > T(1) - T(kProbEps));
    }
    if (nbits > 0) mix(word);
    for (const auto* pool : {&t.pool1, &t.pool2, &t.spool}) {
        for (int idx : pool->argmax) {
            mix(static_cast<std::uint64_t>(static_cast<unsigned>(idx)));
        }
    }
    return h;
}

// Compares the analytic parameter gradients of the combined loss against
// central finite differences on a random subsample of coordinates per block.
// Double precision only — float rounding would drown the signal.
//
// A central difference is only a derivative estimate when the loss is smooth
// on [theta-h, theta+h]. With hundreds of thousands of ReLU and pooling
// units, some coordinate of a realistic network always straddles a kink at
// any usable h, and there the quotient measures a chord across the kink, not
// the (correct) one-sided gradient. Smoothness of the interval is decided
// exactly, not heuristically: an evaluation is valid only when the
// activation pattern (activation_signature) at theta+h and theta-h is
// identical to the pattern at theta. Step size trades kink probability
// (grows with h) against rounding noise in the quotient (shrinks with h), so
// each coordinate tries h, h/8 and h/32 and is scored at the largest step
// whose interval is kink-free; coordinates kinked at every rung — for
// early-layer weights every downstream unit is a potential kink, so a few
// such coordinates per run are expected — are counted in coords_skipped
// rather than scored against a quotient that does not estimate the
// derivative. A wrong analytic gradient still fails: kink-free quotients are
// correct derivative estimates, and skipping is decided by forward-pass
// activations alone, independent of the backward pass under test.
inline GradCheckReport gradient_check(Model<double>& model, const Minibatch<double>& batch,
                                      const LossWeights& weights,
                                      MaskLossMode mode = MaskLossMode::Standard, double h = 1e-5,
                                      int max_coords_per_block = 200, std::uint64_t seed = 1) {
    if (h <= 0.0) throw std::invalid_argument("gradient_check: h must be positive");
    if (max_coords_per_block < 1) {
        throw std::invalid_argument("gradient_check: need at least one coordinate per block");
    }

    Tensor<double> images = to_nchw(batch.images);
    auto loss_and_sig = [&](std::uint64_t& sig) {
        typename Model<double>::Trace tr;
        auto out = model.forward(images, &tr);
        auto r = combined_loss(out.mask_prob, out.joints, out.base, out.type_prob, batch, weights,
                               mode);
        sig = activation_signature<double>(tr);
        return r.breakdown.l_final;
    };

    typename Model<double>::Trace trace;
    auto out = model.forward(images, &trace);
    const std::uint64_t sig0 = activation_signature<double>(trace);
    auto loss = combined_loss(out.mask_prob, out.joints, out.base, out.type_prob, batch, weights,
                              mode);
    typename Model<double>::OutputGrads og;
    og.mask_prob = std::move(loss.grad_mask);
    og.joints = std::move(loss.grad_joints);
    og.base = std::move(loss.grad_base);
    og.type_prob = std::move(loss.grad_type);
    std::vector<Tensor<double>> analytic = model.backward(trace, og);

    GradCheckReport report;
    for (int bi = 0; bi < model.num_blocks(); ++bi) {
        Tensor<double>& theta = model.block(bi);
        const Tensor<double>& a = analytic[static_cast<std::size_t>(bi)];
        std::size_t n = theta.size();

        std::vector<std::size_t> coords;
        if (n <= static_cast<std::size_t>(max_coords_per_block)) {
            coords.resize(n);
            for (std::size_t i = 0; i < n; ++i) coords[i] = i;
        } else {
            std::vector<std::size_t> all(n);
            for (std::size_t i = 0; i < n; ++i) all[i] = i;
            Rng rng(mix_seed(seed, static_cast<std::uint64_t>(bi)));
            for (int k = 0; k < max_coords_per_block; ++k) {
                std::size_t j = static_cast<std::size_t>(k) +
                                rng.below(n - static_cast<std::size_t>(k));
                std::swap(all[static_cast<std::size_t>(k)], all[j]);
            }
            coords.assign(all.begin(), all.begin() + max_coords_per_block);
        }

        GradCheckEntry entry;
        entry.block = model.block_name(bi);
        const double ladder[3] = {h, h / 8.0, h / 32.0};
        for (std::size_t c : coords) {
            double numeric = 0.0;
            bool smooth = false;
            bool finite = true;
            for (double step : ladder) {
                double saved = theta.v[c];
                std::uint64_t sp = 0, sm = 0;
                theta.v[c] = saved + step;
                double fp = loss_and_sig(sp);
                theta.v[c] = saved - step;
                double fm = loss_and_sig(sm);
                theta.v[c] = saved;
                if (!std::isfinite(fp) || !std::isfinite(fm)) {
                    finite = false;
                    break;
                }
                if (sp == sig0 && sm == sig0) {
                    numeric = (fp - fm) / (2.0 * step);
                    smooth = true;
                    break;
                }
            }
            if (!finite) {
                entry.max_rel_err = std::numeric_limits<double>::infinity();
                entry.coords_checked += 1;
                break;
            }
            if (!smooth) {
                entry.coords_skipped += 1;
                continue;
            }
            entry.coords_checked += 1;
            entry.max_rel_err = std::max(entry.max_rel_err,
                                         gradcheck_rel_err(a.v[c], numeric));
        }
        report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
        report.coords_checked += entry.coords_checked;
        report.coords_skipped += entry.coords_skipped;
        report.blocks.push_back(std::move(entry));
    }
    return report;
}

} // namespace rpnet
