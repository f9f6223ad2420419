#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "rpnet/dataset.hpp"
#include "rpnet/errors.hpp"
#include "rpnet/rng.hpp"
#include "rpnet/tensor.hpp"

namespace rpnet {

template <typename T>
struct Minibatch {
    Tensor<T> images; // BxHxWx3 in [0,1]
    Tensor<T> masks;  // BxHxW ground truth, clipped to [eps, 1-eps]
    Tensor<T> joints; // Bx18 meters (camera frame)
    Tensor<T> bases;  // Bx3
    Tensor<T> types;  // Bx3 one-hot

    int batch() const { return images.shape[0]; }
};

// Whole dataset resident in memory as flat per-sample rows.
template <typename T>
struct TensorDataset {
    int width = 0, height = 0;
    std::size_t count = 0;
    std::vector<T> images; // N*H*W*3
    std::vector<T> masks;  // N*H*W, clipped
    std::vector<T> joints; // N*18
    std::vector<T> bases;  // N*3
    std::vector<T> types;  // N*3 one-hot
    std::vector<int> type_labels;
    double mean_fg_fraction = 0.0;

    std::size_t pixels() const {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }

    Minibatch<T> gather(const std::vector<std::size_t>& idx) const {
        if (idx.empty()) throw std::invalid_argument("gather: empty index list");
        int b = static_cast<int>(idx.size());
        Minibatch<T> mb{Tensor<T>({b, height, width, 3}), Tensor<T>({b, height, width}),
                        Tensor<T>({b, 18}), Tensor<T>({b, 3}), Tensor<T>({b, 3})};
        std::size_t px = pixels();
        for (int i = 0; i < b; ++i) {
            std::size_t s = idx[static_cast<std::size_t>(i)];
            if (s >= count) throw std::invalid_argument("gather: index out of range");
            std::copy_n(images.begin() + static_cast<std::ptrdiff_t>(s * px * 3), px * 3,
                        mb.images.v.begin() + static_cast<std::ptrdiff_t>(i) * static_cast<std::ptrdiff_t>(px * 3));
            std::copy_n(masks.begin() + static_cast<std::ptrdiff_t>(s * px), px,
                        mb.masks.v.begin() + static_cast<std::ptrdiff_t>(i) * static_cast<std::ptrdiff_t>(px));
            std::copy_n(joints.begin() + static_cast<std::ptrdiff_t>(s * 18), 18,
                        mb.joints.v.begin() + i * 18);
            std::copy_n(bases.begin() + static_cast<std::ptrdiff_t>(s * 3), 3,
                        mb.bases.v.begin() + i * 3);
            std::copy_n(types.begin() + static_cast<std::ptrdiff_t>(s * 3), 3,
                        mb.types.v.begin() + i * 3);
        }
        return mb;
    }
};

template <typename T>
TensorDataset<T> load_tensor_dataset(const DatasetManifest& manifest) {
    TensorDataset<T> d;
    d.width = manifest.width;
    d.height = manifest.height;
    d.count = manifest.size();
    if (d.count == 0) return d;
    std::size_t px = d.pixels();
    d.images.resize(d.count * px * 3);
    d.masks.resize(d.count * px);
    d.joints.resize(d.count * 18);
    d.bases.resize(d.count * 3);
    d.types.assign(d.count * 3, T(0));
    d.type_labels.resize(d.count);

    const T lo = static_cast<T>(kProbEps);
    const T hi = static_cast<T>(1.0 - kProbEps);
    double fg_sum = 0.0;
    for (std::size_t s = 0; s < d.count; ++s) {
        Image img = load_entry_image(manifest, s);
        Mask mask = load_entry_mask(manifest, s);
        if (img.width != d.width || img.height != d.height || mask.width != d.width ||
            mask.height != d.height) {
            throw DataError("dataset entry " + std::to_string(s) +
                            " does not match the manifest resolution");
        }
        for (std::size_t i = 0; i < px * 3; ++i) {
            d.images[s * px * 3 + i] = static_cast<T>(img.data[i]);
        }
        std::size_t fg = 0;
        for (std::size_t i = 0; i < px; ++i) {
            bool on = mask.data[i] != 0;
            fg += on ? 1 : 0;
            d.masks[s * px + i] = on ? hi : lo;
        }
        fg_sum += static_cast<double>(fg) / static_cast<double>(px);

        const ManifestEntry& e = manifest.entries[s];
        for (int j = 0; j < kNumJoints; ++j) {
            const Vec3& p = e.joints_xyz[static_cast<std::size_t>(j)];
            d.joints[s * 18 + static_cast<std::size_t>(j) * 3 + 0] = static_cast<T>(p.x);
            d.joints[s * 18 + static_cast<std::size_t>(j) * 3 + 1] = static_cast<T>(p.y);
            d.joints[s * 18 + static_cast<std::size_t>(j) * 3 + 2] = static_cast<T>(p.z);
        }
        d.bases[s * 3 + 0] = static_cast<T>(e.base_xyz.x);
        d.bases[s * 3 + 1] = static_cast<T>(e.base_xyz.y);
        d.bases[s * 3 + 2] = static_cast<T>(e.base_xyz.z);
        int label = static_cast<int>(e.robot_type);
        d.type_labels[s] = label;
        d.types[s * 3 + static_cast<std::size_t>(label)] = T(1);
    }
    d.mean_fg_fraction = fg_sum / static_cast<double>(d.count);
    return d;
}

// Per-epoch seeded shuffle split into batch-size chunks; the short final
// batch is kept so every sample appears exactly once per epoch.
inline std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, int batch_size,
                                                           std::uint64_t seed,
                                                           std::uint64_t epoch) {
    if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    std::vector<std::vector<std::size_t>> out;
    if (n == 0) return out;
    std::vector<std::size_t> order = seeded_permutation(n, mix_seed(seed, 0x45504f43ULL, epoch));
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch_size)) {
        std::size_t end = std::min(n, start + static_cast<std::size_t>(batch_size));
        out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return out;
}

template <typename T>
std::vector<Minibatch<T>> minibatches(const TensorDataset<T>& dataset, int batch_size,
                                      std::uint64_t seed, std::uint64_t epoch) {
    std::vector<Minibatch<T>> out;
    for (const auto& idx : epoch_batches(dataset.count, batch_size, seed, epoch)) {
        out.push_back(dataset.gather(idx));
    }
    return out;
}

// BxHxWx3 -> Bx3xHxW (the layout the conv stack consumes)
template <typename T>
Tensor<T> to_nchw(const Tensor<T>& bhwc) {
    if (bhwc.ndims() != 4) throw std::invalid_argument("to_nchw: 4-d tensor required");
    int b = bhwc.shape[0], h = bhwc.shape[1], w = bhwc.shape[2], c = bhwc.shape[3];
    Tensor<T> out({b, c, h, w});
    for (int bi = 0; bi < b; ++bi) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                for (int ci = 0; ci < c; ++ci) {
                    out.v[((static_cast<std::size_t>(bi) * c + ci) * h + y) * w + x] =
                        bhwc.v[((static_cast<std::size_t>(bi) * h + y) * w + x) * c + ci];
                }
            }
        }
    }
    return out;
}

} // namespace rpnet
