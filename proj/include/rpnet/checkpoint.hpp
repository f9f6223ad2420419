#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "rpnet/tensor.hpp"

namespace rpnet {

// One named tensor inside an RPNN checkpoint file. Values are kept as raw
// little-endian bytes so a save/load round trip is bit-exact.
struct CheckpointBlock {
    std::string name;
    int dtype = 0; // 0 = f32, 1 = f64
    std::vector<int> shape;
    std::vector<unsigned char> raw;

    std::size_t numel() const {
        std::size_t n = shape.empty() ? 0 : 1;
        for (int d : shape) n *= static_cast<std::size_t>(d);
        return n;
    }
};

// File layout: magic "RPNN", version u32, then per block: name length u32,
// name bytes, dtype u8, ndims u32, each dim u32, raw values. All integers
// little-endian; blocks read until end of file.
void save_checkpoint(const std::string& path, const std::vector<CheckpointBlock>& blocks);
std::vector<CheckpointBlock> load_checkpoint(const std::string& path);

template <typename T>
constexpr int dtype_tag() {
    static_assert(sizeof(T) == 4 || sizeof(T) == 8, "only f32/f64 checkpoints supported");
    return sizeof(T) == 4 ? 0 : 1;
}

template <typename T>
CheckpointBlock to_block(const std::string& name, const Tensor<T>& t) {
    CheckpointBlock b;
    b.name = name;
    b.dtype = dtype_tag<T>();
    b.shape = t.shape;
    b.raw.resize(t.size() * sizeof(T));
    std::memcpy(b.raw.data(), t.data(), b.raw.size());
    return b;
}

template <typename T>
Tensor<T> from_block(const CheckpointBlock& b) {
    Tensor<T> t(b.shape);
    if (b.dtype == dtype_tag<T>()) {
        std::memcpy(t.data(), b.raw.data(), b.raw.size());
    } else if (b.dtype == 0) {
        const float* src = reinterpret_cast<const float*>(b.raw.data());
        for (std::size_t i = 0; i < t.size(); ++i) t.v[i] = static_cast<T>(src[i]);
    } else {
        const double* src = reinterpret_cast<const double*>(b.raw.data());
        for (std::size_t i = 0; i < t.size(); ++i) t.v[i] = static_cast<T>(src[i]);
    }
    return t;
}

} // namespace rpnet
