#include "rpnet/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <fstream>

#include "rpnet/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

namespace rpnet {

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
}

bool get_u32(std::istream& in, std::uint32_t& v) {
    return static_cast<bool>(in.read(reinterpret_cast<char*>(&v), 4));
}

constexpr char kMagic[4] = {'R', 'P', 'N', 'N'};
constexpr std::uint32_t kVersion = 1;

} // namespace

void save_checkpoint(const std::string& path, const std::vector<CheckpointBlock>& blocks) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    for (const CheckpointBlock& b : blocks) {
        std::size_t value_size = b.dtype == 0 ? 4 : 8;
        if (b.raw.size() != b.numel() * value_size) {
            throw DataError("checkpoint block '" + b.name + "' has inconsistent payload size");
        }
        put_u32(out, static_cast<std::uint32_t>(b.name.size()));
        out.write(b.name.data(), static_cast<std::streamsize>(b.name.size()));
        char tag = static_cast<char>(b.dtype);
        out.write(&tag, 1);
        put_u32(out, static_cast<std::uint32_t>(b.shape.size()));
        for (int d : b.shape) put_u32(out, static_cast<std::uint32_t>(d));
        out.write(reinterpret_cast<const char*>(b.raw.data()),
                  static_cast<std::streamsize>(b.raw.size()));
    }
    if (!out) throw DataError("failed writing checkpoint: " + path);
}

std::vector<CheckpointBlock> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        throw DataError("not an RPNN checkpoint: " + path);
    }
    std::uint32_t version = 0;
    if (!get_u32(in, version) || version != kVersion) {
        throw DataError("unsupported checkpoint version in " + path);
    }

    std::vector<CheckpointBlock> blocks;
    std::uint32_t name_len = 0;
    while (get_u32(in, name_len)) {
        CheckpointBlock b;
        b.name.resize(name_len);
        char tag = 0;
        std::uint32_t ndims = 0;
        if (!in.read(b.name.data(), name_len) || !in.read(&tag, 1) || !get_u32(in, ndims)) {
            throw DataError("truncated checkpoint block header in " + path);
        }
        if (tag != 0 && tag != 1) {
            throw DataError("unknown dtype tag in checkpoint block '" + b.name + "'");
        }
        b.dtype = tag;
        b.shape.resize(ndims);
        for (std::uint32_t i = 0; i < ndims; ++i) {
            std::uint32_t d = 0;
            if (!get_u32(in, d)) throw DataError("truncated shape in checkpoint block '" + b.name + "'");
            b.shape[i] = static_cast<int>(d);
        }
        std::size_t value_size = b.dtype == 0 ? 4 : 8;
        b.raw.resize(b.numel() * value_size);
        if (!in.read(reinterpret_cast<char*>(b.raw.data()),
                     static_cast<std::streamsize>(b.raw.size()))) {
            throw DataError("truncated values in checkpoint block '" + b.name + "'");
        }
        blocks.push_back(std::move(b));
    }
    return blocks;
}

} // namespace rpnet
