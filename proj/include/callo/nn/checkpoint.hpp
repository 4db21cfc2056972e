#ifndef CALLO_NN_CHECKPOINT_HPP
#define CALLO_NN_CHECKPOINT_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "callo/error.hpp"
#include "callo/nn/network.hpp"

namespace callo {

// Model checkpoint: magic "CALLO1", u64 spec hash, u32 tensor count, then per
// tensor u32 rank + u32 extents + float32 payload. Everything little-endian,
// parameters in declaration order. Loading validates the config hash and every
// shape, and widens/narrows to the network's scalar type.

namespace ckpt_detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
    put_u32(os, static_cast<std::uint32_t>(v));
    put_u32(os, static_cast<std::uint32_t>(v >> 32));
}

inline void put_f32(std::ostream& os, float f) {
    put_u32(os, std::bit_cast<std::uint32_t>(f));
}

inline std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw DataError("checkpoint: truncated file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint64_t get_u64(std::istream& is) {
    const std::uint64_t lo = get_u32(is);
    const std::uint64_t hi = get_u32(is);
    return lo | (hi << 32);
}

inline float get_f32(std::istream& is) { return std::bit_cast<float>(get_u32(is)); }

constexpr char kMagic[6] = {'C', 'A', 'L', 'L', 'O', '1'};

} // namespace ckpt_detail

template <class T>
void save_checkpoint(const std::string& path, const NetworkState<T>& net) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("checkpoint: cannot write " + path);
    os.write(ckpt_detail::kMagic, 6);
    ckpt_detail::put_u64(os, net.spec().hash());
    const auto params = net.params();
    ckpt_detail::put_u32(os, static_cast<std::uint32_t>(params.size()));
    for (const TensorT<T>* p : params) {
        ckpt_detail::put_u32(os, static_cast<std::uint32_t>(p->rank()));
        for (std::size_t e : p->shape()) {
            ckpt_detail::put_u32(os, static_cast<std::uint32_t>(e));
        }
        for (std::size_t i = 0; i < p->size(); ++i) {
            ckpt_detail::put_f32(os, static_cast<float>((*p)[i]));
        }
    }
    if (!os) throw DataError("checkpoint: write failed for " + path);
}

template <class T>
void load_checkpoint(const std::string& path, NetworkState<T>& net) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("checkpoint: cannot open " + path);
    char magic[6];
    is.read(magic, 6);
    if (!is || std::memcmp(magic, ckpt_detail::kMagic, 6) != 0) {
        throw DataError("checkpoint: bad magic in " + path);
    }
    const std::uint64_t hash = ckpt_detail::get_u64(is);
    if (hash != net.spec().hash()) {
        throw DataError("checkpoint: spec hash mismatch; " + path +
                        " was saved for a different network");
    }
    auto params = net.params();
    const std::uint32_t count = ckpt_detail::get_u32(is);
    if (count != params.size()) {
        throw DataError("checkpoint: tensor count mismatch in " + path);
    }
    for (TensorT<T>* p : params) {
        const std::uint32_t rank = ckpt_detail::get_u32(is);
        if (rank != p->rank()) throw DataError("checkpoint: tensor rank mismatch in " + path);
        for (std::size_t d = 0; d < rank; ++d) {
            if (ckpt_detail::get_u32(is) != p->extent(d)) {
                throw DataError("checkpoint: tensor shape mismatch in " + path);
            }
        }
        for (std::size_t i = 0; i < p->size(); ++i) {
            (*p)[i] = static_cast<T>(ckpt_detail::get_f32(is));
        }
    }
    if (!is) throw DataError("checkpoint: truncated file " + path);
}

} // namespace callo

#endif // CALLO_NN_CHECKPOINT_HPP
