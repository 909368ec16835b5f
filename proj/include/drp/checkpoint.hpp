#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "drp/autodiff.hpp"

namespace drp {

// Flat binary checkpoint: magic, version, tensor count, then per tensor
// (name length, name, rank, extents, f64 values), all little-endian.

namespace detail {

constexpr char kCkptMagic[8] = {'D', 'R', 'P', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kCkptVersion = 1;

template <typename T>
inline void write_pod(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
inline T read_pod(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const std::vector<Tensor>& tensors) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    out.write(detail::kCkptMagic, 8);
    detail::write_pod<std::uint32_t>(out, detail::kCkptVersion);
    detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
        const std::string& name = t.name();
        detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape().size()));
        for (int e : t.shape()) detail::write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(e));
        out.write(reinterpret_cast<const char*>(t.data()),
                  static_cast<std::streamsize>(t.numel() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

inline std::vector<Tensor> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, detail::kCkptMagic, 8) != 0)
        throw std::runtime_error("load_checkpoint: bad magic in " + path);
    const auto version = detail::read_pod<std::uint32_t>(in);
    if (version != detail::kCkptVersion)
        throw std::runtime_error("load_checkpoint: unsupported version " + std::to_string(version));
    const auto count = detail::read_pod<std::uint32_t>(in);
    std::vector<Tensor> tensors;
    tensors.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = detail::read_pod<std::uint32_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const auto rank = detail::read_pod<std::uint32_t>(in);
        if (rank < 1 || rank > 4)
            throw std::runtime_error("load_checkpoint: bad tensor rank in " + path);
        std::vector<int> shape(rank);
        for (auto& e : shape) e = static_cast<int>(detail::read_pod<std::uint64_t>(in));
        Tensor t(shape, false, name);
        in.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.numel() * sizeof(double)));
        if (!in) throw std::runtime_error("load_checkpoint: truncated tensor data in " + path);
        tensors.push_back(std::move(t));
    }
    return tensors;
}

}  // namespace drp
