#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "hierlog/tensor.hpp"

namespace hierlog {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian; big-endian hosts are unsupported");

// Flat binary parameter container:
//   magic "HLOG", format version u32, then per parameter:
//   name length u16, UTF-8 name, rank u8, dims as u64, payload as LE f64.
inline constexpr uint32_t kCheckpointVersion = 1;

using NamedParams = std::vector<std::pair<std::string, TensorPtr>>;

namespace detail {

template <typename T>
void write_pod(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw DataError("checkpoint truncated");
    return v;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const NamedParams& params) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open checkpoint for writing: " + path);
    os.write("HLOG", 4);
    detail::write_pod<uint32_t>(os, kCheckpointVersion);
    for (const auto& [name, t] : params) {
        if (name.size() > UINT16_MAX) throw DataError("parameter name too long: " + name);
        detail::write_pod<uint16_t>(os, static_cast<uint16_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::write_pod<uint8_t>(os, static_cast<uint8_t>(t->rank()));
        for (size_t d : t->shape) detail::write_pod<uint64_t>(os, d);
        os.write(reinterpret_cast<const char*>(t->data.data()),
                 static_cast<std::streamsize>(t->size() * sizeof(double)));
    }
    if (!os) throw DataError("checkpoint write failed: " + path);
}

inline NamedParams load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open checkpoint: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "HLOG", 4) != 0)
        throw DataError("bad checkpoint magic in " + path);
    const auto version = detail::read_pod<uint32_t>(is);
    if (version != kCheckpointVersion)
        throw DataError("unsupported checkpoint version " + std::to_string(version));
    NamedParams params;
    while (true) {
        uint16_t name_len;
        is.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
        if (is.eof()) break;
        if (!is) throw DataError("checkpoint truncated");
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const auto rank = detail::read_pod<uint8_t>(is);
        std::vector<size_t> shape;
        for (uint8_t i = 0; i < rank; ++i)
            shape.push_back(static_cast<size_t>(detail::read_pod<uint64_t>(is)));
        auto t = make_tensor(shape);
        is.read(reinterpret_cast<char*>(t->data.data()),
                static_cast<std::streamsize>(t->size() * sizeof(double)));
        if (!is) throw DataError("checkpoint truncated");
        params.emplace_back(std::move(name), std::move(t));
    }
    return params;
}

}  // namespace hierlog
