#pragma once

// Checkpoint container shared by every model kind:
//
//   "TSFD" | u16 version | u32 header_len | header (UTF-8 JSON)
//   | u64 param_count | param_count x f32 | u32 crc32(all preceding bytes)
//
// All integers and floats are little-endian.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <zlib.h>

#include "tsfall/error.hpp"

namespace tsfall::checkpoint {

inline constexpr char kMagic[4] = {'T', 'S', 'F', 'D'};
inline constexpr std::uint16_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

struct Container {
    nlohmann::json header;
    std::vector<float> params;
};

inline std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
    return static_cast<std::uint32_t>(::crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
}

namespace detail {
template <class U>
void put(std::vector<std::uint8_t>& out, U v) {
    std::uint8_t b[sizeof(U)];
    std::memcpy(b, &v, sizeof(U));
    out.insert(out.end(), b, b + sizeof(U));
}
template <class U>
U get(std::span<const std::uint8_t> in, std::size_t& pos) {
    U v;
    std::memcpy(&v, in.data() + pos, sizeof(U));
    pos += sizeof(U);
    return v;
}
} // namespace detail

inline std::vector<std::uint8_t> encode(const Container& c) {
    std::vector<std::uint8_t> out(kMagic, kMagic + 4);
    detail::put<std::uint16_t>(out, kVersion);
    const std::string h = c.header.dump();
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(h.size()));
    out.insert(out.end(), h.begin(), h.end());
    detail::put<std::uint64_t>(out, c.params.size());
    const auto* p = reinterpret_cast<const std::uint8_t*>(c.params.data());
    out.insert(out.end(), p, p + c.params.size() * sizeof(float));
    detail::put<std::uint32_t>(out, crc32_of(out));
    return out;
}

inline Container decode(std::span<const std::uint8_t> in) {
    constexpr std::size_t kMin = 4 + 2 + 4 + 8 + 4;
    if (in.size() < kMin) throw Error("checkpoint", Errc::ChecksumMismatch, "file too short");
    if (std::memcmp(in.data(), kMagic, 4) != 0) throw Error("checkpoint", Errc::BadMagic, "");
    std::size_t tail = in.size() - 4;
    std::uint32_t stored;
    std::memcpy(&stored, in.data() + tail, 4);
    if (stored != crc32_of(in.first(tail))) throw Error("checkpoint", Errc::ChecksumMismatch, "");
    std::size_t pos = 4;
    const auto version = detail::get<std::uint16_t>(in, pos);
    if (version != kVersion)
        throw Error("checkpoint", Errc::VersionMismatch, "file version " + std::to_string(version));
    const auto hlen = detail::get<std::uint32_t>(in, pos);
    if (pos + hlen + 8 > tail) throw Error("checkpoint", Errc::ChecksumMismatch, "header length out of range");
    Container c;
    try {
        c.header = nlohmann::json::parse(in.begin() + static_cast<std::ptrdiff_t>(pos),
                                         in.begin() + static_cast<std::ptrdiff_t>(pos + hlen));
    } catch (const nlohmann::json::exception& e) {
        throw Error("checkpoint", Errc::ChecksumMismatch, std::string("header: ") + e.what());
    }
    pos += hlen;
    const auto n = detail::get<std::uint64_t>(in, pos);
    if (pos + n * sizeof(float) != tail) throw Error("checkpoint", Errc::ChecksumMismatch, "parameter block length");
    c.params.resize(n);
    std::memcpy(c.params.data(), in.data() + pos, n * sizeof(float));
    return c;
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("checkpoint", Errc::Io, "cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

// Writes to a temporary sibling and renames, so readers never see a partial file.
inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("checkpoint", Errc::Io, "cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error("checkpoint", Errc::Io, "write failed " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error("checkpoint", Errc::Io, "rename: " + ec.message());
}

inline void save(const std::filesystem::path& path, const Container& c) { write_file(path, encode(c)); }
inline Container load(const std::filesystem::path& path) { return decode(read_file(path)); }

} // namespace tsfall::checkpoint
