#pragma once

// Binary snapshot files and small file helpers.
//
// Snapshot layout, little-endian throughout:
//   "PELB" | version u32 = 1 | n u8 | N u8 | boundary u8 (0 periodic, 1 dirichlet)
//   | sizes n x u64 | h f64 | t f64 | N * prod(sizes) f64 values
// Values are component-major, then row-major over the grid.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "pelab/error.hpp"
#include "pelab/grid.hpp"

namespace pelab::io {

inline constexpr char kSnapshotMagic[4] = {'P', 'E', 'L', 'B'};
inline constexpr std::uint32_t kSnapshotVersion = 1;

namespace detail {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
    std::uint8_t bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    out.insert(out.end(), bytes, bytes + sizeof(T));
}

template <typename T>
T get_le(const std::vector<std::uint8_t>& in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw Error("snapshot file truncated");
    std::uint8_t bytes[sizeof(T)];
    std::memcpy(bytes, in.data() + pos, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    pos += sizeof(T);
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

} // namespace detail

inline std::vector<std::uint8_t> encode_snapshot(const FieldState& s) {
    if (s.components > 255) throw ShapeError("snapshot format holds at most 255 components");
    std::vector<std::uint8_t> out;
    out.reserve(32 + s.values.size() * 8);
    out.insert(out.end(), kSnapshotMagic, kSnapshotMagic + 4);
    detail::put_le<std::uint32_t>(out, kSnapshotVersion);
    out.push_back(static_cast<std::uint8_t>(s.grid.dim()));
    out.push_back(static_cast<std::uint8_t>(s.components));
    out.push_back(static_cast<std::uint8_t>(s.grid.boundary()));
    for (std::size_t n : s.grid.sizes()) detail::put_le<std::uint64_t>(out, n);
    detail::put_le<double>(out, s.grid.h());
    detail::put_le<double>(out, s.t);
    for (double v : s.values) detail::put_le<double>(out, v);
    return out;
}

/// Decodes a snapshot. Dirichlet boundary values are recovered from the first
/// boundary point of each component.
inline FieldState decode_snapshot(const std::vector<std::uint8_t>& in) {
    if (in.size() < 4 || std::memcmp(in.data(), kSnapshotMagic, 4) != 0)
        throw Error("not a snapshot file (bad magic)");
    std::size_t pos = 4;
    const auto version = detail::get_le<std::uint32_t>(in, pos);
    if (version != kSnapshotVersion)
        throw Error("unsupported snapshot version " + std::to_string(version));
    const int n = detail::get_le<std::uint8_t>(in, pos);
    const int comps = detail::get_le<std::uint8_t>(in, pos);
    const auto boundary = detail::get_le<std::uint8_t>(in, pos);
    if (boundary > 1) throw Error("snapshot has unknown boundary code");
    if (n < 1 || n > 3) throw Error("snapshot has invalid dimension");
    std::vector<std::size_t> sizes;
    for (int a = 0; a < n; ++a)
        sizes.push_back(static_cast<std::size_t>(detail::get_le<std::uint64_t>(in, pos)));
    const double h = detail::get_le<double>(in, pos);
    const double t = detail::get_le<double>(in, pos);
    FieldState s(GridSpec(n, sizes, h, static_cast<Boundary>(boundary)), comps, t);
    if (in.size() != pos + s.values.size() * 8) throw Error("snapshot payload has the wrong length");
    for (double& v : s.values) v = detail::get_le<double>(in, pos);
    if (!s.grid.periodic()) {
        const std::size_t b = s.grid.boundary_layer().front();
        for (int c = 0; c < comps; ++c) s.boundary_values[c] = s.at(c, b);
    }
    return s;
}

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write " + path.string());
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write " + path.string());
    f << text;
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

inline void write_snapshot(const std::filesystem::path& path, const FieldState& s) {
    write_bytes(path, encode_snapshot(s));
}

inline FieldState read_snapshot(const std::filesystem::path& path) {
    return decode_snapshot(read_bytes(path));
}

} // namespace pelab::io
