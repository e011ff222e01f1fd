#pragma once

// Field snapshots, checkpoints, CSV export, atomic file writes and the
// FNV-1a hash used to tag outputs with their configuration.
//
// Snapshot layout (all little endian):
//   magic "PHSNAP01" | int32 nx | int32 ny | float64 h | uint8 topology |
//   uint8 kind | 6 bytes padding | nx*ny pairs of float64 (u1, u2), row-major
//   with x fastest.
// Checkpoint layout:
//   magic "PHCKPT01" | uint64 config hash | uint32 stage | uint32 padding |
//   float64 p | snapshot bytes

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pharmonic/error.hpp"
#include "pharmonic/lattice.hpp"

namespace pharmonic {

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

/// Writes `data` to a sibling temporary and renames it over `path`.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view data) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot open " + tmp.string() + " for writing");
    os.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!os) throw Error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path.string());
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

namespace detail {

template <class T>
void put_le(std::string& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
  out.append(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get_le(std::string_view in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw Error("snapshot: truncated data");
  unsigned char b[sizeof(T)];
  std::memcpy(b, in.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
  pos += sizeof(T);
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

constexpr std::string_view kSnapMagic = "PHSNAP01";
constexpr std::string_view kCkptMagic = "PHCKPT01";

}  // namespace detail

struct Snapshot {
  int nx = 0, ny = 0;
  double h = 0.0;
  Topology topology = Topology::torus;
  S1Field field;
};

inline std::string encode_snapshot(const Grid2D& g, const S1Field& u) {
  detail::check_shape(g, u.values.size(), "encode_snapshot");
  std::string out(detail::kSnapMagic);
  detail::put_le<std::int32_t>(out, g.nx());
  detail::put_le<std::int32_t>(out, g.ny());
  detail::put_le<double>(out, g.h());
  detail::put_le<std::uint8_t>(out, static_cast<std::uint8_t>(g.topology()));
  detail::put_le<std::uint8_t>(out, static_cast<std::uint8_t>(u.kind));
  out.append(6, '\0');
  out.reserve(out.size() + 16 * u.values.size());
  for (const Vec2& v : u.values) {
    detail::put_le<double>(out, v.x);
    detail::put_le<double>(out, v.y);
  }
  return out;
}

inline Snapshot decode_snapshot(std::string_view in, std::size_t pos = 0) {
  if (in.substr(pos, 8) != detail::kSnapMagic) throw Error("snapshot: bad magic");
  pos += 8;
  Snapshot s;
  s.nx = detail::get_le<std::int32_t>(in, pos);
  s.ny = detail::get_le<std::int32_t>(in, pos);
  s.h = detail::get_le<double>(in, pos);
  auto topo = detail::get_le<std::uint8_t>(in, pos);
  auto kind = detail::get_le<std::uint8_t>(in, pos);
  if (topo > 2 || kind > 1) throw Error("snapshot: bad header");
  s.topology = static_cast<Topology>(topo);
  s.field.kind = static_cast<FieldKind>(kind);
  pos += 6;
  if (s.nx <= 0 || s.ny <= 0) throw Error("snapshot: bad dimensions");
  std::size_t n = static_cast<std::size_t>(s.nx) * static_cast<std::size_t>(s.ny);
  if (in.size() - pos != 16 * n) throw Error("snapshot: payload size mismatch");
  s.field.values.resize(n);
  for (auto& v : s.field.values) {
    v.x = detail::get_le<double>(in, pos);
    v.y = detail::get_le<double>(in, pos);
  }
  return s;
}

inline void write_snapshot(const std::filesystem::path& path, const Grid2D& g, const S1Field& u) {
  write_file_atomic(path, encode_snapshot(g, u));
}

inline Snapshot read_snapshot(const std::filesystem::path& path) {
  return decode_snapshot(read_file(path));
}

/// Loads a snapshot into a field for grid g, checking the header against it.
inline S1Field load_field(const std::filesystem::path& path, const Grid2D& g) {
  Snapshot s = read_snapshot(path);
  if (s.nx != g.nx() || s.ny != g.ny() || s.h != g.h() || s.topology != g.topology())
    throw ShapeMismatch("snapshot header does not match the grid");
  return std::move(s.field);
}

/// x, y, u1, u2 for every active node.
inline std::string field_csv(const Grid2D& g, const S1Field& u) {
  detail::check_shape(g, u.values.size(), "field_csv");
  std::ostringstream os;
  os << std::setprecision(17) << "x,y,u1,u2\n";
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      std::size_t k = g.index(i, j);
      if (!g.active(k)) continue;
      Vec2 x = g.node_pos(i, j);
      os << x.x << ',' << x.y << ',' << u.values[k].x << ',' << u.values[k].y << '\n';
    }
  return os.str();
}

struct Checkpoint {
  std::uint64_t config_hash = 0;
  std::uint32_t stage = 0;
  double p = 0.0;
  Snapshot snapshot;
};

inline void write_checkpoint(const std::filesystem::path& path, std::uint64_t hash,
                             std::uint32_t stage, double p, const Grid2D& g, const S1Field& u) {
  std::string out(detail::kCkptMagic);
  detail::put_le<std::uint64_t>(out, hash);
  detail::put_le<std::uint32_t>(out, stage);
  detail::put_le<std::uint32_t>(out, 0);
  detail::put_le<double>(out, p);
  out += encode_snapshot(g, u);
  write_file_atomic(path, out);
}

inline Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::string in = read_file(path);
  if (std::string_view(in).substr(0, 8) != detail::kCkptMagic) throw Error("checkpoint: bad magic");
  std::size_t pos = 8;
  Checkpoint c;
  c.config_hash = detail::get_le<std::uint64_t>(in, pos);
  c.stage = detail::get_le<std::uint32_t>(in, pos);
  detail::get_le<std::uint32_t>(in, pos);
  c.p = detail::get_le<double>(in, pos);
  c.snapshot = decode_snapshot(in, pos);
  return c;
}

}  // namespace pharmonic
