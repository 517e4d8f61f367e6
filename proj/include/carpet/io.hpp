#pragma once

// Output formats: CSV tables and fields with a metadata header, PGM rasters,
// and JSON graph serialization.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <zlib.h>

#include <json.hpp>

#include "carpet/error.hpp"
#include "carpet/geometry.hpp"
#include "carpet/operators.hpp"

namespace carpet {

/// 15 significant digits, the precision used in tables and curves.
inline std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.15g", x);
  return buf;
}

/// Shortest text that parses back to exactly x.
inline std::string fmt_exact(double x) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view s) {
  double x = 0.0;
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  auto r = std::from_chars(s.data(), s.data() + s.size(), x);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw ConfigError("not a number: '" + std::string(s) + "'");
  return x;
}

inline std::uint32_t crc32_bytes(const void* data, std::size_t n, std::uint32_t seed = 0) {
  uLong c = seed;
  const auto* p = static_cast<const Bytef*>(data);
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    c = ::crc32(c, p, chunk);
    p += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(c);
}

inline std::string hex32(std::uint32_t v) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

/// Content hash of a graph: adjacency pairs and the boundary registry.
inline std::string graph_hash(const CarpetGraph& g) {
  std::uint32_t c = 0;
  const std::int64_t head[2] = {g.level(), static_cast<std::int64_t>(g.size())};
  c = crc32_bytes(head, sizeof head, c);
  for (auto [a, b] : g.edges()) {
    const std::uint32_t e[2] = {a, b};
    c = crc32_bytes(e, sizeof e, c);
  }
  for (const auto& v : g.virtual_cells()) {
    const std::uint64_t r[3] = {v.owner, static_cast<std::uint64_t>(v.side), v.position};
    c = crc32_bytes(r, sizeof r, c);
  }
  return hex32(c);
}

/// Metadata carried by every CSV: "# key=value" lines before the column row.
struct CsvHeader {
  std::vector<std::pair<std::string, std::string>> entries;

  CsvHeader& add(std::string key, std::string value) {
    entries.emplace_back(std::move(key), std::move(value));
    return *this;
  }
  CsvHeader& add(std::string key, double value) { return add(std::move(key), fmt(value)); }

  static CsvHeader standard(int level, const BoundarySpec& spec, double r_inv, double rho, double tol) {
    CsvHeader h;
    h.add("level", std::to_string(level))
        .add("spec", spec.str())
        .add("theta", spec.theta)
        .add("r_inv", r_inv)
        .add("rho", rho)
        .add("tol", tol);
    return h;
  }

  void write(std::ostream& os) const {
    for (const auto& [k, v] : entries) os << "# " << k << '=' << v << '\n';
  }
};

/// Column-oriented CSV: all columns must have the same length.
inline void write_table_csv(std::ostream& os, const CsvHeader& header,
                            const std::vector<std::string>& names,
                            const std::vector<std::vector<std::string>>& rows) {
  header.write(os);
  for (std::size_t i = 0; i < names.size(); ++i) os << (i ? "," : "") << names[i];
  os << '\n';
  for (const auto& r : rows) {
    if (r.size() != names.size()) throw ConfigError("write_table_csv: row width mismatch");
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
    os << '\n';
  }
}

/// Two-column curve (t, value).
inline void write_curve_csv(std::ostream& os, const CsvHeader& header, const std::string& value_name,
                            const std::vector<double>& t, const std::vector<double>& v) {
  if (t.size() != v.size()) throw ConfigError("write_curve_csv: length mismatch");
  std::vector<std::vector<std::string>> rows;
  rows.reserve(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) rows.push_back({fmt(t[i]), fmt(v[i])});
  write_table_csv(os, header, {"t", value_name}, rows);
}

/// Rows (address, value) in cell order. Values are written exactly.
inline void write_field_csv(std::ostream& os, const CarpetGraph& g, const Field& f,
                            const CsvHeader& header = {}) {
  if (f.size() != static_cast<Eigen::Index>(g.size())) throw ConfigError("field dimension mismatch");
  header.write(os);
  os << "address,value\n";
  for (std::size_t i = 0; i < g.size(); ++i)
    os << g.address(i).str() << ',' << fmt_exact(f[static_cast<Eigen::Index>(i)]) << '\n';
}

/// Reads a field written by write_field_csv; rows may come in any order but
/// every cell must appear exactly once.
inline Field read_field_csv(std::istream& is, const CarpetGraph& g) {
  Field f(static_cast<Eigen::Index>(g.size()));
  std::vector<bool> seen(g.size(), false);
  std::string line;
  bool header_seen = false;
  std::size_t count = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      if (line.rfind("address", 0) == 0) continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ConfigError("field CSV: malformed row '" + line + "'");
    const auto cell = g.index_of(std::string_view(line).substr(0, comma));
    if (seen[cell]) throw ConfigError("field CSV: duplicate cell " + line.substr(0, comma));
    seen[cell] = true;
    f[static_cast<Eigen::Index>(cell)] = parse_double(std::string_view(line).substr(comma + 1));
    ++count;
  }
  if (count != g.size()) throw ConfigError("field CSV: expected " + std::to_string(g.size()) + " rows");
  return f;
}

inline constexpr int kPgmHole = 0;

/// Binary PGM on the 3^m grid. Carpet cells get gray levels 1..255 scaled
/// from the field range; hole pixels get 0. A constant field paints every
/// cell 255.
inline void write_pgm(std::ostream& os, const CarpetGraph& g, const Field& f) {
  if (f.size() != static_cast<Eigen::Index>(g.size())) throw ConfigError("field dimension mismatch");
  if (g.level() > kMaxSupportedLevel) throw ResourceError("raster output limited to level 7");
  const std::size_t n = g.side_cells();
  const double lo = f.minCoeff(), hi = f.maxCoeff();
  std::vector<unsigned char> px(n * n, static_cast<unsigned char>(kPgmHole));
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto p = g.position(i);
    const double s = hi > lo ? (f[static_cast<Eigen::Index>(i)] - lo) / (hi - lo) : 1.0;
    px[static_cast<std::size_t>(p.row) * n + static_cast<std::size_t>(p.col)] =
        static_cast<unsigned char>(1 + std::lround(254.0 * s));
  }
  os << "P5\n" << n << ' ' << n << "\n255\n";
  os.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
}

inline constexpr int kGraphFormatVersion = 1;

inline nlohmann::json graph_to_json(const CarpetGraph& g) {
  nlohmann::json j;
  j["format"] = "carpet-graph";
  j["version"] = kGraphFormatVersion;
  j["level"] = g.level();
  j["cells"] = g.size();
  j["hash"] = graph_hash(g);
  auto& edges = j["edges"] = nlohmann::json::array();
  for (auto [a, b] : g.edges()) edges.push_back({a, b});
  auto& virt = j["virtual_cells"] = nlohmann::json::array();
  for (const auto& v : g.virtual_cells())
    virt.push_back({{"owner", v.owner},
                    {"side", std::string(to_string(v.side))},
                    {"position", v.position},
                    {"t0", v.t0},
                    {"t1", v.t1}});
  return j;
}

/// Rebuilds the graph named by a serialized file and checks that the stored
/// adjacency and boundary registry match it.
inline CarpetGraph graph_from_json(const nlohmann::json& j, int max_level = kMaxSupportedLevel) {
  if (j.value("format", "") != "carpet-graph") throw ConfigError("not a carpet graph file");
  if (j.value("version", 0) != kGraphFormatVersion) throw ConfigError("unsupported graph file version");
  auto g = build_graph(j.at("level").get<int>(), max_level);
  const auto& edges = j.at("edges");
  if (j.at("cells").get<std::size_t>() != g.size() || edges.size() != g.edges().size() ||
      j.at("virtual_cells").size() != g.num_virtual())
    throw ConfigError("graph file does not match its level");
  for (std::size_t i = 0; i < edges.size(); ++i)
    if (edges[i][0].get<std::uint32_t>() != g.edges()[i].first ||
        edges[i][1].get<std::uint32_t>() != g.edges()[i].second)
      throw ConfigError("graph file adjacency differs from the level-" + std::to_string(g.level()) + " carpet");
  if (j.value("hash", "") != graph_hash(g)) throw ConfigError("graph file hash mismatch");
  return g;
}

}  // namespace carpet
