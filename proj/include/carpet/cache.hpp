#pragma once

// On-disk cache of eigensets. Entries are written to a temporary file and
// renamed into place, so readers never see partial files. A checksum or key
// mismatch invalidates the entry.

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "carpet/error.hpp"
#include "carpet/io.hpp"
#include "carpet/spectra.hpp"

namespace carpet {

inline constexpr const char* kCodeVersion = "1.0.0";
inline constexpr const char* kCacheEnvVar = "CARPET_CACHE_DIR";

struct CacheKey {
  int level = 0;
  BoundarySpec spec;
  std::int64_t count = 0;
  double tol = 0.0;
  bool fields = true;
  std::string version = kCodeVersion;

  std::string str() const {
    const double theta = std::round(spec.theta * 1e12) / 1e12;
    std::ostringstream os;
    os << "level=" << level << ";spec=" << spec.name() << ";theta=" << fmt(theta)
       << ";k=" << count << ";tol=" << fmt(tol) << ";fields=" << (fields ? 1 : 0)
       << ";version=" << version;
    return os.str();
  }
};

class EigenCache {
 public:
  /// An empty directory disables the cache.
  explicit EigenCache(std::filesystem::path dir = {}) : dir_(std::move(dir)) {}

  static EigenCache from_env(const std::optional<std::string>& override_dir = std::nullopt) {
    if (override_dir) return EigenCache(*override_dir);
    if (const char* env = std::getenv(kCacheEnvVar); env && *env) return EigenCache(env);
    return EigenCache();
  }

  bool enabled() const { return !dir_.empty(); }
  const std::filesystem::path& dir() const { return dir_; }

  std::filesystem::path path_for(const CacheKey& key) const {
    const auto k = key.str();
    return dir_ / ("eig-" + hex32(crc32_bytes(k.data(), k.size())) + ".bin");
  }

  /// The cached set for `key`, or nullopt. Corrupt entries are removed.
  template <class Scalar>
  std::optional<EigenSet<Scalar>> load(const CacheKey& key) const {
    if (!enabled()) return std::nullopt;
    const auto p = path_for(key);
    std::ifstream in(p, std::ios::binary);
    if (!in) return std::nullopt;
    std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    auto set = decode<Scalar>(blob, key);
    if (!set) {
      std::error_code ec;
      std::filesystem::remove(p, ec);
    }
    return set;
  }

  template <class Scalar>
  void store(const CacheKey& key, const EigenSet<Scalar>& set) const {
    if (!enabled()) return;
    std::filesystem::create_directories(dir_);
    const auto target = path_for(key);
    std::random_device rd;
    const auto tmp = target.string() + ".tmp" + hex32(rd());
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw ResourceError("cannot write cache file " + tmp);
      const auto blob = encode(key, set);
      out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
      if (!out) throw ResourceError("cannot write cache file " + tmp);
    }
    std::filesystem::rename(tmp, target);
  }

 private:
  static constexpr char kMagic[8] = {'C', 'R', 'P', 'T', 'E', 'I', 'G', '1'};

  template <class T>
  static void put(std::string& b, const T& v) {
    b.append(reinterpret_cast<const char*>(&v), sizeof v);
  }
  template <class T>
  static bool get(const std::string& b, std::size_t& at, T& v) {
    if (at + sizeof v > b.size()) return false;
    std::memcpy(&v, b.data() + at, sizeof v);
    at += sizeof v;
    return true;
  }

  template <class Scalar>
  static std::string encode(const CacheKey& key, const EigenSet<Scalar>& s) {
    std::string b(kMagic, sizeof kMagic);
    const auto k = key.str();
    put(b, static_cast<std::uint64_t>(k.size()));
    b += k;
    put(b, static_cast<std::uint8_t>(std::is_same_v<Scalar, double> ? 0 : 1));
    put(b, s.rho);
    put(b, static_cast<std::uint64_t>(s.values.size()));
    for (double v : s.values) put(b, v);
    for (std::size_t i = 0; i < s.values.size(); ++i)
      put(b, i < s.residuals.size() ? s.residuals[i] : 0.0);
    for (std::size_t i = 0; i < s.values.size(); ++i)
      put(b, static_cast<std::int32_t>(i < s.labels.size() ? static_cast<int>(s.labels[i]) : 0));
    put(b, static_cast<std::int64_t>(s.fields.rows()));
    put(b, static_cast<std::int64_t>(s.fields.cols()));
    b.append(reinterpret_cast<const char*>(s.fields.data()),
             static_cast<std::size_t>(s.fields.size()) * sizeof(Scalar));
    put(b, crc32_bytes(b.data(), b.size()));
    return b;
  }

  template <class Scalar>
  static std::optional<EigenSet<Scalar>> decode(const std::string& b, const CacheKey& key) {
    if (b.size() < sizeof kMagic + 4 || std::memcmp(b.data(), kMagic, sizeof kMagic) != 0)
      return std::nullopt;
    std::uint32_t stored = 0;
    std::memcpy(&stored, b.data() + b.size() - 4, 4);
    if (crc32_bytes(b.data(), b.size() - 4) != stored) return std::nullopt;
    std::size_t at = sizeof kMagic;
    std::uint64_t klen = 0;
    if (!get(b, at, klen) || at + klen > b.size()) return std::nullopt;
    if (b.compare(at, klen, key.str()) != 0) return std::nullopt;
    at += klen;
    std::uint8_t cplx_flag = 0;
    if (!get(b, at, cplx_flag) || cplx_flag != (std::is_same_v<Scalar, double> ? 0 : 1)) return std::nullopt;
    EigenSet<Scalar> s;
    s.level = key.level;
    s.spec = key.spec;
    s.tol = key.tol;
    std::uint64_t n = 0;
    if (!get(b, at, s.rho) || !get(b, at, n)) return std::nullopt;
    s.values.resize(n);
    s.residuals.resize(n);
    s.labels.resize(n);
    for (auto& v : s.values)
      if (!get(b, at, v)) return std::nullopt;
    for (auto& v : s.residuals)
      if (!get(b, at, v)) return std::nullopt;
    for (auto& l : s.labels) {
      std::int32_t x = 0;
      if (!get(b, at, x) || x < 0 || x > static_cast<int>(SymmetryLabel::two)) return std::nullopt;
      l = static_cast<SymmetryLabel>(x);
    }
    std::int64_t rows = 0, cols = 0;
    if (!get(b, at, rows) || !get(b, at, cols) || rows < 0 || cols < 0) return std::nullopt;
    const auto bytes = static_cast<std::size_t>(rows * cols) * sizeof(Scalar);
    if (at + bytes + 4 != b.size()) return std::nullopt;
    s.fields.resize(rows, cols);
    std::memcpy(s.fields.data(), b.data() + at, bytes);
    return s;
  }

  std::filesystem::path dir_;
};

}  // namespace carpet
