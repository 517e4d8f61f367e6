#pragma once

// Theta-spectra of the strip and staircase covers: band sweeps over a theta
// grid, projection of the bands onto the lambda axis, and the symmetry
// classes that split each theta-eigenspace.
//
// Staircase classes are the eigenvalues e^{2 pi i (theta + k)/4} of the
// twisted quarter turn R (R^4 = e^{2 pi i theta}). Strip classes are the
// parity under y -> 1 - y, reported as 0 (even) and 1 (odd).

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "carpet/eigensolver.hpp"
#include "carpet/error.hpp"
#include "carpet/geometry.hpp"
#include "carpet/operators.hpp"
#include "carpet/spectra.hpp"

namespace carpet {

enum class Cover { strip, staircase };

inline std::string to_string(Cover c) { return c == Cover::strip ? "strip" : "staircase"; }

inline Cover parse_cover(const std::string& s) {
  if (s == "strip") return Cover::strip;
  if (s == "staircase") return Cover::staircase;
  throw ConfigError("unknown cover '" + s + "' (expected strip or staircase)");
}

inline BoundarySpec cover_spec(Cover c, double theta) {
  return c == Cover::strip ? BoundarySpec::strip(theta) : BoundarySpec::staircase(theta);
}

/// n uniform points on [0, 1/2].
inline std::vector<double> theta_grid(std::size_t n = 65) {
  if (n == 0) throw ConfigError("theta grid needs at least one point");
  if (n == 1) return {0.0};
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = 0.5 * static_cast<double>(i) / static_cast<double>(n - 1);
  return t;
}

/// The symmetry commuting with the cover operator at theta: the twisted
/// quarter turn (staircase) or the reflection y -> 1 - y (strip).
inline CField cover_symmetry_apply(Cover c, const CarpetGraph& g, double theta, const CField& u) {
  if (u.size() != static_cast<Eigen::Index>(g.size())) throw ConfigError("field dimension mismatch");
  CField out(u.size());
  if (c == Cover::strip) {
    const auto perm = g.permutation(Symmetry::reflect_vertical());
    for (std::size_t i = 0; i < perm.size(); ++i)
      out[static_cast<Eigen::Index>(i)] = u[static_cast<Eigen::Index>(perm[i])];
    return out;
  }
  const auto perm = g.permutation(Symmetry::rotation(1));
  const cplx ph = std::polar(1.0, 2.0 * std::numbers::pi * theta);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    const auto d = g.top_digit(i);
    const cplx w = (d == 6 || d == 7) ? ph : cplx(1.0);
    out[static_cast<Eigen::Index>(i)] = w * u[static_cast<Eigen::Index>(perm[i])];
  }
  return out;
}

struct SymmetryClass {
  int cls = -1;
  double confidence = 0.0;  ///< |eigenvalue of the symmetry on the field|, 1 for a clean class
  bool ambiguous = true;
};

namespace detail {

inline SymmetryClass class_from_eigenvalue(Cover c, double theta, cplx mu) {
  SymmetryClass out;
  out.confidence = std::abs(mu);
  if (c == Cover::strip) {
    out.cls = mu.real() >= 0 ? 0 : 1;
  } else {
    double best = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < 4; ++k) {
      const cplx w = std::polar(1.0, 2.0 * std::numbers::pi * (theta + k) / 4.0);
      const double score = std::real(mu * std::conj(w));
      if (score > best) {
        best = score;
        out.cls = k;
      }
    }
  }
  out.ambiguous = std::abs(out.confidence - 1.0) > 1e-3;
  return out;
}

}  // namespace detail

/// Class of a single theta-eigenfield: the k maximizing Re(<R u, u> conj(w_k))
/// with w_k = e^{2 pi i (theta + k)/4}, or the sign of <u o sigma_v, u>. Fields
/// that are not eigenvectors of the symmetry are flagged ambiguous.
inline SymmetryClass classify_rotation_symmetry(const CField& u, double theta, const CarpetGraph& g,
                                                Cover c = Cover::staircase) {
  const double nn = u.squaredNorm();
  if (!(nn > 0)) throw ConfigError("classify_rotation_symmetry: zero field");
  const cplx mu = u.dot(cover_symmetry_apply(c, g, theta, u)) / nn;  // <Ru, u>
  return detail::class_from_eigenvalue(c, theta, mu);
}

/// Splits each degenerate cluster of a theta-eigenset by diagonalizing the
/// cover symmetry inside it. Fields are rotated in place; returns one class
/// per eigenpair.
inline std::vector<SymmetryClass> classify_eigenset(ComplexEigenSet& set, double theta,
                                                    const CarpetGraph& g, Cover c) {
  if (!set.has_fields()) throw ConfigError("classify_eigenset: eigenset has no fields");
  std::vector<SymmetryClass> out(set.size());
  for (auto [b, e] : degeneracy_clusters(set.values)) {
    const auto d = static_cast<Eigen::Index>(e - b);
    const auto b0 = static_cast<Eigen::Index>(b);
    const Eigen::MatrixXcd u = set.fields.middleCols(b0, d);
    Eigen::MatrixXcd ru(u.rows(), d);
    for (Eigen::Index j = 0; j < d; ++j) ru.col(j) = cover_symmetry_apply(c, g, theta, u.col(j));
    const Eigen::MatrixXcd m = u.adjoint() * ru / u.col(0).squaredNorm();
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(m);
    if (es.info() != Eigen::Success) continue;
    Eigen::MatrixXcd v = es.eigenvectors();
    // Order the new basis by class so the output is deterministic.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
    std::iota(order.begin(), order.end(), 0);
    std::vector<SymmetryClass> cls(static_cast<std::size_t>(d));
    for (Eigen::Index j = 0; j < d; ++j)
      cls[static_cast<std::size_t>(j)] = detail::class_from_eigenvalue(c, theta, es.eigenvalues()[j]);
    std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) {
      return cls[static_cast<std::size_t>(x)].cls < cls[static_cast<std::size_t>(y)].cls;
    });
    for (Eigen::Index j = 0; j < d; ++j) {
      const auto src = order[static_cast<std::size_t>(j)];
      CField col = u * v.col(src);
      col *= std::sqrt(static_cast<double>(u.rows())) / col.norm();
      detail::fix_sign_gauge<cplx>(col);
      set.fields.col(b0 + j) = col;
      out[b + static_cast<std::size_t>(j)] = cls[static_cast<std::size_t>(src)];
    }
  }
  return out;
}

struct BandRow {
  double theta = 0.0;
  std::vector<double> values;  ///< unrenormalized, ascending
  std::vector<SymmetryClass> classes;
  bool complete = false;       ///< the whole spectrum was computed
  bool converged = true;
  bool ambiguous = false;      ///< some eigenpair had no clean symmetry class
  std::string note;
};

struct Band {
  int cls = 0;
  std::size_t rank = 0;        ///< position within its class
  std::vector<double> values;  ///< one per theta, unrenormalized
};

struct BandSweep {
  Cover cover = Cover::staircase;
  int level = 0;
  double rho = 10.0;
  std::vector<double> thetas;
  std::vector<BandRow> rows;
  std::vector<Band> bands;  ///< ascending by value at the first theta
  bool incomplete = false;  ///< fewer than the requested number of bands resolved

  double scale() const { return std::pow(rho, level); }
};

struct SweepOptions {
  double tol = 1e-9;
  double rho = 10.0;
  int max_level = kMaxEigenLevel;
  EigsolveOptions solver{};
};

/// Lowest k bands over a theta grid in [0, 1/2]. Bands are continued within a
/// symmetry class by rank, so curves of different classes may cross while
/// curves of one class never do.
inline BandSweep sweep_bands(Cover cover, const CarpetGraph& g, const std::vector<double>& thetas,
                             std::size_t k, const SweepOptions& opt = {}) {
  if (k < 1) throw ConfigError("sweep_bands: k must be >= 1");
  if (g.level() > opt.max_level)
    throw ResourceError("eigensolves limited to level " + std::to_string(opt.max_level));
  for (double t : thetas)
    if (!(t >= 0.0 && t <= 0.5)) throw ConfigError("sweep_bands: theta grid must lie in [0, 1/2]");
  BandSweep sw;
  sw.cover = cover;
  sw.level = g.level();
  sw.rho = opt.rho;
  sw.thetas = thetas;
  if (thetas.empty()) return sw;

  const auto n = static_cast<Eigen::Index>(g.size());
  const Eigen::Index want = std::min<Eigen::Index>(n, static_cast<Eigen::Index>(2 * k + 8));
  double cutoff = std::numeric_limits<double>::infinity();
  for (double theta : thetas) {
    BandRow row;
    row.theta = theta;
    try {
      const auto op = assemble_complex(g, cover_spec(cover, theta));
      EigensolveRequest req;
      req.count = want;
      req.tol = opt.tol;
      req.rho = opt.rho;
      req.max_level = opt.max_level;
      req.solver = opt.solver;
      auto set = eigensolve(op, req);
      row.classes = classify_eigenset(set, theta, g, cover);
      row.values = set.values;
      row.complete = static_cast<Eigen::Index>(set.size()) == n;
      if (!row.complete && !set.values.empty()) cutoff = std::min(cutoff, set.values.back());
      for (const auto& c : row.classes) row.ambiguous = row.ambiguous || c.ambiguous;
    } catch (const ConvergenceError& e) {
      row.converged = false;
      row.note = e.what();
    }
    sw.rows.push_back(std::move(row));
  }

  // (class, rank) -> band; keep only bands resolved at every theta and below
  // the lowest truncation level, where ranks within a class are exact.
  std::map<std::pair<int, std::size_t>, Band> found;
  for (std::size_t r = 0; r < sw.rows.size(); ++r) {
    const auto& row = sw.rows[r];
    std::map<int, std::size_t> seen;
    for (std::size_t i = 0; i < row.values.size(); ++i) {
      const int c = row.classes[i].cls;
      const std::size_t rank = seen[c]++;
      auto& b = found[{c, rank}];
      b.cls = c;
      b.rank = rank;
      b.values.resize(sw.rows.size(), std::numeric_limits<double>::quiet_NaN());
      b.values[r] = row.values[i];
    }
  }
  for (auto& [key, b] : found) {
    const bool ok = std::all_of(b.values.begin(), b.values.end(),
                                [&](double v) { return !std::isnan(v) && v < cutoff; });
    if (ok) sw.bands.push_back(std::move(b));
  }
  std::sort(sw.bands.begin(), sw.bands.end(), [](const Band& a, const Band& b) {
    if (a.values.front() != b.values.front()) return a.values.front() < b.values.front();
    return a.cls < b.cls;
  });
  if (sw.bands.size() > k) sw.bands.resize(k);
  sw.incomplete = sw.bands.size() < k;
  return sw;
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct SpectrumProjection {
  std::vector<Interval> intervals;  ///< sorted, disjoint; renormalized
  std::vector<Interval> gaps;       ///< between consecutive intervals
};

/// Union over bands of [min_theta, max_theta], merged where they overlap.
inline SpectrumProjection project_spectrum(const BandSweep& sw, double merge_tol = 1e-9) {
  std::vector<Interval> raw;
  for (const auto& b : sw.bands) {
    const auto [lo, hi] = std::minmax_element(b.values.begin(), b.values.end());
    raw.push_back({*lo * sw.scale(), *hi * sw.scale()});
  }
  std::sort(raw.begin(), raw.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  SpectrumProjection p;
  for (const auto& iv : raw) {
    if (!p.intervals.empty() &&
        iv.lo <= p.intervals.back().hi + merge_tol * std::max(1.0, std::abs(iv.lo)))
      p.intervals.back().hi = std::max(p.intervals.back().hi, iv.hi);
    else
      p.intervals.push_back(iv);
  }
  for (std::size_t i = 0; i + 1 < p.intervals.size(); ++i)
    p.gaps.push_back({p.intervals[i].hi, p.intervals[i + 1].lo});
  return p;
}

struct BandGroup {
  std::vector<std::size_t> bands;  ///< indices into BandSweep::bands
  double lo = 0.0;
  double hi = 0.0;
};

struct GroupReport {
  std::vector<BandGroup> groups;  ///< ascending
  std::vector<std::size_t> sizes;
};

/// Groups bands that meet (coincide) at theta = 0 or theta = 1/2. A chain of
/// such meetings forms one group; without crossings groups have 4 curves.
inline GroupReport group_structure_report(const BandSweep& sw, double rel_tol = 1e-6) {
  GroupReport rep;
  const std::size_t nb = sw.bands.size();
  if (nb == 0 || sw.thetas.empty()) return rep;
  std::vector<std::size_t> parent(nb);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<std::size_t> ends;
  for (std::size_t r = 0; r < sw.thetas.size(); ++r)
    if (sw.thetas[r] == 0.0 || sw.thetas[r] == 0.5) ends.push_back(r);
  for (auto r : ends)
    for (std::size_t a = 0; a < nb; ++a)
      for (std::size_t b = a + 1; b < nb; ++b) {
        const double x = sw.bands[a].values[r], y = sw.bands[b].values[r];
        if (std::abs(x - y) <= rel_tol * std::max(std::abs(x), std::abs(y)) + 1e-12)
          parent[find(a)] = find(b);
      }
  std::map<std::size_t, BandGroup> by_root;
  for (std::size_t a = 0; a < nb; ++a) by_root[find(a)].bands.push_back(a);
  for (auto& [root, grp] : by_root) {
    grp.lo = std::numeric_limits<double>::infinity();
    grp.hi = -grp.lo;
    for (auto a : grp.bands)
      for (double v : sw.bands[a].values) {
        grp.lo = std::min(grp.lo, v * sw.scale());
        grp.hi = std::max(grp.hi, v * sw.scale());
      }
    rep.groups.push_back(std::move(grp));
  }
  std::sort(rep.groups.begin(), rep.groups.end(),
            [](const BandGroup& a, const BandGroup& b) { return a.lo < b.lo; });
  for (const auto& grp : rep.groups) rep.sizes.push_back(grp.bands.size());
  return rep;
}

}  // namespace carpet
