#pragma once

// Eigenpairs of the carpet Laplacians and the spectral statistics built on
// them. Fields are normalized against the self-similar measure, which gives
// each m-cell mass 8^{-m}: <u, v> = 8^{-m} sum_x u(x) conj(v(x)).

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "carpet/eigensolver.hpp"
#include "carpet/error.hpp"
#include "carpet/geometry.hpp"
#include "carpet/operators.hpp"

namespace carpet {

inline constexpr int kMaxEigenLevel = 5;
inline constexpr double kDegeneracyTol = 1e-6;

enum class SymmetryLabel { none, constant, pp, pm, mp, mm, two };

inline std::string to_string(SymmetryLabel l) {
  switch (l) {
    case SymmetryLabel::none: return "?";
    case SymmetryLabel::constant: return "constant";
    case SymmetryLabel::pp: return "1++";
    case SymmetryLabel::pm: return "1+-";
    case SymmetryLabel::mp: return "1-+";
    case SymmetryLabel::mm: return "1--";
    case SymmetryLabel::two: return "2";
  }
  return "?";
}

inline bool is_one_dimensional(SymmetryLabel l) {
  return l == SymmetryLabel::constant || l == SymmetryLabel::pp || l == SymmetryLabel::pm ||
         l == SymmetryLabel::mp || l == SymmetryLabel::mm;
}

template <class Scalar>
struct EigenSet {
  int level = 0;
  BoundarySpec spec;
  std::vector<double> values;  ///< unrenormalized, ascending
  DenseMatrix<Scalar> fields;  ///< one column per eigenvalue, 8^{-m} sum |u|^2 = 1
  std::vector<SymmetryLabel> labels;
  std::vector<double> residuals;
  double tol = 0.0;
  double rho = 10.0;  ///< renormalization used for lambda_sc

  std::size_t size() const { return values.size(); }
  bool has_fields() const { return fields.cols() == static_cast<Eigen::Index>(values.size()); }
  double scale() const { return std::pow(rho, level); }
  double lambda_sc(std::size_t i) const { return scale() * values.at(i); }
  std::vector<double> renormalized() const {
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = scale() * values[i];
    return out;
  }
};

using RealEigenSet = EigenSet<double>;
using ComplexEigenSet = EigenSet<cplx>;

/// Groups of consecutive indices whose values agree within relative tolerance.
inline std::vector<std::pair<std::size_t, std::size_t>> degeneracy_clusters(
    const std::vector<double>& values, double rel_tol = kDegeneracyTol, double abs_floor = 1e-12) {
  std::vector<std::pair<std::size_t, std::size_t>> out;  // [begin, end)
  std::size_t i = 0;
  while (i < values.size()) {
    std::size_t j = i + 1;
    while (j < values.size() &&
           values[j] - values[j - 1] <=
               rel_tol * std::max({std::abs(values[j]), std::abs(values[j - 1])}) + abs_floor)
      ++j;
    out.emplace_back(i, j);
    i = j;
  }
  return out;
}

namespace detail {

template <class Scalar>
void fix_sign_gauge(Eigen::Ref<DenseVector<Scalar>> u) {
  const double big = u.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (std::abs(u[i]) > 1e-6 * big) {
      if constexpr (std::is_same_v<Scalar, double>) {
        if (u[i] < 0) u = -u;
      } else {
        u *= std::conj(u[i]) / std::abs(u[i]);
      }
      return;
    }
  }
}

template <class Scalar>
DenseVector<Scalar> permute(const DenseVector<Scalar>& u, const std::vector<std::size_t>& perm) {
  DenseVector<Scalar> out(u.size());
  for (std::size_t i = 0; i < perm.size(); ++i) out[static_cast<Eigen::Index>(i)] = u[static_cast<Eigen::Index>(perm[i])];
  return out;
}

}  // namespace detail

/// Keeps the first k eigenpairs.
template <class Scalar>
void truncate(EigenSet<Scalar>& set, std::size_t k) {
  if (k >= set.size()) return;
  set.values.resize(k);
  set.labels.resize(std::min(k, set.labels.size()));
  set.residuals.resize(std::min(k, set.residuals.size()));
  if (set.fields.cols() > static_cast<Eigen::Index>(k))
    set.fields.conservativeResize(Eigen::NoChange, static_cast<Eigen::Index>(k));
}

/// u o g as a field: (u o g)(x) = u(g x).
inline Field compose(const Field& u, const CarpetGraph& g, const Symmetry& s) {
  return detail::permute<double>(u, g.permutation(s));
}

struct EigensolveRequest {
  Eigen::Index count = 10;
  std::optional<double> upper_bound;  ///< unrenormalized
  double tol = 1e-9;
  bool want_fields = true;
  double rho = 10.0;
  int max_level = kMaxEigenLevel;
  EigsolveOptions solver{};
};

template <class Scalar>
EigenSet<Scalar> eigensolve(const OperatorMatrix<Scalar>& op, const EigensolveRequest& req) {
  if (op.level > req.max_level)
    throw ResourceError("eigensolves limited to level " + std::to_string(req.max_level));
  if (req.count < 0 || req.count > op.dim()) throw ConfigError("eigensolve: k out of range");
  auto opt = req.solver;
  opt.tol = req.tol;
  opt.want_vectors = req.want_fields;
  auto pairs = lowest_eigenpairs<Scalar>(op.matrix, req.count, req.upper_bound, opt);
  EigenSet<Scalar> set;
  set.level = op.level;
  set.spec = op.spec;
  set.tol = req.tol;
  set.rho = req.rho;
  set.values.assign(pairs.values.data(), pairs.values.data() + pairs.values.size());
  set.residuals = pairs.residuals;
  set.labels.assign(set.values.size(), SymmetryLabel::none);
  if (req.want_fields) {
    set.fields = std::move(pairs.vectors) * std::sqrt(static_cast<double>(op.dim()));
    for (Eigen::Index c = 0; c < set.fields.cols(); ++c)
      detail::fix_sign_gauge<Scalar>(set.fields.col(c));
  }
  return set;
}

/// Labels every eigenvalue by its D4 representation. 2-dimensional spaces are
/// also rotated so that their first basis field is even under x -> 1 - x.
/// A trailing cluster is left unlabeled when it may be cut off by the end of
/// the set (pass `complete = true` if the set holds a full spectrum).
inline void classify_symmetry(RealEigenSet& set, const CarpetGraph& g, bool complete = false,
                              double rel_tol = kDegeneracyTol) {
  if (!set.has_fields()) throw ConfigError("classify_symmetry: eigenset has no fields");
  if (!set.spec.d4_invariant())
    throw ConfigError("classify_symmetry: boundary spec '" + set.spec.str() + "' is not D4-invariant");
  const auto diag = g.permutation(Symmetry::reflect_main_diagonal());
  const auto horiz = g.permutation(Symmetry::reflect_horizontal());
  set.labels.assign(set.size(), SymmetryLabel::none);
  const auto clusters = degeneracy_clusters(set.values, rel_tol);
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    const auto [b, e] = clusters[c];
    // A multi-member cluster at the end of a partial set may be incomplete.
    if (!complete && c + 1 == clusters.size() && e - b > 1 && set.size() < g.size()) continue;
    const auto dim = e - b;
    if (dim == 1) {
      Field u = set.fields.col(static_cast<Eigen::Index>(b));
      const double nn = u.squaredNorm();
      const double sd = u.dot(detail::permute<double>(u, diag)) / nn;
      const double sh = u.dot(detail::permute<double>(u, horiz)) / nn;
      if (std::abs(std::abs(sd) - 1) > 1e-4 || std::abs(std::abs(sh) - 1) > 1e-4) continue;
      const bool constant = set.spec.conserves_mass() && std::abs(set.values[b]) < 1e-10 &&
                            (u.array() - u.mean()).abs().maxCoeff() < 1e-8 * u.cwiseAbs().maxCoeff();
      if (constant) set.labels[b] = SymmetryLabel::constant;
      else if (sd > 0) set.labels[b] = sh > 0 ? SymmetryLabel::pp : SymmetryLabel::pm;
      else set.labels[b] = sh > 0 ? SymmetryLabel::mp : SymmetryLabel::mm;
    } else if (dim == 2) {
      Eigen::MatrixXd basis = set.fields.middleCols(static_cast<Eigen::Index>(b), 2);
      Eigen::MatrixXd hb(basis.rows(), 2);
      for (int j = 0; j < 2; ++j) hb.col(j) = detail::permute<double>(basis.col(j), horiz);
      Eigen::Matrix2d m = basis.transpose() * hb / static_cast<double>(g.size());
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(0.5 * (m + m.transpose()));
      // Eigenvalues of the reflection restricted to the space are +-1.
      if (std::abs(es.eigenvalues()[1] - 1) < 1e-4 && std::abs(es.eigenvalues()[0] + 1) < 1e-4) {
        Eigen::Matrix2d v;
        v.col(0) = es.eigenvectors().col(1);
        v.col(1) = es.eigenvectors().col(0);
        Eigen::MatrixXd rotated = basis * v;
        for (int j = 0; j < 2; ++j) {
          Eigen::VectorXd col = rotated.col(j);
          detail::fix_sign_gauge<double>(col);
          set.fields.col(static_cast<Eigen::Index>(b) + j) = col;
        }
      }
      set.labels[b] = set.labels[b + 1] = SymmetryLabel::two;
    }
  }
}

/// N(t) = #{lambda_sc <= t} for each t in the grid. `values_sc` must be sorted.
inline std::vector<double> counting_function(const std::vector<double>& values_sc,
                                             const std::vector<double>& t_grid) {
  std::vector<double> n(t_grid.size());
  for (std::size_t i = 0; i < t_grid.size(); ++i)
    n[i] = static_cast<double>(std::upper_bound(values_sc.begin(), values_sc.end(), t_grid[i]) -
                               values_sc.begin());
  return n;
}

template <class Scalar>
std::vector<double> counting_function(const EigenSet<Scalar>& set, const std::vector<double>& t_grid) {
  return counting_function(set.renormalized(), t_grid);
}

/// N(t) / t^exponent.
inline std::vector<double> weyl_ratio(const std::vector<double>& values_sc,
                                      const std::vector<double>& t_grid, double exponent) {
  if (!(exponent > 0)) throw ConfigError("weyl_ratio: exponent must be positive");
  auto n = counting_function(values_sc, t_grid);
  for (std::size_t i = 0; i < n.size(); ++i) n[i] /= std::pow(t_grid[i], exponent);
  return n;
}

/// N_a(t) - N_b(t).
inline std::vector<double> counting_difference(const std::vector<double>& a_sc,
                                               const std::vector<double>& b_sc,
                                               const std::vector<double>& t_grid) {
  auto na = counting_function(a_sc, t_grid);
  const auto nb = counting_function(b_sc, t_grid);
  for (std::size_t i = 0; i < na.size(); ++i) na[i] -= nb[i];
  return na;
}

template <class S1, class S2>
std::vector<double> counting_difference(const EigenSet<S1>& a, const EigenSet<S2>& b,
                                        const std::vector<double>& t_grid) {
  if (a.level != b.level) throw ConfigError("counting_difference: level mismatch");
  if (a.rho != b.rho) throw ConfigError("counting_difference: sets renormalized differently");
  return counting_difference(a.renormalized(), b.renormalized(), t_grid);
}

/// (N_a - N_b)(t) / t^exponent.
inline std::vector<double> difference_ratio(const std::vector<double>& a_sc,
                                            const std::vector<double>& b_sc,
                                            const std::vector<double>& t_grid, double exponent) {
  auto d = counting_difference(a_sc, b_sc, t_grid);
  for (std::size_t i = 0; i < d.size(); ++i) d[i] /= std::pow(t_grid[i], exponent);
  return d;
}

/// Number of sign changes in a sequence, ignoring zeros.
inline std::size_t sign_changes(const std::vector<double>& v) {
  std::size_t changes = 0;
  int last = 0;
  for (double x : v) {
    const int s = (x > 0) - (x < 0);
    if (s == 0) continue;
    if (last != 0 && s != last) ++changes;
    last = s;
  }
  return changes;
}

/// Midpoints between consecutive distinct values of the merged spectra: the
/// grid on which a difference of two counting functions is piecewise exact.
inline std::vector<double> merged_midpoints(std::vector<double> a, const std::vector<double>& b) {
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  std::vector<double> out;
  for (std::size_t i = 0; i + 1 < a.size(); ++i)
    if (a[i + 1] - a[i] > 1e-9 * std::max(1.0, std::abs(a[i + 1])))
      out.push_back(0.5 * (a[i] + a[i + 1]));
  return out;
}

struct CoincidenceViolation {
  std::string rule;
  std::size_t index = 0;  ///< index in the source set
  double value = 0.0;
  double nearest = 0.0;   ///< closest value in the target set
};

struct CoincidenceReport {
  std::size_t checked = 0;
  std::size_t skipped_out_of_range = 0;
  std::vector<CoincidenceViolation> violations;
  bool ok() const { return violations.empty(); }
};

namespace detail {

inline double nearest_value(const std::vector<double>& sorted, double x) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  auto it = std::lower_bound(sorted.begin(), sorted.end(), x);
  double best = std::numeric_limits<double>::infinity();
  if (it != sorted.end()) best = *it;
  if (it != sorted.begin() && std::abs(*(it - 1) - x) < std::abs(best - x)) best = *(it - 1);
  return best;
}

}  // namespace detail

/// Checks the coincidences between the Neumann, torus, Klein bottle and
/// projective plane spectra (unrenormalized values, absolute tolerance):
/// every Neumann 1-dim value appears for the projective plane; Neumann values
/// of type 1++ or 1-+ appear for the torus and the Klein bottle; every 2-dim
/// torus or projective value appears for the Klein bottle. A value above the
/// top of a target list cannot be checked and is counted as skipped.
inline CoincidenceReport coincidence_check(const RealEigenSet& n, const RealEigenSet& t,
                                           const RealEigenSet& kb, const RealEigenSet& ps,
                                           double tol = 1e-6) {
  CoincidenceReport rep;
  auto check = [&](const std::string& rule, std::size_t idx, double v, const RealEigenSet& target) {
    if (target.values.empty() || v > target.values.back() + tol) {
      ++rep.skipped_out_of_range;
      return;
    }
    ++rep.checked;
    const double near = detail::nearest_value(target.values, v);
    if (std::abs(near - v) > tol) rep.violations.push_back({rule, idx, v, near});
  };
  for (std::size_t i = 0; i < n.size(); ++i) {
    const auto l = i < n.labels.size() ? n.labels[i] : SymmetryLabel::none;
    if (is_one_dimensional(l)) check("N 1-dim in PS", i, n.values[i], ps);
    if (l == SymmetryLabel::pp || l == SymmetryLabel::mp || l == SymmetryLabel::constant) {
      check("N 1++/1-+ in T", i, n.values[i], t);
      check("N 1++/1-+ in KB", i, n.values[i], kb);
    }
  }
  for (const RealEigenSet* src : {&t, &ps}) {
    for (auto [b, e] : degeneracy_clusters(src->values))
      if (b < src->labels.size() && src->labels[b] == SymmetryLabel::two)
        check(src == &t ? "T 2-dim in KB" : "PS 2-dim in KB", b, src->values[b], kb);
  }
  return rep;
}

struct Miniature {
  Field field;
  double residual = 0.0;  ///< ||A' u' - lambda u'|| / ||u'|| at level m+1
};

/// Builds a level-(m+1) field from eight copies of a level-m eigenfield:
/// mirrored copies (Neumann), sign-alternating mirrored copies (Dirichlet) or
/// translated copies (torus). The residual measures how far the result is
/// from an eigenfield with the same unrenormalized eigenvalue.
inline Miniature miniaturize(const Field& u, double lambda, const CarpetGraph& gm,
                             const CarpetGraph& gm1, const BoundarySpec& spec) {
  if (gm1.level() != gm.level() + 1) throw ConfigError("miniaturize: levels must be consecutive");
  if (u.size() != static_cast<Eigen::Index>(gm.size()))
    throw ConfigError("miniaturize: field dimension mismatch");
  const bool mirror = spec.kind == BoundaryKind::neumann || spec.kind == BoundaryKind::dirichlet;
  if (!mirror && spec.kind != BoundaryKind::torus)
    throw ConfigError("miniaturize: unsupported boundary spec '" + spec.str() + "'");
  const bool odd = spec.kind == BoundaryKind::dirichlet;
  const Field uh = compose(u, gm, Symmetry::reflect_horizontal());
  const Field uv = compose(u, gm, Symmetry::reflect_vertical());
  const auto block = static_cast<Eigen::Index>(gm.size());
  Field out(static_cast<Eigen::Index>(gm1.size()));
  for (Eigen::Index d = 0; d < 8; ++d) {
    const bool middle = d % 2 == 1;
    const Field* src = &u;
    if (mirror && (d == 1 || d == 5)) src = &uh;
    if (mirror && (d == 3 || d == 7)) src = &uv;
    const double sign = odd && middle ? -1.0 : 1.0;
    out.segment(d * block, block) = sign * *src;
  }
  Miniature m;
  m.field = out;
  const auto op = assemble_real(gm1, spec);
  m.residual = (op.matrix * out - lambda * out).norm() / out.norm();
  return m;
}

struct SupNormPoint {
  double lambda_sc;
  double sup;
  double running_max;
};

template <class Scalar>
std::vector<SupNormPoint> sup_norm_stats(const EigenSet<Scalar>& set) {
  if (!set.has_fields()) throw ConfigError("sup_norm_stats: eigenset has no fields");
  std::vector<SupNormPoint> out;
  double running = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const double s = set.fields.col(static_cast<Eigen::Index>(i)).cwiseAbs().maxCoeff();
    running = std::max(running, s);
    out.push_back({set.lambda_sc(i), s, running});
  }
  return out;
}

struct SpectralCluster {
  std::size_t first = 0;  ///< index of the first eigenvalue (with multiplicity)
  std::size_t last = 0;   ///< index of the last eigenvalue
  std::vector<double> distinct;
};

/// Runs of >= 2 distinct eigenvalues (after merging degenerate ones) whose
/// consecutive renormalized gaps are at most gap_tol.
inline std::vector<SpectralCluster> detect_clusters(const std::vector<double>& values_sc,
                                                    double gap_tol) {
  const auto groups = degeneracy_clusters(values_sc);
  std::vector<SpectralCluster> out;
  std::size_t g = 0;
  while (g < groups.size()) {
    std::size_t h = g + 1;
    while (h < groups.size() &&
           values_sc[groups[h].first] - values_sc[groups[h - 1].first] <= gap_tol)
      ++h;
    if (h - g >= 2) {
      SpectralCluster c;
      c.first = groups[g].first;
      c.last = groups[h - 1].second - 1;
      for (std::size_t k = g; k < h; ++k) c.distinct.push_back(values_sc[groups[k].first]);
      out.push_back(std::move(c));
    }
    g = h;
  }
  return out;
}

}  // namespace carpet
