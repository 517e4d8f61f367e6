#pragma once

// Graph energies and Laplacians on the level-m carpet with boundary
// conditions encoded through virtual cells. Matrices store -Delta_m, so they
// are positive semidefinite and eigenvalues are reported as lambda >= 0.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <iomanip>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "carpet/error.hpp"
#include "carpet/geometry.hpp"

namespace carpet {

using cplx = std::complex<double>;
using Field = Eigen::VectorXd;
using CField = Eigen::VectorXcd;

enum class BoundaryKind { dirichlet, neumann, torus, klein, projective, strip, staircase };

struct BoundarySpec {
  BoundaryKind kind = BoundaryKind::neumann;
  double theta = 0.0;

  static BoundarySpec dirichlet() { return {BoundaryKind::dirichlet, 0.0}; }
  static BoundarySpec neumann() { return {BoundaryKind::neumann, 0.0}; }
  static BoundarySpec torus() { return {BoundaryKind::torus, 0.0}; }
  static BoundarySpec klein() { return {BoundaryKind::klein, 0.0}; }
  static BoundarySpec projective() { return {BoundaryKind::projective, 0.0}; }
  static BoundarySpec strip(double theta) { return checked({BoundaryKind::strip, theta}); }
  static BoundarySpec staircase(double theta) {
    return checked({BoundaryKind::staircase, theta});
  }

  bool twisted() const { return kind == BoundaryKind::strip || kind == BoundaryKind::staircase; }

  /// True when constants lie in the kernel.
  bool conserves_mass() const {
    return kind != BoundaryKind::dirichlet && !(twisted() && theta != 0.0);
  }

  /// True when the operator commutes with all of D4.
  bool d4_invariant() const {
    return kind == BoundaryKind::dirichlet || kind == BoundaryKind::neumann ||
           kind == BoundaryKind::torus || kind == BoundaryKind::projective;
  }

  std::string name() const {
    switch (kind) {
      case BoundaryKind::dirichlet: return "dirichlet";
      case BoundaryKind::neumann: return "neumann";
      case BoundaryKind::torus: return "torus";
      case BoundaryKind::klein: return "klein";
      case BoundaryKind::projective: return "projective";
      case BoundaryKind::strip: return "strip";
      case BoundaryKind::staircase: return "staircase";
    }
    return "?";
  }

  /// "dirichlet", "strip:0.25", ...
  std::string str() const {
    if (!twisted()) return name();
    std::ostringstream os;
    os << name() << ':' << std::setprecision(15) << theta;
    return os.str();
  }

  static BoundarySpec parse(const std::string& text) {
    const auto colon = text.find(':');
    const std::string head = text.substr(0, colon);
    std::optional<double> theta;
    if (colon != std::string::npos) {
      try {
        std::size_t used = 0;
        theta = std::stod(text.substr(colon + 1), &used);
        if (used != text.size() - colon - 1) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw ConfigError("bad theta in boundary spec '" + text + "'");
      }
    }
    BoundarySpec s;
    if (head == "dirichlet" || head == "D") s = dirichlet();
    else if (head == "neumann" || head == "N") s = neumann();
    else if (head == "torus" || head == "T") s = torus();
    else if (head == "klein" || head == "KB") s = klein();
    else if (head == "projective" || head == "PS") s = projective();
    else if (head == "strip" || head == "staircase") {
      if (!theta) throw ConfigError("boundary spec '" + head + "' requires a theta (e.g. " + head + ":0.25)");
      return head == "strip" ? strip(*theta) : staircase(*theta);
    } else {
      throw ConfigError("unknown boundary spec '" + text + "'");
    }
    if (theta) throw ConfigError("theta given for untwisted boundary spec '" + head + "'");
    return s;
  }

  bool operator==(const BoundarySpec&) const = default;

 private:
  static BoundarySpec checked(BoundarySpec s) {
    if (!(s.theta >= 0.0 && s.theta <= 1.0))
      throw ConfigError("theta must lie in [0, 1]");
    return s;
  }
};

template <class Scalar>
struct OperatorMatrix {
  using SparseType = Eigen::SparseMatrix<Scalar, Eigen::ColMajor, int>;
  SparseType matrix;
  int level = 0;
  BoundarySpec spec;

  Eigen::Index dim() const { return matrix.rows(); }
};

using RealOperator = OperatorMatrix<double>;
using ComplexOperator = OperatorMatrix<cplx>;

namespace detail {

inline Side opposite(Side s) { return static_cast<Side>((static_cast<int>(s) + 2) % 4); }

/// Partner cell of a virtual cell under the periodic identifications, or -1
/// when the side is not glued.
inline long glued_partner(const CarpetGraph& g, const VirtualCell& vc, BoundaryKind kind) {
  const std::size_t last = g.side_cells() - 1;
  const bool horizontal_pair = vc.side == Side::left || vc.side == Side::right;
  bool flip = false;
  switch (kind) {
    case BoundaryKind::torus: break;
    case BoundaryKind::klein: flip = horizontal_pair; break;
    case BoundaryKind::projective: flip = true; break;
    case BoundaryKind::strip:
      if (!horizontal_pair) return -1;
      break;
    default: return -1;
  }
  const std::size_t p = flip ? last - vc.position : vc.position;
  return static_cast<long>(g.boundary_cell(opposite(vc.side), p));
}

inline cplx phase(double theta, double sign) {
  return std::polar(1.0, sign * 2.0 * std::numbers::pi * theta);
}

}  // namespace detail

/// Matrix of -Delta_m (unrenormalized) for the given boundary condition.
template <class Scalar>
OperatorMatrix<Scalar> assemble(const CarpetGraph& g, const BoundarySpec& spec) {
  constexpr bool is_complex = !std::is_same_v<Scalar, double>;
  if constexpr (!is_complex) {
    if (spec.twisted() && spec.theta != 0.0 && spec.theta != 1.0)
      throw ConfigError("twisted boundary spec '" + spec.str() + "' needs a complex operator");
  }
  const auto n = static_cast<Eigen::Index>(g.size());
  std::vector<Eigen::Triplet<Scalar>> trip;
  trip.reserve(5 * g.size());
  std::vector<Scalar> diag(g.size(), Scalar(0));

  auto twist = [&](double sign) -> Scalar {
    if constexpr (is_complex) return detail::phase(spec.theta, sign);
    else return Scalar(1);
  };

  const std::size_t block0 = 0;
  const std::size_t block7 = 7;
  for (auto [a, b] : g.edges()) {
    Scalar wab(1), wba(1);
    if (spec.kind == BoundaryKind::staircase) {
      const auto da = g.top_digit(a);
      const auto db = g.top_digit(b);
      // Row of the 0-side cell sees its 7-side neighbor with e^{-2 pi i theta}.
      if (da == block0 && db == block7) {
        wab = twist(-1.0);
        wba = twist(+1.0);
      } else if (da == block7 && db == block0) {
        wab = twist(+1.0);
        wba = twist(-1.0);
      }
    }
    trip.emplace_back(static_cast<int>(a), static_cast<int>(b), -wab);
    trip.emplace_back(static_cast<int>(b), static_cast<int>(a), -wba);
    diag[a] += Scalar(1);
    diag[b] += Scalar(1);
  }

  for (const auto& vc : g.virtual_cells()) {
    switch (spec.kind) {
      case BoundaryKind::dirichlet: diag[vc.owner] += Scalar(2); break;
      case BoundaryKind::neumann:
      case BoundaryKind::staircase: break;
      case BoundaryKind::torus:
      case BoundaryKind::klein:
      case BoundaryKind::projective:
      case BoundaryKind::strip: {
        const long partner = detail::glued_partner(g, vc, spec.kind);
        if (partner < 0) break;
        Scalar w(1);
        if (spec.kind == BoundaryKind::strip)
          w = twist(vc.side == Side::left ? -1.0 : +1.0);
        diag[vc.owner] += Scalar(1);
        trip.emplace_back(static_cast<int>(vc.owner), static_cast<int>(partner), -w);
        break;
      }
    }
  }
  for (std::size_t i = 0; i < g.size(); ++i)
    trip.emplace_back(static_cast<int>(i), static_cast<int>(i), diag[i]);

  OperatorMatrix<Scalar> op;
  op.level = g.level();
  op.spec = spec;
  op.matrix.resize(n, n);
  op.matrix.setFromTriplets(trip.begin(), trip.end());
  op.matrix.makeCompressed();
  return op;
}

inline RealOperator assemble_real(const CarpetGraph& g, const BoundarySpec& spec) {
  return assemble<double>(g, spec);
}
inline ComplexOperator assemble_complex(const CarpetGraph& g, const BoundarySpec& spec) {
  return assemble<cplx>(g, spec);
}

/// Renormalization constants. Only r^{-1} is stored; everything else derives
/// from it.
struct RenormConstants {
  double r_inv = 1.25;

  static RenormConstants from_rho(double rho) { return {rho / 8.0}; }

  double r() const { return 1.0 / r_inv; }
  double rho() const { return 8.0 * r_inv; }
  double alpha() const { return std::log(8.0) / std::log(rho()); }
  double beta() const { return std::log(3.0) / std::log(rho()); }
};

/// Renormalized bilinear energy r^{-m} sum_edges (u_a - u_b)(v_a - v_b).
inline double energy(const Field& u, const Field& v, const CarpetGraph& g, double r_inv) {
  const auto n = static_cast<Eigen::Index>(g.size());
  if (u.size() != n || v.size() != n) throw ConfigError("energy: field dimension mismatch");
  double e = 0.0;
  for (auto [a, b] : g.edges()) e += (u[a] - u[b]) * (v[a] - v[b]);
  return std::pow(r_inv, g.level()) * e;
}

/// -rho^m * A * f, the level-m approximation of Delta f.
template <class Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> renormalized_laplacian_apply(
    const OperatorMatrix<Scalar>& op, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& f,
    double rho) {
  if (f.size() != op.dim()) throw ConfigError("laplacian apply: field dimension mismatch");
  return -std::pow(rho, op.level) * (op.matrix * f);
}

/// Ratio of matched unrenormalized eigenvalues on consecutive levels.
inline double estimate_rho(double eig_m, double eig_m_plus_1) {
  if (eig_m_plus_1 == 0.0) throw ConfigError("estimate_rho: zero denominator");
  return eig_m / eig_m_plus_1;
}

/// Median of estimate_rho over the first `branches` matched nonzero branches.
inline double calibrate_rho(const std::vector<double>& level_m, const std::vector<double>& level_m1,
                            std::size_t branches = 10, double zero_tol = 1e-12) {
  std::vector<double> ratios;
  std::size_t i = 0, j = 0;
  while (i < level_m.size() && j < level_m1.size() && ratios.size() < branches) {
    if (std::abs(level_m[i]) <= zero_tol || std::abs(level_m1[j]) <= zero_tol) {
      ++i;
      ++j;
      continue;
    }
    ratios.push_back(estimate_rho(level_m[i++], level_m1[j++]));
  }
  if (ratios.empty()) throw ConfigError("calibrate_rho: no nonzero matched branches");
  std::sort(ratios.begin(), ratios.end());
  const auto k = ratios.size();
  return k % 2 ? ratios[k / 2] : 0.5 * (ratios[k / 2 - 1] + ratios[k / 2]);
}

/// Matrix Market coordinate export with a provenance header.
template <class Scalar>
void write_matrix_market(std::ostream& os, const OperatorMatrix<Scalar>& op) {
  constexpr bool is_complex = !std::is_same_v<Scalar, double>;
  os << "%%MatrixMarket matrix coordinate " << (is_complex ? "complex" : "real") << " general\n";
  os << "% level " << op.level << "\n";
  os << "% boundary " << op.spec.name() << "\n";
  os << "% theta " << std::setprecision(15) << op.spec.theta << "\n";
  os << "% scalar " << (is_complex ? "complex128" : "float64") << "\n";
  os << op.matrix.rows() << ' ' << op.matrix.cols() << ' ' << op.matrix.nonZeros() << '\n';
  os << std::setprecision(17);
  // Row-major order for stable, diffable output.
  Eigen::SparseMatrix<Scalar, Eigen::RowMajor, int> rm = op.matrix;
  for (int r = 0; r < rm.outerSize(); ++r) {
    for (typename decltype(rm)::InnerIterator it(rm, r); it; ++it) {
      os << it.row() + 1 << ' ' << it.col() + 1 << ' ';
      if constexpr (is_complex) os << it.value().real() << ' ' << it.value().imag() << '\n';
      else os << it.value() << '\n';
    }
  }
}

}  // namespace carpet
