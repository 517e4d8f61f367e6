#pragma once

// Spectral kernels: heat kernel and trace, heat-equation solutions, Dirichlet
// kernels, and level-set banding of fields. All times are on the renormalized
// scale, so eigenvalues enter as lambda_sc = rho^m lambda.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "carpet/error.hpp"
#include "carpet/fit.hpp"
#include "carpet/spectra.hpp"

namespace carpet {

/// exp(-lambda_N t) above this means the truncated tail is not negligible.
inline constexpr double kTruncationThreshold = 1e-8;

struct SpectralKernel {
  const RealEigenSet* set = nullptr;
  std::size_t truncation = 0;  ///< number of eigenpairs used

  SpectralKernel(const RealEigenSet& s, std::optional<std::size_t> n = std::nullopt)
      : set(&s), truncation(n.value_or(s.size())) {
    if (truncation > s.size()) throw ConfigError("kernel truncation exceeds available eigenpairs");
    if (truncation == 0) throw ConfigError("kernel needs at least one eigenpair");
  }

  /// True when the expansion is the complete spectrum of the level-m operator.
  bool complete() const {
    return set->has_fields() && truncation == static_cast<std::size_t>(set->fields.rows());
  }

  bool truncation_warning(double t) const {
    if (complete()) return false;
    return std::exp(-set->lambda_sc(truncation - 1) * t) > kTruncationThreshold;
  }

  double measure() const { return std::pow(8.0, -set->level); }
};

/// h_t(x, y) = sum_j exp(-lambda_j t) phi_j(x) phi_j(y).
inline double heat_kernel(const SpectralKernel& k, double t, std::size_t x, std::size_t y) {
  if (!(t > 0)) throw ConfigError("heat_kernel: t must be positive");
  if (!k.set->has_fields()) throw ConfigError("heat_kernel: eigenset has no fields");
  double s = 0.0;
  for (std::size_t j = 0; j < k.truncation; ++j) {
    const auto c = static_cast<Eigen::Index>(j);
    s += std::exp(-k.set->lambda_sc(j) * t) * k.set->fields(static_cast<Eigen::Index>(x), c) *
         k.set->fields(static_cast<Eigen::Index>(y), c);
  }
  return s;
}

/// h_t(., y) as a field.
inline Field heat_kernel_field(const SpectralKernel& k, double t, std::size_t y) {
  if (!(t > 0)) throw ConfigError("heat_kernel: t must be positive");
  if (!k.set->has_fields()) throw ConfigError("heat_kernel: eigenset has no fields");
  const auto n = static_cast<Eigen::Index>(k.truncation);
  Eigen::VectorXd w(n);
  for (Eigen::Index j = 0; j < n; ++j)
    w[j] = std::exp(-k.set->lambda_sc(static_cast<std::size_t>(j)) * t) *
           k.set->fields(static_cast<Eigen::Index>(y), j);
  return k.set->fields.leftCols(n) * w;
}

/// u(., t) = sum_j exp(-lambda_j t) <f, phi_j> phi_j.
inline Field heat_apply(const SpectralKernel& k, double t, const Field& f) {
  if (t < 0) throw ConfigError("heat_apply: t must be nonnegative");
  if (!k.set->has_fields()) throw ConfigError("heat_apply: eigenset has no fields");
  if (f.size() != k.set->fields.rows()) throw ConfigError("heat_apply: field dimension mismatch");
  const auto n = static_cast<Eigen::Index>(k.truncation);
  Eigen::VectorXd c = k.measure() * (k.set->fields.leftCols(n).transpose() * f);
  for (Eigen::Index j = 0; j < n; ++j) c[j] *= std::exp(-k.set->lambda_sc(static_cast<std::size_t>(j)) * t);
  return k.set->fields.leftCols(n) * c;
}

/// Z(t) = sum_j exp(-lambda_j t).
inline std::vector<double> heat_trace(const std::vector<double>& values_sc,
                                      const std::vector<double>& t_grid) {
  std::vector<double> z(t_grid.size(), 0.0);
  for (std::size_t i = 0; i < t_grid.size(); ++i)
    for (double l : values_sc) z[i] += std::exp(-l * t_grid[i]);
  return z;
}

/// t^p * values, elementwise.
inline std::vector<double> scale_by_power(const std::vector<double>& t_grid,
                                          std::vector<double> values, double p) {
  for (std::size_t i = 0; i < values.size(); ++i) values[i] *= std::pow(t_grid[i], p);
  return values;
}

struct FitWindow {
  double t_lo = 0.0;
  double t_hi = 0.0;
};

/// Smallest t for which the omitted tail beyond lambda_max is negligible.
inline double truncation_time(double lambda_max_sc) {
  if (!(lambda_max_sc > 0)) throw ConfigError("truncation_time: need a positive eigenvalue");
  return -std::log(kTruncationThreshold) / lambda_max_sc;
}

/// Small-t window for heat-trace slopes: one multiplicative period
/// [t0, rho t0] starting where the truncation flag clears.
inline FitWindow heat_fit_window(double lambda_max_sc, double rho) {
  const double t0 = truncation_time(lambda_max_sc);
  return {t0, rho * t0};
}

struct SlopeFit {
  FitWindow window;
  LinearFit fit;
};

/// Log-log slope of a positive curve f(t) over a window, sampled on `points`
/// log-spaced times.
template <class F>
SlopeFit loglog_slope(F&& f, FitWindow w, std::size_t points = 64) {
  const auto t = log_grid(w.t_lo, w.t_hi, points);
  std::vector<double> y(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) y[i] = f(t[i]);
  return {w, fit_loglog(t, y)};
}

/// Slope of log Z(t) over the automatic small-t window.
inline SlopeFit heat_trace_slope(const std::vector<double>& values_sc, double rho,
                                 std::size_t points = 64) {
  if (values_sc.empty()) throw ConfigError("heat_trace_slope: empty spectrum");
  const auto w = heat_fit_window(values_sc.back(), rho);
  return loglog_slope([&](double t) { return heat_trace(values_sc, {t})[0]; }, w, points);
}

/// Slope of log (Z_a - Z_b)(t); the window is set by the shorter spectrum.
inline SlopeFit heat_trace_difference_slope(const std::vector<double>& a_sc,
                                            const std::vector<double>& b_sc, double rho,
                                            std::size_t points = 64) {
  if (a_sc.empty() || b_sc.empty()) throw ConfigError("heat_trace_difference_slope: empty spectrum");
  const auto w = heat_fit_window(std::min(a_sc.back(), b_sc.back()), rho);
  return loglog_slope(
      [&](double t) { return heat_trace(a_sc, {t})[0] - heat_trace(b_sc, {t})[0]; }, w, points);
}

/// D_N(., y) = sum_{j < N} phi_j(.) phi_j(y).
inline Field dirichlet_kernel(const RealEigenSet& set, std::size_t n, std::size_t y) {
  if (!set.has_fields()) throw ConfigError("dirichlet_kernel: eigenset has no fields");
  if (n > set.size()) throw ConfigError("dirichlet_kernel: N exceeds available eigenpairs");
  if (static_cast<Eigen::Index>(y) >= set.fields.rows()) throw ConfigError("dirichlet_kernel: unknown cell");
  const auto cols = static_cast<Eigen::Index>(n);
  return set.fields.leftCols(cols) * set.fields.row(static_cast<Eigen::Index>(y)).head(cols).transpose();
}

/// Quantile bands: cell -> band index in [0, n_bands). A constant field maps
/// to band 0 everywhere.
inline std::vector<int> level_set_bands(const Field& f, int n_bands) {
  if (n_bands < 2) throw ConfigError("level_set_bands: need at least two bands");
  std::vector<int> out(static_cast<std::size_t>(f.size()), 0);
  if (f.size() == 0) return out;
  if (f.maxCoeff() - f.minCoeff() <= 1e-14 * std::max(1.0, f.cwiseAbs().maxCoeff())) return out;
  std::vector<double> sorted(f.data(), f.data() + f.size());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> cuts;
  for (int b = 1; b < n_bands; ++b) {
    const auto idx = static_cast<std::size_t>(
        std::floor(static_cast<double>(b) * static_cast<double>(sorted.size()) / n_bands));
    cuts.push_back(sorted[std::min(idx, sorted.size() - 1)]);
  }
  for (Eigen::Index i = 0; i < f.size(); ++i)
    out[static_cast<std::size_t>(i)] =
        static_cast<int>(std::upper_bound(cuts.begin(), cuts.end(), f[i]) - cuts.begin());
  for (auto& b : out) b = std::min(b, n_bands - 1);
  return out;
}

/// Spearman rank correlation of two equally sized samples (average ranks for ties).
inline double rank_correlation(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw ConfigError("rank_correlation: bad sizes");
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto x, auto y) { return v[x] < v[y]; });
    std::vector<double> r(v.size());
    std::size_t i = 0;
    while (i < idx.size()) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j);
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const Eigen::Map<const Eigen::VectorXd> x(ra.data(), static_cast<Eigen::Index>(ra.size()));
  const Eigen::Map<const Eigen::VectorXd> y(rb.data(), static_cast<Eigen::Index>(rb.size()));
  const Eigen::VectorXd xc = x.array() - x.mean();
  const Eigen::VectorXd yc = y.array() - y.mean();
  const double d = xc.norm() * yc.norm();
  return d > 0 ? xc.dot(yc) / d : 1.0;
}

}  // namespace carpet
