#pragma once

// Lowest eigenpairs of sparse Hermitian positive semidefinite matrices.
//
// Small problems are solved densely. Larger ones use shift-invert block Arnoldi
// with full reorthogonalization, applied over consecutive spectrum slices.
// Each slice boundary is certified by an inertia count, so no eigenvalue
// below the returned ones can be skipped.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "carpet/error.hpp"
#include "carpet/linalg.hpp"

namespace carpet {

struct EigsolveOptions {
  double tol = 1e-9;  ///< bound on ||A x - lambda x||_2 for unit x
  int block = 8;
  std::uint64_t seed = 0x5eed'ca4e'7ull;
  Eigen::Index slice_size = 160;
  Eigen::Index dense_limit = kDenseLimit;
  /// Below dense_limit, partial requests for fewer than dense_fraction * n
  /// pairs still go to the iterative path once n exceeds this size.
  Eigen::Index dense_always = 1024;
  double dense_fraction = 0.25;
  bool want_vectors = true;
  bool force_iterative = false;
  double initial_shift = -1e-6;
};

template <class Scalar>
struct EigenPairs {
  Eigen::VectorXd values;       ///< ascending
  DenseMatrix<Scalar> vectors;  ///< unit 2-norm columns
  std::vector<double> residuals;
  std::string method;
};

namespace detail {

template <class Scalar>
Scalar random_scalar(std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  if constexpr (std::is_same_v<Scalar, double>) return nd(rng);
  else return Scalar(nd(rng), nd(rng));
}

template <class Scalar>
double max_abs_row_sum(const SparseMatrix<Scalar>& a) {
  Eigen::VectorXd rs = Eigen::VectorXd::Zero(a.rows());
  for (int c = 0; c < a.outerSize(); ++c)
    for (typename SparseMatrix<Scalar>::InnerIterator it(a, c); it; ++it)
      rs[it.row()] += std::abs(it.value());
  return rs.size() ? rs.maxCoeff() : 0.0;
}

template <class Scalar>
SparseMatrix<Scalar> shifted(const SparseMatrix<Scalar>& a, double sigma) {
  SparseMatrix<Scalar> id(a.rows(), a.cols());
  id.setIdentity();
  return a - Scalar(sigma) * id;
}

template <class Scalar>
struct RitzResult {
  std::vector<double> values;
  DenseMatrix<Scalar> vectors;
  std::vector<double> residuals;
};

/// Shift-invert block Arnoldi around sigma. Returns Ritz pairs of A whose true
/// residual is below opt.tol, ascending. Stops once the `nev` Ritz values
/// nearest sigma have converged or the basis reaches its cap.
template <class Scalar>
RitzResult<Scalar> shift_invert_arnoldi(const SparseMatrix<Scalar>& a, const SparseLDLT<Scalar>& fac,
                                        double sigma, Eigen::Index nev, double a_norm,
                                        const EigsolveOptions& opt, std::mt19937_64& rng) {
  using Mat = DenseMatrix<Scalar>;
  const Eigen::Index n = a.rows();
  const Eigen::Index b = std::min<Eigen::Index>(opt.block, n);
  Eigen::Index cap = std::max<Eigen::Index>(3 * nev, nev + 60);
  cap = std::min<Eigen::Index>(((cap + b - 1) / b) * b, n);
  const Eigen::Index check_every = 5;

  Mat q(n, cap);
  Mat h = Mat::Zero(cap + b, cap);

  // Orthonormalizes the columns of w against q[:, :k] and each other.
  // Rank-deficient columns are replaced by random directions (zero in r).
  auto orthonormalize = [&](Mat& w, Eigen::Index k, Mat* proj, Mat& r) {
    r = Mat::Zero(w.cols(), w.cols());
    for (int pass = 0; pass < 2 && k > 0; ++pass) {
      Mat c = q.leftCols(k).adjoint() * w;
      w.noalias() -= q.leftCols(k) * c;
      if (proj) *proj += c;
    }
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      const double original = w.col(j).norm();
      for (int pass = 0; pass < 2 && j > 0; ++pass) {
        DenseVector<Scalar> c = w.leftCols(j).adjoint() * w.col(j);
        w.col(j).noalias() -= w.leftCols(j) * c;
        r.col(j).head(j) += c;
      }
      double nrm = w.col(j).norm();
      if (nrm <= 1e-10 * std::max(original, 1e-300)) {
        for (Eigen::Index i = 0; i < n; ++i) w(i, j) = random_scalar<Scalar>(rng);
        for (int pass = 0; pass < 2; ++pass) {
          if (k > 0) w.col(j) -= q.leftCols(k) * (q.leftCols(k).adjoint() * w.col(j));
          if (j > 0) w.col(j) -= w.leftCols(j) * (w.leftCols(j).adjoint() * w.col(j));
        }
        r(j, j) = Scalar(0);
        w.col(j) /= w.col(j).norm();
      } else {
        r(j, j) = Scalar(nrm);
        w.col(j) /= nrm;
      }
    }
  };

  Mat w(n, b);
  for (Eigen::Index j = 0; j < b; ++j)
    for (Eigen::Index i = 0; i < n; ++i) w(i, j) = random_scalar<Scalar>(rng);
  Mat r;
  orthonormalize(w, 0, nullptr, r);
  q.leftCols(b) = w;

  Eigen::Index k = b;
  DenseEigen<Scalar> ritz;
  Mat r_last;
  while (true) {
    w = fac.solve(q.middleCols(k - b, b));
    Mat proj = Mat::Zero(k, b);
    const bool room = k + b <= cap && k + b <= n;
    orthonormalize(w, k, &proj, r);
    h.block(0, k - b, k, b) = proj;
    h.block(k, k - b, b, b) = r;
    r_last = r;

    const bool exhausted = !room;
    const bool check = exhausted || (k >= nev + 2 * b && (k / b) % check_every == 0);
    bool done = exhausted;
    if (check) {
      Mat hk = h.topLeftCorner(k, k);
      Mat herm = (hk + hk.adjoint()) * 0.5;
      ritz = dense_eigh<Scalar>(herm, true);
      std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](auto x, auto y) {
        return std::abs(ritz.values[x]) > std::abs(ritz.values[y]);
      });
      Eigen::Index good = 0;
      for (Eigen::Index t = 0; t < std::min(nev, k); ++t) {
        const auto i = order[static_cast<std::size_t>(t)];
        const double theta = ritz.values[i];
        const double est = (r_last * ritz.vectors.col(i).tail(b)).norm();
        const double bound = (a_norm + std::abs(sigma)) * est / std::max(std::abs(theta), 1e-300);
        if (bound <= 0.1 * opt.tol) ++good;
        else break;
      }
      if (good >= std::min(nev, k)) done = true;
    }
    if (done) break;
    q.middleCols(k, b) = w;
    k += b;
  }

  // Extract converged pairs with true residuals.
  RitzResult<Scalar> out;
  std::vector<Eigen::Index> sel;
  for (Eigen::Index i = 0; i < k; ++i) {
    const double theta = ritz.values[i];
    if (std::abs(theta) < 1e-300) continue;
    const double est = (r_last * ritz.vectors.col(i).tail(b)).norm();
    const double bound = (a_norm + std::abs(sigma)) * est / std::abs(theta);
    if (bound <= 10.0 * opt.tol) sel.push_back(i);
  }
  Mat ysel(k, static_cast<Eigen::Index>(sel.size()));
  for (std::size_t t = 0; t < sel.size(); ++t) ysel.col(static_cast<Eigen::Index>(t)) = ritz.vectors.col(sel[t]);
  Mat xs = q.leftCols(k) * ysel;
  Mat axs = a * xs;
  std::vector<std::pair<double, DenseVector<Scalar>>> keep;
  std::vector<double> keep_res;
  for (Eigen::Index t = 0; t < xs.cols(); ++t) {
    const double nrm = xs.col(t).norm();
    DenseVector<Scalar> x = xs.col(t) / nrm;
    DenseVector<Scalar> ax = axs.col(t) / nrm;
    const double lambda = std::real(x.dot(ax));
    const double res = (ax - Scalar(lambda) * x).norm();
    if (res > opt.tol) continue;
    keep.emplace_back(lambda, std::move(x));
    keep_res.push_back(res);
  }
  std::vector<std::size_t> idx(keep.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto x, auto y) { return keep[x].first < keep[y].first; });
  out.vectors.resize(n, static_cast<Eigen::Index>(keep.size()));
  for (std::size_t t = 0; t < idx.size(); ++t) {
    out.values.push_back(keep[idx[t]].first);
    out.vectors.col(static_cast<Eigen::Index>(t)) = keep[idx[t]].second;
    out.residuals.push_back(keep_res[idx[t]]);
  }
  return out;
}

inline bool separated(double x, double y) {
  const double scale = std::max({std::abs(x), std::abs(y), 1e-12});
  return (y - x) > 1e-6 * scale;
}

}  // namespace detail

/// The `count` smallest eigenpairs of a Hermitian PSD matrix, or (when
/// `upper_bound` is set) every eigenpair not exceeding it, whichever is fewer.
template <class Scalar>
EigenPairs<Scalar> lowest_eigenpairs(const SparseMatrix<Scalar>& a, Eigen::Index count,
                                     std::optional<double> upper_bound = std::nullopt,
                                     const EigsolveOptions& opt = {}) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n) throw ConfigError("eigensolve: matrix is not square");
  if (count < 0) throw ConfigError("eigensolve: negative eigenpair count");
  if (!(opt.tol > 0)) throw ConfigError("eigensolve: tolerance must be positive");
  count = std::min(count, n);
  EigenPairs<Scalar> out;
  if (count == 0) {
    out.vectors.resize(n, 0);
    return out;
  }

  const bool small_request =
      n > opt.dense_always && static_cast<double>(count) < opt.dense_fraction * static_cast<double>(n);
  if (n <= opt.dense_limit && !opt.force_iterative && !small_request) {
    auto d = dense_eigh<Scalar>(DenseMatrix<Scalar>(a), opt.want_vectors);
    Eigen::Index keep = count;
    if (upper_bound)
      keep = std::min<Eigen::Index>(
          keep, std::count_if(d.values.data(), d.values.data() + n,
                              [&](double v) { return v <= *upper_bound; }));
    out.values = d.values.head(keep);
    if (opt.want_vectors) {
      out.vectors = d.vectors.leftCols(keep);
      for (Eigen::Index i = 0; i < keep; ++i)
        out.residuals.push_back((a * out.vectors.col(i) - Scalar(out.values[i]) * out.vectors.col(i)).norm());
    }
    out.method = "dense";
    return out;
  }

  const double a_norm = detail::max_abs_row_sum(a);
  std::mt19937_64 rng(opt.seed);
  std::vector<double> vals;
  std::vector<DenseVector<Scalar>> vecs;
  std::vector<double> res;

  double lower = opt.initial_shift;
  {
    SparseLDLT<Scalar> f0(detail::shifted(a, lower));
    if (f0.negative_count() != 0)
      throw ConfigError("eigensolve: matrix has eigenvalues below the initial shift");
  }
  Eigen::Index below_lower = 0;
  double sigma = lower;
  double density = 0.0;  // eigenvalues per unit, from the previous slice
  int failures = 0;
  Eigen::Index boost = 0;

  auto satisfied = [&] {
    if (static_cast<Eigen::Index>(vals.size()) >= count) return true;
    if (upper_bound && lower > *upper_bound) return true;
    return below_lower >= n;
  };

  while (!satisfied()) {
    const Eigen::Index remaining = count - static_cast<Eigen::Index>(vals.size());
    Eigen::Index nev = std::min<Eigen::Index>(remaining + 8, opt.slice_size) + boost;
    nev = std::min(nev, n - below_lower);
    if (density > 0) sigma = lower + 0.6 * (0.5 * static_cast<double>(nev) / density);

    SparseLDLT<Scalar> fac(detail::shifted(a, sigma));
    for (int nudge = 0; fac.near_singular() && nudge < 5; ++nudge) {
      sigma += 1e-7 * std::max(std::abs(sigma), 1e-6);
      fac.factor(detail::shifted(a, sigma));
    }
    auto ritz = detail::shift_invert_arnoldi<Scalar>(a, fac, sigma, nev, a_norm, opt, rng);

    std::vector<std::size_t> cand;
    for (std::size_t i = 0; i < ritz.values.size(); ++i)
      if (ritz.values[i] > lower) cand.push_back(i);

    // Possible slice ends: gaps between consecutive candidates, plus the top
    // of the spectrum once every remaining eigenvalue has been seen.
    std::vector<std::pair<double, std::size_t>> ends;  // (boundary, accepted count)
    for (std::size_t t = 0; t + 1 < cand.size(); ++t) {
      const double x = ritz.values[cand[t]], y = ritz.values[cand[t + 1]];
      if (detail::separated(x, y)) ends.emplace_back(0.5 * (x + y), t + 1);
    }
    if (!cand.empty() && below_lower + static_cast<Eigen::Index>(cand.size()) == n)
      ends.emplace_back(ritz.values[cand.back()] + 1.0 + a_norm, cand.size());

    auto certified = [&](std::size_t e) -> std::optional<Eigen::Index> {
      const auto cnt = SparseLDLT<Scalar>(detail::shifted(a, ends[e].first)).negative_count();
      if (cnt - below_lower == static_cast<Eigen::Index>(ends[e].second)) return cnt;
      return std::nullopt;
    };
    std::optional<std::size_t> best;
    Eigen::Index best_count = 0;
    std::size_t lo = 0, hi = ends.size();
    while (lo < hi) {  // largest certified end; certification is monotone
      const std::size_t mid = (lo + hi) / 2;
      if (auto c = certified(mid)) {
        best = mid;
        best_count = *c;
        lo = mid + 1;
      } else {
        hi = mid;
      }
    }

    if (!best) {
      if (++failures > 4)
        throw ConvergenceError("eigensolve: could not certify a spectrum slice after " +
                                   std::to_string(failures) + " attempts",
                               lower);
      boost = boost ? 2 * boost : nev;
      if (density > 0) density *= 1.5;
      continue;
    }
    failures = 0;
    boost = 0;
    const std::size_t accepted = ends[*best].second;
    const double new_lower = ends[*best].first;
    for (std::size_t t = 0; t < accepted; ++t) {
      const auto i = cand[t];
      vals.push_back(ritz.values[i]);
      vecs.emplace_back(ritz.vectors.col(static_cast<Eigen::Index>(i)));
      res.push_back(ritz.residuals[i]);
    }
    density = static_cast<double>(accepted) / std::max(new_lower - lower, 1e-300);
    lower = new_lower;
    below_lower = best_count;
  }

  Eigen::Index keep = std::min<Eigen::Index>(count, static_cast<Eigen::Index>(vals.size()));
  if (upper_bound)
    keep = std::min<Eigen::Index>(
        keep, std::count_if(vals.begin(), vals.end(), [&](double v) { return v <= *upper_bound; }));
  out.values.resize(keep);
  if (opt.want_vectors) out.vectors.resize(n, keep);
  for (Eigen::Index i = 0; i < keep; ++i) {
    out.values[i] = vals[static_cast<std::size_t>(i)];
    if (opt.want_vectors) out.vectors.col(i) = vecs[static_cast<std::size_t>(i)];
    out.residuals.push_back(res[static_cast<std::size_t>(i)]);
  }
  out.method = "shift-invert block Arnoldi";
  return out;
}

}  // namespace carpet
