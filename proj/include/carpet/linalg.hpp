#pragma once

// Dense Hermitian eigensolver, sparse LDL^T factorizations with inertia, and
// a preconditioned conjugate-gradient solve.

#include <complex>
#include <cstddef>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "carpet/error.hpp"

namespace carpet {

/// Largest dimension handled by dense decompositions.
inline constexpr Eigen::Index kDenseLimit = 4096;

template <class Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using DenseVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using SparseMatrix = Eigen::SparseMatrix<Scalar, Eigen::ColMajor, int>;

template <class Scalar>
struct DenseEigen {
  Eigen::VectorXd values;       ///< ascending
  DenseMatrix<Scalar> vectors;  ///< orthonormal columns (empty when not requested)
};

/// All eigenpairs of a Hermitian matrix. Only the lower triangle is read.
template <class Scalar>
DenseEigen<Scalar> dense_eigh(const DenseMatrix<Scalar>& a, bool want_vectors = true) {
  if (a.rows() != a.cols()) throw ConfigError("dense_eigh: matrix is not square");
  DenseEigen<Scalar> out;
  if (a.rows() == 0) return out;
  Eigen::SelfAdjointEigenSolver<DenseMatrix<Scalar>> es(
      a, want_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw ConvergenceError("dense eigensolver did not converge", 0.0);
  out.values = es.eigenvalues();
  if (want_vectors) out.vectors = es.eigenvectors();
  return out;
}

template <class Scalar>
DenseEigen<Scalar> dense_eigh(const SparseMatrix<Scalar>& a, bool want_vectors = true) {
  if (a.rows() > kDenseLimit)
    throw ResourceError("dense eigensolver limited to dimension " + std::to_string(kDenseLimit));
  return dense_eigh<Scalar>(DenseMatrix<Scalar>(a), want_vectors);
}

/// Sparse LDL^T factorization of a Hermitian matrix (AMD ordering). Also
/// valid for indefinite shifts as long as no pivot vanishes; the inertia
/// then counts eigenvalues below the shift.
template <class Scalar>
class SparseLDLT {
 public:
  SparseLDLT() = default;
  explicit SparseLDLT(const SparseMatrix<Scalar>& a) { factor(a); }

  void factor(const SparseMatrix<Scalar>& a) {
    solver_.compute(a);
    if (solver_.info() != Eigen::Success)
      throw ConvergenceError("sparse LDL^T factorization failed (singular pivot)", 0.0);
    const auto& d = solver_.vectorD();
    tiny_pivot_ = false;
    const double scale = d.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < d.size(); ++i)
      if (std::abs(d[i]) <= 1e-14 * scale) tiny_pivot_ = true;
  }

  /// Number of negative pivots.
  Eigen::Index negative_count() const {
    const auto& d = solver_.vectorD();
    Eigen::Index neg = 0;
    for (Eigen::Index i = 0; i < d.size(); ++i)
      if (std::real(d[i]) < 0) ++neg;
    return neg;
  }

  bool near_singular() const { return tiny_pivot_; }

  template <class Rhs>
  auto solve(const Rhs& b) const {
    return solver_.solve(b);
  }

 private:
  Eigen::SimplicialLDLT<SparseMatrix<Scalar>, Eigen::Lower, Eigen::AMDOrdering<int>> solver_;
  bool tiny_pivot_ = false;
};

/// Number of eigenvalues strictly below `shift`, via Sylvester's law of
/// inertia on A - shift*I.
template <class Scalar>
Eigen::Index eigenvalues_below(const SparseMatrix<Scalar>& a, double shift) {
  SparseMatrix<Scalar> id(a.rows(), a.cols());
  id.setIdentity();
  SparseMatrix<Scalar> s = a - Scalar(shift) * id;
  return SparseLDLT<Scalar>(s).negative_count();
}

struct PcgResult {
  Eigen::VectorXd x;
  int iterations = 0;
  double estimated_residual = 0.0;  ///< recursive residual at exit
  double relative_residual = 0.0;   ///< recomputed ||b - A x|| / ||b||
};

/// Conjugate gradients with an incomplete-Cholesky preconditioner. Throws
/// ConvergenceError when the recursive residual does not reach `tol`.
inline PcgResult pcg_solve(const SparseMatrix<double>& a, const Eigen::VectorXd& b,
                           double tol = 1e-12, int max_iterations = 20000) {
  Eigen::ConjugateGradient<SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                           Eigen::IncompleteCholesky<double, Eigen::Lower, Eigen::AMDOrdering<int>>>
      cg;
  cg.setTolerance(tol);
  cg.setMaxIterations(max_iterations);
  cg.compute(a);
  if (cg.info() != Eigen::Success) throw ConvergenceError("PCG preconditioner setup failed", 0.0);
  PcgResult r;
  r.x = cg.solve(b);
  r.iterations = static_cast<int>(cg.iterations());
  r.estimated_residual = cg.error();
  const double bn = b.norm();
  r.relative_residual = bn > 0 ? (b - a * r.x).norm() / bn : 0.0;
  if (cg.info() != Eigen::Success)
    throw ConvergenceError("PCG did not reach relative residual " + std::to_string(tol) +
                               " within " + std::to_string(max_iterations) + " iterations",
                           r.estimated_residual);
  return r;
}

}  // namespace carpet
