#include <gtest/gtest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include "carpet/kernels.hpp"
#include "carpet/spectra.hpp"
#include "oracles.hpp"

using namespace carpet;

namespace {

RealEigenSet full_set(int m, BoundarySpec spec) {
  const auto g = build_graph(m);
  EigensolveRequest r;
  r.count = static_cast<Eigen::Index>(g.size());
  return eigensolve(assemble_real(g, spec), r);
}

// h_t = 8^m exp(-t rho^m L) for the weighted-orthonormal normalization.
Eigen::MatrixXd heat_oracle(int m, bool dirichlet, double t) {
  const double scale = std::pow(10.0, m);
  const Eigen::MatrixXd l = oracle::laplacian(m, dirichlet);
  return std::pow(8.0, m) * (-t * scale * l).exp();
}

}  // namespace

TEST(Kernels, HeatKernelMatchesMatrixExponential) {
  for (bool dirichlet : {false, true}) {
    const auto set = full_set(2, dirichlet ? BoundarySpec::dirichlet() : BoundarySpec::neumann());
    const SpectralKernel k(set);
    ASSERT_TRUE(k.complete());
    for (double t : {1e-3, 1e-2, 0.1}) {
      const auto ref = heat_oracle(2, dirichlet, t);
      const double tol = 1e-9 * ref.cwiseAbs().maxCoeff();
      for (std::size_t y : {0ul, 13ul, 40ul}) {
        const auto f = heat_kernel_field(k, t, y);
        EXPECT_LT((f - ref.col(static_cast<Eigen::Index>(y))).cwiseAbs().maxCoeff(), tol);
        EXPECT_NEAR(heat_kernel(k, t, 5, y), ref(5, static_cast<Eigen::Index>(y)), tol);
      }
    }
  }
}

TEST(Kernels, SymmetricAndNonnegative) {
  const auto set = full_set(2, BoundarySpec::neumann());
  const SpectralKernel k(set);
  for (double t : {1e-3, 1e-2}) {
    Eigen::MatrixXd h(64, 64);
    for (std::size_t y = 0; y < 64; ++y) h.col(static_cast<Eigen::Index>(y)) = heat_kernel_field(k, t, y);
    EXPECT_LT((h - h.transpose()).cwiseAbs().maxCoeff(), 1e-10 * h.cwiseAbs().maxCoeff());
    EXPECT_GE(h.minCoeff(), -1e-10 * h.cwiseAbs().maxCoeff());
  }
}

TEST(Kernels, NeumannConservesMass) {
  const auto set = full_set(2, BoundarySpec::neumann());
  const SpectralKernel k(set);
  for (double t : {1e-4, 1e-2, 1.0})
    for (std::size_t y : {0ul, 31ul}) EXPECT_NEAR(k.measure() * heat_kernel_field(k, t, y).sum(), 1.0, 1e-10);
}

TEST(Kernels, Semigroup) {
  const auto set = full_set(2, BoundarySpec::dirichlet());
  const SpectralKernel k(set);
  Field f = Field::Zero(64);
  f[3] = 1.0;
  f[50] = -2.0;
  const double s = 2e-3, t = 5e-3;
  const Field two_step = heat_apply(k, t, heat_apply(k, s, f));
  EXPECT_LT((two_step - heat_apply(k, s + t, f)).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT((heat_apply(k, 0.0, f) - f).cwiseAbs().maxCoeff(), 1e-10);
  // Kernel form of the semigroup: h_{s+t}(x,y) = int h_s(x,z) h_t(z,y) dmu(z).
  const Field hs = heat_kernel_field(k, s, 7), ht = heat_kernel_field(k, t, 22);
  EXPECT_NEAR(k.measure() * hs.dot(ht), heat_kernel(k, s + t, 7, 22), 1e-8 * std::abs(heat_kernel(k, s + t, 7, 22)) + 1e-10);
}

TEST(Kernels, CompleteDirichletKernelIsDelta) {
  const auto set = full_set(2, BoundarySpec::neumann());
  for (std::size_t y : {0ul, 9ul, 63ul}) {
    const auto d = dirichlet_kernel(set, 64, y);
    Field ref = Field::Zero(64);
    ref[static_cast<Eigen::Index>(y)] = 64.0;
    EXPECT_LT((d - ref).cwiseAbs().maxCoeff(), 1e-8);
  }
  // D_1 for Neumann is the constant 1.
  EXPECT_LT((dirichlet_kernel(set, 1, 5).array() - 1.0).abs().maxCoeff(), 1e-10);
  EXPECT_THROW(dirichlet_kernel(set, 65, 0), ConfigError);
}

TEST(Kernels, TraceIsIntegralOfDiagonal) {
  const auto set = full_set(2, BoundarySpec::dirichlet());
  const SpectralKernel k(set);
  for (double t : {1e-3, 1e-2}) {
    double integral = 0.0;
    for (std::size_t x = 0; x < 64; ++x) integral += k.measure() * heat_kernel(k, t, x, x);
    EXPECT_NEAR(integral, heat_trace(set.renormalized(), {t})[0], 1e-9 * integral);
    EXPECT_NEAR(integral, heat_oracle(2, true, t).trace() / 64.0, 1e-9 * integral);
  }
}

TEST(Kernels, TruncationWarning) {
  const auto set = full_set(2, BoundarySpec::dirichlet());
  const SpectralKernel full(set);
  EXPECT_FALSE(full.truncation_warning(1e-9));
  const SpectralKernel cut(set, 10);
  EXPECT_FALSE(cut.complete());
  EXPECT_TRUE(cut.truncation_warning(1e-6));
  const double t0 = truncation_time(set.lambda_sc(9));
  EXPECT_FALSE(cut.truncation_warning(1.01 * t0));
  EXPECT_TRUE(cut.truncation_warning(0.99 * t0));
  EXPECT_THROW(SpectralKernel(set, 65), ConfigError);
  EXPECT_THROW(heat_kernel(full, 0.0, 0, 0), ConfigError);
}

TEST(Kernels, PowerLawTraceSlope) {
  // lambda_j = j^{1/alpha} gives Z(t) ~ Gamma(1+alpha) t^{-alpha}.
  for (double alpha : {0.5, 0.9}) {
    std::vector<double> values;
    for (int j = 1; j <= 200000; ++j) values.push_back(std::pow(j, 1.0 / alpha));
    const auto fit = heat_trace_slope(values, 10.0);
    EXPECT_NEAR(fit.fit.slope, -alpha, 0.02) << alpha;
    EXPECT_NEAR(fit.window.t_hi / fit.window.t_lo, 10.0, 1e-12);
  }
}

TEST(Kernels, DifferenceSlopeOfShiftedSpectra) {
  // Z_a - Z_b = Z_a (1 - e^{-ct}) ~ c t Z_a for small t.
  std::vector<double> a, b;
  for (int j = 1; j <= 100000; ++j) {
    a.push_back(std::pow(j, 2.0));
    b.push_back(std::pow(j, 2.0) + 3.0);
  }
  const auto fit = heat_trace_difference_slope(a, b, 10.0);
  EXPECT_NEAR(fit.fit.slope, 0.5, 0.02);
}

TEST(Kernels, ScaleByPower) {
  const auto v = scale_by_power({2.0, 4.0}, {3.0, 5.0}, 0.5);
  EXPECT_NEAR(v[0], 3.0 * std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(v[1], 10.0, 1e-15);
}

TEST(Kernels, LevelSetBands) {
  EXPECT_EQ(level_set_bands(Field::Constant(10, 3.0), 4), std::vector<int>(10, 0));
  Field f(8);
  f << 7, 6, 5, 4, 3, 2, 1, 0;
  EXPECT_EQ(level_set_bands(f, 4), (std::vector<int>{3, 3, 2, 2, 1, 1, 0, 0}));
  EXPECT_THROW(level_set_bands(f, 1), ConfigError);
}

TEST(Kernels, RankCorrelation) {
  const std::vector<double> a{1, 2, 3, 4, 5}, b{10, 20, 30, 40, 500}, c{5, 4, 3, 2, 1};
  EXPECT_NEAR(rank_correlation(a, b), 1.0, 1e-15);
  EXPECT_NEAR(rank_correlation(a, c), -1.0, 1e-15);
  // Oracle for ties: Pearson correlation of hand-computed average ranks.
  const std::vector<double> x{1, 2, 2, 3}, y{1, 3, 2, 4};
  const std::vector<double> rx{0, 1.5, 1.5, 3}, ry{0, 2, 1, 3};
  const Eigen::Map<const Eigen::VectorXd> u(rx.data(), 4), v(ry.data(), 4);
  const Eigen::VectorXd uc = u.array() - u.mean(), vc = v.array() - v.mean();
  EXPECT_NEAR(rank_correlation(x, y), uc.dot(vc) / (uc.norm() * vc.norm()), 1e-14);
  EXPECT_THROW(rank_correlation({1.0}, {2.0}), ConfigError);
}
