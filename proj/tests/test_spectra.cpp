#include <gtest/gtest.h>

#include "carpet/spectra.hpp"
#include "oracles.hpp"

using namespace carpet;

namespace {

RealEigenSet solve(const CarpetGraph& g, BoundarySpec spec, Eigen::Index k, bool iterative = false) {
  EigensolveRequest r;
  r.count = k;
  r.solver.force_iterative = iterative;
  return eigensolve(assemble_real(g, spec), r);
}

double gram_defect(const Eigen::MatrixXd& f) {
  const double w = 1.0 / static_cast<double>(f.rows());
  const Eigen::MatrixXd gram = w * f.transpose() * f;
  return (gram - Eigen::MatrixXd::Identity(f.cols(), f.cols())).cwiseAbs().maxCoeff();
}

}  // namespace

TEST(Spectra, IterativeMatchesDenseOracle) {
  for (int m = 1; m <= 3; ++m) {
    const auto g = build_graph(m);
    const auto n = static_cast<Eigen::Index>(g.size());
    const Eigen::Index k = std::min<Eigen::Index>(n, 60);
    struct Case {
      BoundarySpec spec;
      Eigen::MatrixXd ref;
    };
    std::vector<Case> cases = {
        {BoundarySpec::dirichlet(), oracle::laplacian(m, true)},
        {BoundarySpec::neumann(), oracle::laplacian(m, false)},
        {BoundarySpec::torus(), Eigen::MatrixXd(oracle::glued_laplacian(m, false, true, false).real())},
        {BoundarySpec::klein(), Eigen::MatrixXd(oracle::glued_laplacian(m, true, true, false).real())},
        {BoundarySpec::projective(), Eigen::MatrixXd(oracle::glued_laplacian(m, true, true, true).real())},
    };
    for (const auto& c : cases) {
      const auto ref = oracle::eigenvalues(c.ref);
      const auto set = solve(g, c.spec, k, /*iterative=*/true);
      ASSERT_EQ(static_cast<Eigen::Index>(set.size()), k) << c.spec.str();
      for (Eigen::Index i = 0; i < k; ++i)
        EXPECT_NEAR(set.values[static_cast<std::size_t>(i)], ref[i], 1e-9) << c.spec.str() << " #" << i;
      for (double r : set.residuals) EXPECT_LE(r, 1e-9);
    }
  }
}

TEST(Spectra, ComplexIterativeMatchesDenseOracle) {
  const int m = 3;
  const auto g = build_graph(m);
  for (double theta : {0.21, 0.5}) {
    EigensolveRequest r;
    r.count = 40;
    r.solver.force_iterative = true;
    const auto set = eigensolve(assemble_complex(g, BoundarySpec::staircase(theta)), r);
    const auto ref = oracle::eigenvalues(oracle::staircase_laplacian(m, theta));
    for (std::size_t i = 0; i < set.size(); ++i)
      EXPECT_NEAR(set.values[i], ref[static_cast<Eigen::Index>(i)], 1e-9);
  }
}

TEST(Spectra, UpperBoundSelectsPrefix) {
  const auto g = build_graph(3);
  const auto ref = oracle::eigenvalues(oracle::laplacian(3, true));
  const double cut = 0.5 * (ref[29] + ref[30]);
  for (bool iterative : {false, true}) {
    EigensolveRequest r;
    r.count = 200;
    r.upper_bound = cut;
    r.solver.force_iterative = iterative;
    const auto set = eigensolve(assemble_real(g, BoundarySpec::dirichlet()), r);
    EXPECT_EQ(set.size(), 30u);
  }
}

TEST(Spectra, FieldsOrthonormalUnderMeasure) {
  for (bool iterative : {false, true}) {
    const auto set = solve(build_graph(3), BoundarySpec::neumann(), 50, iterative);
    EXPECT_LT(gram_defect(set.fields), 1e-8);
  }
}

TEST(Spectra, NeumannGroundStateConstant) {
  const auto set = solve(build_graph(3), BoundarySpec::neumann(), 4);
  EXPECT_NEAR(set.values[0], 0.0, 1e-12);
  EXPECT_LT((set.fields.col(0).array() - 1.0).abs().maxCoeff(), 1e-9);
  const auto sup = sup_norm_stats(set);
  EXPECT_NEAR(sup[0].sup, 1.0, 1e-9);
}

TEST(Spectra, TorusLevelFourSecondEigenvalue) {
  const auto set = solve(build_graph(4), BoundarySpec::torus(), 6);
  EXPECT_NEAR(set.values[1], 0.00320568102788810, 1e-6 * 0.00320568102788810);
}

TEST(Spectra, SymmetryLabels) {
  for (int m = 3; m <= 4; ++m) {
    const auto g = build_graph(m);
    auto d = solve(g, BoundarySpec::dirichlet(), 48);
    classify_symmetry(d, g);
    EXPECT_EQ(d.labels[0], SymmetryLabel::pp);
    EXPECT_EQ(d.labels[1], SymmetryLabel::two);
    EXPECT_EQ(d.labels[2], SymmetryLabel::two);
    auto nm = solve(g, BoundarySpec::neumann(), 12);
    classify_symmetry(nm, g);
    EXPECT_EQ(nm.labels[0], SymmetryLabel::constant);
    EXPECT_EQ(nm.labels[3], SymmetryLabel::pm);

    // Consecutive quartets: one 2-dim pair and two 1-dim values.
    for (std::size_t q = 0; q < 10; ++q) {
      int twos = 0, ones = 0;
      for (std::size_t i = 4 * q; i < 4 * q + 4; ++i) {
        twos += d.labels[i] == SymmetryLabel::two;
        ones += is_one_dimensional(d.labels[i]);
      }
      EXPECT_EQ(twos, 2) << "quartet " << q << " level " << m;
      EXPECT_EQ(ones, 2) << "quartet " << q << " level " << m;
    }
  }
}

TEST(Spectra, TwoDimensionalSpacesRotationInvariant) {
  const auto g = build_graph(3);
  auto d = solve(g, BoundarySpec::dirichlet(), 20);
  classify_symmetry(d, g);
  for (auto [b, e] : degeneracy_clusters(d.values)) {
    if (d.labels[b] != SymmetryLabel::two) continue;
    ASSERT_EQ(e - b, 2u);
    EXPECT_LT(std::abs(d.values[b + 1] - d.values[b]), 10 * d.tol);
    const Eigen::MatrixXd basis = d.fields.middleCols(static_cast<Eigen::Index>(b), 2) / std::sqrt(512.0);
    for (int j = 0; j < 2; ++j) {
      const Field r = compose(basis.col(j), g, Symmetry::rotation(1));
      const Field proj = basis * (basis.transpose() * r);
      EXPECT_LT((r - proj).norm(), 1e-6);
    }
    // Gauge: the first basis field is even under x -> 1 - x.
    const Field u = d.fields.col(static_cast<Eigen::Index>(b));
    EXPECT_LT((compose(u, g, Symmetry::reflect_horizontal()) - u).norm() / u.norm(), 1e-6);
  }
}

TEST(Spectra, DirichletDominatesNeumann) {
  for (int m = 1; m <= 3; ++m) {
    const auto dn = oracle::eigenvalues(oracle::laplacian(m, true));
    const auto g = build_graph(m);
    const auto n = static_cast<Eigen::Index>(g.size());
    const auto d = solve(g, BoundarySpec::dirichlet(), n);
    const auto nm = solve(g, BoundarySpec::neumann(), n);
    for (Eigen::Index i = 0; i < n; ++i) {
      EXPECT_GE(d.values[static_cast<std::size_t>(i)], nm.values[static_cast<std::size_t>(i)] - 1e-12);
      EXPECT_NEAR(d.values[static_cast<std::size_t>(i)], dn[i], 1e-10);
    }
  }
}

TEST(Spectra, StaircaseZeroEqualsNeumann) {
  const auto g = build_graph(3);
  EigensolveRequest r;
  r.count = 30;
  const auto s = eigensolve(assemble_complex(g, BoundarySpec::staircase(0.0)), r);
  const auto nm = eigensolve(assemble_real(g, BoundarySpec::neumann()), r);
  for (std::size_t i = 0; i < 30; ++i) EXPECT_NEAR(s.values[i], nm.values[i], 1e-12);
}

TEST(Spectra, CountingFunction) {
  const std::vector<double> v = {1.0, 2.0, 2.0, 5.0};
  EXPECT_EQ(counting_function(v, {0.5, 1.0, 1.5, 2.0, 10.0}), (std::vector<double>{0, 1, 1, 3, 4}));
  EXPECT_EQ(counting_difference(v, v, {1.0, 3.0}), (std::vector<double>{0, 0}));
  EXPECT_THROW(weyl_ratio(v, {1.0}, 0.0), ConfigError);
}

TEST(Spectra, WeylRatioOfExactPowerLaw) {
  // N(t) = t^a exactly at t = j^{1/a}.
  const double a = std::log(8.0) / std::log(10.0);
  std::vector<double> v, t;
  for (int j = 1; j <= 200; ++j) v.push_back(std::pow(j, 1.0 / a));
  for (int j = 1; j <= 200; j += 7) t.push_back(std::pow(j, 1.0 / a) * (1 + 1e-12));
  for (double w : weyl_ratio(v, t, a)) EXPECT_NEAR(w, 1.0, 1e-9);
}

TEST(Spectra, NeumannCountingDominatesDirichlet) {
  const auto g = build_graph(3);
  const auto n = static_cast<Eigen::Index>(g.size());
  const auto d = solve(g, BoundarySpec::dirichlet(), n);
  const auto nm = solve(g, BoundarySpec::neumann(), n);
  const auto grid = merged_midpoints(d.renormalized(), nm.renormalized());
  for (double x : counting_difference(nm, d, grid)) EXPECT_GE(x, 0.0);
}

TEST(Spectra, SignChanges) {
  EXPECT_EQ(sign_changes({1, 0, -1, -2, 0, 3, 3, -1}), 3u);
  EXPECT_EQ(sign_changes({}), 0u);
}

TEST(Spectra, CoincidencesAtLevelThree) {
  const auto g = build_graph(3);
  auto run = [&](BoundarySpec s) {
    auto set = solve(g, s, 512);
    if (s.d4_invariant()) classify_symmetry(set, g, true);
    return set;
  };
  const auto nm = run(BoundarySpec::neumann());
  const auto t = run(BoundarySpec::torus());
  const auto kb = run(BoundarySpec::klein());
  const auto ps = run(BoundarySpec::projective());
  const auto rep = coincidence_check(nm, t, kb, ps, 1e-9);
  EXPECT_GT(rep.checked, 200u);
  EXPECT_TRUE(rep.ok()) << rep.violations.size() << " violations, first: "
                        << (rep.violations.empty() ? "" : rep.violations[0].rule);
  const RealEigenSet empty;
  EXPECT_EQ(coincidence_check(empty, empty, empty, empty).checked, 0u);
}

TEST(Spectra, MiniaturizationLevelOneToTwo) {
  const auto g1 = build_graph(1), g2 = build_graph(2);
  const auto set = solve(g1, BoundarySpec::neumann(), 8);
  for (std::size_t i = 0; i < 8; ++i) {
    const auto mini = miniaturize(set.fields.col(static_cast<Eigen::Index>(i)), set.values[i], g1, g2,
                                  BoundarySpec::neumann());
    EXPECT_LE(mini.residual, 1e-8) << i;
  }
  const auto c = miniaturize(Field::Constant(8, 1.0), 0.0, g1, g2, BoundarySpec::neumann());
  EXPECT_EQ(c.residual, 0.0);
  EXPECT_EQ((c.field.array() - 1.0).abs().maxCoeff(), 0.0);
  EXPECT_THROW(miniaturize(Field::Constant(8, 1.0), 0.0, g1, g2, BoundarySpec::klein()), ConfigError);
}

TEST(Spectra, MiniaturizedEigenvalueScalesByRho) {
  // Mirrored Neumann copies are exact level-(m+1) eigenfields with the same
  // matrix eigenvalue, so the renormalized value gains one factor of rho.
  const auto g2 = build_graph(2), g3 = build_graph(3);
  const auto n2 = solve(g2, BoundarySpec::neumann(), 12);
  const auto n3 = solve(g3, BoundarySpec::neumann(), 200);
  for (std::size_t i = 1; i < n2.size(); ++i) {
    const auto mini = miniaturize(n2.fields.col(static_cast<Eigen::Index>(i)), n2.values[i], g2, g3,
                                  BoundarySpec::neumann());
    EXPECT_LE(mini.residual, 1e-8) << i;
    double nearest = 1e300;
    for (double v : n3.renormalized()) nearest = std::min(nearest, std::abs(v - n3.rho * n2.lambda_sc(i)));
    EXPECT_LT(nearest, 1e-8 * n2.lambda_sc(i) * n3.rho) << i;
  }
  // Dirichlet copies meet the new inner holes with Neumann behaviour, so the
  // residual is reported rather than zero.
  const auto d2 = solve(g2, BoundarySpec::dirichlet(), 1);
  EXPECT_GT(miniaturize(d2.fields.col(0), d2.values[0], g2, g3, BoundarySpec::dirichlet()).residual, 1e-3);
}

TEST(Spectra, DetectClusters) {
  EXPECT_TRUE(detect_clusters({1.0, 10.0, 20.0, 30.0}, 2.0).empty());
  const auto c = detect_clusters({100.0, 860.58, 860.58, 861.92, 900.0}, 2.0);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].first, 1u);
  EXPECT_EQ(c[0].last, 3u);
  EXPECT_EQ(c[0].distinct.size(), 2u);
}

TEST(Spectra, Truncate) {
  auto set = solve(build_graph(2), BoundarySpec::neumann(), 10);
  truncate(set, 4);
  EXPECT_EQ(set.size(), 4u);
  EXPECT_EQ(set.fields.cols(), 4);
  EXPECT_EQ(set.residuals.size(), 4u);
}

TEST(Spectra, LevelGuard) {
  EigensolveRequest r;
  r.max_level = 2;
  EXPECT_THROW(eigensolve(assemble_real(build_graph(3), BoundarySpec::neumann()), r), ResourceError);
}
