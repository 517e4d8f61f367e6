#include <gtest/gtest.h>

#include <numbers>
#include <sstream>

#include "carpet/operators.hpp"
#include "oracles.hpp"

using namespace carpet;

namespace {

Eigen::MatrixXd dense(const RealOperator& op) { return Eigen::MatrixXd(op.matrix); }
Eigen::MatrixXcd dense(const ComplexOperator& op) { return Eigen::MatrixXcd(op.matrix); }

void expect_spectra_equal(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "index " << i;
}

}  // namespace

TEST(Operators, NeumannLevelOneIsRing) {
  const auto g = build_graph(1);
  const auto ev = oracle::eigenvalues(dense(assemble_real(g, BoundarySpec::neumann())));
  Eigen::VectorXd ring(8);
  for (int k = 0; k < 8; ++k) ring[k] = 2.0 - 2.0 * std::cos(std::numbers::pi * k / 4.0);
  std::sort(ring.data(), ring.data() + 8);
  expect_spectra_equal(ev, ring, 1e-13);
}

TEST(Operators, DirichletLevelOneDiagonal) {
  const auto g = build_graph(1);
  const auto a = dense(assemble_real(g, BoundarySpec::dirichlet()));
  // Ring degree 2 plus 2 per virtual neighbor: corners have two, edge midpoints one.
  for (int i = 0; i < 8; ++i) EXPECT_EQ(a(i, i), 2.0 + (i % 2 == 0 ? 4.0 : 2.0));
}

TEST(Operators, DirichletAndNeumannMatchOracle) {
  for (int m = 1; m <= 3; ++m) {
    const auto g = build_graph(m);
    EXPECT_EQ(dense(assemble_real(g, BoundarySpec::neumann())), oracle::laplacian(m, false));
    EXPECT_EQ(dense(assemble_real(g, BoundarySpec::dirichlet())), oracle::laplacian(m, true));
  }
}

TEST(Operators, GluedSurfacesMatchOracleSpectra) {
  for (int m = 1; m <= 3; ++m) {
    const auto g = build_graph(m);
    auto spec_of = [&](BoundarySpec s) { return oracle::eigenvalues(dense(assemble_real(g, s))); };
    auto ref = [&](bool flr, bool tb, bool ftb) {
      return oracle::eigenvalues(oracle::glued_laplacian(m, flr, tb, ftb));
    };
    expect_spectra_equal(spec_of(BoundarySpec::torus()), ref(false, true, false), 1e-11);
    expect_spectra_equal(spec_of(BoundarySpec::klein()), ref(true, true, false), 1e-11);
    expect_spectra_equal(spec_of(BoundarySpec::projective()), ref(true, true, true), 1e-11);
  }
}

TEST(Operators, ProjectiveCornersDoublyLinked) {
  const auto g = build_graph(2);
  const auto a = dense(assemble_real(g, BoundarySpec::projective()));
  const auto tl = static_cast<Eigen::Index>(g.corner_cell(Corner::top_left));
  const auto br = static_cast<Eigen::Index>(g.corner_cell(Corner::bottom_right));
  EXPECT_EQ(a(tl, br), -2.0);
  EXPECT_EQ(a(br, tl), -2.0);
}

TEST(Operators, RowSumsVanishForClosedSurfaces) {
  for (int m = 1; m <= 3; ++m) {
    const auto g = build_graph(m);
    for (auto s : {BoundarySpec::neumann(), BoundarySpec::torus(), BoundarySpec::klein(),
                   BoundarySpec::projective()}) {
      const auto a = dense(assemble_real(g, s));
      EXPECT_LT(a.rowwise().sum().cwiseAbs().maxCoeff(), 1e-14) << s.str();
      EXPECT_LT((a - a.transpose()).cwiseAbs().maxCoeff(), 1e-15) << s.str();
    }
  }
}

TEST(Operators, DirichletPositiveDefinite) {
  for (int m = 1; m <= 3; ++m) {
    const auto a = dense(assemble_real(build_graph(m), BoundarySpec::dirichlet()));
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    EXPECT_EQ(llt.info(), Eigen::Success);
  }
}

TEST(Operators, StaircaseLevelOneClosedForm) {
  const auto g = build_graph(1);
  for (double theta : {0.0, 0.1, 0.25, 0.37, 0.5, 0.8}) {
    const auto ev = oracle::eigenvalues(dense(assemble_complex(g, BoundarySpec::staircase(theta))));
    const auto ref = oracle::twisted_ring(theta);
    for (int i = 0; i < 8; ++i) EXPECT_NEAR(ev[i], ref[static_cast<std::size_t>(i)], 1e-12) << theta;
  }
}

TEST(Operators, TwistedOperatorsMatchOracle) {
  for (int m = 1; m <= 3; ++m) {
    const auto g = build_graph(m);
    for (double theta : {0.13, 0.5}) {
      expect_spectra_equal(oracle::eigenvalues(dense(assemble_complex(g, BoundarySpec::staircase(theta)))),
                           oracle::eigenvalues(oracle::staircase_laplacian(m, theta)), 1e-11);
      expect_spectra_equal(oracle::eigenvalues(dense(assemble_complex(g, BoundarySpec::strip(theta)))),
                           oracle::eigenvalues(oracle::glued_laplacian(m, false, false, false, theta)),
                           1e-11);
    }
  }
}

TEST(Operators, TwistedHermitianAndReflectedTheta) {
  for (int m = 1; m <= 2; ++m) {
    const auto g = build_graph(m);
    for (double theta : {0.0, 0.2, 0.45}) {
      for (auto mk : {BoundarySpec::strip, BoundarySpec::staircase}) {
        const auto a = dense(assemble_complex(g, mk(theta)));
        EXPECT_LT((a - a.adjoint()).cwiseAbs().maxCoeff(), 1e-15);
        const auto b = dense(assemble_complex(g, mk(1.0 - theta)));
        expect_spectra_equal(oracle::eigenvalues(a), oracle::eigenvalues(b), 1e-12);
      }
    }
  }
}

TEST(Operators, StaircaseAtZeroIsNeumann) {
  const auto g = build_graph(3);
  const Eigen::MatrixXcd a = dense(assemble_complex(g, BoundarySpec::staircase(0.0)));
  EXPECT_EQ(a.imag().cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(Eigen::MatrixXd(a.real()), dense(assemble_real(g, BoundarySpec::neumann())));
}

TEST(Operators, RealAssemblyRefusesTwist) {
  EXPECT_THROW(assemble_real(build_graph(1), BoundarySpec::strip(0.3)), ConfigError);
}

TEST(Operators, D4Commutation) {
  for (int m = 1; m <= 3; ++m) {
    const auto g = build_graph(m);
    const auto n = static_cast<Eigen::Index>(g.size());
    for (auto spec : {BoundarySpec::dirichlet(), BoundarySpec::neumann(), BoundarySpec::torus(),
                      BoundarySpec::projective(), BoundarySpec::klein()}) {
      const auto a = dense(assemble_real(g, spec));
      for (const auto& s : Symmetry::all()) {
        const auto perm = g.permutation(s);
        Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i) p(i, static_cast<Eigen::Index>(perm[static_cast<std::size_t>(i)])) = 1.0;
        const double defect = (p * a - a * p).cwiseAbs().maxCoeff();
        const bool expect_commute =
            spec.kind != BoundaryKind::klein || s == Symmetry::reflect_vertical() ||
            s == Symmetry::identity() || s == Symmetry::reflect_horizontal() || s == Symmetry::rotation(2);
        if (expect_commute) {
          EXPECT_EQ(defect, 0.0) << spec.str() << ' ' << s.name();
        }
      }
    }
  }
}

TEST(Operators, EnergyExamples) {
  const auto g = build_graph(1);
  Field e0 = Field::Zero(8);
  e0[0] = 1.0;
  EXPECT_DOUBLE_EQ(energy(e0, e0, g, 1.25), 2.5);
  EXPECT_EQ(energy(Field::Constant(8, 3.0), Field::Constant(8, 3.0), g, 1.25), 0.0);
  EXPECT_THROW(energy(Field::Zero(7), e0, g, 1.25), ConfigError);
}

TEST(Operators, EnergyIsNeumannQuadraticForm) {
  const auto g = build_graph(4);
  const auto a = assemble_real(g, BoundarySpec::neumann());
  const Field u = Field::Random(static_cast<Eigen::Index>(g.size()));
  const Field v = Field::Random(static_cast<Eigen::Index>(g.size()));
  const double r = std::pow(1.25, 4);
  EXPECT_NEAR(energy(u, v, g, 1.25), r * u.dot(a.matrix * v), 1e-11 * std::abs(r * u.dot(a.matrix * v)) + 1e-11);
  EXPECT_NEAR(energy(u, v, g, 1.25), energy(v, u, g, 1.25), 1e-12);
  EXPECT_GE(energy(u, u, g, 1.25), 0.0);
}

TEST(Operators, RenormalizedLaplacian) {
  const auto g = build_graph(1);
  const auto op = assemble_real(g, BoundarySpec::neumann());
  EXPECT_EQ(renormalized_laplacian_apply(op, Field(Field::Constant(8, 1.0)), 10.0).cwiseAbs().maxCoeff(), 0.0);
  Field u(8);
  for (int i = 0; i < 8; ++i) u[i] = std::cos(std::numbers::pi * i / 4.0);
  const double lambda = 2.0 - 2.0 * std::cos(std::numbers::pi / 4.0);
  const Field lu = renormalized_laplacian_apply(op, u, 10.0);
  EXPECT_LT((lu + 10.0 * lambda * u).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Operators, RhoEstimates) {
  EXPECT_NEAR(estimate_rho(0.00320568102788810, 0.000320348757759280), 10.0068, 1e-4);
  EXPECT_NEAR(estimate_rho(0.0002744, 0.0000274), 10.01, 0.01);
  EXPECT_EQ(estimate_rho(0.3, 0.3), 1.0);
  EXPECT_THROW(estimate_rho(1.0, 0.0), ConfigError);
  EXPECT_DOUBLE_EQ(calibrate_rho({0.0, 10.0, 20.0, 33.0}, {0.0, 1.0, 2.0, 3.0}), 10.0);
  const RenormConstants rc{1.25};
  EXPECT_DOUBLE_EQ(rc.rho(), 10.0);
  EXPECT_NEAR(rc.alpha(), std::log(8.0) / std::log(10.0), 1e-15);
  EXPECT_NEAR(RenormConstants::from_rho(10.01).r_inv, 1.25125, 1e-15);
}

TEST(Operators, BoundarySpecParsing) {
  EXPECT_EQ(BoundarySpec::parse("dirichlet"), BoundarySpec::dirichlet());
  EXPECT_EQ(BoundarySpec::parse("KB"), BoundarySpec::klein());
  EXPECT_EQ(BoundarySpec::parse("strip:0.25"), BoundarySpec::strip(0.25));
  EXPECT_EQ(BoundarySpec::parse("staircase:0.25").str(), "staircase:0.25");
  EXPECT_THROW(BoundarySpec::parse("staircase"), ConfigError);
  EXPECT_THROW(BoundarySpec::parse("strip:1.5"), ConfigError);
  EXPECT_THROW(BoundarySpec::parse("strip:x"), ConfigError);
  EXPECT_THROW(BoundarySpec::parse("torus:0.1"), ConfigError);
  EXPECT_THROW(BoundarySpec::parse("cylinder"), ConfigError);
}

TEST(Operators, MatrixMarketExport) {
  const auto op = assemble_complex(build_graph(1), BoundarySpec::staircase(0.25));
  std::ostringstream os;
  write_matrix_market(os, op);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "%%MatrixMarket matrix coordinate complex general");
  int comments = 0;
  while (std::getline(is, line) && line[0] == '%') ++comments;
  EXPECT_EQ(comments, 4);
  EXPECT_EQ(line, "8 8 24");
  Eigen::MatrixXcd back = Eigen::MatrixXcd::Zero(8, 8);
  int r, c;
  double re, im;
  int count = 0;
  while (is >> r >> c >> re >> im) {
    back(r - 1, c - 1) = {re, im};
    ++count;
  }
  EXPECT_EQ(count, 24);
  EXPECT_LT((back - Eigen::MatrixXcd(op.matrix)).cwiseAbs().maxCoeff(), 1e-16);
}
