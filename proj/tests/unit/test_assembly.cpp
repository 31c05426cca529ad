#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "dense_oracle.hpp"
#include "umblt/assembly.hpp"
#include "umblt/errors.hpp"
#include "umblt/solver.hpp"

using namespace umblt;

namespace {

const Bounds kUnit{0, 1, 0, 1};

double entry(const SparseMatrix& m, const Grid2D& g, int i, int j, int i2, int j2) {
  return m.coeff(static_cast<Eigen::Index>(g.offset(i, j)), static_cast<Eigen::Index>(g.offset(i2, j2)));
}

// Smooth, strictly positive coefficients that vary on the scale of the grid.
OpticalCoefficients wavy(double gamma) {
  OpticalCoefficients c;
  c.diffusion = [](Point p) { return 1.5 + 0.5 * std::sin(2 * p.x + 3 * p.y); };
  c.absorption = [](Point p) { return 0.3 + p.x * p.x; };
  c.gamma = gamma;
  c.ell = 1.3;
  return c;
}

}  // namespace

TEST(Forward, ConstantDiffusionStencil) {
  const Grid2D g(kUnit, 5, 5);
  const double h = 0.25;
  const SparseMatrix l = assemble_forward_matrix(sample_coefficients(constant_coefficients(1.0, 0.0), g)).matrix;
  EXPECT_NEAR(entry(l, g, 3, 3, 3, 3), 4.0 / (h * h), 1e-12);
  EXPECT_NEAR(entry(l, g, 3, 3, 4, 3), -1.0 / (h * h), 1e-12);
  EXPECT_NEAR(entry(l, g, 3, 3, 3, 2), -1.0 / (h * h), 1e-12);
  // Side row with ell = 2: 1 + 2/h on the diagonal, -2/h to the inward node.
  EXPECT_NEAR(entry(l, g, 1, 3, 1, 3), 1.0 + 2.0 / h, 1e-12);
  EXPECT_NEAR(entry(l, g, 1, 3, 2, 3), -2.0 / h, 1e-12);
  EXPECT_EQ(entry(l, g, 1, 3, 1, 4), 0.0);
  // Corner: normal along the diagonal.
  EXPECT_NEAR(entry(l, g, 1, 1, 1, 1), 1.0 + 2.0 * std::numbers::sqrt2 / h, 1e-12);
  EXPECT_NEAR(entry(l, g, 1, 1, 2, 1), -std::numbers::sqrt2 / h, 1e-12);
  EXPECT_NEAR(entry(l, g, 1, 1, 1, 2), -std::numbers::sqrt2 / h, 1e-12);
  EXPECT_EQ(l.nonZeros(), 9 * 5 + 12 * 2 + 4 * 3);
}

TEST(Forward, MatchesDenseOracle) {
  for (int n : {3, 4, 6, 9}) {
    for (int e : {1, 2}) {
      OpticalCoefficients c = experiment_coefficients(e).first;
      const Grid2D g({-1, 1, -1, 1}, n, n + (e == 2 ? 1 : 0));
      const oracle::Dense ref = oracle::forward(c, g);
      const oracle::Dense got = oracle::to_dense(assemble_forward_matrix(sample_coefficients(c, g)).matrix);
      EXPECT_LE(oracle::max_abs_diff(ref, got), 1e-14) << "n=" << n << " experiment " << e;
    }
  }
}

TEST(Forward, RowSumsAndSignPattern) {
  const Grid2D g({-1, 1, -1, 1}, 11, 8);
  const SampledCoefficients c = sample_coefficients(wavy(1.0), g);
  const SparseMatrix l = assemble_forward_matrix(c).matrix;
  const Vector sums = l * Vector::Ones(l.cols());
  for (int i = 1; i <= g.nx(); ++i)
    for (int j = 1; j <= g.ny(); ++j) {
      const double expect = g.is_interior(i, j) ? c.absorption.at(i, j) : 1.0;
      EXPECT_NEAR(sums[g.offset(i, j)], expect, 1e-11);
    }
  for (Eigen::Index r = 0; r < l.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(l, r); it; ++it) {
      if (it.row() == it.col()) EXPECT_GT(it.value(), 0.0);
      else EXPECT_LT(it.value(), 0.0);
    }
  EXPECT_TRUE(is_wcdd(l).is_wcdd);
}

TEST(Internal, UnitWeightIsForwardWithFlippedSign) {
  const Grid2D g({-1, 1, -1, 1}, 7, 7);
  const SampledCoefficients c = sample_coefficients(wavy(1.0), g);
  const SparseMatrix l = assemble_forward_matrix(c).matrix;
  const SparseMatrix a = assemble_internal_matrix(c, NodeField(g, 1.0)).matrix;
  for (int i = 2; i < 7; ++i)
    for (int j = 2; j < 7; ++j) {
      const auto r = static_cast<Eigen::Index>(g.offset(i, j));
      for (Eigen::Index k = 0; k < l.cols(); ++k) {
        const double extra = (k == r) ? 3.0 * c.absorption.at(i, j) : 0.0;
        EXPECT_NEAR(a.coeff(r, k), -l.coeff(r, k) + extra, 1e-11);
      }
    }
}

TEST(Internal, HalfGammaDropsCrossTerm) {
  const Grid2D g({-1, 1, -1, 1}, 6, 6);
  const SampledCoefficients c = sample_coefficients(wavy(0.5), g);
  const NodeField psi = NodeField::sample(g, [](Point p) { return 2.0 + p.x - 0.5 * p.y; });
  const SparseMatrix l = assemble_forward_matrix(c).matrix;
  const SparseMatrix a = assemble_internal_matrix(c, psi).matrix;
  for (int i = 2; i < 6; ++i)
    for (int j = 2; j < 6; ++j) {
      const auto r = static_cast<Eigen::Index>(g.offset(i, j));
      const double p = psi.at(i, j);
      for (Eigen::Index k = 0; k < l.cols(); ++k) {
        const double extra = (k == r) ? 2.0 * c.absorption.at(i, j) : 0.0;
        EXPECT_NEAR(a.coeff(r, k), p * (-l.coeff(r, k) + extra), 1e-11);
      }
    }
}

TEST(Internal, HandComputedRow) {
  // D = 1, sigma = 1, gamma = 1, psi = 1 + x on a 3x3 grid, h = 1/2:
  // east weight (1.5 + 0.25) / 0.25, west (1.5 - 0.25) / 0.25, north and
  // south 1.5 / 0.25, diagonal 2 * 1.5 - 24.
  const Grid2D g(kUnit, 3, 3);
  const SampledCoefficients c = sample_coefficients(constant_coefficients(1.0, 1.0), g);
  const NodeField psi = NodeField::sample(g, [](Point p) { return 1.0 + p.x; });
  const SparseMatrix a = assemble_internal_matrix(c, psi).matrix;
  EXPECT_NEAR(entry(a, g, 2, 2, 3, 2), 7.0, 1e-13);
  EXPECT_NEAR(entry(a, g, 2, 2, 1, 2), 5.0, 1e-13);
  EXPECT_NEAR(entry(a, g, 2, 2, 2, 3), 6.0, 1e-13);
  EXPECT_NEAR(entry(a, g, 2, 2, 2, 1), 6.0, 1e-13);
  EXPECT_NEAR(entry(a, g, 2, 2, 2, 2), -21.0, 1e-13);
}

TEST(Internal, MatchesDenseOracleAndRowSums) {
  for (double gamma : {0.5, 1.0, 1.7}) {
    const Grid2D g({-1, 1, -1, 1}, 9, 9);
    const OpticalCoefficients oc = wavy(gamma);
    const SampledCoefficients c = sample_coefficients(oc, g);
    const NodeField psi = NodeField::sample(g, [](Point p) { return 1.0 + 0.3 * std::cos(p.x * p.y + p.x); });
    const SparseMatrix a = assemble_internal_matrix(c, psi).matrix;
    const oracle::Dense ref = oracle::internal(oc, g, [&](int i, int j) { return psi.at(i, j); });
    EXPECT_LE(oracle::max_abs_diff(ref, oracle::to_dense(a)), 1e-13) << "gamma " << gamma;
    const Vector sums = a * Vector::Ones(a.cols());
    for (int i = 2; i < 9; ++i)
      for (int j = 2; j < 9; ++j)
        EXPECT_NEAR(sums[g.offset(i, j)], 2.0 * gamma * c.absorption.at(i, j) * psi.at(i, j), 1e-10);
  }
}

TEST(Internal, RejectsNonPositiveWeight) {
  const Grid2D g(kUnit, 5, 5);
  const SampledCoefficients c = sample_coefficients(constant_coefficients(1.0, 1.0), g);
  NodeField psi(g, 1.0);
  psi.at(4, 2) = 0.0;
  try {
    assemble_internal_matrix(c, psi);
    FAIL() << "expected PositivityError";
  } catch (const PositivityError& e) {
    EXPECT_EQ(e.i(), 4);
    EXPECT_EQ(e.j(), 2);
  }
}

TEST(Boundary, ParseAndDescribe) {
  const BoundarySelection b = BoundarySelection::parse("top, left");
  ASSERT_EQ(b.sides.size(), 2u);
  EXPECT_EQ(b.sides[0].side, Side::top);
  EXPECT_EQ(b.sides[1].side, Side::left);
  EXPECT_EQ(b.to_string(), "top,left");
  EXPECT_THROW(BoundarySelection::parse("north"), InvalidArgument);
  EXPECT_THROW(BoundarySelection::parse(""), InvalidArgument);
}

TEST(Boundary, EndpointsFollowTheFlag) {
  const Grid2D g(kUnit, 6, 6);
  BoundarySelection top = BoundarySelection::parse("top");
  EXPECT_TRUE(top.contains(g, 3, 6));
  EXPECT_FALSE(top.contains(g, 1, 6));
  EXPECT_FALSE(top.contains(g, 3, 3));
  top.include_endpoints = true;
  EXPECT_TRUE(top.contains(g, 1, 6));
  // Both sides meet at the corner: it belongs to Gamma.
  EXPECT_TRUE(BoundarySelection::parse("top,left").contains(g, 1, 6));

  BoundarySelection part;
  part.sides.push_back({Side::bottom, std::pair{0.3, 0.7}});
  EXPECT_TRUE(part.contains(g, 3, 1));   // x = 0.4
  EXPECT_FALSE(part.contains(g, 2, 1));  // x = 0.2
}

TEST(Mixed, DirichletRowCounts) {
  const int n = 9;
  const Grid2D g(kUnit, n, n);
  const SampledCoefficients c = sample_coefficients(constant_coefficients(1.0, 0.5), g);
  auto count = [&](const BoundarySelection& b) {
    const SparseSystem s = assemble_mixed_adjoint(c, b, NodeField(g, 2.0));
    int rows = 0;
    for (int i = 1; i <= n; ++i)
      for (int j = 1; j <= n; ++j) {
        const auto r = static_cast<Eigen::Index>(g.offset(i, j));
        if (s.matrix.row(r).nonZeros() == 1 && s.matrix.coeff(r, r) == 1.0) {
          EXPECT_EQ(s.rhs[r], 2.0);
          ++rows;
        } else {
          EXPECT_EQ(s.rhs[r], 0.0);
        }
      }
    return rows;
  };
  BoundarySelection top = BoundarySelection::parse("top");
  EXPECT_EQ(count(top), n - 2);
  top.include_endpoints = true;
  EXPECT_EQ(count(top), n);
  EXPECT_EQ(count(BoundarySelection::whole_boundary()), 4 * (n - 1));
}

TEST(Mixed, MatchesDenseOracle) {
  const Grid2D g({-1, 1, -1, 1}, 8, 8);
  const OpticalCoefficients oc = experiment_coefficients(2).first;
  const BoundarySelection gamma = BoundarySelection::parse("left,bottom");
  const SparseSystem s = assemble_mixed_adjoint(sample_coefficients(oc, g), gamma, NodeField(g, 1.0));
  const oracle::Dense ref = oracle::mixed(oc, g, [](int i, int j) { return (i == 1 && j < 8) || (j == 1 && i < 8); });
  EXPECT_LE(oracle::max_abs_diff(ref, oracle::to_dense(s.matrix)), 1e-14);
  EXPECT_TRUE(is_wcdd(s.matrix).is_wcdd);
}

TEST(Mixed, RejectsBadData) {
  const Grid2D g(kUnit, 5, 5);
  const SampledCoefficients c = sample_coefficients(constant_coefficients(1.0, 0.5), g);
  EXPECT_THROW(assemble_mixed_adjoint(c, BoundarySelection{}, NodeField(g, 1.0)), InvalidArgument);
  EXPECT_THROW(assemble_mixed_adjoint(c, BoundarySelection::parse("top"), NodeField(g, 0.0)), PositivityError);
  BoundarySelection empty_interval;
  empty_interval.sides.push_back({Side::top, std::pair{0.3, 0.4}});
  EXPECT_THROW(assemble_mixed_adjoint(c, empty_interval, NodeField(g, 1.0)), InvalidArgument);
}

TEST(Rhs, SplitsInteriorAndBoundary) {
  const Grid2D g(kUnit, 4, 5);
  const NodeField f = NodeField::sample(g, [](Point p) { return 1.0 + p.x + 10 * p.y; });
  const Vector src = assemble_rhs(f, RhsKind::source);
  const Vector bnd = assemble_rhs(f, RhsKind::boundary);
  const Vector internal = assemble_rhs(f, RhsKind::internal);
  EXPECT_EQ((src - internal).norm(), 0.0);
  for (int i = 1; i <= 4; ++i)
    for (int j = 1; j <= 5; ++j) {
      const auto k = g.offset(i, j);
      EXPECT_EQ(src[k] + bnd[k], f[k]);
      EXPECT_EQ(g.is_interior(i, j) ? bnd[k] : src[k], 0.0);
    }
}

TEST(Anisotropic, IdentityTensorMatchesScalarPath) {
  const Grid2D g({-1, 1, -1, 1}, 7, 6);
  OpticalCoefficients iso = constant_coefficients(1.0, 0.4);
  OpticalCoefficients aniso = anisotropic_rotated(1.0, 1.0, 0.0, 0.4);
  const oracle::Dense a = oracle::to_dense(assemble_forward_matrix(sample_coefficients(iso, g)).matrix);
  const oracle::Dense b = oracle::to_dense(assemble_forward_matrix(sample_coefficients(aniso, g)).matrix);
  EXPECT_LE(oracle::max_abs_diff(a, b), 1e-14);

  const NodeField psi = NodeField::sample(g, [](Point p) { return 2.0 + p.x * p.y; });
  const oracle::Dense ai = oracle::to_dense(assemble_internal_matrix(sample_coefficients(iso, g), psi).matrix);
  const oracle::Dense bi = oracle::to_dense(assemble_internal_matrix(sample_coefficients(aniso, g), psi).matrix);
  EXPECT_LE(oracle::max_abs_diff(ai, bi), 1e-13);
}

TEST(Anisotropic, DiagonalTensorSplitsByAxis) {
  const double a = 2.5, b = 0.7, sigma = 0.3;
  const Grid2D g({-1, 1, -1, 1}, 6, 7);
  const SparseMatrix t = assemble_forward_matrix(sample_coefficients(anisotropic_rotated(a, b, 0.0, sigma), g)).matrix;
  const SparseMatrix la = assemble_forward_matrix(sample_coefficients(constant_coefficients(a, sigma), g)).matrix;
  const SparseMatrix lb = assemble_forward_matrix(sample_coefficients(constant_coefficients(b, sigma), g)).matrix;
  for (int i = 1; i <= g.nx(); ++i)
    for (int j = 1; j <= g.ny(); ++j) {
      for (auto [di, dj] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
        if (!g.contains(i + di, j + dj)) continue;
        const SparseMatrix& ref = di != 0 ? la : lb;
        EXPECT_NEAR(entry(t, g, i, j, i + di, j + dj), entry(ref, g, i, j, i + di, j + dj), 1e-12);
      }
      // Rows sum to sigma in the interior and to 1 on Robin rows.
      double diag = g.is_interior(i, j) ? sigma : 1.0;
      for (auto [di, dj] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}})
        if (g.contains(i + di, j + dj)) diag -= entry(di != 0 ? la : lb, g, i, j, i + di, j + dj);
      EXPECT_NEAR(entry(t, g, i, j, i, j), diag, 1e-12) << i << ',' << j;
    }
}

TEST(Anisotropic, ConstantRotatedTensorIsExactOnBilinear) {
  const Grid2D g({-1, 1, -1, 1}, 9, 9);
  const Tensor2 d = rotated_tensor(2.0, 1.0, 0.5);
  const SparseMatrix l = assemble_forward_matrix(sample_coefficients(anisotropic_rotated(2.0, 1.0, 0.5, 0.0), g)).matrix;
  const NodeField u = NodeField::sample(g, [](Point p) { return p.x * p.y; });
  const Vector lu = l * Eigen::Map<const Vector>(u.values().data(), static_cast<Eigen::Index>(u.size()));
  for (int i = 2; i < 9; ++i)
    for (int j = 2; j < 9; ++j) EXPECT_NEAR(lu[g.offset(i, j)], -2.0 * d.xy, 1e-12);
}

TEST(Anisotropic, RejectsIndefiniteTensor) {
  OpticalCoefficients c = anisotropic_rotated(1.0, 1.0, 0.0, 1.0);
  c.diffusion_tensor = [](Point) { return Tensor2{1.0, 2.0, 1.0}; };
  EXPECT_THROW(assemble_forward_matrix(sample_coefficients(c, Grid2D(kUnit, 5, 5))), InvalidArgument);
}

TEST(StaggeredProduct, LinearFields) {
  const Grid2D g({-1, 1, -1, 1}, 6, 5);
  const SampledCoefficients c = sample_coefficients(constant_coefficients(3.0, 1.0), g);
  const NodeField x = NodeField::sample(g, [](Point p) { return p.x; });
  const NodeField y = NodeField::sample(g, [](Point p) { return p.y; });
  const NodeField xy_cross = staggered_gradient_product(c, x, y);
  const NodeField xx = staggered_gradient_product(c, x, x);
  const NodeField mixed = staggered_gradient_product(c, NodeField::sample(g, [](Point p) { return p.x + 2 * p.y; }),
                                                     NodeField::sample(g, [](Point p) { return 3 * p.x - p.y; }));
  for (std::size_t k = 0; k < g.size(); ++k) {
    EXPECT_NEAR(xy_cross[k], 0.0, 1e-13);
    EXPECT_NEAR(xx[k], 3.0, 1e-13);
    EXPECT_NEAR(mixed[k], 3.0 * (3.0 - 2.0), 1e-12);
  }
}

TEST(MatrixMarket, HeaderAndEntries) {
  const Grid2D g(kUnit, 3, 3);
  const SparseMatrix l = assemble_forward_matrix(sample_coefficients(constant_coefficients(1.0, 0.0), g)).matrix;
  std::ostringstream out;
  write_matrix_market(out, l);
  std::istringstream in(out.str());
  std::string banner;
  std::getline(in, banner);
  EXPECT_EQ(banner, "%%MatrixMarket matrix coordinate real general");
  long rows = 0, cols = 0, nnz = 0;
  in >> rows >> cols >> nnz;
  EXPECT_EQ(rows, 9);
  EXPECT_EQ(cols, 9);
  EXPECT_EQ(nnz, l.nonZeros());
  long count = 0;
  long r = 0, cc = 0;
  double v = 0.0;
  while (in >> r >> cc >> v) {
    EXPECT_EQ(v, l.coeff(r - 1, cc - 1));
    ++count;
  }
  EXPECT_EQ(count, nnz);
}
