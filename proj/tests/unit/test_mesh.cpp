#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "umblt/errors.hpp"
#include "umblt/mesh.hpp"

using namespace umblt;

namespace {

NodeField random_field(const Grid2D& g, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  NodeField f(g);
  for (double& v : f.values()) v = u(rng);
  return f;
}

}  // namespace

TEST(Grid, SpacingOnReferenceSquare) {
  const Grid2D g = build_grid({-1, 1, -1, 1}, 201, 201);
  EXPECT_NEAR(g.dx(), 0.01, 1e-15);
  EXPECT_NEAR(g.dy(), 0.01, 1e-15);
  EXPECT_EQ(g.size(), 201u * 201u);
  EXPECT_DOUBLE_EQ(g.x(1), -1.0);
  EXPECT_DOUBLE_EQ(g.x(201), 1.0);
}

TEST(Grid, ThreeByThreeHasOneInteriorNode) {
  const Grid2D g({0, 1, 0, 1}, 3, 3);
  EXPECT_DOUBLE_EQ(g.dx(), 0.5);
  int interior = 0;
  for (int i = 1; i <= 3; ++i)
    for (int j = 1; j <= 3; ++j) interior += g.is_interior(i, j);
  EXPECT_EQ(interior, 1);
  EXPECT_TRUE(g.is_interior(2, 2));
}

TEST(Grid, RejectsDegenerateInput) {
  EXPECT_THROW(Grid2D({-1, 1, -1, 1}, 2, 5), InvalidArgument);
  EXPECT_THROW(Grid2D({-1, 1, -1, 1}, 5, 2), InvalidArgument);
  EXPECT_THROW(Grid2D({1, 1, -1, 1}, 5, 5), InvalidArgument);
  EXPECT_THROW(Grid2D({-1, 1, 1, -1}, 5, 5), InvalidArgument);
}

TEST(Grid, ClassifiesNodes) {
  const Grid2D g({-1, 1, -1, 1}, 5, 5);
  EXPECT_EQ(classify_node(g, 1, 1), NodeClass::corner);
  EXPECT_EQ(classify_node(g, 5, 1), NodeClass::corner);
  EXPECT_EQ(classify_node(g, 1, 5), NodeClass::corner);
  EXPECT_EQ(classify_node(g, 5, 5), NodeClass::corner);
  EXPECT_EQ(classify_node(g, 1, 3), NodeClass::boundary);
  EXPECT_EQ(classify_node(g, 3, 5), NodeClass::boundary);
  EXPECT_EQ(classify_node(g, 3, 3), NodeClass::interior);
  EXPECT_THROW(classify_node(g, 0, 3), InvalidArgument);
  EXPECT_THROW(classify_node(g, 3, 6), InvalidArgument);
}

TEST(Grid, LinearIndexIsABijection) {
  for (auto [nx, ny] : {std::pair{3, 3}, {4, 7}, {9, 5}}) {
    const Grid2D g({0, 2, -1, 3}, nx, ny);
    std::vector<bool> seen(g.size() + 1, false);
    for (int i = 1; i <= nx; ++i)
      for (int j = 1; j <= ny; ++j) {
        const std::size_t k = g.linear_index(i, j);
        ASSERT_GE(k, 1u);
        ASSERT_LE(k, g.size());
        EXPECT_FALSE(seen[k]);
        seen[k] = true;
        EXPECT_EQ(k, static_cast<std::size_t>((i - 1) * ny + j));
        EXPECT_EQ(g.offset(i, j), k - 1);
        EXPECT_EQ(g.node_of(k), (std::pair{i, j}));
      }
  }
}

TEST(Grid, ClassCountsAddUp) {
  const Grid2D g({-1, 1, -1, 1}, 7, 4);
  int corner = 0, side = 0, interior = 0;
  for (int i = 1; i <= 7; ++i)
    for (int j = 1; j <= 4; ++j) switch (g.classify(i, j)) {
        case NodeClass::corner: ++corner; break;
        case NodeClass::boundary: ++side; break;
        case NodeClass::interior: ++interior; break;
      }
  EXPECT_EQ(corner, 4);
  EXPECT_EQ(side, 2 * (7 - 2) + 2 * (4 - 2));
  EXPECT_EQ(interior, (7 - 2) * (4 - 2));
}

TEST(EdgeField, SizesAndBetween) {
  const Grid2D g({0, 1, 0, 1}, 4, 3);
  EdgeField e = EdgeField::sample(g, [](Point p) { return 10 * p.x + p.y; });
  EXPECT_EQ(e.x_edges().size(), 3u * 3u);
  EXPECT_EQ(e.y_edges().size(), 4u * 2u);
  EXPECT_DOUBLE_EQ(e.between(2, 2, 3, 2), e.x_edge(2, 2));
  EXPECT_DOUBLE_EQ(e.between(3, 2, 2, 2), e.x_edge(2, 2));
  EXPECT_DOUBLE_EQ(e.between(2, 3, 2, 2), e.y_edge(2, 2));
  EXPECT_NEAR(e.x_edge(1, 1), 10.0 / 6.0, 1e-14);
}

TEST(Restriction, InjectsCoincidingNodes) {
  const Grid2D fine({-1, 1, -1, 1}, 401, 401);
  const Grid2D coarse({-1, 1, -1, 1}, 201, 201);
  auto fn = [](Point p) { return std::sin(3 * p.x) * p.y; };
  const NodeField c = restrict_fine_to_coarse(NodeField::sample(fine, fn), coarse);
  for (int i = 1; i <= 201; i += 20)
    for (int j = 1; j <= 201; j += 25) EXPECT_NEAR(c.at(i, j), fn(coarse.node(i, j)), 1e-14);
  EXPECT_EQ(nesting_factor(fine, coarse), 2);
}

TEST(Restriction, RejectsNonNestedGrids) {
  const Grid2D fine({-1, 1, -1, 1}, 401, 401);
  EXPECT_THROW(restrict_fine_to_coarse(NodeField(fine), Grid2D({-1, 1, -1, 1}, 300, 300)), InvalidArgument);
  EXPECT_THROW(restrict_fine_to_coarse(NodeField(fine), Grid2D({0, 1, -1, 1}, 201, 201)), InvalidArgument);
}

TEST(Restriction, PreservesConstantsAndInvertsInjection) {
  const Grid2D fine({0, 1, 0, 1}, 13, 13);
  const Grid2D coarse({0, 1, 0, 1}, 5, 5);
  const NodeField ones = restrict_fine_to_coarse(NodeField(fine, 2.5), coarse);
  for (double v : ones.values()) EXPECT_EQ(v, 2.5);

  std::mt19937 rng(3);
  const NodeField base = random_field(coarse, rng);
  NodeField prolonged = random_field(fine, rng);  // arbitrary off the coarse nodes
  for (int i = 1; i <= 5; ++i)
    for (int j = 1; j <= 5; ++j) prolonged.at(3 * (i - 1) + 1, 3 * (j - 1) + 1) = base.at(i, j);
  const NodeField back = restrict_fine_to_coarse(prolonged, coarse);
  for (std::size_t k = 0; k < back.size(); ++k) EXPECT_EQ(back[k], base[k]);
}

TEST(Norms, ZeroAndConstant) {
  const Grid2D g({-1, 1, -1, 1}, 201, 201);
  EXPECT_EQ(discrete_norm(NodeField(g), NormKind::L2), 0.0);
  EXPECT_EQ(discrete_norm(NodeField(g), NormKind::H1), 0.0);
  // dx*dy * N^2 = (2N / (N - 1))^2
  const NodeField one(g, 1.0);
  EXPECT_NEAR(discrete_norm(one, NormKind::L2), 2.01, 1e-12);
  EXPECT_NEAR(discrete_norm(one, NormKind::H1), 2.01, 1e-12);
  EXPECT_EQ(discrete_norm(one, NormKind::Linf), 1.0);
}

TEST(Norms, LinearFieldOnCoarseGrid) {
  const Grid2D g({0, 1, 0, 1}, 3, 3);
  const NodeField x = NodeField::sample(g, [](Point p) { return p.x; });
  // 0.25 * 3 * (0 + 0.25 + 1) and 0.25 * 6 edges * 1^2
  EXPECT_NEAR(discrete_norm(x, NormKind::L2), std::sqrt(0.9375), 1e-15);
  EXPECT_NEAR(discrete_norm(x, NormKind::H1), std::sqrt(2.4375), 1e-15);
}

TEST(Norms, OrderingAndHomogeneity) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Grid2D g({-1, 1, -1, 1}, 5 + trial % 7, 4 + trial % 5);
    const NodeField f = random_field(g, rng);
    const double l2 = discrete_norm(f, NormKind::L2);
    const double h1 = discrete_norm(f, NormKind::H1);
    EXPECT_LE(l2, h1);
    NodeField scaled = f;
    for (double& v : scaled.values()) v *= -3.0;
    EXPECT_NEAR(discrete_norm(scaled, NormKind::L2), 3.0 * l2, 1e-12 * l2);
    EXPECT_NEAR(discrete_norm(scaled, NormKind::H1), 3.0 * h1, 1e-12 * h1);
  }
}

TEST(FieldIo, RoundTripIsExact) {
  std::mt19937 rng(5);
  const Grid2D g({-1, 2, 0.5, 1.5}, 6, 4);
  const NodeField f = random_field(g, rng);
  std::stringstream s;
  write_field(s, f);
  const NodeField back = read_field(s);
  EXPECT_TRUE(back.grid() == g);
  for (std::size_t k = 0; k < f.size(); ++k) EXPECT_EQ(back[k], f[k]);
}

TEST(FieldIo, RejectsMalformedInput) {
  std::stringstream header("3 3 0 1");
  EXPECT_THROW(read_field(header), IoError);
  std::stringstream truncated("3 3 0 1 0 1\n1 2 3\n4 5");
  EXPECT_THROW(read_field(truncated), IoError);
  EXPECT_THROW(load_field("/nonexistent/field.txt"), IoError);
}
