#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Sparse>

#include "umblt/coefficients.hpp"
#include "umblt/mesh.hpp"

namespace umblt {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class SystemKind { forward, internal, mixed_adjoint };

// Matrix and right-hand side of one discretized problem. Rows and columns
// follow the grid's 0-based storage offsets, i.e. I(i, j) - 1.
struct SparseSystem {
  Grid2D grid;
  SystemKind kind = SystemKind::forward;
  SparseMatrix matrix;
  Vector rhs;

  std::size_t size() const { return grid.size(); }
};

enum class Side { left, right, bottom, top };

std::string_view side_name(Side side);
std::optional<Side> parse_side(std::string_view name);

struct SideSelection {
  Side side = Side::top;
  // Restriction to a parameter subinterval [lo, hi] of the side coordinate
  // (x for bottom/top, y for left/right).
  std::optional<std::pair<double, double>> interval;
};

// Boundary portion Gamma on which Dirichlet data is imposed. Gamma is open:
// nodes where Gamma meets the rest of the boundary go to the Robin side
// unless `include_endpoints` is set.
struct BoundarySelection {
  std::vector<SideSelection> sides;
  bool include_endpoints = false;

  static BoundarySelection whole_boundary();
  // Comma separated side names, e.g. "top,left".
  static BoundarySelection parse(std::string_view list);

  bool empty() const { return sides.empty(); }
  bool contains(const Grid2D& grid, int i, int j) const;
  std::string to_string() const;
};

// L: staggered-grid discretization of -div(D grad u) + sigma_a u with the
// Robin rows u + ell nu.D grad u (corner normals along the diagonal).
// Dispatches to the tensor stencil for anisotropic coefficients.
SparseSystem assemble_forward_matrix(const SampledCoefficients& c);

// A_psi: psi div(D grad u) + (2 gamma - 1) D grad u . grad psi + 2 gamma sigma_a psi u
// in the interior, with the Robin rows of L on the boundary.
SparseSystem assemble_internal_matrix(const SampledCoefficients& c, const NodeField& psi);

// Mixed problem: interior rows of L, Dirichlet rows psi = f on Gamma, and
// zero-data Robin rows on the rest of the boundary.
SparseSystem assemble_mixed_adjoint(const SampledCoefficients& c, const BoundarySelection& gamma_set,
                                    const NodeField& dirichlet_data);

enum class RhsKind { source, boundary, internal };

// source / internal: field values on interior nodes, 0 on the boundary.
// boundary: 0 on interior nodes, field values on boundary and corner nodes.
Vector assemble_rhs(const NodeField& field, RhsKind kind);

// Nine-point tensor stencil. With `psi` the internal-data operator is built,
// otherwise the forward operator.
SparseSystem assemble_anisotropic(const SampledCoefficients& c, const NodeField* psi = nullptr);

// Node values of the staggered product [D grad v . grad u]: on every edge
// the flux (D grad v) is multiplied by the difference quotient of u, and the
// edge products are averaged per axis over the edges incident to the node
// (one edge on the boundary). Interior values match the cross term of A_psi.
NodeField staggered_gradient_product(const SampledCoefficients& c, const NodeField& v, const NodeField& u);

void write_matrix_market(std::ostream& out, const SparseMatrix& m);

}  // namespace umblt
