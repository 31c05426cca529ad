#include "umblt/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>

#include "umblt/errors.hpp"

namespace umblt {

namespace {

using Triplet = Eigen::Triplet<double>;

// Collects one row at a time; repeated columns inside a row are merged so
// that every (row, col) pair reaches the triplet list exactly once.
class RowAssembler {
 public:
  explicit RowAssembler(std::size_t n) : n_(n), touched_(n, false) { triplets_.reserve(9 * n); }

  void begin(std::size_t row) {
    if (touched_[row]) throw Error("assembly visited row " + std::to_string(row) + " twice");
    touched_[row] = true;
    row_ = row;
    buffer_.clear();
  }

  void add(std::size_t col, double value) {
    for (auto& [c, v] : buffer_) {
      if (c == col) {
        v += value;
        return;
      }
    }
    buffer_.emplace_back(col, value);
  }

  void end() {
    bool has_diagonal = false;
    for (const auto& [c, v] : buffer_) {
      if (v == 0.0) continue;
      if (c == row_) has_diagonal = true;
      triplets_.emplace_back(static_cast<int>(row_), static_cast<int>(c), v);
    }
    if (!has_diagonal) throw Error("row " + std::to_string(row_) + " has a zero diagonal");
  }

  SparseMatrix finish() {
    for (std::size_t r = 0; r < n_; ++r) {
      if (!touched_[r]) throw Error("assembly skipped row " + std::to_string(r));
    }
    SparseMatrix m(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
    m.setFromTriplets(triplets_.begin(), triplets_.end());
    m.makeCompressed();
    return m;
  }

 private:
  std::size_t n_;
  std::size_t row_ = 0;
  std::vector<bool> touched_;
  std::vector<std::pair<std::size_t, double>> buffer_;
  std::vector<Triplet> triplets_;
};

struct Neighbor {
  int i;
  int j;
  double h;  // spacing along the connecting axis
};

std::vector<Neighbor> neighbors(const Grid2D& g, int i, int j) {
  std::vector<Neighbor> out;
  out.reserve(4);
  if (i < g.nx()) out.push_back({i + 1, j, g.dx()});
  if (i > 1) out.push_back({i - 1, j, g.dx()});
  if (j < g.ny()) out.push_back({i, j + 1, g.dy()});
  if (j > 1) out.push_back({i, j - 1, g.dy()});
  return out;
}

// ---------------------------------------------------------------------------
// Isotropic five-point rows.

void isotropic_interior_row(RowAssembler& a, const SampledCoefficients& c, int i, int j) {
  const Grid2D& g = c.grid;
  double diag = c.absorption.at(i, j);
  for (const Neighbor& nb : neighbors(g, i, j)) {
    const double w = c.diffusion.between(i, j, nb.i, nb.j) / (nb.h * nb.h);
    a.add(g.offset(nb.i, nb.j), -w);
    diag += w;
  }
  a.add(g.offset(i, j), diag);
}

void isotropic_robin_row(RowAssembler& a, const SampledCoefficients& c, int i, int j) {
  const Grid2D& g = c.grid;
  const bool corner = g.classify(i, j) == NodeClass::corner;
  const double factor = corner ? 0.5 * std::numbers::sqrt2 * c.ell : c.ell;
  double diag = 1.0;
  for (const Neighbor& nb : neighbors(g, i, j)) {
    // Side nodes couple only to their interior neighbour; corners to both
    // boundary neighbours.
    if (!corner && !g.is_interior(nb.i, nb.j)) continue;
    const double w = factor * c.diffusion.between(i, j, nb.i, nb.j) / nb.h;
    a.add(g.offset(nb.i, nb.j), -w);
    diag += w;
  }
  a.add(g.offset(i, j), diag);
}

void isotropic_internal_row(RowAssembler& a, const SampledCoefficients& c, const NodeField& psi, int i, int j) {
  const Grid2D& g = c.grid;
  const double cross = 0.5 * (2.0 * c.gamma - 1.0);
  const double psi_p = psi.at(i, j);
  double diag = 2.0 * c.gamma * c.absorption.at(i, j) * psi_p;
  for (const Neighbor& nb : neighbors(g, i, j)) {
    const double weight = psi_p + cross * (psi.at(nb.i, nb.j) - psi_p);
    const double w = c.diffusion.between(i, j, nb.i, nb.j) * weight / (nb.h * nb.h);
    a.add(g.offset(nb.i, nb.j), w);
    diag -= w;
  }
  a.add(g.offset(i, j), diag);
}

// ---------------------------------------------------------------------------
// Tensor stencils. A flux is a linear combination of nodal values.

using Stencil = std::vector<std::pair<std::size_t, double>>;

class TensorFluxes {
 public:
  explicit TensorFluxes(const SampledCoefficients& c) : c_(c), g_(c.grid), t_(*c.tensor) {}

  // (D grad u)_1 at (i + 1/2, j).
  Stencil x_flux(int i, int j) const {
    Stencil s;
    const double d11 = t_.xx.x_edge(i, j);
    const double d12 = t_.xy.x_edge(i, j);
    s.emplace_back(g_.offset(i + 1, j), d11 / g_.dx());
    s.emplace_back(g_.offset(i, j), -d11 / g_.dx());
    if (d12 != 0.0) {
      // Tangential derivative averaged over the two end nodes; one-sided
      // where the stencil would leave the grid.
      auto [lo, hi] = tangent_range(j, g_.ny());
      const double w = d12 / (2.0 * (hi - lo) * g_.dy());
      for (int ii : {i, i + 1}) {
        s.emplace_back(g_.offset(ii, hi), w);
        s.emplace_back(g_.offset(ii, lo), -w);
      }
    }
    return s;
  }

  // (D grad u)_2 at (i, j + 1/2).
  Stencil y_flux(int i, int j) const {
    Stencil s;
    const double d22 = t_.yy.y_edge(i, j);
    const double d12 = t_.xy.y_edge(i, j);
    s.emplace_back(g_.offset(i, j + 1), d22 / g_.dy());
    s.emplace_back(g_.offset(i, j), -d22 / g_.dy());
    if (d12 != 0.0) {
      auto [lo, hi] = tangent_range(i, g_.nx());
      const double w = d12 / (2.0 * (hi - lo) * g_.dx());
      for (int jj : {j, j + 1}) {
        s.emplace_back(g_.offset(hi, jj), w);
        s.emplace_back(g_.offset(lo, jj), -w);
      }
    }
    return s;
  }

  static double apply(const Stencil& s, const NodeField& u) {
    double v = 0.0;
    for (const auto& [k, w] : s) v += w * u[k];
    return v;
  }

  static void add(RowAssembler& a, const Stencil& s, double scale) {
    for (const auto& [k, w] : s) a.add(k, scale * w);
  }

  // Adds scale * [div(D grad u)]_{i,j} for an interior node.
  void add_divergence(RowAssembler& a, int i, int j, double scale) const {
    add(a, x_flux(i, j), scale / g_.dx());
    add(a, x_flux(i - 1, j), -scale / g_.dx());
    add(a, y_flux(i, j), scale / g_.dy());
    add(a, y_flux(i, j - 1), -scale / g_.dy());
  }

  void forward_interior_row(RowAssembler& a, int i, int j) const {
    add_divergence(a, i, j, -1.0);
    a.add(g_.offset(i, j), c_.absorption.at(i, j));
  }

  // u + ell nu.(D grad u) with the outward normal; corners use the diagonal
  // normal (+-sqrt(2)/2, +-sqrt(2)/2).
  void robin_row(RowAssembler& a, int i, int j) const {
    const bool corner = g_.classify(i, j) == NodeClass::corner;
    const double k = corner ? 0.5 * std::numbers::sqrt2 * c_.ell : c_.ell;
    a.add(g_.offset(i, j), 1.0);
    if (i == 1) add(a, x_flux(1, j), -k);
    if (i == g_.nx()) add(a, x_flux(g_.nx() - 1, j), k);
    if (j == 1) add(a, y_flux(i, 1), -k);
    if (j == g_.ny()) add(a, y_flux(i, g_.ny() - 1), k);
  }

  void internal_row(RowAssembler& a, const NodeField& psi, int i, int j) const {
    const double psi_p = psi.at(i, j);
    add_divergence(a, i, j, psi_p);
    // (2 gamma - 1) * [D grad psi . grad u]: edge products averaged per axis.
    const double cross = 2.0 * c_.gamma - 1.0;
    const double fr = apply(x_flux(i, j), psi);
    const double fl = apply(x_flux(i - 1, j), psi);
    const double fu = apply(y_flux(i, j), psi);
    const double fd = apply(y_flux(i, j - 1), psi);
    const double hx = 0.5 * cross / g_.dx();
    const double hy = 0.5 * cross / g_.dy();
    a.add(g_.offset(i + 1, j), hx * fr);
    a.add(g_.offset(i, j), -hx * fr + hx * fl - hy * fu + hy * fd);
    a.add(g_.offset(i - 1, j), -hx * fl);
    a.add(g_.offset(i, j + 1), hy * fu);
    a.add(g_.offset(i, j - 1), -hy * fd);
    a.add(g_.offset(i, j), 2.0 * c_.gamma * c_.absorption.at(i, j) * psi_p);
  }

 private:
  static std::pair<int, int> tangent_range(int k, int n) {
    if (k == 1) return {1, 2};
    if (k == n) return {n - 1, n};
    return {k - 1, k + 1};
  }

  const SampledCoefficients& c_;
  const Grid2D& g_;
  const TensorSamples& t_;
};

void check_field_grid(const NodeField& f, const Grid2D& g, const char* what) {
  if (!(f.grid() == g)) throw InvalidArgument(std::string(what) + " is sampled on a different grid");
}

void check_coefficients(const SampledCoefficients& c) {
  check_field_grid(c.absorption, c.grid, "absorption");
  if (!(c.diffusion.grid() == c.grid)) throw InvalidArgument("diffusion is sampled on a different grid");
  if (!(c.ell > 0.0)) throw InvalidArgument("extrapolation length must be positive");
}

void check_tensor_spd(const SampledCoefficients& c) {
  const TensorSamples& t = *c.tensor;
  auto check = [](double xx, double xy, double yy) {
    if (!(Tensor2{xx, xy, yy}.min_eigenvalue() > 0.0)) throw InvalidArgument("diffusion tensor is not SPD");
  };
  for (std::size_t k = 0; k < t.xx.x_edges().size(); ++k) check(t.xx.x_edges()[k], t.xy.x_edges()[k], t.yy.x_edges()[k]);
  for (std::size_t k = 0; k < t.xx.y_edges().size(); ++k) check(t.xx.y_edges()[k], t.xy.y_edges()[k], t.yy.y_edges()[k]);
  for (std::size_t k = 0; k < t.node_xx.size(); ++k) check(t.node_xx[k], t.node_xy[k], t.node_yy[k]);
}

void check_positive(const NodeField& psi) {
  const Grid2D& g = psi.grid();
  for (int i = 1; i <= g.nx(); ++i)
    for (int j = 1; j <= g.ny(); ++j)
      if (!(psi.at(i, j) > 0.0)) {
        throw PositivityError("adjoint weight must be positive at every node", i, j, psi.at(i, j));
      }
}

}  // namespace

std::string_view side_name(Side side) {
  switch (side) {
    case Side::left: return "left";
    case Side::right: return "right";
    case Side::bottom: return "bottom";
    case Side::top: return "top";
  }
  return "?";
}

std::optional<Side> parse_side(std::string_view name) {
  for (Side s : {Side::left, Side::right, Side::bottom, Side::top})
    if (side_name(s) == name) return s;
  return std::nullopt;
}

BoundarySelection BoundarySelection::whole_boundary() {
  BoundarySelection b;
  for (Side s : {Side::left, Side::right, Side::bottom, Side::top}) b.sides.push_back({s, std::nullopt});
  return b;
}

BoundarySelection BoundarySelection::parse(std::string_view list) {
  BoundarySelection b;
  std::size_t start = 0;
  while (start <= list.size()) {
    const std::size_t comma = std::min(list.find(',', start), list.size());
    std::string_view token = list.substr(start, comma - start);
    while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
    while (!token.empty() && token.back() == ' ') token.remove_suffix(1);
    if (!token.empty()) {
      const auto side = parse_side(token);
      if (!side) throw InvalidArgument("unknown boundary side '" + std::string(token) + "'");
      b.sides.push_back({*side, std::nullopt});
    }
    start = comma + 1;
  }
  if (b.sides.empty()) throw InvalidArgument("empty boundary selection");
  return b;
}

std::string BoundarySelection::to_string() const {
  std::ostringstream out;
  for (std::size_t k = 0; k < sides.size(); ++k) {
    if (k) out << ',';
    out << side_name(sides[k].side);
    if (sides[k].interval) out << '[' << sides[k].interval->first << ':' << sides[k].interval->second << ']';
  }
  return out.str();
}

bool BoundarySelection::contains(const Grid2D& g, int i, int j) const {
  const NodeClass cls = g.classify(i, j);
  if (cls == NodeClass::interior) return false;

  const double tol = 1e-12 * std::max(g.dx(), g.dy());
  // 0: not covered, 1: covered at an interval endpoint, 2: strictly inside.
  auto coverage = [&](Side side) {
    const bool on_side = (side == Side::left && i == 1) || (side == Side::right && i == g.nx()) ||
                         (side == Side::bottom && j == 1) || (side == Side::top && j == g.ny());
    if (!on_side) return 0;
    const double t = (side == Side::left || side == Side::right) ? g.y(j) : g.x(i);
    int best = 0;
    for (const SideSelection& s : sides) {
      if (s.side != side) continue;
      if (!s.interval) return 2;
      const auto [lo, hi] = *s.interval;
      if (t > lo + tol && t < hi - tol) return 2;
      if (t >= lo - tol && t <= hi + tol) best = 1;
    }
    return best;
  };

  if (cls == NodeClass::corner) {
    const Side sx = (i == 1) ? Side::left : Side::right;
    const Side sy = (j == 1) ? Side::bottom : Side::top;
    const int a = coverage(sx);
    const int b = coverage(sy);
    // Interior point of Gamma only when both incident sides reach the corner.
    if (a > 0 && b > 0) return true;
    return (a > 0 || b > 0) && include_endpoints;
  }

  Side side = Side::left;
  if (i == g.nx()) side = Side::right;
  else if (j == 1) side = Side::bottom;
  else if (j == g.ny()) side = Side::top;
  const int cov = coverage(side);
  return cov == 2 || (cov == 1 && include_endpoints);
}

SparseSystem assemble_forward_matrix(const SampledCoefficients& c) {
  if (c.anisotropic()) return assemble_anisotropic(c);
  check_coefficients(c);
  const Grid2D& g = c.grid;
  RowAssembler a(g.size());
  for (int i = 1; i <= g.nx(); ++i) {
    for (int j = 1; j <= g.ny(); ++j) {
      a.begin(g.offset(i, j));
      if (g.is_interior(i, j)) isotropic_interior_row(a, c, i, j);
      else isotropic_robin_row(a, c, i, j);
      a.end();
    }
  }
  return {g, SystemKind::forward, a.finish(), Vector::Zero(static_cast<Eigen::Index>(g.size()))};
}

SparseSystem assemble_internal_matrix(const SampledCoefficients& c, const NodeField& psi) {
  if (c.anisotropic()) return assemble_anisotropic(c, &psi);
  check_coefficients(c);
  check_field_grid(psi, c.grid, "adjoint weight");
  check_positive(psi);
  const Grid2D& g = c.grid;
  RowAssembler a(g.size());
  for (int i = 1; i <= g.nx(); ++i) {
    for (int j = 1; j <= g.ny(); ++j) {
      a.begin(g.offset(i, j));
      if (g.is_interior(i, j)) isotropic_internal_row(a, c, psi, i, j);
      else isotropic_robin_row(a, c, i, j);
      a.end();
    }
  }
  return {g, SystemKind::internal, a.finish(), Vector::Zero(static_cast<Eigen::Index>(g.size()))};
}

SparseSystem assemble_mixed_adjoint(const SampledCoefficients& c, const BoundarySelection& gamma_set,
                                    const NodeField& dirichlet_data) {
  check_coefficients(c);
  check_field_grid(dirichlet_data, c.grid, "Dirichlet data");
  if (gamma_set.empty()) throw InvalidArgument("mixed adjoint needs a nonempty Dirichlet boundary");
  const Grid2D& g = c.grid;

  std::optional<TensorFluxes> tensor;
  if (c.anisotropic()) {
    check_tensor_spd(c);
    tensor.emplace(c);
  }

  RowAssembler a(g.size());
  Vector rhs = Vector::Zero(static_cast<Eigen::Index>(g.size()));
  std::size_t dirichlet_rows = 0;
  for (int i = 1; i <= g.nx(); ++i) {
    for (int j = 1; j <= g.ny(); ++j) {
      const std::size_t row = g.offset(i, j);
      a.begin(row);
      if (g.is_interior(i, j)) {
        if (tensor) tensor->forward_interior_row(a, i, j);
        else isotropic_interior_row(a, c, i, j);
      } else if (gamma_set.contains(g, i, j)) {
        const double f = dirichlet_data.at(i, j);
        if (!(f > 0.0)) throw PositivityError("Dirichlet data must be positive on Gamma", i, j, f);
        a.add(row, 1.0);
        rhs[static_cast<Eigen::Index>(row)] = f;
        ++dirichlet_rows;
      } else {
        if (tensor) tensor->robin_row(a, i, j);
        else isotropic_robin_row(a, c, i, j);
      }
      a.end();
    }
  }
  if (dirichlet_rows == 0) throw InvalidArgument("boundary selection contains no grid node");
  return {g, SystemKind::mixed_adjoint, a.finish(), std::move(rhs)};
}

Vector assemble_rhs(const NodeField& field, RhsKind kind) {
  const Grid2D& g = field.grid();
  Vector out = Vector::Zero(static_cast<Eigen::Index>(g.size()));
  for (int i = 1; i <= g.nx(); ++i) {
    for (int j = 1; j <= g.ny(); ++j) {
      const bool interior = g.is_interior(i, j);
      const bool keep = (kind == RhsKind::boundary) ? !interior : interior;
      if (keep) out[static_cast<Eigen::Index>(g.offset(i, j))] = field.at(i, j);
    }
  }
  return out;
}

SparseSystem assemble_anisotropic(const SampledCoefficients& c, const NodeField* psi) {
  check_coefficients(c);
  if (!c.tensor) throw InvalidArgument("anisotropic assembly needs tensor diffusion samples");
  check_tensor_spd(c);
  if (psi) {
    check_field_grid(*psi, c.grid, "adjoint weight");
    check_positive(*psi);
  }
  const Grid2D& g = c.grid;
  const TensorFluxes fluxes(c);
  RowAssembler a(g.size());
  for (int i = 1; i <= g.nx(); ++i) {
    for (int j = 1; j <= g.ny(); ++j) {
      a.begin(g.offset(i, j));
      if (!g.is_interior(i, j)) fluxes.robin_row(a, i, j);
      else if (psi) fluxes.internal_row(a, *psi, i, j);
      else fluxes.forward_interior_row(a, i, j);
      a.end();
    }
  }
  return {g, psi ? SystemKind::internal : SystemKind::forward, a.finish(),
          Vector::Zero(static_cast<Eigen::Index>(g.size()))};
}

NodeField staggered_gradient_product(const SampledCoefficients& c, const NodeField& v, const NodeField& u) {
  check_coefficients(c);
  check_field_grid(v, c.grid, "flux field");
  check_field_grid(u, c.grid, "gradient field");
  const Grid2D& g = c.grid;
  std::optional<TensorFluxes> tensor;
  if (c.anisotropic()) tensor.emplace(c);

  auto x_flux = [&](int i, int j) {
    if (tensor) return TensorFluxes::apply(tensor->x_flux(i, j), v);
    return c.diffusion.x_edge(i, j) * (v.at(i + 1, j) - v.at(i, j)) / g.dx();
  };
  auto y_flux = [&](int i, int j) {
    if (tensor) return TensorFluxes::apply(tensor->y_flux(i, j), v);
    return c.diffusion.y_edge(i, j) * (v.at(i, j + 1) - v.at(i, j)) / g.dy();
  };

  NodeField out(g);
  for (int i = 1; i <= g.nx(); ++i) {
    for (int j = 1; j <= g.ny(); ++j) {
      double sx = 0.0;
      int nx_edges = 0;
      if (i < g.nx()) {
        sx += x_flux(i, j) * (u.at(i + 1, j) - u.at(i, j)) / g.dx();
        ++nx_edges;
      }
      if (i > 1) {
        sx += x_flux(i - 1, j) * (u.at(i, j) - u.at(i - 1, j)) / g.dx();
        ++nx_edges;
      }
      double sy = 0.0;
      int ny_edges = 0;
      if (j < g.ny()) {
        sy += y_flux(i, j) * (u.at(i, j + 1) - u.at(i, j)) / g.dy();
        ++ny_edges;
      }
      if (j > 1) {
        sy += y_flux(i, j - 1) * (u.at(i, j) - u.at(i, j - 1)) / g.dy();
        ++ny_edges;
      }
      out.at(i, j) = sx / nx_edges + sy / ny_edges;
    }
  }
  return out;
}

void write_matrix_market(std::ostream& out, const SparseMatrix& m) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << m.rows() << ' ' << m.cols() << ' ' << m.nonZeros() << '\n';
  out << std::setprecision(17);
  for (Eigen::Index r = 0; r < m.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(m, r); it; ++it) out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
}

}  // namespace umblt
