#include "umblt/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "umblt/errors.hpp"

namespace umblt {

Grid2D::Grid2D(Bounds bounds, int nx, int ny) : bounds_(bounds), nx_(nx), ny_(ny) {
  if (nx < 3 || ny < 3) {
    throw InvalidArgument("grid needs at least 3 nodes per axis, got " + std::to_string(nx) + "x" +
                          std::to_string(ny));
  }
  if (!(bounds.x_max > bounds.x_min) || !(bounds.y_max > bounds.y_min)) {
    throw InvalidArgument("degenerate grid bounds");
  }
  dx_ = (bounds.x_max - bounds.x_min) / (nx - 1);
  dy_ = (bounds.y_max - bounds.y_min) / (ny - 1);
}

std::size_t Grid2D::linear_index(int i, int j) const {
  if (!contains(i, j)) {
    throw InvalidArgument("node (" + std::to_string(i) + "," + std::to_string(j) + ") outside grid");
  }
  return static_cast<std::size_t>(i - 1) * ny_ + j;
}

std::pair<int, int> Grid2D::node_of(std::size_t linear) const {
  if (linear < 1 || linear > size()) {
    throw InvalidArgument("linear index " + std::to_string(linear) + " outside grid");
  }
  const auto k = linear - 1;
  return {static_cast<int>(k / ny_) + 1, static_cast<int>(k % ny_) + 1};
}

NodeClass Grid2D::classify(int i, int j) const {
  if (!contains(i, j)) {
    throw InvalidArgument("node (" + std::to_string(i) + "," + std::to_string(j) + ") outside grid");
  }
  const bool x_edge = (i == 1 || i == nx_);
  const bool y_edge = (j == 1 || j == ny_);
  if (x_edge && y_edge) return NodeClass::corner;
  if (x_edge || y_edge) return NodeClass::boundary;
  return NodeClass::interior;
}

Grid2D build_grid(Bounds bounds, int nx, int ny) { return Grid2D(bounds, nx, ny); }

NodeClass classify_node(const Grid2D& grid, int i, int j) { return grid.classify(i, j); }

NodeField::NodeField(const Grid2D& grid, double fill) : grid_(grid), values_(grid.size(), fill) {}

NodeField::NodeField(const Grid2D& grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.size()) {
    throw InvalidArgument("node field length " + std::to_string(values_.size()) + " does not match grid size " +
                          std::to_string(grid_.size()));
  }
}

NodeField NodeField::sample(const Grid2D& grid, const std::function<double(Point)>& fn) {
  NodeField f(grid);
  for (int i = 1; i <= grid.nx(); ++i) {
    for (int j = 1; j <= grid.ny(); ++j) {
      const double v = fn(grid.node(i, j));
      if (!std::isfinite(v)) {
        throw InvalidArgument("non-finite field value at node (" + std::to_string(i) + "," + std::to_string(j) + ")");
      }
      f.at(i, j) = v;
    }
  }
  return f;
}

double NodeField::min() const { return *std::min_element(values_.begin(), values_.end()); }
double NodeField::max() const { return *std::max_element(values_.begin(), values_.end()); }

EdgeField::EdgeField(const Grid2D& grid, double fill)
    : grid_(grid),
      x_edges_(static_cast<std::size_t>(grid.nx() - 1) * grid.ny(), fill),
      y_edges_(static_cast<std::size_t>(grid.nx()) * (grid.ny() - 1), fill) {}

EdgeField EdgeField::sample(const Grid2D& grid, const std::function<double(Point)>& fn) {
  EdgeField e(grid);
  auto checked = [](double v) {
    if (!std::isfinite(v)) throw InvalidArgument("non-finite field value at a half-point");
    return v;
  };
  for (int i = 1; i < grid.nx(); ++i)
    for (int j = 1; j <= grid.ny(); ++j) e.x_edge(i, j) = checked(fn(grid.x_half(i, j)));
  for (int i = 1; i <= grid.nx(); ++i)
    for (int j = 1; j < grid.ny(); ++j) e.y_edge(i, j) = checked(fn(grid.y_half(i, j)));
  return e;
}

double EdgeField::between(int i, int j, int i2, int j2) const {
  if (j == j2 && i2 == i + 1) return x_edge(i, j);
  if (j == j2 && i2 == i - 1) return x_edge(i2, j);
  if (i == i2 && j2 == j + 1) return y_edge(i, j);
  if (i == i2 && j2 == j - 1) return y_edge(i, j2);
  throw InvalidArgument("nodes are not neighbours");
}

double EdgeField::min() const {
  return std::min(*std::min_element(x_edges_.begin(), x_edges_.end()),
                  *std::min_element(y_edges_.begin(), y_edges_.end()));
}

int nesting_factor(const Grid2D& fine, const Grid2D& coarse) {
  if (!(fine.bounds() == coarse.bounds())) {
    throw InvalidArgument("grids cover different domains");
  }
  const int fx = fine.nx() - 1;
  const int fy = fine.ny() - 1;
  const int cx = coarse.nx() - 1;
  const int cy = coarse.ny() - 1;
  if (fx % cx != 0 || fy % cy != 0 || fx / cx != fy / cy) {
    throw InvalidArgument("grids are not nested: fine " + std::to_string(fine.nx()) + "x" +
                          std::to_string(fine.ny()) + ", coarse " + std::to_string(coarse.nx()) + "x" +
                          std::to_string(coarse.ny()));
  }
  return fx / cx;
}

NodeField restrict_fine_to_coarse(const NodeField& fine, const Grid2D& coarse) {
  const int r = nesting_factor(fine.grid(), coarse);
  NodeField out(coarse);
  for (int i = 1; i <= coarse.nx(); ++i)
    for (int j = 1; j <= coarse.ny(); ++j) out.at(i, j) = fine.at((i - 1) * r + 1, (j - 1) * r + 1);
  return out;
}

double discrete_norm(const NodeField& f, NormKind kind) {
  const Grid2D& g = f.grid();
  const double w = g.dx() * g.dy();
  switch (kind) {
    case NormKind::Linf: {
      double m = 0.0;
      for (double v : f.values()) m = std::max(m, std::abs(v));
      return m;
    }
    case NormKind::L2:
    case NormKind::H1: {
      double sum = 0.0;
      for (double v : f.values()) sum += v * v;
      sum *= w;
      if (kind == NormKind::H1) {
        double grad = 0.0;
        for (int i = 1; i < g.nx(); ++i)
          for (int j = 1; j <= g.ny(); ++j) {
            const double d = (f.at(i + 1, j) - f.at(i, j)) / g.dx();
            grad += d * d;
          }
        for (int i = 1; i <= g.nx(); ++i)
          for (int j = 1; j < g.ny(); ++j) {
            const double d = (f.at(i, j + 1) - f.at(i, j)) / g.dy();
            grad += d * d;
          }
        sum += w * grad;
      }
      return std::sqrt(sum);
    }
  }
  return 0.0;
}

void write_field(std::ostream& out, const NodeField& f) {
  const Grid2D& g = f.grid();
  const Bounds& b = g.bounds();
  out << std::setprecision(17);
  out << g.nx() << ' ' << g.ny() << ' ' << b.x_min << ' ' << b.x_max << ' ' << b.y_min << ' ' << b.y_max << '\n';
  for (int j = 1; j <= g.ny(); ++j) {
    for (int i = 1; i <= g.nx(); ++i) {
      if (i > 1) out << ' ';
      out << f.at(i, j);
    }
    out << '\n';
  }
}

NodeField read_field(std::istream& in) {
  int nx = 0;
  int ny = 0;
  Bounds b;
  if (!(in >> nx >> ny >> b.x_min >> b.x_max >> b.y_min >> b.y_max)) {
    throw IoError("malformed field header");
  }
  Grid2D g(b, nx, ny);
  NodeField f(g);
  for (int j = 1; j <= ny; ++j)
    for (int i = 1; i <= nx; ++i)
      if (!(in >> f.at(i, j))) throw IoError("truncated field data");
  return f;
}

void save_field(const std::filesystem::path& path, const NodeField& f) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_field(out, f);
  if (!out) throw IoError("write failed for " + path.string());
}

NodeField load_field(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_field(in);
}

}  // namespace umblt
