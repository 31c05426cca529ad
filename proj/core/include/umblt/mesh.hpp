#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

namespace umblt {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct Bounds {
  double x_min = -1.0;
  double x_max = 1.0;
  double y_min = -1.0;
  double y_max = 1.0;

  bool operator==(const Bounds&) const = default;
};

enum class NodeClass { interior, boundary, corner };

// Uniform node-centred grid on a rectangle. Nodes carry 1-based indices
// (i, j) with i along x and j along y; the linear index
//   I(i, j) = (i - 1) * ny + j
// is 1-based as well. Field storage is 0-based at offset I(i, j) - 1.
//
// Half-points (i + 1/2, j) and (i, j + 1/2) host edge quantities.
class Grid2D {
 public:
  Grid2D(Bounds bounds, int nx, int ny);

  const Bounds& bounds() const { return bounds_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double dx() const { return dx_; }
  double dy() const { return dy_; }
  std::size_t size() const { return static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_); }

  double x(int i) const { return bounds_.x_min + (i - 1) * dx_; }
  double y(int j) const { return bounds_.y_min + (j - 1) * dy_; }
  Point node(int i, int j) const { return {x(i), y(j)}; }
  // Midpoint between (i, j) and (i + 1, j).
  Point x_half(int i, int j) const { return {x(i) + 0.5 * dx_, y(j)}; }
  // Midpoint between (i, j) and (i, j + 1).
  Point y_half(int i, int j) const { return {x(i), y(j) + 0.5 * dy_}; }

  bool contains(int i, int j) const { return i >= 1 && i <= nx_ && j >= 1 && j <= ny_; }

  std::size_t linear_index(int i, int j) const;
  std::pair<int, int> node_of(std::size_t linear) const;
  std::size_t offset(int i, int j) const { return static_cast<std::size_t>(i - 1) * ny_ + (j - 1); }

  NodeClass classify(int i, int j) const;
  bool is_interior(int i, int j) const { return i > 1 && i < nx_ && j > 1 && j < ny_; }

  bool operator==(const Grid2D&) const = default;

 private:
  Bounds bounds_;
  int nx_;
  int ny_;
  double dx_;
  double dy_;
};

Grid2D build_grid(Bounds bounds, int nx, int ny);
NodeClass classify_node(const Grid2D& grid, int i, int j);

// Scalar field on the grid nodes.
class NodeField {
 public:
  explicit NodeField(const Grid2D& grid, double fill = 0.0);
  NodeField(const Grid2D& grid, std::vector<double> values);

  static NodeField sample(const Grid2D& grid, const std::function<double(Point)>& fn);

  const Grid2D& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }

  double& at(int i, int j) { return values_[grid_.offset(i, j)]; }
  double at(int i, int j) const { return values_[grid_.offset(i, j)]; }
  double& operator[](std::size_t k) { return values_[k]; }
  double operator[](std::size_t k) const { return values_[k]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  double min() const;
  double max() const;

 private:
  Grid2D grid_;
  std::vector<double> values_;
};

// Scalar field on the half-points. x_edge(i, j) sits between nodes (i, j)
// and (i + 1, j); y_edge(i, j) between (i, j) and (i, j + 1).
class EdgeField {
 public:
  explicit EdgeField(const Grid2D& grid, double fill = 0.0);

  static EdgeField sample(const Grid2D& grid, const std::function<double(Point)>& fn);

  const Grid2D& grid() const { return grid_; }

  double& x_edge(int i, int j) { return x_edges_[x_offset(i, j)]; }
  double x_edge(int i, int j) const { return x_edges_[x_offset(i, j)]; }
  double& y_edge(int i, int j) { return y_edges_[y_offset(i, j)]; }
  double y_edge(int i, int j) const { return y_edges_[y_offset(i, j)]; }

  // Value on the edge joining (i, j) to the neighbouring node (i2, j2).
  double between(int i, int j, int i2, int j2) const;

  std::span<double> x_edges() { return x_edges_; }
  std::span<const double> x_edges() const { return x_edges_; }
  std::span<double> y_edges() { return y_edges_; }
  std::span<const double> y_edges() const { return y_edges_; }

  double min() const;

 private:
  std::size_t x_offset(int i, int j) const { return static_cast<std::size_t>(i - 1) * grid_.ny() + (j - 1); }
  std::size_t y_offset(int i, int j) const { return static_cast<std::size_t>(i - 1) * (grid_.ny() - 1) + (j - 1); }

  Grid2D grid_;
  std::vector<double> x_edges_;
  std::vector<double> y_edges_;
};

// Injection onto a coarse grid whose nodes are a subset of the fine nodes.
NodeField restrict_fine_to_coarse(const NodeField& fine, const Grid2D& coarse);

// Refinement factor r with (fine - 1) = r * (coarse - 1) on both axes;
// throws when the grids are not nested.
int nesting_factor(const Grid2D& fine, const Grid2D& coarse);

enum class NormKind { L2, H1, Linf };

// Uniform-weight discrete norms: L2 uses dx*dy at every node; the H1
// seminorm part uses forward differences on the half-points.
double discrete_norm(const NodeField& f, NormKind kind);

// Text matrix format: header "nx ny x_min x_max y_min y_max", then ny rows of
// nx values (row j fixed, i varying).
void write_field(std::ostream& out, const NodeField& f);
NodeField read_field(std::istream& in);
void save_field(const std::filesystem::path& path, const NodeField& f);
NodeField load_field(const std::filesystem::path& path);

}  // namespace umblt
