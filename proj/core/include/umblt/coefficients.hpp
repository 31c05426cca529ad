#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <utility>

#include "umblt/mesh.hpp"

namespace umblt {

using ScalarFn = std::function<double(Point)>;

// Symmetric 2x2 tensor [[xx, xy], [xy, yy]].
struct Tensor2 {
  double xx = 0.0;
  double xy = 0.0;
  double yy = 0.0;

  double min_eigenvalue() const;
  double max_eigenvalue() const;
  Tensor2 scaled(double s) const { return {s * xx, s * xy, s * yy}; }
};

using TensorFn = std::function<Tensor2(Point)>;

// Optical parameters of the diffusion model
//   -div(D grad u) + sigma_a u = S,   u + ell nu.D grad u = g.
// D is isotropic (scalar `diffusion`) unless `diffusion_tensor` is set.
struct OpticalCoefficients {
  ScalarFn diffusion;
  TensorFn diffusion_tensor;
  ScalarFn absorption;
  double gamma = 1.0;  // elasto-optical constant
  double ell = 2.0;    // extrapolation length

  bool anisotropic() const { return static_cast<bool>(diffusion_tensor); }
  Tensor2 tensor_at(Point p) const;
};

struct SourceField {
  ScalarFn value;
  std::string support;
};

// Plane-wave acoustic modulation cos(q.x + phase) with amplitude epsilon.
struct ModulationParams {
  double epsilon = 0.0;
  std::array<double, 2> q{0.0, 0.0};
  double phase = 0.0;

  double wave(Point p) const;
};

// Standard 10-ellipse Shepp-Logan table with the original intensities,
// mapped from [-1, 1]^2 onto `domain`.
SourceField shepp_logan(const Bounds& domain = {});
double shepp_logan_value(double x, double y);

// Coefficients and Shepp-Logan source of the two reference experiments.
std::pair<OpticalCoefficients, SourceField> experiment_coefficients(int experiment_id);

OpticalCoefficients constant_coefficients(double diffusion, double absorption);

// R(theta) diag(a, b) R(theta)^T with constant absorption.
OpticalCoefficients anisotropic_rotated(double a, double b, double theta, double absorption);
Tensor2 rotated_tensor(double a, double b, double theta);

struct ModulatedValues {
  Tensor2 diffusion;  // xx == yy, xy == 0 for isotropic media
  double absorption = 0.0;
  double source = 0.0;
};

ModulatedValues modulate(const OpticalCoefficients& c, const SourceField& s, const ModulationParams& m, Point p);

// Coefficient and source functions with the modulation applied pointwise.
std::pair<OpticalCoefficients, SourceField> modulated(const OpticalCoefficients& c, const SourceField& s,
                                                      const ModulationParams& m);

// Tensor diffusion samples on half-points and nodes.
struct TensorSamples {
  EdgeField xx;
  EdgeField xy;
  EdgeField yy;
  NodeField node_xx;
  NodeField node_xy;
  NodeField node_yy;
};

// Coefficients sampled on a grid. Isotropic D lives on the half-points
// (`diffusion`) and, for norms and diagnostics, on the nodes.
struct SampledCoefficients {
  Grid2D grid;
  EdgeField diffusion;
  NodeField diffusion_nodes;
  NodeField absorption;
  std::optional<TensorSamples> tensor;
  double gamma = 1.0;
  double ell = 2.0;

  bool anisotropic() const { return tensor.has_value(); }
};

SampledCoefficients sample_coefficients(const OpticalCoefficients& c, const Grid2D& grid);
NodeField sample_source(const SourceField& s, const Grid2D& grid);

struct SampledFields {
  SampledCoefficients coefficients;
  NodeField source;
};

SampledFields sample_fields(const OpticalCoefficients& c, const SourceField& s, const Grid2D& grid);

struct HypothesisReport {
  double min_eigenvalue = 0.0;            // ellipticity constant estimate
  double max_eigenvalue = 0.0;
  double min_absorption = 0.0;
  double max_boundary_identity_deviation = 0.0;  // max |D - I| on boundary nodes
  bool identity_near_boundary = false;    // D = I near the boundary
  bool elliptic = false;                  // D positive definite
  bool absorption_nonnegative = false;
  bool all_hold() const { return identity_near_boundary && elliptic && absorption_nonnegative; }
};

// Violations are reported, never thrown.
HypothesisReport check_hypotheses(const SampledCoefficients& c, double identity_tolerance = 1e-12);

}  // namespace umblt
