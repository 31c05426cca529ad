#include "umblt/coefficients.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "umblt/errors.hpp"

namespace umblt {

double Tensor2::min_eigenvalue() const {
  const double mean = 0.5 * (xx + yy);
  const double half_diff = 0.5 * (xx - yy);
  return mean - std::hypot(half_diff, xy);
}

double Tensor2::max_eigenvalue() const {
  const double mean = 0.5 * (xx + yy);
  const double half_diff = 0.5 * (xx - yy);
  return mean + std::hypot(half_diff, xy);
}

Tensor2 OpticalCoefficients::tensor_at(Point p) const {
  if (diffusion_tensor) return diffusion_tensor(p);
  const double d = diffusion(p);
  return {d, 0.0, d};
}

double ModulationParams::wave(Point p) const { return std::cos(q[0] * p.x + q[1] * p.y + phase); }

namespace {

struct Ellipse {
  double intensity;
  double a;
  double b;
  double x0;
  double y0;
  double phi_degrees;
};

// Shepp & Logan (1974), original intensities.
constexpr Ellipse kSheppLogan[] = {
    {2.00, 0.6900, 0.9200, 0.00, 0.0000, 0.0},   {-0.98, 0.6624, 0.8740, 0.00, -0.0184, 0.0},
    {-0.02, 0.1100, 0.3100, 0.22, 0.0000, -18.0}, {-0.02, 0.1600, 0.4100, -0.22, 0.0000, 18.0},
    {0.01, 0.2100, 0.2500, 0.00, 0.3500, 0.0},    {0.01, 0.0460, 0.0460, 0.00, 0.1000, 0.0},
    {0.01, 0.0460, 0.0460, 0.00, -0.1000, 0.0},   {0.01, 0.0460, 0.0230, -0.08, -0.6050, 0.0},
    {0.01, 0.0230, 0.0230, 0.00, -0.6060, 0.0},   {0.01, 0.0230, 0.0460, 0.06, -0.6050, 0.0},
};

double sign_or_zero(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

double shepp_logan_value(double x, double y) {
  double value = 0.0;
  for (const Ellipse& e : kSheppLogan) {
    const double phi = e.phi_degrees * std::numbers::pi / 180.0;
    const double c = std::cos(phi);
    const double s = std::sin(phi);
    const double dx = x - e.x0;
    const double dy = y - e.y0;
    const double u = (dx * c + dy * s) / e.a;
    const double v = (-dx * s + dy * c) / e.b;
    if (u * u + v * v <= 1.0) value += e.intensity;
  }
  return value;
}

SourceField shepp_logan(const Bounds& domain) {
  const double sx = 2.0 / (domain.x_max - domain.x_min);
  const double sy = 2.0 / (domain.y_max - domain.y_min);
  const double x0 = domain.x_min;
  const double y0 = domain.y_min;
  return {[=](Point p) { return shepp_logan_value(sx * (p.x - x0) - 1.0, sy * (p.y - y0) - 1.0); },
          "Shepp-Logan phantom (10 ellipses)"};
}

std::pair<OpticalCoefficients, SourceField> experiment_coefficients(int experiment_id) {
  OpticalCoefficients c;
  switch (experiment_id) {
    case 1:
      c.diffusion = [](Point p) {
        const double a = std::cos(p.x + 2.0 * p.y);
        const double b = std::sin(3.0 * p.x - 4.0 * p.y);
        return a * a - 3.0 * b * b + 5.0;
      };
      c.absorption = [](Point p) {
        const double a = std::cos(5.0 * p.x);
        const double b = std::sin(5.0 * p.y);
        return a * a + b * b + 1.0;
      };
      break;
    case 2:
      c.diffusion = [](Point p) { return 3.0 - std::max(std::abs(p.x), std::abs(p.y)); };
      // sgn(0) = 0, i.e. sigma_a = 3/2 on the circle itself.
      c.absorption = [](Point p) { return 1.5 - 0.5 * sign_or_zero(p.x * p.x + p.y * p.y - 0.8); };
      break;
    default:
      throw InvalidArgument("unknown experiment id " + std::to_string(experiment_id));
  }
  return {std::move(c), shepp_logan()};
}

OpticalCoefficients constant_coefficients(double diffusion, double absorption) {
  OpticalCoefficients c;
  c.diffusion = [diffusion](Point) { return diffusion; };
  c.absorption = [absorption](Point) { return absorption; };
  return c;
}

Tensor2 rotated_tensor(double a, double b, double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {a * c * c + b * s * s, (a - b) * c * s, a * s * s + b * c * c};
}

OpticalCoefficients anisotropic_rotated(double a, double b, double theta, double absorption) {
  if (!(a > 0.0) || !(b > 0.0)) throw InvalidArgument("rotated tensor needs positive principal values");
  const Tensor2 t = rotated_tensor(a, b, theta);
  OpticalCoefficients c;
  c.diffusion = [t](Point) { return 0.5 * (t.xx + t.yy); };
  c.diffusion_tensor = [t](Point) { return t; };
  c.absorption = [absorption](Point) { return absorption; };
  return c;
}

ModulatedValues modulate(const OpticalCoefficients& c, const SourceField& s, const ModulationParams& m, Point p) {
  const double w = m.wave(p);
  const double fd = 1.0 + m.epsilon * (2.0 * c.gamma - 1.0) * w;
  const double fs = 1.0 + m.epsilon * (2.0 * c.gamma + 1.0) * w;
  const double fq = 1.0 + m.epsilon * w;
  return {c.tensor_at(p).scaled(fd), fs * c.absorption(p), fq * s.value(p)};
}

std::pair<OpticalCoefficients, SourceField> modulated(const OpticalCoefficients& c, const SourceField& s,
                                                      const ModulationParams& m) {
  OpticalCoefficients out = c;
  const double kd = m.epsilon * (2.0 * c.gamma - 1.0);
  const double ks = m.epsilon * (2.0 * c.gamma + 1.0);
  const double kq = m.epsilon;
  out.diffusion = [d = c.diffusion, m, kd](Point p) { return (1.0 + kd * m.wave(p)) * d(p); };
  if (c.diffusion_tensor) {
    out.diffusion_tensor = [t = c.diffusion_tensor, m, kd](Point p) { return t(p).scaled(1.0 + kd * m.wave(p)); };
  }
  out.absorption = [a = c.absorption, m, ks](Point p) { return (1.0 + ks * m.wave(p)) * a(p); };
  SourceField src{[v = s.value, m, kq](Point p) { return (1.0 + kq * m.wave(p)) * v(p); }, s.support};
  return {std::move(out), std::move(src)};
}

SampledCoefficients sample_coefficients(const OpticalCoefficients& c, const Grid2D& grid) {
  if (!c.absorption || (!c.diffusion && !c.diffusion_tensor)) {
    throw InvalidArgument("coefficients are missing a diffusion or absorption function");
  }
  if (!(c.ell > 0.0)) throw InvalidArgument("extrapolation length must be positive");

  std::optional<TensorSamples> tensor;
  ScalarFn scalar = c.diffusion;
  if (c.anisotropic()) {
    const TensorFn& t = c.diffusion_tensor;
    auto component = [&t](double Tensor2::*field) { return [&t, field](Point p) { return t(p).*field; }; };
    tensor = TensorSamples{EdgeField::sample(grid, component(&Tensor2::xx)),
                           EdgeField::sample(grid, component(&Tensor2::xy)),
                           EdgeField::sample(grid, component(&Tensor2::yy)),
                           NodeField::sample(grid, component(&Tensor2::xx)),
                           NodeField::sample(grid, component(&Tensor2::xy)),
                           NodeField::sample(grid, component(&Tensor2::yy))};
    if (!scalar) scalar = [&t](Point p) { const Tensor2 v = t(p); return 0.5 * (v.xx + v.yy); };
  }
  return SampledCoefficients{grid,
                             EdgeField::sample(grid, scalar),
                             NodeField::sample(grid, scalar),
                             NodeField::sample(grid, c.absorption),
                             std::move(tensor),
                             c.gamma,
                             c.ell};
}

NodeField sample_source(const SourceField& s, const Grid2D& grid) { return NodeField::sample(grid, s.value); }

SampledFields sample_fields(const OpticalCoefficients& c, const SourceField& s, const Grid2D& grid) {
  return {sample_coefficients(c, grid), sample_source(s, grid)};
}

HypothesisReport check_hypotheses(const SampledCoefficients& c, double identity_tolerance) {
  const Grid2D& g = c.grid;
  HypothesisReport r;
  r.min_eigenvalue = std::numeric_limits<double>::infinity();
  r.max_eigenvalue = -std::numeric_limits<double>::infinity();

  auto visit = [&r](const Tensor2& t) {
    r.min_eigenvalue = std::min(r.min_eigenvalue, t.min_eigenvalue());
    r.max_eigenvalue = std::max(r.max_eigenvalue, t.max_eigenvalue());
  };
  auto node_tensor = [&c](int i, int j) -> Tensor2 {
    if (c.tensor) return {c.tensor->node_xx.at(i, j), c.tensor->node_xy.at(i, j), c.tensor->node_yy.at(i, j)};
    const double d = c.diffusion_nodes.at(i, j);
    return {d, 0.0, d};
  };

  for (int i = 1; i <= g.nx(); ++i) {
    for (int j = 1; j <= g.ny(); ++j) {
      const Tensor2 t = node_tensor(i, j);
      visit(t);
      if (g.classify(i, j) != NodeClass::interior) {
        const double dev = std::max(std::abs(t.min_eigenvalue() - 1.0), std::abs(t.max_eigenvalue() - 1.0));
        r.max_boundary_identity_deviation = std::max(r.max_boundary_identity_deviation, dev);
      }
    }
  }
  if (c.tensor) {
    const auto& t = *c.tensor;
    for (std::size_t k = 0; k < t.xx.x_edges().size(); ++k)
      visit({t.xx.x_edges()[k], t.xy.x_edges()[k], t.yy.x_edges()[k]});
    for (std::size_t k = 0; k < t.xx.y_edges().size(); ++k)
      visit({t.xx.y_edges()[k], t.xy.y_edges()[k], t.yy.y_edges()[k]});
  } else {
    for (double d : c.diffusion.x_edges()) visit({d, 0.0, d});
    for (double d : c.diffusion.y_edges()) visit({d, 0.0, d});
  }

  r.min_absorption = c.absorption.min();
  r.elliptic = r.min_eigenvalue > 0.0;
  r.absorption_nonnegative = r.min_absorption >= 0.0;
  r.identity_near_boundary = r.max_boundary_identity_deviation <= identity_tolerance;
  return r;
}

}  // namespace umblt
