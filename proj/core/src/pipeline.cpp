#include "umblt/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "umblt/errors.hpp"

namespace umblt {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

NodeField to_field(const Grid2D& g, const Vector& v) {
  return NodeField(g, std::vector<double>(v.data(), v.data() + v.size()));
}

void require_grid(const NodeField& f, const Grid2D& g, const char* name) {
  if (!(f.grid() == g)) throw InvalidArgument(std::string(name) + " lives on a different grid");
}

// Throws at the first node with psi <= 0.
void require_positive(const NodeField& psi, const char* what) {
  const Grid2D& g = psi.grid();
  for (int i = 1; i <= g.nx(); ++i)
    for (int j = 1; j <= g.ny(); ++j)
      if (!(psi.at(i, j) > 0.0)) throw PositivityError(what, i, j, psi.at(i, j));
}

void log_stage(DiagnosticsLog* log, std::string stage, double residual, double min_psi, double seconds) {
  if (log) log->record({std::move(stage), residual, min_psi, seconds});
}

}  // namespace

void DiagnosticsLog::record(StageRecord r) {
  std::lock_guard lock(mutex_);
  records_.push_back(std::move(r));
}

std::vector<StageRecord> DiagnosticsLog::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

void DiagnosticsLog::write(std::ostream& out) const {
  std::lock_guard lock(mutex_);
  for (const StageRecord& r : records_) {
    out << "stage=" << r.stage << " residual=" << std::setprecision(6) << r.residual << " min_psi=" << r.min_psi
        << " seconds=" << r.seconds << '\n';
  }
}

NodeField forward_solve(const SampledCoefficients& c, const NodeField& source,
                        const std::optional<NodeField>& robin_data, const SolveOptions& options,
                        DiagnosticsLog* log) {
  const auto start = Clock::now();
  require_grid(source, c.grid, "source");
  SparseSystem system = assemble_forward_matrix(c);
  system.rhs = assemble_rhs(source, RhsKind::source);
  if (robin_data) {
    require_grid(*robin_data, c.grid, "Robin data");
    system.rhs += assemble_rhs(*robin_data, RhsKind::boundary);
  }
  const SolveReport report = solve_sparse(system, options);
  log_stage(log, "forward", report.residual_norm, std::numeric_limits<double>::quiet_NaN(), seconds_since(start));
  return to_field(c.grid, report.solution);
}

AdjointResult adjoint_positive(const SampledCoefficients& c, const std::optional<BoundarySelection>& gamma_set,
                               const NodeField& f, const SolveOptions& options, DiagnosticsLog* log) {
  const auto start = Clock::now();
  require_grid(f, c.grid, "Dirichlet data");
  const BoundarySelection gamma = gamma_set.value_or(BoundarySelection::whole_boundary());
  const SparseSystem system = assemble_mixed_adjoint(c, gamma, f);
  const SolveReport report = solve_sparse(system, options);
  NodeField psi = to_field(c.grid, report.solution);
  log_stage(log, gamma_set ? "adjoint_partial" : "adjoint_full", report.residual_norm, psi.min(),
            seconds_since(start));
  require_positive(psi, "adjoint solution is not positive");

  // Robin data of the adjoint: L psi on the Dirichlet rows, and by
  // construction zero on the remaining Robin rows.
  const Grid2D& g = c.grid;
  const Vector l_psi = assemble_forward_matrix(c).matrix * report.solution;
  NodeField data(g);
  for (int i = 1; i <= g.nx(); ++i)
    for (int j = 1; j <= g.ny(); ++j)
      if (!g.is_interior(i, j) && gamma.contains(g, i, j))
        data.at(i, j) = l_psi[static_cast<Eigen::Index>(g.offset(i, j))];
  return {std::move(psi), std::move(data), gamma};
}

AdjointResult adjoint_positive(const SampledCoefficients& c, const std::optional<BoundarySelection>& gamma_set,
                               double f, const SolveOptions& options, DiagnosticsLog* log) {
  return adjoint_positive(c, gamma_set, NodeField(c.grid, f), options, log);
}

InternalData internal_data(const SampledCoefficients& c, const NodeField& phi0, const NodeField& psi0,
                           const NodeField& source) {
  require_grid(phi0, c.grid, "phi0");
  require_grid(psi0, c.grid, "psi0");
  require_grid(source, c.grid, "source");
  require_positive(psi0, "internal data needs a positive adjoint");

  const NodeField product = staggered_gradient_product(c, psi0, phi0);
  const double g = c.gamma;
  NodeField h(c.grid);
  for (std::size_t k = 0; k < h.size(); ++k) {
    h[k] = (2.0 * g - 1.0) * product[k] + (2.0 * g + 1.0) * c.absorption[k] * phi0[k] * psi0[k] -
           psi0[k] * source[k];
    if (!std::isfinite(h[k])) throw Error("internal data is not finite");
  }
  return {std::move(h), psi0, g, c.grid};
}

ReconstructionResult reconstruct_source(const SampledCoefficients& believed, const NodeField& psi0, const NodeField& H,
                                        const SolveOptions& options, DiagnosticsLog* log) {
  const auto start = Clock::now();
  const Grid2D& g = believed.grid;
  require_grid(psi0, g, "psi0");
  require_grid(H, g, "internal data");
  require_positive(psi0, "reconstruction needs a positive adjoint");

  SparseSystem system = assemble_internal_matrix(believed, psi0);
  system.rhs = assemble_rhs(H, RhsKind::internal);
  SolveReport report = solve_sparse(system, options);

  const Vector s = assemble_forward_matrix(believed).matrix * report.solution;
  NodeField source(g);
  for (int i = 2; i < g.nx(); ++i)
    for (int j = 2; j < g.ny(); ++j) source.at(i, j) = s[static_cast<Eigen::Index>(g.offset(i, j))];

  ReconstructionResult out{std::move(source), to_field(g, report.solution), report.residual_norm, psi0.min(),
                           std::move(report)};
  log_stage(log, "reconstruct", out.internal_residual, out.min_psi, seconds_since(start));
  return out;
}

double boundary_functional(const NodeField& g, const NodeField& phi, double ell) {
  const Grid2D& grid = g.grid();
  require_grid(phi, grid, "phi");
  if (!(ell > 0.0)) throw InvalidArgument("extrapolation length must be positive");
  double sum = 0.0;
  for (int i = 1; i <= grid.nx(); ++i) {
    for (int j = 1; j <= grid.ny(); ++j) {
      if (grid.classify(i, j) != NodeClass::boundary) continue;
      const double w = (i == 1 || i == grid.nx()) ? grid.dy() : grid.dx();
      sum += w * g.at(i, j) * phi.at(i, j);
    }
  }
  return -sum / ell;
}

double staggered_internal_functional(const SampledCoefficients& c, const NodeField& phi0, const NodeField& psi0,
                                     const NodeField& source, const ModulationParams& wave) {
  if (c.anisotropic()) throw InvalidArgument("staggered internal functional supports isotropic media only");
  const Grid2D& g = c.grid;
  require_grid(phi0, g, "phi0");
  require_grid(psi0, g, "psi0");
  require_grid(source, g, "source");
  const double cross = 2.0 * c.gamma - 1.0;
  const double area = g.dx() * g.dy();

  double grad = 0.0;
  // x-edges on rows j = 2..ny-1 and y-edges on columns i = 2..nx-1 are
  // exactly the edges touching an interior node.
  for (int i = 1; i < g.nx(); ++i) {
    for (int j = 2; j < g.ny(); ++j) {
      const double dphi = phi0.at(i + 1, j) - phi0.at(i, j);
      const double dpsi = psi0.at(i + 1, j) - psi0.at(i, j);
      grad += wave.wave(g.x_half(i, j)) * c.diffusion.x_edge(i, j) * dphi * dpsi * g.dy() / g.dx();
    }
  }
  for (int i = 2; i < g.nx(); ++i) {
    for (int j = 1; j < g.ny(); ++j) {
      const double dphi = phi0.at(i, j + 1) - phi0.at(i, j);
      const double dpsi = psi0.at(i, j + 1) - psi0.at(i, j);
      grad += wave.wave(g.y_half(i, j)) * c.diffusion.y_edge(i, j) * dphi * dpsi * g.dx() / g.dy();
    }
  }

  double zeroth = 0.0;
  for (int i = 2; i < g.nx(); ++i) {
    for (int j = 2; j < g.ny(); ++j) {
      const double p = phi0.at(i, j);
      const double q = psi0.at(i, j);
      zeroth += wave.wave(g.node(i, j)) *
                ((2.0 * c.gamma + 1.0) * c.absorption.at(i, j) * p * q - q * source.at(i, j));
    }
  }
  return cross * grad + area * zeroth;
}

double nodal_internal_functional(const NodeField& H, const ModulationParams& wave) {
  const Grid2D& g = H.grid();
  double sum = 0.0;
  for (int i = 2; i < g.nx(); ++i)
    for (int j = 2; j < g.ny(); ++j) sum += H.at(i, j) * wave.wave(g.node(i, j));
  return g.dx() * g.dy() * sum;
}

MeasurementExpansionReport simulate_measurement_expansion(const OpticalCoefficients& c, const SourceField& s,
                                                          const Grid2D& grid, const ModulationParams& wave,
                                                          const std::vector<double>& epsilons,
                                                          const std::optional<BoundarySelection>& gamma_set,
                                                          const SolveOptions& options) {
  if (c.anisotropic()) throw InvalidArgument("measurement expansion supports isotropic media only");
  if (epsilons.empty()) throw InvalidArgument("epsilon ladder is empty");

  const SampledFields base = sample_fields(c, s, grid);
  const NodeField phi0 = forward_solve(base.coefficients, base.source, std::nullopt, options);
  const AdjointResult adjoint = adjoint_positive(base.coefficients, gamma_set, 1.0, options);
  const InternalData data = internal_data(base.coefficients, phi0, adjoint.psi, base.source);

  MeasurementExpansionReport report;
  report.baseline = boundary_functional(adjoint.robin_data, phi0, c.ell);
  report.internal_functional = staggered_internal_functional(base.coefficients, phi0, adjoint.psi, base.source, wave);
  report.nodal_functional = nodal_internal_functional(data.H, wave);

  std::vector<double> eps_used;
  std::vector<double> remainders;
  std::vector<double> quotient_errors;
  for (double eps : epsilons) {
    if (!(eps > 0.0)) throw InvalidArgument("epsilon values must be positive");
    ModulationParams m = wave;
    m.epsilon = eps;
    const auto [mc, ms] = modulated(c, s, m);
    const SampledFields f = sample_fields(mc, ms, grid);
    const NodeField phi = forward_solve(f.coefficients, f.source, std::nullopt, options);

    ExpansionPoint p;
    p.epsilon = eps;
    p.measurement = boundary_functional(adjoint.robin_data, phi, c.ell);
    p.difference_quotient = (p.measurement - report.baseline) / eps;
    p.remainder = std::abs(p.measurement - report.baseline - eps * report.internal_functional);
    report.points.push_back(p);

    eps_used.push_back(eps);
    remainders.push_back(p.remainder);
    quotient_errors.push_back(std::abs(p.difference_quotient - report.internal_functional));
  }
  if (eps_used.size() >= 2) {
    report.remainder_order = loglog_slope(eps_used, remainders);
    report.quotient_order = loglog_slope(eps_used, quotient_errors);
  }
  return report;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("slope fit needs two or more matching points");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(x[k] > 0.0) || !(y[k] > 0.0)) throw InvalidArgument("slope fit needs positive data");
    const double lx = std::log(x[k]);
    const double ly = std::log(y[k]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw InvalidArgument("slope fit needs distinct abscissae");
  return (n * sxy - sx * sy) / denom;
}

}  // namespace umblt
