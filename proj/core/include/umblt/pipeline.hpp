#pragma once

#include <iosfwd>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "umblt/assembly.hpp"
#include "umblt/coefficients.hpp"
#include "umblt/mesh.hpp"
#include "umblt/solver.hpp"

namespace umblt {

struct StageRecord {
  std::string stage;
  double residual = 0.0;
  double min_psi = 0.0;  // NaN when the stage has no adjoint
  double seconds = 0.0;
};

// Thread-safe structured log of pipeline stages.
class DiagnosticsLog {
 public:
  void record(StageRecord r);
  std::vector<StageRecord> records() const;
  // One line per stage: "stage=<name> residual=<r> min_psi=<m> seconds=<t>".
  void write(std::ostream& out) const;

 private:
  mutable std::mutex mutex_;
  std::vector<StageRecord> records_;
};

// L phi = s with source rows on interior nodes and Robin data on the
// boundary (zero when `robin_data` is absent).
NodeField forward_solve(const SampledCoefficients& c, const NodeField& source,
                        const std::optional<NodeField>& robin_data = std::nullopt, const SolveOptions& options = {},
                        DiagnosticsLog* log = nullptr);

struct AdjointResult {
  NodeField psi;
  // (L psi) on boundary and corner nodes, zero on interior nodes. In partial
  // data mode it vanishes off Gamma because those rows have zero data.
  NodeField robin_data;
  BoundarySelection gamma_set;
};

// Positive solution of the homogeneous diffusion equation with Dirichlet
// data f on Gamma (the whole boundary when absent). Throws PositivityError
// at the first node where psi <= 0.
AdjointResult adjoint_positive(const SampledCoefficients& c, const std::optional<BoundarySelection>& gamma_set,
                               const NodeField& f, const SolveOptions& options = {}, DiagnosticsLog* log = nullptr);
AdjointResult adjoint_positive(const SampledCoefficients& c, const std::optional<BoundarySelection>& gamma_set,
                               double f = 1.0, const SolveOptions& options = {}, DiagnosticsLog* log = nullptr);

struct InternalData {
  NodeField H;
  NodeField psi;
  double gamma = 1.0;
  Grid2D provenance;  // grid the data was generated on
};

// H = (2 gamma - 1) D grad phi . grad psi + (2 gamma + 1) sigma_a phi psi - psi S.
// Boundary values use one-sided products and only serve diagnostics.
InternalData internal_data(const SampledCoefficients& c, const NodeField& phi0, const NodeField& psi0,
                           const NodeField& source);

struct ReconstructionResult {
  NodeField source;  // interior values; boundary entries are zero and carry no meaning
  NodeField phi0;
  double internal_residual = 0.0;  // ||A_psi phi - h|| / ||h||
  double min_psi = 0.0;
  SolveReport solve;
};

ReconstructionResult reconstruct_source(const SampledCoefficients& believed, const NodeField& psi0, const NodeField& H,
                                        const SolveOptions& options = {}, DiagnosticsLog* log = nullptr);

// -(1/ell) * boundary quadrature of g * phi. Side nodes get the edge length
// of their side; corners get weight zero because no side row couples to
// them, which keeps the discrete Green identity exact.
double boundary_functional(const NodeField& g, const NodeField& phi, double ell);

// Quadrature of H_psi * w pairing every edge product with the wave at the
// edge midpoint. It equals the derivative dM/d(eps) at eps = 0 of the
// discrete measurement exactly.
double staggered_internal_functional(const SampledCoefficients& c, const NodeField& phi0, const NodeField& psi0,
                                     const NodeField& source, const ModulationParams& wave);

// Plain nodal rule dx*dy * sum over interior nodes of H * w.
double nodal_internal_functional(const NodeField& H, const ModulationParams& wave);

struct ExpansionPoint {
  double epsilon = 0.0;
  double measurement = 0.0;          // M(eps)
  double difference_quotient = 0.0;  // (M(eps) - M(0)) / eps
  double remainder = 0.0;            // |M(eps) - M(0) - eps * I|
};

struct MeasurementExpansionReport {
  double baseline = 0.0;            // M(0)
  double internal_functional = 0.0;  // staggered quadrature I
  double nodal_functional = 0.0;
  std::vector<ExpansionPoint> points;
  double remainder_order = 0.0;   // log-log slope of the remainder in eps
  double quotient_order = 0.0;    // log-log slope of |quotient - I|
};

// Isotropic media only. The modulated forward problems resample the
// modulated coefficient functions on `grid`.
MeasurementExpansionReport simulate_measurement_expansion(const OpticalCoefficients& c, const SourceField& s,
                                                          const Grid2D& grid, const ModulationParams& wave,
                                                          const std::vector<double>& epsilons,
                                                          const std::optional<BoundarySelection>& gamma_set,
                                                          const SolveOptions& options = {});

// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace umblt
