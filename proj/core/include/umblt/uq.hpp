#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "umblt/coefficients.hpp"
#include "umblt/mesh.hpp"
#include "umblt/pipeline.hpp"
#include "umblt/solver.hpp"

namespace umblt {

inline constexpr int kDefaultPceOrder = 10;

// Phi_k = sqrt(2k + 1) P_k, orthonormal under the uniform density 1/2 on
// [-1, 1]. Throws for k outside [0, max_order] or t outside [-1, 1].
double legendre_eval(int k, double t, int max_order = kDefaultPceOrder);

struct PceBasis {
  int max_order = kDefaultPceOrder;

  double operator()(int k, double t) const { return legendre_eval(k, t, max_order); }
};

// Uniform variate in [-1, 1] from a counter-based generator; identical
// inputs give identical outputs on every platform.
double counter_uniform(std::uint64_t seed, std::uint64_t index, std::uint64_t attempt);

struct FourierMode {
  int n1 = 0;
  int n2 = 0;
  double sin_coeff = 0.0;
  double cos_coeff = 0.0;
};

// u_k(x) = sum over |n|_inf = k of a_n sin(pi n.x) + b_n cos(pi n.x).
struct FourierShell {
  int order = 0;
  std::vector<FourierMode> modes;

  double operator()(Point p) const;
};

// Wave vectors n in Z^2 with max(|n1|, |n2|) = k, in a fixed order.
std::vector<std::pair<int, int>> shell_vectors(int k);

// Frozen random coefficient fields u_k for D and sigma_a, k = 1..max_order.
class PerturbationEnsemble {
 public:
  PerturbationEnsemble(std::vector<FourierShell> diffusion, std::vector<FourierShell> absorption, std::uint64_t seed);

  int max_order() const { return static_cast<int>(diffusion_.size()); }
  std::uint64_t seed() const { return seed_; }
  bool frozen() const { return true; }
  const std::vector<FourierShell>& diffusion_shells() const { return diffusion_; }
  const std::vector<FourierShell>& absorption_shells() const { return absorption_; }

 private:
  std::vector<FourierShell> diffusion_;
  std::vector<FourierShell> absorption_;
  std::uint64_t seed_;
};

PerturbationEnsemble build_perturbation_ensemble(int max_order = kDefaultPceOrder, std::uint64_t seed = 0);

// sum_k u_k(x) Phi_k(xi) for D and sigma_a.
std::pair<ScalarFn, ScalarFn> draw_perturbation(const PerturbationEnsemble& e, double xi);

// Perturbation of D on nodes (for norms) and half-points (for assembly).
struct DiffusionPerturbation {
  NodeField nodes;
  EdgeField edges;
};

struct SampledPerturbation {
  DiffusionPerturbation diffusion;
  NodeField absorption;
};

// The ensemble's shells evaluated once on a grid, so that a draw is a
// weighted sum of stored fields.
class SampledEnsemble {
 public:
  SampledEnsemble(const PerturbationEnsemble& e, const Grid2D& grid);

  const Grid2D& grid() const { return grid_; }
  SampledPerturbation draw(double xi) const;

 private:
  Grid2D grid_;
  int max_order_;
  std::vector<DiffusionPerturbation> diffusion_;
  std::vector<NodeField> absorption_;
};

struct PerturbedCoefficients {
  SampledCoefficients coefficients;
  double delta_diffusion_h1 = 0.0;
  double delta_absorption_l2 = 0.0;
};

// D~ = D + u_D e_D |D|_H1 / |u_D|_H1 and sigma~ = sigma + u_s e_s |sigma|_L2 / |u_s|_L2.
// A tensor D is perturbed by the same scalar field times the identity, with
// norms taken of its trace mean.
// Throws InvalidArgument for a zero-norm perturbation at a positive level and
// PositivityError when D~ <= 0 or sigma~ < 0 somewhere.
PerturbedCoefficients perturb_coefficients(const SampledCoefficients& truth, const SampledPerturbation& u, double e_d,
                                           double e_sigma);

// L2 norm over interior nodes only (dx*dy weights).
double interior_l2(const NodeField& f);

struct UqSample {
  std::size_t id = 0;
  double xi = 0.0;
  double e_d = 0.0;
  double e_sigma = 0.0;
  double delta_diffusion_h1 = 0.0;
  double delta_absorption_l2 = 0.0;
  double delta_source_l2 = 0.0;
  int rejected = 0;  // redraws before an admissible draw
  bool ok = false;
  std::string error;
};

struct BaselineNorms {
  double diffusion_h1 = 0.0;
  double absorption_l2 = 0.0;
  double source_l2 = 0.0;
};

struct RelativeStd {
  double source = 0.0;
  double diffusion = 0.0;
  double absorption = 0.0;
};

// sqrt(mean |dX|^2) / |X| over the successful samples.
RelativeStd relative_std_metrics(const std::vector<UqSample>& samples, const BaselineNorms& norms);

struct BoundCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

// |L~ A~^-1 h - L A^-1 h| against
// |h| (|A^-1| |L~ - L| + |L~| |A~^-1| |A^-1| |A~ - A|), all 2-norms.
BoundCheck discrete_uq_bound(const SparseMatrix& l, const SparseMatrix& l_tilde, const SparseMatrix& a,
                             const SparseMatrix& a_tilde, const Vector& h, double norm_tol = 1e-3,
                             double slack = 1e-2);

struct EnsembleInputs {
  const SampledCoefficients* truth = nullptr;  // coefficients on the inversion grid
  const NodeField* psi0 = nullptr;
  const NodeField* internal = nullptr;          // H restricted to the inversion grid
  const NodeField* true_source = nullptr;
  const SampledEnsemble* modes = nullptr;
};

struct EnsembleConfig {
  std::size_t samples = 100;
  double e_d = 0.1;
  double e_sigma = 0.1;
  std::uint64_t seed = 0;
  unsigned jobs = 0;  // 0: hardware concurrency
  int max_redraws = 100;
  bool keep_mean = true;
  SolveOptions solve;
};

struct EnsembleResult {
  std::vector<UqSample> samples;
  std::optional<NodeField> mean_source;  // over successful samples
  std::size_t failures = 0;
  std::size_t rejections = 0;
  RelativeStd metrics;

  bool failed() const { return 10 * failures > samples.size(); }
};

// Sample k draws xi from counter_uniform(seed, k, attempt); results do not
// depend on the number of workers.
EnsembleResult run_ensemble(const EnsembleInputs& inputs, const EnsembleConfig& config, DiagnosticsLog* log = nullptr);

struct StabilityRow {
  std::string sweep;  // "D" or "sigma"
  double level = 0.0;
  double e_source = 0.0;
  double e_diffusion = 0.0;
  double e_absorption = 0.0;
};

struct BoundRow {
  std::size_t id = 0;
  BoundCheck check;
};

void write_distribution_csv(std::ostream& out, const std::vector<UqSample>& samples);
void write_stability_csv(std::ostream& out, const std::vector<StabilityRow>& rows);
void write_bound_csv(std::ostream& out, const std::vector<BoundRow>& rows);

}  // namespace umblt
