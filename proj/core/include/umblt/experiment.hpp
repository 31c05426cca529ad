#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "umblt/assembly.hpp"
#include "umblt/coefficients.hpp"

namespace umblt {

enum class SweepMode { both, D_only, sigma_only, joint };

enum class CoefficientSet { experiment1, experiment2, constant, anisotropic_rotated, custom };

std::string_view coefficient_set_name(CoefficientSet s);
// Accepts the names above and the shorthands "1" and "2".
std::optional<CoefficientSet> parse_coefficient_set(std::string_view name);

std::string_view sweep_name(SweepMode m);
std::optional<SweepMode> parse_sweep(std::string_view name);

// Comma separated list of reals, e.g. "0.02,0.04".
std::vector<double> parse_levels(std::string_view list);
std::string format_levels(const std::vector<double>& levels);

struct ExperimentConfig {
  CoefficientSet experiment = CoefficientSet::experiment1;
  // Parameters of the `constant` and `anisotropic-rotated` sets.
  double constant_d = 1.0;
  double constant_sigma = 1.0;
  double aniso_a = 2.0;
  double aniso_b = 1.0;
  double aniso_theta = 0.5;
  double aniso_sigma = 1.0;
  // Coefficients and source for CoefficientSet::custom (library use only).
  std::optional<std::pair<OpticalCoefficients, SourceField>> custom;
  int fine_n = 101;
  int coarse_n = 51;
  std::size_t samples = 100;
  std::vector<double> levels{0.02, 0.04, 0.06, 0.08, 0.10};
  SweepMode sweep = SweepMode::both;
  double gamma = 1.0;
  double ell = 2.0;
  std::optional<BoundarySelection> partial_gamma;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "umblt_out";
  std::size_t bound_checks = 10;
  int bound_grid_n = 21;
  unsigned jobs = 0;
  bool svg = false;

  // Paper-scale grids and sample count.
  void apply_paper_scale();
};

// Throws InvalidArgument naming the first offending field.
void validate(const ExperimentConfig& cfg);

// Coefficients (with cfg.gamma and cfg.ell applied) and source of the run.
std::pair<OpticalCoefficients, SourceField> experiment_truth(const ExperimentConfig& cfg);

// Flat "key = value" text with the CLI option names as keys; timing and
// build information go to sections that the config reader ignores.
void write_manifest(std::ostream& out, const ExperimentConfig& cfg,
                    const std::vector<std::pair<std::string, double>>& timings);

struct ExperimentOutcome {
  int exit_code = 0;  // 0 ok, 1 too many sample failures, 2 invalid config, 3 I/O failure
  std::string message;
  double baseline_error = 0.0;  // relative interior L2 error with exact coefficients
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitSampleFailures = 1;
inline constexpr int kExitInvalidConfig = 2;
inline constexpr int kExitIo = 3;

// Runs the two-grid experiment and writes distribution.csv, stability.csv,
// bound.csv, field dumps, pipeline.log, summary.ini and manifest.ini into
// cfg.out_dir. Progress lines go to `progress` when given.
ExperimentOutcome run_experiment(const ExperimentConfig& cfg, std::ostream* progress = nullptr);

}  // namespace umblt
