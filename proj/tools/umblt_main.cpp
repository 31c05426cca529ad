// umblt: run the two-grid reconstruction experiment with a perturbation
// ensemble and write CSV tables, field dumps and a replayable manifest.

#include <exception>
#include <iostream>
#include <string>

#if __has_include(<CLI/CLI.hpp>)
#include <CLI/CLI.hpp>
#else
#include "CLI11.hpp"
#endif
#include "umblt/errors.hpp"
#include "umblt/experiment.hpp"

int main(int argc, char** argv) {
  umblt::ExperimentConfig cfg;
  std::string experiment{umblt::coefficient_set_name(cfg.experiment)};
  std::string levels = umblt::format_levels(cfg.levels);
  std::string sweep{umblt::sweep_name(cfg.sweep)};
  std::string partial;
  std::string out_dir = cfg.out_dir.string();
  bool paper_scale = false;
  bool quiet = false;

  CLI::App app{"Ultrasound-modulated bioluminescence tomography: reconstruction and uncertainty study"};
  app.set_config("--config", "", "Read options from a key = value file (e.g. a manifest.ini)");
  app.allow_config_extras(CLI::config_extras_mode::ignore);

  app.add_option("--experiment", experiment,
                 "Coefficient set: 1 | 2 | experiment1 | experiment2 | constant | anisotropic-rotated")
      ->capture_default_str();
  app.add_option("--constant-d", cfg.constant_d, "D of the constant set")->capture_default_str();
  app.add_option("--constant-sigma", cfg.constant_sigma, "sigma_a of the constant set")->capture_default_str();
  app.add_option("--aniso-a", cfg.aniso_a, "First principal value of the rotated tensor")->capture_default_str();
  app.add_option("--aniso-b", cfg.aniso_b, "Second principal value of the rotated tensor")->capture_default_str();
  app.add_option("--aniso-theta", cfg.aniso_theta, "Rotation angle of the tensor (radians)")->capture_default_str();
  app.add_option("--aniso-sigma", cfg.aniso_sigma, "sigma_a of the rotated-tensor set")->capture_default_str();
  auto* samples = app.add_option("--samples", cfg.samples, "Ensemble size N")->capture_default_str();
  app.add_option("--levels", levels, "Relative uncertainty levels, comma separated")->capture_default_str();
  app.add_option("--sweep", sweep, "both | D_only | sigma_only | joint")->capture_default_str();
  app.add_option("--gamma", cfg.gamma, "Elasto-optical constant")->capture_default_str();
  app.add_option("--ell", cfg.ell, "Extrapolation length")->capture_default_str();
  app.add_option("--partial-gamma", partial, "Dirichlet sides of the adjoint, e.g. top,left (default: full data)");
  auto* fine_n = app.add_option("--fine-n", cfg.fine_n, "Fine grid nodes per axis")->capture_default_str();
  auto* coarse_n = app.add_option("--coarse-n", cfg.coarse_n, "Coarse grid nodes per axis")->capture_default_str();
  app.add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
  app.add_option("--out-dir", out_dir, "Output directory")->envname("UMBLT_OUT")->capture_default_str();
  app.add_option("--jobs", cfg.jobs, "Worker threads (0: all cores)")->capture_default_str();
  app.add_flag("--paper-scale", paper_scale, "Fine 401^2, coarse 201^2, N = 1000 unless given explicitly");
  app.add_option("--bound-checks", cfg.bound_checks, "Samples checked against the discrete bound")
      ->capture_default_str();
  app.add_option("--bound-grid-n", cfg.bound_grid_n, "Grid nodes per axis for the bound checks")
      ->capture_default_str();
  app.add_flag("--svg", cfg.svg, "Also write SVG plots");
  app.add_flag("-q,--quiet", quiet, "No progress output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return umblt::kExitInvalidConfig;
  }

  try {
    if (paper_scale) {
      umblt::ExperimentConfig scaled;
      scaled.apply_paper_scale();
      if (fine_n->count() == 0) cfg.fine_n = scaled.fine_n;
      if (coarse_n->count() == 0) cfg.coarse_n = scaled.coarse_n;
      if (samples->count() == 0) cfg.samples = scaled.samples;
    }
    const auto set = umblt::parse_coefficient_set(experiment);
    if (!set || *set == umblt::CoefficientSet::custom) {
      throw umblt::InvalidArgument("unknown experiment '" + experiment + "'");
    }
    cfg.experiment = *set;
    cfg.levels = umblt::parse_levels(levels);
    const auto mode = umblt::parse_sweep(sweep);
    if (!mode) throw umblt::InvalidArgument("unknown sweep mode '" + sweep + "'");
    cfg.sweep = *mode;
    if (!partial.empty()) {
      auto selection = umblt::BoundarySelection::parse(partial);
      cfg.partial_gamma = std::move(selection);
    }
    cfg.out_dir = out_dir;
  } catch (const umblt::InvalidArgument& e) {
    std::cerr << "umblt: invalid configuration: " << e.what() << '\n';
    return umblt::kExitInvalidConfig;
  }

  try {
    const umblt::ExperimentOutcome outcome = umblt::run_experiment(cfg, quiet ? nullptr : &std::cout);
    if (outcome.exit_code != umblt::kExitOk) {
      std::cerr << "umblt: " << outcome.message << '\n';
    } else if (!quiet) {
      std::cout << "artifacts written to " << cfg.out_dir.string() << '\n';
    }
    return outcome.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "umblt: " << e.what() << '\n';
    return umblt::kExitSampleFailures;
  }
}
