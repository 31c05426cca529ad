#include "umblt/experiment.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "umblt/errors.hpp"
#include "umblt/pipeline.hpp"
#include "umblt/svg.hpp"
#include "umblt/uq.hpp"
#include "umblt/version.hpp"

namespace umblt {

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

void close_output(std::ofstream& out, const fs::path& path) {
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

template <class Fn>
void write_file(const fs::path& path, Fn&& fn) {
  std::ofstream out = open_output(path);
  fn(out);
  close_output(out, path);
}

double relative_interior_error(const NodeField& approx, const NodeField& truth) {
  NodeField delta(truth.grid());
  const Grid2D& g = truth.grid();
  for (int i = 2; i < g.nx(); ++i)
    for (int j = 2; j < g.ny(); ++j) delta.at(i, j) = approx.at(i, j) - truth.at(i, j);
  return interior_l2(delta) / interior_l2(truth);
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::pair<double, double> distribution_levels(const ExperimentConfig& cfg) {
  const double top = *std::max_element(cfg.levels.begin(), cfg.levels.end());
  switch (cfg.sweep) {
    case SweepMode::D_only: return {top, 0.0};
    case SweepMode::sigma_only: return {0.0, top};
    case SweepMode::both:
    case SweepMode::joint: break;
  }
  return {top, top};
}

class Progress {
 public:
  explicit Progress(std::ostream* out) : out_(out) {}
  void operator()(const std::string& line) const {
    if (out_) *out_ << line << std::endl;
  }

 private:
  std::ostream* out_;
};

}  // namespace

std::string_view coefficient_set_name(CoefficientSet s) {
  switch (s) {
    case CoefficientSet::experiment1: return "experiment1";
    case CoefficientSet::experiment2: return "experiment2";
    case CoefficientSet::constant: return "constant";
    case CoefficientSet::anisotropic_rotated: return "anisotropic-rotated";
    case CoefficientSet::custom: return "custom";
  }
  return "?";
}

std::optional<CoefficientSet> parse_coefficient_set(std::string_view name) {
  if (name == "1") return CoefficientSet::experiment1;
  if (name == "2") return CoefficientSet::experiment2;
  for (CoefficientSet s : {CoefficientSet::experiment1, CoefficientSet::experiment2, CoefficientSet::constant,
                           CoefficientSet::anisotropic_rotated, CoefficientSet::custom})
    if (coefficient_set_name(s) == name) return s;
  return std::nullopt;
}

std::pair<OpticalCoefficients, SourceField> experiment_truth(const ExperimentConfig& cfg) {
  std::pair<OpticalCoefficients, SourceField> out;
  switch (cfg.experiment) {
    case CoefficientSet::experiment1: out = experiment_coefficients(1); break;
    case CoefficientSet::experiment2: out = experiment_coefficients(2); break;
    case CoefficientSet::constant:
      out = {constant_coefficients(cfg.constant_d, cfg.constant_sigma), shepp_logan()};
      break;
    case CoefficientSet::anisotropic_rotated:
      out = {anisotropic_rotated(cfg.aniso_a, cfg.aniso_b, cfg.aniso_theta, cfg.aniso_sigma), shepp_logan()};
      break;
    case CoefficientSet::custom:
      if (!cfg.custom) throw InvalidArgument("custom experiment needs coefficients");
      out = *cfg.custom;
      break;
  }
  out.first.gamma = cfg.gamma;
  out.first.ell = cfg.ell;
  return out;
}

std::string_view sweep_name(SweepMode m) {
  switch (m) {
    case SweepMode::both: return "both";
    case SweepMode::D_only: return "D_only";
    case SweepMode::sigma_only: return "sigma_only";
    case SweepMode::joint: return "joint";
  }
  return "?";
}

std::optional<SweepMode> parse_sweep(std::string_view name) {
  for (SweepMode m : {SweepMode::both, SweepMode::D_only, SweepMode::sigma_only, SweepMode::joint})
    if (sweep_name(m) == name) return m;
  return std::nullopt;
}

std::vector<double> parse_levels(std::string_view list) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const std::size_t comma = std::min(list.find(',', start), list.size());
    const std::string item = trim(list.substr(start, comma - start));
    if (item.empty()) throw InvalidArgument("empty entry in level list '" + std::string(list) + "'");
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || ptr != item.data() + item.size()) throw InvalidArgument("bad level '" + item + "'");
    out.push_back(v);
    start = comma + 1;
  }
  return out;
}

std::string format_levels(const std::vector<double>& levels) {
  std::ostringstream s;
  s << std::setprecision(17);
  for (std::size_t k = 0; k < levels.size(); ++k) s << (k ? "," : "") << levels[k];
  return s.str();
}

void ExperimentConfig::apply_paper_scale() {
  fine_n = 401;
  coarse_n = 201;
  samples = 1000;
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.experiment == CoefficientSet::custom && !cfg.custom) {
    throw InvalidArgument("custom experiment needs coefficients");
  }
  if (cfg.experiment == CoefficientSet::constant && (!(cfg.constant_d > 0.0) || !(cfg.constant_sigma >= 0.0))) {
    throw InvalidArgument("constant coefficients need D > 0 and sigma_a >= 0");
  }
  if (cfg.experiment == CoefficientSet::anisotropic_rotated &&
      (!(cfg.aniso_a > 0.0) || !(cfg.aniso_b > 0.0) || !(cfg.aniso_sigma >= 0.0))) {
    throw InvalidArgument("rotated tensor needs a, b > 0 and sigma_a >= 0");
  }
  if (cfg.fine_n < 3 || cfg.coarse_n < 3) throw InvalidArgument("grid node counts must be at least 3");
  if (cfg.coarse_n > cfg.fine_n || (cfg.fine_n - 1) % (cfg.coarse_n - 1) != 0) {
    throw InvalidArgument("coarse grid (" + std::to_string(cfg.coarse_n) + ") is not nested in the fine grid (" +
                          std::to_string(cfg.fine_n) + ")");
  }
  if (cfg.samples < 1) throw InvalidArgument("samples must be at least 1");
  if (cfg.levels.empty()) throw InvalidArgument("at least one uncertainty level is required");
  for (double l : cfg.levels)
    if (!(l > 0.0 && l < 1.0)) throw InvalidArgument("uncertainty levels must lie in (0, 1)");
  if (!std::isfinite(cfg.gamma) || !(cfg.gamma > 0.0)) throw InvalidArgument("gamma must be positive");
  if (!std::isfinite(cfg.ell) || !(cfg.ell > 0.0)) throw InvalidArgument("ell must be positive");
  if (cfg.partial_gamma && cfg.partial_gamma->empty()) throw InvalidArgument("partial gamma selects no side");
  if (cfg.bound_grid_n < 3) throw InvalidArgument("bound grid needs at least 3 nodes per axis");
  if (cfg.out_dir.empty()) throw InvalidArgument("output directory is empty");
}

void write_manifest(std::ostream& out, const ExperimentConfig& cfg,
                    const std::vector<std::pair<std::string, double>>& timings) {
  out << std::setprecision(17);
  out << "# umblt run manifest; replay with: umblt --config <this file>\n";
  out << "experiment = " << coefficient_set_name(cfg.experiment) << '\n';
  if (cfg.experiment == CoefficientSet::constant) {
    out << "constant-d = " << cfg.constant_d << '\n';
    out << "constant-sigma = " << cfg.constant_sigma << '\n';
  }
  if (cfg.experiment == CoefficientSet::anisotropic_rotated) {
    out << "aniso-a = " << cfg.aniso_a << '\n';
    out << "aniso-b = " << cfg.aniso_b << '\n';
    out << "aniso-theta = " << cfg.aniso_theta << '\n';
    out << "aniso-sigma = " << cfg.aniso_sigma << '\n';
  }
  out << "fine-n = " << cfg.fine_n << '\n';
  out << "coarse-n = " << cfg.coarse_n << '\n';
  out << "samples = " << cfg.samples << '\n';
  out << "levels = \"" << format_levels(cfg.levels) << "\"\n";
  out << "sweep = " << sweep_name(cfg.sweep) << '\n';
  out << "gamma = " << cfg.gamma << '\n';
  out << "ell = " << cfg.ell << '\n';
  if (cfg.partial_gamma) out << "partial-gamma = \"" << cfg.partial_gamma->to_string() << "\"\n";
  out << "seed = " << cfg.seed << '\n';
  out << "out-dir = \"" << cfg.out_dir.generic_string() << "\"\n";
  out << "jobs = " << cfg.jobs << '\n';
  out << "bound-checks = " << cfg.bound_checks << '\n';
  out << "bound-grid-n = " << cfg.bound_grid_n << '\n';
  out << "svg = " << (cfg.svg ? "true" : "false") << '\n';
  out << "\n[build]\n";
  out << "version = \"" << kVersion << "\"\n";
  out << "eigen = \"" << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION << "\"\n";
  out << "compiler = \"" << __VERSION__ << "\"\n";
  out << "\n[timing]\n";
  for (const auto& [stage, seconds] : timings) out << stage << " = " << std::setprecision(6) << seconds << '\n';
}

ExperimentOutcome run_experiment(const ExperimentConfig& cfg, std::ostream* progress_stream) {
  ExperimentOutcome outcome;
  try {
    validate(cfg);
  } catch (const InvalidArgument& e) {
    return {kExitInvalidConfig, e.what(), 0.0};
  }

  const Progress progress(progress_stream);
  std::vector<std::pair<std::string, double>> timings;
  auto stage_start = Clock::now();
  auto lap = [&](const std::string& name) {
    const auto now = Clock::now();
    timings.emplace_back(name, std::chrono::duration<double>(now - stage_start).count());
    stage_start = now;
  };

  try {
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec || !fs::is_directory(cfg.out_dir)) throw IoError("cannot create output directory " + cfg.out_dir.string());

    DiagnosticsLog log;
    const auto [truth, source] = experiment_truth(cfg);
    const Bounds domain;
    const Grid2D fine(domain, cfg.fine_n, cfg.fine_n);
    const Grid2D coarse(domain, cfg.coarse_n, cfg.coarse_n);

    // Data generation on the fine grid.
    const SampledFields fine_fields = sample_fields(truth, source, fine);
    const HypothesisReport hyp = check_hypotheses(fine_fields.coefficients);
    progress("hypotheses: elliptic=" + std::to_string(hyp.elliptic) +
             " absorption_nonnegative=" + std::to_string(hyp.absorption_nonnegative) +
             " identity_near_boundary=" + std::to_string(hyp.identity_near_boundary));
    lap("sample_fine");

    const NodeField phi_fine = forward_solve(fine_fields.coefficients, fine_fields.source, std::nullopt, {}, &log);
    const AdjointResult adjoint = adjoint_positive(fine_fields.coefficients, cfg.partial_gamma, 1.0, {}, &log);
    const InternalData data = internal_data(fine_fields.coefficients, phi_fine, adjoint.psi, fine_fields.source);
    progress("fine grid " + std::to_string(cfg.fine_n) + "^2: min psi " + std::to_string(adjoint.psi.min()));
    lap("fine_solves");

    // Inversion on the coarse grid.
    const NodeField h_coarse = restrict_fine_to_coarse(data.H, coarse);
    const NodeField psi_coarse = restrict_fine_to_coarse(adjoint.psi, coarse);
    const SampledFields coarse_fields = sample_fields(truth, source, coarse);
    const ReconstructionResult baseline =
        reconstruct_source(coarse_fields.coefficients, psi_coarse, h_coarse, {}, &log);
    outcome.baseline_error = relative_interior_error(baseline.source, coarse_fields.source);
    progress("baseline reconstruction: relative L2 error " + std::to_string(outcome.baseline_error));
    lap("baseline");

    const PerturbationEnsemble ensemble = build_perturbation_ensemble(kDefaultPceOrder, cfg.seed);
    const SampledEnsemble modes(ensemble, coarse);
    const EnsembleInputs inputs{&coarse_fields.coefficients, &psi_coarse, &h_coarse, &coarse_fields.source, &modes};
    auto ensemble_config = [&](double e_d, double e_s, bool keep_mean) {
      EnsembleConfig ec;
      ec.samples = cfg.samples;
      ec.e_d = e_d;
      ec.e_sigma = e_s;
      ec.seed = cfg.seed;
      ec.jobs = cfg.jobs;
      ec.keep_mean = keep_mean;
      return ec;
    };

    bool too_many_failures = false;
    std::vector<StabilityRow> stability;
    auto sweep = [&](const std::string& name, bool diffusion) {
      for (double level : cfg.levels) {
        const EnsembleResult r =
            run_ensemble(inputs, ensemble_config(diffusion ? level : 0.0, diffusion ? 0.0 : level, false), &log);
        too_many_failures = too_many_failures || r.failed();
        stability.push_back({name, level, r.metrics.source, r.metrics.diffusion, r.metrics.absorption});
        progress(name + " sweep level " + std::to_string(level) + ": E_S " + std::to_string(r.metrics.source));
      }
    };
    if (cfg.sweep == SweepMode::both || cfg.sweep == SweepMode::D_only) sweep("D", true);
    if (cfg.sweep == SweepMode::both || cfg.sweep == SweepMode::sigma_only) sweep("sigma", false);
    lap("stability");

    const auto [dist_d, dist_s] = distribution_levels(cfg);
    const EnsembleResult dist = run_ensemble(inputs, ensemble_config(dist_d, dist_s, true), &log);
    too_many_failures = too_many_failures || dist.failed();
    progress("distribution: " + std::to_string(cfg.samples) + " samples, " + std::to_string(dist.failures) +
             " failed, " + std::to_string(dist.rejections) + " redraws");
    lap("distribution");

    // Discrete bound on a small single grid.
    std::vector<BoundRow> bounds;
    if (cfg.bound_checks > 0) {
      const Grid2D bg(domain, cfg.bound_grid_n, cfg.bound_grid_n);
      const SampledFields bf = sample_fields(truth, source, bg);
      const NodeField phi = forward_solve(bf.coefficients, bf.source);
      const AdjointResult adj = adjoint_positive(bf.coefficients, cfg.partial_gamma, 1.0);
      const InternalData bd = internal_data(bf.coefficients, phi, adj.psi, bf.source);
      const Vector h = assemble_rhs(bd.H, RhsKind::internal);
      const SparseMatrix l = assemble_forward_matrix(bf.coefficients).matrix;
      const SparseMatrix a = assemble_internal_matrix(bf.coefficients, adj.psi).matrix;
      const SampledEnsemble bmodes(ensemble, bg);
      for (std::size_t id = 0; id < cfg.bound_checks; ++id) {
        std::optional<PerturbedCoefficients> p;
        for (std::uint64_t attempt = 0; !p; ++attempt) {
          try {
            p = perturb_coefficients(bf.coefficients, bmodes.draw(counter_uniform(cfg.seed, id, attempt)), dist_d,
                                     dist_s);
          } catch (const PositivityError&) {
            if (attempt >= 100) throw;
          }
        }
        const SparseMatrix lt = assemble_forward_matrix(p->coefficients).matrix;
        const SparseMatrix at = assemble_internal_matrix(p->coefficients, adj.psi).matrix;
        bounds.push_back({id, discrete_uq_bound(l, lt, a, at, h)});
      }
      lap("bound_checks");
    }

    // Artifacts.
    write_file(cfg.out_dir / "distribution.csv", [&](std::ostream& o) { write_distribution_csv(o, dist.samples); });
    write_file(cfg.out_dir / "stability.csv", [&](std::ostream& o) { write_stability_csv(o, stability); });
    write_file(cfg.out_dir / "bound.csv", [&](std::ostream& o) { write_bound_csv(o, bounds); });
    save_field(cfg.out_dir / "true_source.txt", coarse_fields.source);
    save_field(cfg.out_dir / "baseline_source.txt", baseline.source);
    save_field(cfg.out_dir / "internal_data.txt", h_coarse);
    save_field(cfg.out_dir / "psi0.txt", psi_coarse);
    if (dist.mean_source) save_field(cfg.out_dir / "mean_source.txt", *dist.mean_source);

    std::vector<double> distances;
    for (const UqSample& s : dist.samples)
      if (s.ok) distances.push_back(s.delta_source_l2);
    const double mean_distance =
        dist.mean_source ? relative_interior_error(*dist.mean_source, coarse_fields.source) *
                               interior_l2(coarse_fields.source)
                         : std::numeric_limits<double>::quiet_NaN();
    const double median_distance = median(distances);
    std::size_t bounds_held = 0;
    for (const BoundRow& b : bounds) bounds_held += b.check.holds ? 1 : 0;

    write_file(cfg.out_dir / "summary.ini", [&](std::ostream& o) {
      o << std::setprecision(17);
      o << "baseline_relative_error = " << outcome.baseline_error << '\n';
      o << "distribution_e_D = " << dist_d << '\n';
      o << "distribution_e_sigma = " << dist_s << '\n';
      o << "E_S = " << dist.metrics.source << '\n';
      o << "E_D = " << dist.metrics.diffusion << '\n';
      o << "E_sigma = " << dist.metrics.absorption << '\n';
      o << "failures = " << dist.failures << '\n';
      o << "redraws = " << dist.rejections << '\n';
      o << "mean_distance = " << mean_distance << '\n';
      o << "median_distance = " << median_distance << '\n';
      o << "bound_checks = " << bounds.size() << '\n';
      o << "bound_holds = " << bounds_held << '\n';
      o << "hypothesis_elliptic = " << hyp.elliptic << '\n';
      o << "hypothesis_absorption_nonnegative = " << hyp.absorption_nonnegative << '\n';
      o << "hypothesis_identity_near_boundary = " << hyp.identity_near_boundary << '\n';
    });

    if (cfg.svg) {
      std::vector<double> dd, ds, dsig;
      for (const UqSample& s : dist.samples) {
        dd.push_back(s.delta_diffusion_h1);
        dsig.push_back(s.delta_absorption_l2);
        ds.push_back(s.delta_source_l2);
      }
      write_file(cfg.out_dir / "distribution_D.svg", [&](std::ostream& o) {
        write_svg_plot(o, "Source error against D error", "|dD|_H1", "|dS|_L2", {{"samples", dd, ds, false}});
      });
      write_file(cfg.out_dir / "distribution_sigma.svg", [&](std::ostream& o) {
        write_svg_plot(o, "Source error against sigma_a error", "|dsigma|_L2", "|dS|_L2",
                       {{"samples", dsig, ds, false}});
      });
      std::vector<PlotSeries> curves;
      for (const char* name : {"D", "sigma"}) {
        PlotSeries s{std::string(name) + " sweep", {}, {}, true};
        for (const StabilityRow& r : stability)
          if (r.sweep == name) {
            s.x.push_back(r.level);
            s.y.push_back(r.e_source);
          }
        if (!s.x.empty()) curves.push_back(std::move(s));
      }
      write_file(cfg.out_dir / "stability.svg", [&](std::ostream& o) {
        write_svg_plot(o, "Relative standard deviation of S", "uncertainty level", "E_S", curves);
      });
    }
    lap("artifacts");

    write_file(cfg.out_dir / "pipeline.log", [&](std::ostream& o) {
      o << "hypothesis elliptic=" << hyp.elliptic << " min_eigenvalue=" << hyp.min_eigenvalue
        << " absorption_nonnegative=" << hyp.absorption_nonnegative << " min_absorption=" << hyp.min_absorption
        << " identity_near_boundary=" << hyp.identity_near_boundary
        << " max_boundary_deviation=" << hyp.max_boundary_identity_deviation << '\n';
      log.write(o);
    });
    write_file(cfg.out_dir / "manifest.ini", [&](std::ostream& o) { write_manifest(o, cfg, timings); });

    if (too_many_failures) {
      outcome.exit_code = kExitSampleFailures;
      outcome.message = "more than 10% of the samples failed";
    } else {
      outcome.message = "completed";
    }
  } catch (const IoError& e) {
    return {kExitIo, e.what(), outcome.baseline_error};
  } catch (const InvalidArgument& e) {
    return {kExitInvalidConfig, e.what(), outcome.baseline_error};
  }
  return outcome;
}

}  // namespace umblt
