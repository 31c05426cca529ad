#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "umblt/errors.hpp"
#include "umblt/experiment.hpp"

using namespace umblt;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny(const fs::path& out) {
  ExperimentConfig cfg;
  cfg.fine_n = 21;
  cfg.coarse_n = 11;
  cfg.samples = 4;
  cfg.levels = {0.05};
  cfg.bound_checks = 2;
  cfg.bound_grid_n = 11;
  cfg.seed = 3;
  cfg.jobs = 1;
  cfg.out_dir = out;
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("umblt_unit_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Parsing, CoefficientSetsAndSweeps) {
  EXPECT_EQ(parse_coefficient_set("1"), CoefficientSet::experiment1);
  EXPECT_EQ(parse_coefficient_set("experiment2"), CoefficientSet::experiment2);
  EXPECT_EQ(parse_coefficient_set("anisotropic-rotated"), CoefficientSet::anisotropic_rotated);
  EXPECT_FALSE(parse_coefficient_set("3").has_value());
  for (CoefficientSet s : {CoefficientSet::experiment1, CoefficientSet::experiment2, CoefficientSet::constant,
                           CoefficientSet::anisotropic_rotated})
    EXPECT_EQ(parse_coefficient_set(coefficient_set_name(s)), s);
  for (SweepMode m : {SweepMode::both, SweepMode::D_only, SweepMode::sigma_only, SweepMode::joint})
    EXPECT_EQ(parse_sweep(sweep_name(m)), m);
  EXPECT_FALSE(parse_sweep("sideways").has_value());
}

TEST(Parsing, Levels) {
  EXPECT_EQ(parse_levels("0.02, 0.04,0.1"), (std::vector<double>{0.02, 0.04, 0.1}));
  EXPECT_EQ(parse_levels(format_levels({0.1, 0.3})), (std::vector<double>{0.1, 0.3}));
  EXPECT_THROW(parse_levels("0.1,,0.2"), InvalidArgument);
  EXPECT_THROW(parse_levels("0.1,x"), InvalidArgument);
  EXPECT_THROW(parse_levels(""), InvalidArgument);
}

TEST(Config, ValidationNamesTheProblem) {
  ExperimentConfig ok;
  EXPECT_NO_THROW(validate(ok));
  auto rejects = [](auto mutate) {
    ExperimentConfig c;
    mutate(c);
    EXPECT_THROW(validate(c), InvalidArgument);
  };
  rejects([](ExperimentConfig& c) { c.coarse_n = 50; });
  rejects([](ExperimentConfig& c) { c.fine_n = 2; });
  rejects([](ExperimentConfig& c) { c.samples = 0; });
  rejects([](ExperimentConfig& c) { c.levels = {}; });
  rejects([](ExperimentConfig& c) { c.levels = {0.0}; });
  rejects([](ExperimentConfig& c) { c.gamma = -1.0; });
  rejects([](ExperimentConfig& c) { c.ell = 0.0; });
  rejects([](ExperimentConfig& c) { c.experiment = CoefficientSet::custom; });
  rejects([](ExperimentConfig& c) {
    c.experiment = CoefficientSet::constant;
    c.constant_d = 0.0;
  });
}

TEST(Config, PaperScale) {
  ExperimentConfig c;
  c.apply_paper_scale();
  EXPECT_EQ(c.fine_n, 401);
  EXPECT_EQ(c.coarse_n, 201);
  EXPECT_EQ(c.samples, 1000u);
  EXPECT_NO_THROW(validate(c));
}

TEST(Config, TruthCarriesPhysicalConstants) {
  ExperimentConfig c;
  c.gamma = 0.75;
  c.ell = 1.5;
  c.experiment = CoefficientSet::experiment2;
  const auto [coeff, src] = experiment_truth(c);
  EXPECT_EQ(coeff.gamma, 0.75);
  EXPECT_EQ(coeff.ell, 1.5);
  EXPECT_DOUBLE_EQ(coeff.diffusion({0, 0}), 3.0);
}

TEST(Manifest, ListsOptionsAndSections) {
  ExperimentConfig c;
  c.levels = {0.02, 0.1};
  c.partial_gamma = BoundarySelection::parse("top");
  std::ostringstream out;
  write_manifest(out, c, {{"total", 1.5}});
  const std::string s = out.str();
  for (const char* key : {"experiment = experiment1", "fine-n = 101", "coarse-n = 51", "samples = 100",
                          "levels = \"0.02,0.10000000000000001\"", "partial-gamma = \"top\"", "seed = 0",
                          "[build]", "[timing]", "total = 1.5"})
    EXPECT_NE(s.find(key), std::string::npos) << key;
}

TEST(Run, InvalidConfigExitsWithoutOutput) {
  const fs::path dir = scratch("invalid");
  ExperimentConfig c = tiny(dir);
  c.coarse_n = 12;
  const ExperimentOutcome r = run_experiment(c);
  EXPECT_EQ(r.exit_code, kExitInvalidConfig);
  EXPECT_FALSE(fs::exists(dir));
}

TEST(Run, WritesArtifactsAndIsReproducible) {
  const fs::path a = scratch("run_a");
  const fs::path b = scratch("run_b");
  ExperimentConfig c = tiny(a);
  c.svg = true;
  const ExperimentOutcome ra = run_experiment(c);
  ASSERT_EQ(ra.exit_code, kExitOk) << ra.message;
  EXPECT_GT(ra.baseline_error, 0.0);
  EXPECT_LT(ra.baseline_error, 0.5);
  for (const char* f : {"distribution.csv", "stability.csv", "bound.csv", "true_source.txt", "baseline_source.txt",
                        "internal_data.txt", "psi0.txt", "mean_source.txt", "summary.ini", "pipeline.log",
                        "manifest.ini"})
    EXPECT_TRUE(fs::exists(a / f)) << f;

  const std::string dist = slurp(a / "distribution.csv");
  EXPECT_EQ(std::count(dist.begin(), dist.end(), '\n'), 5);
  const std::string stab = slurp(a / "stability.csv");
  EXPECT_EQ(std::count(stab.begin(), stab.end(), '\n'), 3);  // header, D, sigma

  c.out_dir = b;
  c.svg = false;
  c.jobs = 2;
  ASSERT_EQ(run_experiment(c).exit_code, kExitOk);
  for (const char* f : {"distribution.csv", "stability.csv", "bound.csv", "mean_source.txt"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  fs::remove_all(a);
  fs::remove_all(b);
}
