#include "umblt/uq.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <thread>

#include "umblt/errors.hpp"

namespace umblt {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double uniform_pm1(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t z = splitmix64(seed);
  z = splitmix64(z ^ a);
  z = splitmix64(z ^ (b * 0xD6E8FEB86659FD93ULL));
  z = splitmix64(z ^ (c * 0xA0761D6478BD642FULL));
  const double u = static_cast<double>(z >> 11) * 0x1.0p-53;  // [0, 1)
  return 2.0 * u - 1.0;
}

// Streams used when building the frozen shells.
constexpr std::uint64_t kDiffusionStream = 1;
constexpr std::uint64_t kAbsorptionStream = 2;
// Sample draws live in their own stream so that they never collide with the
// shell coefficients.
constexpr std::uint64_t kSampleStream = 3;

std::vector<FourierShell> build_shells(int max_order, std::uint64_t seed, std::uint64_t stream) {
  std::vector<FourierShell> shells;
  for (int k = 1; k <= max_order; ++k) {
    FourierShell shell{k, {}};
    std::uint64_t m = 0;
    for (const auto& [n1, n2] : shell_vectors(k)) {
      const std::uint64_t key = (static_cast<std::uint64_t>(k) << 32) | m++;
      shell.modes.push_back({n1, n2, uniform_pm1(seed, stream, key, 0), uniform_pm1(seed, stream, key, 1)});
    }
    shells.push_back(std::move(shell));
  }
  return shells;
}

void add_scaled(NodeField& out, const NodeField& f, double s) {
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += s * f[k];
}

void add_scaled(EdgeField& out, const EdgeField& f, double s) {
  auto ox = out.x_edges();
  auto fx = f.x_edges();
  for (std::size_t k = 0; k < ox.size(); ++k) ox[k] += s * fx[k];
  auto oy = out.y_edges();
  auto fy = f.y_edges();
  for (std::size_t k = 0; k < oy.size(); ++k) oy[k] += s * fy[k];
}

void check_level(double e, const char* name) {
  if (!(e >= 0.0) || !std::isfinite(e)) throw InvalidArgument(std::string(name) + " level must be nonnegative");
}

std::string format_double(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

}  // namespace

double legendre_eval(int k, double t, int max_order) {
  if (k < 0 || k > max_order) throw InvalidArgument("Legendre order " + std::to_string(k) + " out of range");
  if (!(t >= -1.0 && t <= 1.0)) throw InvalidArgument("Legendre argument outside [-1, 1]");
  double p_prev = 1.0;
  double p = t;
  if (k == 0) return 1.0;
  for (int n = 1; n < k; ++n) {
    const double next = ((2.0 * n + 1.0) * t * p - n * p_prev) / (n + 1.0);
    p_prev = p;
    p = next;
  }
  return std::sqrt(2.0 * k + 1.0) * p;
}

double counter_uniform(std::uint64_t seed, std::uint64_t index, std::uint64_t attempt) {
  return uniform_pm1(seed, kSampleStream, index, attempt);
}

double FourierShell::operator()(Point p) const {
  double v = 0.0;
  for (const FourierMode& m : modes) {
    const double arg = std::numbers::pi * (m.n1 * p.x + m.n2 * p.y);
    v += m.sin_coeff * std::sin(arg) + m.cos_coeff * std::cos(arg);
  }
  return v;
}

std::vector<std::pair<int, int>> shell_vectors(int k) {
  std::vector<std::pair<int, int>> out;
  if (k <= 0) return out;
  for (int n1 = -k; n1 <= k; ++n1)
    for (int n2 = -k; n2 <= k; ++n2)
      if (std::max(std::abs(n1), std::abs(n2)) == k) out.emplace_back(n1, n2);
  return out;
}

PerturbationEnsemble::PerturbationEnsemble(std::vector<FourierShell> diffusion, std::vector<FourierShell> absorption,
                                           std::uint64_t seed)
    : diffusion_(std::move(diffusion)), absorption_(std::move(absorption)), seed_(seed) {
  if (diffusion_.size() != absorption_.size()) throw InvalidArgument("shell counts of D and sigma_a differ");
}

PerturbationEnsemble build_perturbation_ensemble(int max_order, std::uint64_t seed) {
  if (max_order < 1) throw InvalidArgument("perturbation order must be at least 1");
  return PerturbationEnsemble(build_shells(max_order, seed, kDiffusionStream),
                              build_shells(max_order, seed, kAbsorptionStream), seed);
}

std::pair<ScalarFn, ScalarFn> draw_perturbation(const PerturbationEnsemble& e, double xi) {
  const int order = e.max_order();
  std::vector<double> weights;
  for (int k = 1; k <= order; ++k) weights.push_back(legendre_eval(k, xi, order));
  auto make = [weights](const std::vector<FourierShell>& shells) {
    return [shells, weights](Point p) {
      double v = 0.0;
      for (std::size_t k = 0; k < shells.size(); ++k) v += weights[k] * shells[k](p);
      return v;
    };
  };
  return {make(e.diffusion_shells()), make(e.absorption_shells())};
}

SampledEnsemble::SampledEnsemble(const PerturbationEnsemble& e, const Grid2D& grid)
    : grid_(grid), max_order_(e.max_order()) {
  for (int k = 0; k < max_order_; ++k) {
    const FourierShell& d = e.diffusion_shells()[k];
    const FourierShell& s = e.absorption_shells()[k];
    diffusion_.push_back({NodeField::sample(grid, d), EdgeField::sample(grid, d)});
    absorption_.push_back(NodeField::sample(grid, s));
  }
}

SampledPerturbation SampledEnsemble::draw(double xi) const {
  SampledPerturbation u{{NodeField(grid_), EdgeField(grid_)}, NodeField(grid_)};
  for (int k = 0; k < max_order_; ++k) {
    const double w = legendre_eval(k + 1, xi, max_order_);
    add_scaled(u.diffusion.nodes, diffusion_[k].nodes, w);
    add_scaled(u.diffusion.edges, diffusion_[k].edges, w);
    add_scaled(u.absorption, absorption_[k], w);
  }
  return u;
}

PerturbedCoefficients perturb_coefficients(const SampledCoefficients& truth, const SampledPerturbation& u, double e_d,
                                           double e_sigma) {
  check_level(e_d, "D");
  check_level(e_sigma, "sigma_a");
  const Grid2D& g = truth.grid;
  if (!(u.diffusion.nodes.grid() == g) || !(u.absorption.grid() == g)) {
    throw InvalidArgument("perturbation lives on a different grid");
  }

  PerturbedCoefficients out{truth, 0.0, 0.0};
  SampledCoefficients& c = out.coefficients;

  if (e_d > 0.0) {
    const double un = discrete_norm(u.diffusion.nodes, NormKind::H1);
    if (!(un > 0.0)) throw InvalidArgument("D perturbation has zero H1 norm");
    const double scale = e_d * discrete_norm(truth.diffusion_nodes, NormKind::H1) / un;
    add_scaled(c.diffusion_nodes, u.diffusion.nodes, scale);
    add_scaled(c.diffusion, u.diffusion.edges, scale);
    if (c.tensor) {
      // Tensors get the isotropic perturbation scale * u * I.
      add_scaled(c.tensor->xx, u.diffusion.edges, scale);
      add_scaled(c.tensor->yy, u.diffusion.edges, scale);
      add_scaled(c.tensor->node_xx, u.diffusion.nodes, scale);
      add_scaled(c.tensor->node_yy, u.diffusion.nodes, scale);
    }
    NodeField delta(g);
    add_scaled(delta, u.diffusion.nodes, scale);
    out.delta_diffusion_h1 = discrete_norm(delta, NormKind::H1);
  }
  if (e_sigma > 0.0) {
    const double un = discrete_norm(u.absorption, NormKind::L2);
    if (!(un > 0.0)) throw InvalidArgument("sigma_a perturbation has zero L2 norm");
    const double scale = e_sigma * discrete_norm(truth.absorption, NormKind::L2) / un;
    add_scaled(c.absorption, u.absorption, scale);
    NodeField delta(g);
    add_scaled(delta, u.absorption, scale);
    out.delta_absorption_l2 = discrete_norm(delta, NormKind::L2);
  }

  for (int i = 1; i <= g.nx(); ++i) {
    for (int j = 1; j <= g.ny(); ++j) {
      if (!(c.diffusion_nodes.at(i, j) > 0.0))
        throw PositivityError("perturbed D is not positive", i, j, c.diffusion_nodes.at(i, j));
      if (!(c.absorption.at(i, j) >= 0.0))
        throw PositivityError("perturbed sigma_a is negative", i, j, c.absorption.at(i, j));
    }
  }
  if (!(c.diffusion.min() > 0.0)) throw PositivityError("perturbed D is not positive on an edge", 0, 0, c.diffusion.min());
  if (c.tensor) {
    const HypothesisReport h = check_hypotheses(c);
    if (!h.elliptic) throw PositivityError("perturbed tensor D is not positive definite", 0, 0, h.min_eigenvalue);
  }
  return out;
}

double interior_l2(const NodeField& f) {
  const Grid2D& g = f.grid();
  double sum = 0.0;
  for (int i = 2; i < g.nx(); ++i)
    for (int j = 2; j < g.ny(); ++j) sum += f.at(i, j) * f.at(i, j);
  return std::sqrt(g.dx() * g.dy() * sum);
}

RelativeStd relative_std_metrics(const std::vector<UqSample>& samples, const BaselineNorms& norms) {
  double s = 0.0, d = 0.0, a = 0.0;
  std::size_t n = 0;
  for (const UqSample& x : samples) {
    if (!x.ok) continue;
    s += x.delta_source_l2 * x.delta_source_l2;
    d += x.delta_diffusion_h1 * x.delta_diffusion_h1;
    a += x.delta_absorption_l2 * x.delta_absorption_l2;
    ++n;
  }
  if (n == 0) throw InvalidArgument("relative standard deviation needs at least one successful sample");
  auto rel = [n](double sum, double norm) {
    if (!(norm > 0.0)) throw InvalidArgument("baseline norm must be positive");
    return std::sqrt(sum / static_cast<double>(n)) / norm;
  };
  return {rel(s, norms.source_l2), rel(d, norms.diffusion_h1), rel(a, norms.absorption_l2)};
}

BoundCheck discrete_uq_bound(const SparseMatrix& l, const SparseMatrix& l_tilde, const SparseMatrix& a,
                             const SparseMatrix& a_tilde, const Vector& h, double norm_tol, double slack) {
  const Factorization fa(a);
  const Factorization fat(a_tilde);
  const Vector s = l * fa.solve(h);
  const Vector s_tilde = l_tilde * fat.solve(h);

  const SparseMatrix dl = l_tilde - l;
  const SparseMatrix da = a_tilde - a;
  const double a_inv = norm2_estimate(a, NormMode::inverse, norm_tol);
  const double at_inv = norm2_estimate(a_tilde, NormMode::inverse, norm_tol);
  const double lt = norm2_estimate(l_tilde, NormMode::direct, norm_tol);
  const double dl_norm = norm2_estimate(dl, NormMode::direct, norm_tol);
  const double da_norm = norm2_estimate(da, NormMode::direct, norm_tol);

  BoundCheck out;
  out.lhs = (s_tilde - s).norm();
  out.rhs = h.norm() * (a_inv * dl_norm + lt * at_inv * a_inv * da_norm);
  out.holds = out.lhs <= out.rhs * (1.0 + slack);
  return out;
}

EnsembleResult run_ensemble(const EnsembleInputs& in, const EnsembleConfig& cfg, DiagnosticsLog* log) {
  if (!in.truth || !in.psi0 || !in.internal || !in.true_source || !in.modes) {
    throw InvalidArgument("ensemble inputs are incomplete");
  }
  if (cfg.samples == 0) throw InvalidArgument("ensemble needs at least one sample");
  check_level(cfg.e_d, "D");
  check_level(cfg.e_sigma, "sigma_a");
  const Grid2D& g = in.truth->grid;
  if (!(in.modes->grid() == g)) throw InvalidArgument("sampled ensemble lives on a different grid");

  // Fixed-size chunks keep the floating-point order of the mean independent
  // of the worker count.
  constexpr std::size_t kChunk = 8;
  const std::size_t n = cfg.samples;
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  EnsembleResult result;
  result.samples.resize(n);
  std::vector<std::optional<NodeField>> chunk_sums(chunks);

  auto run_sample = [&](std::size_t id, NodeField* sum) {
    UqSample& s = result.samples[id];
    s.id = id;
    s.e_d = cfg.e_d;
    s.e_sigma = cfg.e_sigma;
    try {
      std::optional<PerturbedCoefficients> perturbed;
      for (int attempt = 0; !perturbed; ++attempt) {
        s.xi = counter_uniform(cfg.seed, id, static_cast<std::uint64_t>(attempt));
        try {
          perturbed = perturb_coefficients(*in.truth, in.modes->draw(s.xi), cfg.e_d, cfg.e_sigma);
        } catch (const PositivityError&) {
          if (attempt >= cfg.max_redraws) throw;
          ++s.rejected;
        }
      }
      s.delta_diffusion_h1 = perturbed->delta_diffusion_h1;
      s.delta_absorption_l2 = perturbed->delta_absorption_l2;
      const ReconstructionResult r = reconstruct_source(perturbed->coefficients, *in.psi0, *in.internal, cfg.solve);
      NodeField delta(g);
      for (int i = 2; i < g.nx(); ++i)
        for (int j = 2; j < g.ny(); ++j) delta.at(i, j) = r.source.at(i, j) - in.true_source->at(i, j);
      s.delta_source_l2 = interior_l2(delta);
      s.ok = true;
      if (sum) add_scaled(*sum, r.source, 1.0);
    } catch (const Error& e) {
      s.ok = false;
      s.error = e.what();
      s.delta_source_l2 = std::numeric_limits<double>::quiet_NaN();
    }
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t c = next++; c < chunks; c = next++) {
      std::optional<NodeField> sum;
      if (cfg.keep_mean) sum.emplace(g);
      for (std::size_t id = c * kChunk; id < std::min(n, (c + 1) * kChunk); ++id) run_sample(id, sum ? &*sum : nullptr);
      chunk_sums[c] = std::move(sum);
    }
  };

  const auto start = std::chrono::steady_clock::now();
  unsigned jobs = cfg.jobs ? cfg.jobs : std::max(1u, std::thread::hardware_concurrency());
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, chunks));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
  }

  std::size_t ok = 0;
  for (const UqSample& s : result.samples) {
    if (s.ok) ++ok;
    else ++result.failures;
    result.rejections += static_cast<std::size_t>(s.rejected);
  }
  if (cfg.keep_mean && ok > 0) {
    NodeField mean(g);
    for (const auto& sum : chunk_sums) add_scaled(mean, *sum, 1.0);
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] /= static_cast<double>(ok);
    result.mean_source = std::move(mean);
  }
  if (ok > 0) {
    const BaselineNorms norms{discrete_norm(in.truth->diffusion_nodes, NormKind::H1),
                              discrete_norm(in.truth->absorption, NormKind::L2), interior_l2(*in.true_source)};
    result.metrics = relative_std_metrics(result.samples, norms);
  }
  if (log) {
    log->record({"ensemble e_D=" + format_double(cfg.e_d) + " e_sigma=" + format_double(cfg.e_sigma),
                 static_cast<double>(result.failures), in.psi0->min(),
                 std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()});
  }
  return result;
}

void write_distribution_csv(std::ostream& out, const std::vector<UqSample>& samples) {
  out << "sample_id,xi,dD_H1,dSigma_L2,dS_L2,rejected\n" << std::setprecision(17);
  for (const UqSample& s : samples) {
    out << s.id << ',' << s.xi << ',' << s.delta_diffusion_h1 << ',' << s.delta_absorption_l2 << ','
        << s.delta_source_l2 << ',' << s.rejected << '\n';
  }
}

void write_stability_csv(std::ostream& out, const std::vector<StabilityRow>& rows) {
  out << "sweep,level,E_S,E_D,E_sigma\n" << std::setprecision(17);
  for (const StabilityRow& r : rows) {
    out << r.sweep << ',' << r.level << ',' << r.e_source << ',' << r.e_diffusion << ',' << r.e_absorption << '\n';
  }
}

void write_bound_csv(std::ostream& out, const std::vector<BoundRow>& rows) {
  out << "sample_id,lhs,rhs,holds\n" << std::setprecision(17);
  for (const BoundRow& r : rows) {
    out << r.id << ',' << r.check.lhs << ',' << r.check.rhs << ',' << (r.check.holds ? 1 : 0) << '\n';
  }
}

}  // namespace umblt
