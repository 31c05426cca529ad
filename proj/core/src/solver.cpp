#include "umblt/solver.hpp"

#include <chrono>
#include <cmath>
#include <deque>
#include <optional>
#include <string>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>

#include "umblt/errors.hpp"

namespace umblt {

namespace {

using ColMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;

double relative_residual(const SparseMatrix& a, const Vector& x, const Vector& b) {
  const double r = (a * x - b).norm();
  const double nb = b.norm();
  return nb > 0.0 ? r / nb : r;
}

void check_square(const SparseMatrix& a) {
  if (a.rows() != a.cols()) throw InvalidArgument("matrix is not square");
}

}  // namespace

std::string_view method_name(SolveMethod m) {
  switch (m) {
    case SolveMethod::sparse_lu: return "sparse_lu";
    case SolveMethod::bicgstab: return "bicgstab";
  }
  return "?";
}

struct Factorization::Impl {
  ColMatrix matrix;
  Eigen::SparseLU<ColMatrix, Eigen::COLAMDOrdering<int>> lu;
};

Factorization::Factorization(const SparseMatrix& a) : impl_(std::make_unique<Impl>()) {
  check_square(a);
  impl_->matrix = a;
  impl_->lu.analyzePattern(impl_->matrix);
  impl_->lu.factorize(impl_->matrix);
  if (impl_->lu.info() != Eigen::Success) {
    throw SolverError("sparse LU factorization failed: " + impl_->lu.lastErrorMessage());
  }
}

Factorization::~Factorization() = default;
Factorization::Factorization(Factorization&&) noexcept = default;
Factorization& Factorization::operator=(Factorization&&) noexcept = default;

Vector Factorization::solve(const Vector& b) const {
  Vector x = impl_->lu.solve(b);
  if (impl_->lu.info() != Eigen::Success) throw SolverError("sparse LU solve failed");
  return x;
}

Vector Factorization::solve_transpose(const Vector& b) const {
  Vector x = impl_->lu.transpose().solve(b);
  if (impl_->lu.info() != Eigen::Success) throw SolverError("sparse LU transpose solve failed");
  return x;
}

Eigen::Index Factorization::size() const { return impl_->matrix.rows(); }

SolveReport solve_sparse(const SparseMatrix& a, const Vector& b, const SolveOptions& options) {
  check_square(a);
  if (b.size() != a.rows()) throw InvalidArgument("right-hand side length does not match matrix");
  const auto start = std::chrono::steady_clock::now();
  SolveReport report;

  if (static_cast<std::size_t>(a.rows()) <= options.direct_limit) {
    Factorization f(a);
    report.solution = f.solve(b);
    report.method = SolveMethod::sparse_lu;
  } else {
    Eigen::BiCGSTAB<SparseMatrix, Eigen::DiagonalPreconditioner<double>> krylov;
    krylov.setTolerance(0.1 * options.tolerance);
    krylov.setMaxIterations(options.max_iterations);
    krylov.compute(a);
    report.solution = krylov.solve(b);
    report.iterations = static_cast<int>(krylov.iterations());
    report.method = SolveMethod::bicgstab;
    if (krylov.info() != Eigen::Success) {
      throw SolverError("BiCGSTAB did not converge within " + std::to_string(options.max_iterations) +
                        " iterations");
    }
  }

  report.residual_norm = relative_residual(a, report.solution, b);
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!std::isfinite(report.residual_norm) || report.residual_norm > options.tolerance) {
    throw SolverError("relative residual " + std::to_string(report.residual_norm) + " exceeds tolerance " +
                      std::to_string(options.tolerance));
  }
  return report;
}

SolveReport solve_sparse(const SparseSystem& system, const SolveOptions& options) {
  return solve_sparse(system.matrix, system.rhs, options);
}

std::vector<std::size_t> WcddCertificate::sdd_rows() const {
  std::vector<std::size_t> rows;
  for (std::size_t k = 0; k < sdd.size(); ++k)
    if (sdd[k]) rows.push_back(k);
  return rows;
}

std::vector<std::size_t> WcddCertificate::chain(std::size_t row) const {
  std::vector<std::size_t> path{row};
  std::size_t k = row;
  while (!sdd[k]) {
    if (next_hop[k] < 0) return {};
    k = static_cast<std::size_t>(next_hop[k]);
    path.push_back(k);
  }
  return path;
}

WcddCertificate is_wcdd(const SparseMatrix& a, double rtol) {
  check_square(a);
  const auto n = static_cast<std::size_t>(a.rows());
  WcddCertificate cert;
  cert.sdd.assign(n, false);
  cert.next_hop.assign(n, -1);
  cert.is_wdd = true;

  // Reverse adjacency: row k reaches column l through a nonzero A(k, l).
  std::vector<std::vector<std::size_t>> reaches_into(n);
  for (std::size_t k = 0; k < n; ++k) {
    double diag = 0.0;
    double off = 0.0;
    for (SparseMatrix::InnerIterator it(a, static_cast<Eigen::Index>(k)); it; ++it) {
      if (it.value() == 0.0) continue;
      const auto col = static_cast<std::size_t>(it.col());
      if (col == k) {
        diag = std::abs(it.value());
      } else {
        off += std::abs(it.value());
        reaches_into[col].push_back(k);
      }
    }
    const double slack = rtol * off;
    if (diag + slack < off) cert.is_wdd = false;
    cert.sdd[k] = diag > off + slack;
  }

  // Multi-source BFS from the strictly dominant rows along reversed edges.
  std::vector<bool> reached(n, false);
  std::deque<std::size_t> queue;
  for (std::size_t k = 0; k < n; ++k)
    if (cert.sdd[k]) {
      reached[k] = true;
      queue.push_back(k);
    }
  while (!queue.empty()) {
    const std::size_t l = queue.front();
    queue.pop_front();
    for (std::size_t k : reaches_into[l]) {
      if (reached[k]) continue;
      reached[k] = true;
      cert.next_hop[k] = static_cast<std::ptrdiff_t>(l);
      queue.push_back(k);
    }
  }

  bool chained = true;
  for (std::size_t k = 0; k < n; ++k) chained = chained && reached[k];
  cert.is_wcdd = cert.is_wdd && chained;
  return cert;
}

double norm2_estimate(const SparseMatrix& a, NormMode mode, double tol, int max_iterations) {
  check_square(a);
  if (!(tol > 0.0)) throw InvalidArgument("norm estimate tolerance must be positive");
  const Eigen::Index n = a.rows();
  if (n == 0) return 0.0;

  std::optional<Factorization> lu;
  if (mode == NormMode::inverse) lu.emplace(a);

  Vector x = Vector::Ones(n) / std::sqrt(static_cast<double>(n));
  double previous = -1.0;
  for (int it = 0; it < max_iterations; ++it) {
    const Vector y = (mode == NormMode::direct) ? Vector(a * x) : lu->solve(x);
    const double estimate = y.norm();
    if (!std::isfinite(estimate)) throw SolverError("norm estimate diverged");
    if (estimate == 0.0) return 0.0;
    if (previous >= 0.0 && std::abs(estimate - previous) < tol * estimate) return estimate;
    previous = estimate;
    Vector z = (mode == NormMode::direct) ? Vector(a.transpose() * y) : lu->solve_transpose(y);
    const double nz = z.norm();
    if (nz == 0.0) return estimate;
    x = z / nz;
  }
  throw SolverError("power iteration did not converge in " + std::to_string(max_iterations) + " iterations");
}

}  // namespace umblt
