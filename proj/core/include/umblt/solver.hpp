#pragma once

#include <cstddef>
#include <memory>
#include <string_view>
#include <vector>

#include "umblt/assembly.hpp"

namespace umblt {

enum class SolveMethod { sparse_lu, bicgstab };

std::string_view method_name(SolveMethod m);

struct SolveOptions {
  double tolerance = 1e-10;                // relative residual bound
  std::size_t direct_limit = 200'000;      // above this, use the Krylov fallback
  int max_iterations = 20'000;
};

struct SolveReport {
  Vector solution;
  double residual_norm = 0.0;  // ||A x - b|| / ||b||  (absolute when b = 0)
  int iterations = 0;          // 0 for direct solves
  SolveMethod method = SolveMethod::sparse_lu;
  double seconds = 0.0;
};

// Reusable factorization of a general square sparse matrix.
class Factorization {
 public:
  explicit Factorization(const SparseMatrix& a);
  ~Factorization();
  Factorization(Factorization&&) noexcept;
  Factorization& operator=(Factorization&&) noexcept;

  Vector solve(const Vector& b) const;
  Vector solve_transpose(const Vector& b) const;
  Eigen::Index size() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

SolveReport solve_sparse(const SparseMatrix& a, const Vector& b, const SolveOptions& options = {});
SolveReport solve_sparse(const SparseSystem& system, const SolveOptions& options = {});

// Weak chained diagonal dominance certificate. For every row that is not
// strictly dominant, `next_hop` points along a nonzero entry toward a
// strictly dominant row (or is -1 when no such path exists).
struct WcddCertificate {
  bool is_wdd = false;
  bool is_wcdd = false;
  std::vector<bool> sdd;
  std::vector<std::ptrdiff_t> next_hop;

  std::vector<std::size_t> sdd_rows() const;
  // Witness path k -> ... -> SDD row; empty when row k has none.
  std::vector<std::size_t> chain(std::size_t row) const;
};

// Rows are compared with a relative slack `rtol` on the off-diagonal sum to
// absorb round-off in rows whose exact sums cancel.
WcddCertificate is_wcdd(const SparseMatrix& a, double rtol = 1e-12);

enum class NormMode { direct, inverse };

// ||A||_2 or ||A^-1||_2 by power iteration on A^T A (resp. A^-1 A^-T),
// started from the normalized all-ones vector.
double norm2_estimate(const SparseMatrix& a, NormMode mode, double tol, int max_iterations = 10'000);

}  // namespace umblt
