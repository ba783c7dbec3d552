/// \file factor.hpp
/// Dense direct factorizations of the block matrices: pivoted LDL^T with
/// inertia for symmetric indefinite systems, LU with partial pivoting for the
/// nonsymmetric ones, and residual-driven iterative refinement on top.

#pragma once

#include "cpkrylov/linops.hpp"

#include <vector>

namespace cpk {

/// Signs of the eigenvalues of a symmetric matrix, read from the 1x1/2x2
/// pivot blocks of its LDL^T factorization (Sylvester's law of inertia).
struct Inertia {
  Index n_pos = 0;
  Index n_neg = 0;
  Index n_zero = 0;
};

enum class FactorKind { SymmetricIndefinite, LuGeneral };

/// Immutable factorization handle. Solves are reentrant. A singular
/// factorization still reports size and inertia but refuses to solve.
class Factorization {
 public:
  /// Bunch-Kaufman pivoted LDL^T of a matrix tagged symmetric. Pivot block
  /// eigenvalues below 1e-12 times the largest pivot magnitude count as zero.
  static Factorization symmetric_indefinite(const MatrixStorage& M,
                                            bool require_nonsingular = false);

  /// LU with partial pivoting; no inertia in this mode.
  static Factorization lu(const MatrixStorage& M);

  Vector solve(const Vector& rhs) const;

  Index size() const { return size_; }
  FactorKind kind() const { return kind_; }
  bool singular() const { return singular_; }
  const Inertia& inertia() const;

 private:
  Factorization() = default;

  Index size_ = 0;
  FactorKind kind_ = FactorKind::SymmetricIndefinite;
  bool singular_ = false;
  Inertia inertia_;
  DenseMatrix factors_;
  std::vector<int> ipiv_;
};

Factorization factorize_symmetric_indefinite(const MatrixStorage& M,
                                             bool require_nonsingular = false);
Factorization factorize_lu(const MatrixStorage& M);
Vector factor_solve(const Factorization& F, const Vector& rhs);

struct RefineResult {
  Vector z;
  double residual_norm = 0.0;  // relative to ||rhs||
  Index steps = 0;
};

/// Solves M z = rhs through F, then applies correction solves while the
/// relative residual exceeds tol, up to max_steps corrections. The reported
/// residual never increases: a correction that would degrade it is discarded.
RefineResult refine_solve(const Factorization& F, const MatrixStorage& M, const Vector& rhs,
                          double tol, Index max_steps);

}  // namespace cpk
