/// \file saddle.hpp
/// The regularized saddle-point system [A B^T; B -C][x;y] = [b1;b2], the
/// constraint preconditioner [G B^T; B -C] with its factorization, the
/// projection step used by the basis-generation processes, and the seminorm
/// that measures how far a residual sits from the relevant range space.

#pragma once

#include "cpkrylov/factor.hpp"
#include "cpkrylov/linops.hpp"

#include <optional>
#include <utility>

namespace cpk {

class RegularizedSaddleSystem {
 public:
  /// A may be any square operator (possibly nonsymmetric); B is m-by-n, C is
  /// m-by-m and must be tagged symmetric. Empty b2 means zero.
  RegularizedSaddleSystem(LinearOperator A, MatrixStorage B, MatrixStorage C, Vector b1,
                          Vector b2 = Vector());

  Index n() const { return A_.rows(); }
  Index m() const { return B_.rows(); }

  const LinearOperator& A() const { return A_; }
  const MatrixStorage& B() const { return B_; }
  const MatrixStorage& C() const { return C_; }
  const Vector& b1() const { return b1_; }
  const Vector& b2() const { return b2_; }

  /// b1 - A x - B^T y, the first block of the residual of the full system.
  Vector residual_x(const Vector& x, const Vector& y) const;
  /// b2 - (B x - C y), the second block.
  Vector residual_y(const Vector& x, const Vector& y) const;
  /// Euclidean norm of the stacked residual relative to ||[b1;b2]||.
  double relative_residual(const Vector& x, const Vector& y) const;

 private:
  LinearOperator A_;
  MatrixStorage B_;
  MatrixStorage C_;
  Vector b1_;
  Vector b2_;
};

struct CpOptions {
  double refine_tol = 1e-10;
  Index refine_max = 2;
  bool semi_refine = false;
};

struct AssumptionReport {
  bool holds = false;
  Index neg_precond = 0;
  Index neg_c = 0;
  Index m = 0;
};

/// Factorized constraint preconditioner P = [G B^T; B -C].
///
/// Applications go through the inertia-revealing LDL^T of P with iterative
/// refinement. project() optionally applies iterative semi-refinement: the
/// right-hand side is shifted by the range-space vector built from the
/// previous projection's multiplier, which coincides with the plain
/// projection in exact arithmetic. The multiplier memory belongs to one
/// solve at a time; solvers reset it when they start.
class ConstraintPreconditioner {
 public:
  ConstraintPreconditioner(MatrixStorage G, MatrixStorage B, MatrixStorage C,
                           CpOptions opts = {});

  Index n() const { return n_; }
  Index m() const { return m_; }
  const Inertia& inertia() const { return factor_.inertia(); }
  const MatrixStorage& G() const { return G_; }
  const MatrixStorage& B() const { return B_; }
  const MatrixStorage& C() const { return C_; }
  const MatrixStorage& matrix() const { return P_; }
  const CpOptions& options() const { return opts_; }

  void set_semi_refine(bool on) { opts_.semi_refine = on; }

  /// Solves P [z1; z2] = [r1; r2] with refinement.
  std::pair<Vector, Vector> apply(const Vector& r1, const Vector& r2) const;

  /// Projection step: solves P [pbar; zbar] = [u; -t] (optionally through the
  /// semi-refined right-hand side) and returns (pbar, zbar).
  std::pair<Vector, Vector> project(const Vector& u, const Vector& t);

  /// Seminorm of a first-block residual: sqrt(rx' h) with P [h; l] = [rx; 0].
  /// A quadratic form below -1e-10 ||rx||^2 reports an indefinite
  /// preconditioner on the nullspace.
  double p_seminorm(const Vector& rx) const;

  void reset_projection_memory();

  /// Inertia-based test: the preconditioner is positive definite on the
  /// relevant nullspace exactly when neg(P) + neg(C) = m.
  const AssumptionReport& assumption_report() const;

 private:
  Index n_;
  Index m_;
  MatrixStorage G_;
  MatrixStorage B_;
  MatrixStorage C_;
  MatrixStorage P_;
  Factorization factor_;
  CpOptions opts_;
  Vector zbar_prev_;
  mutable std::optional<AssumptionReport> assumption_;
};

ConstraintPreconditioner build_constraint_preconditioner(MatrixStorage G, MatrixStorage B,
                                                         MatrixStorage C, CpOptions opts = {});

AssumptionReport check_assumption_2_1(const ConstraintPreconditioner& P);

/// Applicability test for the Lanczos flavor of CG: neg(K) + neg(C) = m makes
/// the reduced operator positive definite.
bool check_cg_applicability(const Inertia& K_inertia, const Inertia& C_inertia, Index m);

}  // namespace cpk
