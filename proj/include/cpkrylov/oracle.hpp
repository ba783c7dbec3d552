/// \file oracle.hpp
/// Dense reference implementations used for validation: the C = E F E^T
/// decomposition and nullspace machinery the production solvers deliberately
/// avoid, the projected and full-space basis processes, direct solves of the
/// full system, and the spectrum of the preconditioned operator.
///
/// Everything here is dense, size-capped, and independent of the production
/// factorization path (solves go through Eigen's decompositions).

#pragma once

#include "cpkrylov/saddle.hpp"

#include <complex>
#include <vector>

namespace cpk {
namespace oracle {

/// Dense-oracle size cap on n + m.
constexpr Index kMaxSize = 400;

/// Rank-revealing symmetric decomposition C = E F E^T with diagonal F.
/// Eigenvalues below 1e-10 of the largest magnitude are dropped; F may mix
/// signs since C need not be semidefinite.
struct CDecomposition {
  DenseMatrix E;   // m-by-p, orthonormal columns
  Vector F_diag;   // p nonzero eigenvalues
  Index p = 0;     // rank of C
};

CDecomposition decompose_c(const MatrixStorage& C);

/// Orthonormal basis Z of the nullspace of N = [B E], split into the n-row
/// block Z1 and the p-row block Z2.
struct NullspaceBasis {
  DenseMatrix Z;  // (n+p)-by-(n+p-m)
  Index n = 0;
  Index p = 0;

  DenseMatrix Z1() const { return Z.topRows(n); }
  DenseMatrix Z2() const { return Z.bottomRows(p); }
};

NullspaceBasis nullspace_basis(const MatrixStorage& B, const CDecomposition& cd);

/// Trace of a Lanczos-type run. Vectors are stored per iteration starting at
/// k = 1; beta[0] is the initial normalizer beta_1 and beta[k] the normalizer
/// of vector k+1.
struct LanczosTrace {
  std::vector<Vector> vx;
  std::vector<Vector> vsecond;  // v_{k,w} for projected runs, v_{k,y} for full-space runs
  std::vector<double> alpha;
  std::vector<double> beta;
};

/// Trace of an Arnoldi-type run; H is (k+1)-by-k upper Hessenberg and h10 the
/// initial normalizer.
struct ArnoldiTrace {
  std::vector<Vector> vx;
  std::vector<Vector> vsecond;
  DenseMatrix H;
  double h10 = 0.0;
};

/// Projected Lanczos process on the expanded (n+p+m) formulation; requires
/// B x0 + E w0 = 0.
LanczosTrace projected_lanczos(const RegularizedSaddleSystem& sys, const MatrixStorage& G,
                               const CDecomposition& cd, const Vector& x0, const Vector& w0,
                               Index max_steps);

ArnoldiTrace projected_arnoldi(const RegularizedSaddleSystem& sys, const MatrixStorage& G,
                               const CDecomposition& cd, const Vector& x0, const Vector& w0,
                               Index max_steps);

/// Formal Lanczos process on the full system with the constraint
/// preconditioner applied as if it were definite; requires B x0 - C y0 = 0.
LanczosTrace full_space_lanczos(const RegularizedSaddleSystem& sys, const MatrixStorage& G,
                                const Vector& x0, const Vector& y0, Index max_steps);

ArnoldiTrace full_space_arnoldi(const RegularizedSaddleSystem& sys, const MatrixStorage& G,
                                const Vector& x0, const Vector& y0, Index max_steps);

/// Dense solve of the full system; symmetric systems go through the
/// inertia-revealing route, nonsymmetric ones through rank-revealing LU.
/// Throws SingularMatrixError when K is singular.
std::pair<Vector, Vector> direct_solve(const RegularizedSaddleSystem& sys);

/// Eigenvalues of P^{-1} K.
std::vector<std::complex<double>> preconditioned_spectrum(const MatrixStorage& P,
                                                          const MatrixStorage& K);

/// Number of spectrum entries within tol of the point `where`.
Index count_near(const std::vector<std::complex<double>>& spectrum, double where, double tol);

/// Dense materialization of an abstract operator (columnwise application).
DenseMatrix materialize(const LinearOperator& op);

}  // namespace oracle
}  // namespace cpk
