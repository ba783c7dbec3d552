/// \file processes.hpp
/// Constraint-preconditioned Lanczos and Arnoldi basis-generation processes,
/// exposed as resumable states. Each step performs products with A and C plus
/// one projection through the preconditioner; B never multiplies a vector.
///
/// Basis pairs (p_k, q_k) satisfy B p_k + C q_k = 0 and correspond to the
/// full-space basis vectors [p_k; -q_k]. A normalizer whose square goes
/// negative beyond roundoff reports an indefinite preconditioner; one that
/// merely collapses to zero finishes the process (the Krylov space is
/// exhausted).

#pragma once

#include "cpkrylov/saddle.hpp"

#include <deque>
#include <vector>

namespace cpk {

/// Thrown when the start pair violates B x0 - C q0 = 0.
class InfeasibleStartError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct LanczosState {
  Index k = 0;          // index of the current basis pair
  Vector p_prev, p;     // pairs k-1 and k (x-part)
  Vector q_prev, q;     // pairs k-1 and k (y-part, sign-flipped convention)
  Vector u, t;          // u = A p, t = C q of the last completed step
  double alpha = 0.0;   // alpha_{k-1}: diagonal entry produced by the last step
  double beta = 0.0;    // beta_k: normalizer of the current pair
  bool finished = false;
};

/// Tridiagonal data accumulated from a Lanczos run: diag holds alpha_1..k,
/// offdiag holds beta_2..k (one entry fewer).
struct TridiagonalData {
  std::vector<double> diag;
  std::vector<double> offdiag;
};

LanczosState cp_lanczos_init(const RegularizedSaddleSystem& sys, ConstraintPreconditioner& P,
                             const Vector& x0, const Vector& q0);
void cp_lanczos_step(LanczosState& state, const RegularizedSaddleSystem& sys,
                     ConstraintPreconditioner& P);

struct ArnoldiState {
  Index k = 0;                  // number of basis pairs generated so far
  std::deque<Vector> basis_p;   // window of stored pairs; index of front() is
  std::deque<Vector> basis_q;   // first_index
  Index first_index = 1;
  std::vector<double> h;        // column k: h_{i,k} for i = h_first..k, then h_{k+1,k}
  Index h_first = 1;
  double h_init = 0.0;          // h_{1,0}, the norm of the initial residual
  bool finished = false;

  const Vector& p(Index i) const { return basis_p.at(i - first_index); }
  const Vector& q(Index i) const { return basis_q.at(i - first_index); }
};

ArnoldiState cp_arnoldi_init(const RegularizedSaddleSystem& sys, ConstraintPreconditioner& P,
                             const Vector& x0, const Vector& q0);

/// One orthogonalization step against the last `mem` pairs; mem <= 0 keeps
/// the whole basis (plain Arnoldi).
void cp_arnoldi_step(ArnoldiState& state, const RegularizedSaddleSystem& sys,
                     ConstraintPreconditioner& P, Index mem = 0);

}  // namespace cpk
