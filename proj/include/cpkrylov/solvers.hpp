/// \file solvers.hpp
/// Constraint-preconditioned Krylov solvers for the regularized saddle-point
/// system, built on the CP-Lanczos and CP-Arnoldi processes:
///
///   - CP-MINRES, CP-SYMMLQ and two forms of CP-CG for symmetric A,
///   - CP-GMRES(l) and CP-DQGMRES(l) for general A,
///
/// plus reg_cpkrylov(), the driver that handles a general right-hand side
/// [b1; b2] by shifting the iterates so every solver can start from zero.
///
/// All solvers stop on ||r_k||_[P] <= atol + ||r_0||_[P] * rtol, where the
/// seminorm comes out of the recurrences for MINRES, CG, GMRES and (as an
/// estimate) DQGMRES. SYMMLQ measures it directly, for both its own iterate
/// and the companion CG point, since its recurrences expose neither; on
/// termination it moves to the CG point when that measures smaller.

#pragma once

#include "cpkrylov/processes.hpp"

#include <functional>
#include <vector>

namespace cpk {

/// Thrown in strict mode when the inertia test rejects the preconditioner.
class AssumptionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SolveStatus { Converged, MaxIterations, Breakdown, IndefiniteDetected };

const char* to_string(SolveStatus s);

struct SolverOptions {
  double atol = 1e-8;
  double rtol = 1e-6;
  Index maxit = 0;    // 0 selects 2 (n + m)
  Index mem = 2;      // DQGMRES window
  Index restart = 20; // GMRES cycle length
  bool semi_refine = false;
  bool strict_assumption = false;

  /// Test hook, called after every iteration with (k, x_k, y_k).
  std::function<void(Index, const Vector&, const Vector&)> iterate_hook;
};

struct SolveResult {
  Vector x;
  Vector y;
  Index iterations = 0;
  std::vector<double> history;      // [P]-seminorm residuals, history[0] = ||r_0||
  bool history_is_estimate = false; // true for DQGMRES
  SolveStatus status = SolveStatus::MaxIterations;
  double final_relative_residual = -1.0;  // filled by reg_cpkrylov
};

SolveResult solve_cp_minres(const RegularizedSaddleSystem& sys, ConstraintPreconditioner& P,
                            const Vector& x0, const Vector& y0, const SolverOptions& opts = {});

enum class CgForm { Lanczos, Traditional };

SolveResult solve_cp_cg(const RegularizedSaddleSystem& sys, ConstraintPreconditioner& P,
                        const Vector& x0, const Vector& y0, const SolverOptions& opts = {},
                        CgForm form = CgForm::Traditional);

SolveResult solve_cp_symmlq(const RegularizedSaddleSystem& sys, ConstraintPreconditioner& P,
                            const Vector& x0, const Vector& y0, const SolverOptions& opts = {});

SolveResult solve_cp_gmres(const RegularizedSaddleSystem& sys, ConstraintPreconditioner& P,
                           const Vector& x0, const Vector& y0, const SolverOptions& opts = {});

SolveResult solve_cp_dqgmres(const RegularizedSaddleSystem& sys, ConstraintPreconditioner& P,
                             const Vector& x0, const Vector& y0, const SolverOptions& opts = {});

enum class Method { Cg, CgLanczos, Minres, Symmlq, Gmres, Dqgmres };

Method method_from_name(const std::string& name);
const char* to_string(Method m);

/// Builds the preconditioner from G and the system blocks, reduces a general
/// right-hand side to the b2 = 0 form through one preconditioner application,
/// runs the selected solver from a zero start, undoes the shift, and verifies
/// the residual of the original system before reporting convergence.
SolveResult reg_cpkrylov(const RegularizedSaddleSystem& sys, const MatrixStorage& G,
                         Method method, const SolverOptions& opts = {},
                         const CpOptions& cp_opts = {});

}  // namespace cpk
