/// \file problems.hpp
/// Test-problem generators: seeded random regularized systems with
/// controllable structure, the singular 5x5 example whose blocks satisfy the
/// nonsingularity conditions while the assembled matrix does not, and a toy
/// box-constrained QP with a primal-dual interior-point loop that produces
/// the K2 / K3.5 / K3p saddle-point formulations of its Newton systems.

#pragma once

#include "cpkrylov/solvers.hpp"

#include <cstdint>

namespace cpk {

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GenProps {
  Index c_rank = -1;        // -1 selects full rank m
  bool c_psd = true;
  bool a_symmetric = true;
  bool a_definite = true;   // ignored when a_symmetric is false
  bool assumption_ok = true;
  Index g_nullity = 0;      // nullity of A - G; > 0 needs a symmetric definite A
  bool g_near_a = false;    // G = sym(A) + small perturbation: clustered spectrum
  bool general_rhs = false; // emit a nonzero b2
};

struct GeneratedSystem {
  RegularizedSaddleSystem sys;
  MatrixStorage G;
};

/// Deterministic per (n, m, seed, props): the same call always returns the
/// same system. The assembled matrix is verified nonsingular and the
/// requested structure (C rank, inertia test outcome) is checked before
/// returning; a seed whose draw fails verification is retried on a derived
/// stream and reported after too many attempts.
GeneratedSystem gen_random_system(Index n, Index m, std::uint64_t seed, GenProps props = {});

/// The fixed 3+2 example: both block nonsingularity conditions hold yet the
/// assembled matrix has an all-zero second row. b1 is fixed to ones.
RegularizedSaddleSystem counterexample_system();

/// Box-constrained convex QP with primal and dual regularization:
///   minimize 0.5 x'Hx + c'x + 0.5 ||D1 x||^2 + 0.5 ||r||^2
///   subject to Bq x + D2 r = con_rhs,  l <= x <= u.
struct ToyQP {
  MatrixStorage H;   // nq-by-nq symmetric PSD, non-diagonal
  Vector c;
  MatrixStorage Bq;  // mq-by-nq
  Vector con_rhs;
  Vector l, u;       // l < u componentwise
  Vector d1, d2;     // positive diagonals of D1, D2

  Index nq() const { return c.size(); }
  Index mq() const { return con_rhs.size(); }
};

ToyQP gen_toy_qp(Index nq, Index mq, std::uint64_t seed);

/// Strictly interior primal-dual point; x1 = x - l and x2 = u - x stay
/// positive, as do the bound duals z1, z2. mu is the barrier parameter used
/// in the Newton right-hand side.
struct IPState {
  Vector x, x1, x2;
  Vector y;
  Vector z1, z2;
  double mu = 0.0;
};

IPState ip_initial_state(const ToyQP& qp);

enum class KktKind { K2, K35, K3p };

KktKind kkt_kind_from_name(const std::string& name);
const char* to_string(KktKind k);

/// Newton-step direction in the original variables.
struct NewtonStep {
  Vector dx, dy, dz1, dz2;
};

/// Assembles the selected saddle-point formulation of the Newton system at
/// the given state, with G equal to the diagonal of the leading block.
GeneratedSystem formulate(const ToyQP& qp, const IPState& state, KktKind kind);

/// Maps a solution of the formulated system back to (dx, dy, dz1, dz2).
NewtonStep recover_newton_step(const ToyQP& qp, const IPState& state, KktKind kind,
                               const Vector& x_sol, const Vector& y_sol);

/// Residual of the perturbed optimality conditions at mu = 0 (max norm).
double kkt_residual(const ToyQP& qp, const IPState& state);

struct IpReport {
  Index outer_it = 0;
  Index inner_it_total = 0;
  double kkt_residual = 0.0;
  bool converged = false;
  std::vector<double> mu_history;   // duality measure at each outer iteration
  std::vector<double> eps_history;  // absolute tolerance handed to the solver
  IPState final_state;
};

/// Basic primal-dual path-following loop: each Newton system is solved with
/// reg_cpkrylov at the mu-adaptive absolute tolerance
/// max(min(1e-2 mu, 1e-2), 1e-6) and zero relative tolerance; steps take
/// fraction 0.995 to the boundary and the barrier target shrinks by 0.1.
IpReport toy_ip_solve(const ToyQP& qp, KktKind kind, Method method,
                      const SolverOptions& base_opts = {}, Index max_outer = 50);

}  // namespace cpk
