#include "cpkrylov/saddle.hpp"

#include <cmath>

namespace cpk {

RegularizedSaddleSystem::RegularizedSaddleSystem(LinearOperator A, MatrixStorage B,
                                                 MatrixStorage C, Vector b1, Vector b2)
    : A_(std::move(A)), B_(std::move(B)), C_(std::move(C)), b1_(std::move(b1)),
      b2_(std::move(b2)) {
  if (A_.rows() != A_.cols()) throw DimensionError("system: A must be square");
  if (B_.cols() != A_.cols()) throw DimensionError("system: B column count must match A");
  if (C_.rows() != B_.rows() || C_.cols() != B_.rows())
    throw DimensionError("system: C must be m-by-m");
  if (!C_.symmetric()) throw DimensionError("system: C must be tagged symmetric");
  if (b1_.size() != A_.rows()) throw DimensionError("system: b1 length must be n");
  if (b2_.size() == 0) b2_ = Vector::Zero(B_.rows());
  if (b2_.size() != B_.rows()) throw DimensionError("system: b2 length must be m");
}

Vector RegularizedSaddleSystem::residual_x(const Vector& x, const Vector& y) const {
  return b1_ - A_.apply(x) - B_.apply_transpose(y);
}

Vector RegularizedSaddleSystem::residual_y(const Vector& x, const Vector& y) const {
  return b2_ - (B_.apply(x) - C_.apply(y));
}

double RegularizedSaddleSystem::relative_residual(const Vector& x, const Vector& y) const {
  const double rhs = std::hypot(b1_.norm(), b2_.norm());
  const double res = std::hypot(residual_x(x, y).norm(), residual_y(x, y).norm());
  return rhs == 0.0 ? res : res / rhs;
}

namespace {

MatrixStorage assemble_preconditioner(const MatrixStorage& G, const MatrixStorage& B,
                                      const MatrixStorage& C) {
  if (!G.symmetric()) throw DimensionError("preconditioner: G must be tagged symmetric");
  return assemble_block_2x2(G, B, C);
}

Factorization factorize_preconditioner(const MatrixStorage& P) {
  try {
    return Factorization::symmetric_indefinite(P, /*require_nonsingular=*/true);
  } catch (const SingularMatrixError&) {
    throw SingularMatrixError("constraint preconditioner [G B^T; B -C] is singular");
  }
}

}  // namespace

ConstraintPreconditioner::ConstraintPreconditioner(MatrixStorage G, MatrixStorage B,
                                                   MatrixStorage C, CpOptions opts)
    : n_(G.rows()), m_(B.rows()), G_(std::move(G)), B_(std::move(B)), C_(std::move(C)),
      P_(assemble_preconditioner(G_, B_, C_)), factor_(factorize_preconditioner(P_)),
      opts_(opts), zbar_prev_(Vector::Zero(m_)) {
  if (opts_.refine_tol <= 0) throw std::invalid_argument("preconditioner: refine_tol must be positive");
  if (opts_.refine_max < 0) throw std::invalid_argument("preconditioner: refine_max must be nonnegative");
}

std::pair<Vector, Vector> ConstraintPreconditioner::apply(const Vector& r1,
                                                          const Vector& r2) const {
  if (r1.size() != n_ || r2.size() != m_)
    throw DimensionError("apply_cp: block lengths must be (n, m)");
  Vector rhs(n_ + m_);
  rhs.head(n_) = r1;
  rhs.tail(m_) = r2;
  RefineResult res = refine_solve(factor_, P_, rhs, opts_.refine_tol, opts_.refine_max);
  return {res.z.head(n_), res.z.tail(m_)};
}

std::pair<Vector, Vector> ConstraintPreconditioner::project(const Vector& u, const Vector& t) {
  if (u.size() != n_ || t.size() != m_)
    throw DimensionError("project_step: block lengths must be (n, m)");
  if (!opts_.semi_refine) return apply(u, -t);
  // Shifted right-hand side; the shift moves the multiplier by -zbar_prev,
  // which is added back so both variants return the same (pbar, zbar).
  auto [pbar, zshift] = apply(u - B_.apply_transpose(zbar_prev_),
                              -(t - C_.apply(zbar_prev_)));
  Vector zbar = zshift + zbar_prev_;
  zbar_prev_ = zbar;
  return {std::move(pbar), std::move(zbar)};
}

double ConstraintPreconditioner::p_seminorm(const Vector& rx) const {
  if (rx.size() != n_) throw DimensionError("p_seminorm: vector length must be n");
  auto [h, l] = apply(rx, Vector::Zero(m_));
  const double quad = rx.dot(h);
  const double tol_neg = 1e-10 * rx.squaredNorm();
  if (quad < -tol_neg)
    throw IndefiniteError("p_seminorm: negative quadratic form, preconditioner is not positive "
                          "definite on the constraint nullspace");
  return std::sqrt(std::max(quad, 0.0));
}

void ConstraintPreconditioner::reset_projection_memory() { zbar_prev_.setZero(); }

const AssumptionReport& ConstraintPreconditioner::assumption_report() const {
  if (!assumption_) {
    Factorization cf = Factorization::symmetric_indefinite(C_);
    AssumptionReport rep;
    rep.neg_precond = factor_.inertia().n_neg;
    rep.neg_c = cf.inertia().n_neg;
    rep.m = m_;
    rep.holds = rep.neg_precond + rep.neg_c == m_;
    assumption_ = rep;
  }
  return *assumption_;
}

ConstraintPreconditioner build_constraint_preconditioner(MatrixStorage G, MatrixStorage B,
                                                         MatrixStorage C, CpOptions opts) {
  return ConstraintPreconditioner(std::move(G), std::move(B), std::move(C), opts);
}

AssumptionReport check_assumption_2_1(const ConstraintPreconditioner& P) {
  return P.assumption_report();
}

bool check_cg_applicability(const Inertia& K_inertia, const Inertia& C_inertia, Index m) {
  return K_inertia.n_neg + C_inertia.n_neg == m;
}

}  // namespace cpk
