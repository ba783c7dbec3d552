#include "cpkrylov/factor.hpp"

#include <lapacke.h>

#include <cmath>
#include <limits>

namespace cpk {

namespace {

constexpr double kZeroPivotRel = 1e-12;

/// Eigenvalues of the symmetric 2x2 block [[a, b], [b, c]].
std::pair<double, double> block_eigenvalues(double a, double b, double c) {
  const double mid = 0.5 * (a + c);
  const double rad = std::hypot(0.5 * (a - c), b);
  return {mid + rad, mid - rad};
}

}  // namespace

Factorization Factorization::symmetric_indefinite(const MatrixStorage& M,
                                                  bool require_nonsingular) {
  if (M.rows() != M.cols())
    throw DimensionError("symmetric_indefinite: matrix must be square");
  if (!M.symmetric())
    throw DimensionError("symmetric_indefinite: matrix must be tagged symmetric");

  Factorization F;
  F.kind_ = FactorKind::SymmetricIndefinite;
  F.size_ = M.rows();
  F.factors_ = M.to_dense();
  F.ipiv_.assign(F.size_, 0);

  const lapack_int n = static_cast<lapack_int>(F.size_);
  if (n > 0) {
    lapack_int info = LAPACKE_dsytrf(LAPACK_COL_MAJOR, 'L', n, F.factors_.data(), n,
                                     F.ipiv_.data());
    if (info < 0) throw std::logic_error("dsytrf: invalid argument");
    // info > 0 flags an exactly zero pivot; the factorization is complete and
    // the inertia scan below will account for it.
  }

  // Scan the block diagonal of D. The zero threshold is relative to the
  // largest pivot magnitude so inertia is scale invariant.
  double scale = 0.0;
  for (Index k = 0; k < F.size_;) {
    if (F.ipiv_[k] > 0) {
      scale = std::max(scale, std::abs(F.factors_(k, k)));
      ++k;
    } else {
      auto [l1, l2] = block_eigenvalues(F.factors_(k, k), F.factors_(k + 1, k),
                                        F.factors_(k + 1, k + 1));
      scale = std::max({scale, std::abs(l1), std::abs(l2)});
      k += 2;
    }
  }
  const double tol = kZeroPivotRel * scale;
  auto classify = [&](double lambda) {
    if (std::abs(lambda) <= tol)
      ++F.inertia_.n_zero;
    else if (lambda > 0)
      ++F.inertia_.n_pos;
    else
      ++F.inertia_.n_neg;
  };
  for (Index k = 0; k < F.size_;) {
    if (F.ipiv_[k] > 0) {
      classify(F.factors_(k, k));
      ++k;
    } else {
      auto [l1, l2] = block_eigenvalues(F.factors_(k, k), F.factors_(k + 1, k),
                                        F.factors_(k + 1, k + 1));
      classify(l1);
      classify(l2);
      k += 2;
    }
  }
  F.singular_ = F.inertia_.n_zero > 0;
  if (require_nonsingular && F.singular_)
    throw SingularMatrixError("symmetric_indefinite: matrix is singular (" +
                              std::to_string(F.inertia_.n_zero) + " zero pivots)");
  return F;
}

Factorization Factorization::lu(const MatrixStorage& M) {
  if (M.rows() != M.cols()) throw DimensionError("lu: matrix must be square");

  Factorization F;
  F.kind_ = FactorKind::LuGeneral;
  F.size_ = M.rows();
  F.factors_ = M.to_dense();
  F.ipiv_.assign(F.size_, 0);

  const lapack_int n = static_cast<lapack_int>(F.size_);
  lapack_int info = 0;
  if (n > 0)
    info = LAPACKE_dgetrf(LAPACK_COL_MAJOR, n, n, F.factors_.data(), n, F.ipiv_.data());
  if (info < 0) throw std::logic_error("dgetrf: invalid argument");
  if (info > 0) {
    F.singular_ = true;  // exactly zero pivot
  } else if (n > 0) {
    double umax = 0.0, umin = std::numeric_limits<double>::infinity();
    for (Index k = 0; k < F.size_; ++k) {
      const double u = std::abs(F.factors_(k, k));
      umax = std::max(umax, u);
      umin = std::min(umin, u);
    }
    F.singular_ = umax == 0.0 || umin <= 1e-13 * umax;
  }
  return F;
}

Vector Factorization::solve(const Vector& rhs) const {
  if (rhs.size() != size_) throw DimensionError("factor_solve: right-hand side length mismatch");
  if (singular_) throw SingularMatrixError("factor_solve: factorization is singular");
  Vector z = rhs;
  const lapack_int n = static_cast<lapack_int>(size_);
  if (n == 0) return z;
  lapack_int info;
  if (kind_ == FactorKind::SymmetricIndefinite)
    info = LAPACKE_dsytrs(LAPACK_COL_MAJOR, 'L', n, 1, factors_.data(), n, ipiv_.data(),
                          z.data(), n);
  else
    info = LAPACKE_dgetrs(LAPACK_COL_MAJOR, 'N', n, 1, factors_.data(), n, ipiv_.data(),
                          z.data(), n);
  if (info != 0) throw std::logic_error("LAPACK triangular solve failed");
  return z;
}

const Inertia& Factorization::inertia() const {
  if (kind_ != FactorKind::SymmetricIndefinite)
    throw std::logic_error("inertia is only available for symmetric indefinite factorizations");
  return inertia_;
}

Factorization factorize_symmetric_indefinite(const MatrixStorage& M, bool require_nonsingular) {
  return Factorization::symmetric_indefinite(M, require_nonsingular);
}

Factorization factorize_lu(const MatrixStorage& M) { return Factorization::lu(M); }

Vector factor_solve(const Factorization& F, const Vector& rhs) { return F.solve(rhs); }

RefineResult refine_solve(const Factorization& F, const MatrixStorage& M, const Vector& rhs,
                          double tol, Index max_steps) {
  if (tol <= 0) throw std::invalid_argument("refine_solve: tol must be positive");
  if (max_steps < 0) throw std::invalid_argument("refine_solve: max_steps must be nonnegative");
  if (M.rows() != F.size() || M.cols() != F.size())
    throw DimensionError("refine_solve: matrix shape does not match the factorization");

  RefineResult out;
  out.z = F.solve(rhs);
  const double rhs_norm = rhs.norm();
  if (rhs_norm == 0.0) {
    out.z.setZero();
    return out;
  }
  Vector residual = rhs - M.apply(out.z);
  out.residual_norm = residual.norm() / rhs_norm;
  while (out.residual_norm > tol && out.steps < max_steps) {
    Vector candidate = out.z + F.solve(residual);
    Vector cand_residual = rhs - M.apply(candidate);
    const double cand_norm = cand_residual.norm() / rhs_norm;
    if (cand_norm >= out.residual_norm) break;  // refinement stalled
    out.z = std::move(candidate);
    residual = std::move(cand_residual);
    out.residual_norm = cand_norm;
    ++out.steps;
  }
  return out;
}

}  // namespace cpk
