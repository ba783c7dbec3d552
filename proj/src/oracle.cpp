#include "cpkrylov/oracle.hpp"

#include "cpkrylov/processes.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <cmath>
#include <limits>

namespace cpk {
namespace oracle {

namespace {

void check_size(Index n_plus_m) {
  if (n_plus_m > kMaxSize)
    throw std::invalid_argument("oracle: instance exceeds the dense-oracle size cap");
}

/// Dense solver with one refinement pass; keeps oracle solves independent of
/// the production LDL^T path.
class DenseSolver {
 public:
  explicit DenseSolver(DenseMatrix M) : M_(std::move(M)), lu_(M_) {}

  Vector solve(const Vector& rhs) const {
    Vector z = lu_.solve(rhs);
    z += lu_.solve(rhs - M_ * z);
    return z;
  }

 private:
  DenseMatrix M_;
  Eigen::PartialPivLU<DenseMatrix> lu_;
};

/// The expanded projection matrix [[G, 0, B^T], [0, F^{-1}, E^T], [B, E, 0]].
DenseMatrix expanded_projection_matrix(const MatrixStorage& G, const MatrixStorage& B,
                                       const CDecomposition& cd) {
  const Index n = G.rows();
  const Index m = B.rows();
  const Index p = cd.p;
  DenseMatrix M = DenseMatrix::Zero(n + p + m, n + p + m);
  M.topLeftCorner(n, n) = G.to_dense();
  M.block(n, n, p, p) = cd.F_diag.cwiseInverse().asDiagonal();
  M.block(0, n + p, n, m) = B.to_dense().transpose();
  M.block(n, n + p, p, m) = cd.E.transpose();
  M.block(n + p, 0, m, n) = B.to_dense();
  M.block(n + p, n, m, p) = cd.E;
  return M;
}

double normalizer_or_zero(double squared, double scale) {
  if (squared < -1e-4 * scale)  // thresholds mirror the production processes
    throw IndefiniteError("oracle process: negative squared normalizer");
  if (squared <= 64.0 * std::numeric_limits<double>::epsilon() * scale) return 0.0;
  return std::sqrt(squared);
}

}  // namespace

CDecomposition decompose_c(const MatrixStorage& C) {
  if (!C.symmetric()) throw DimensionError("decompose_c: C must be tagged symmetric");
  const DenseMatrix Cd = C.to_dense();
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(Cd);
  if (es.info() != Eigen::Success) throw std::runtime_error("decompose_c: eigensolver failed");
  const Vector& lambda = es.eigenvalues();
  const double tol = 1e-10 * (lambda.size() ? lambda.cwiseAbs().maxCoeff() : 0.0);

  std::vector<Index> keep;
  for (Index i = 0; i < lambda.size(); ++i)
    if (std::abs(lambda[i]) > tol) keep.push_back(i);

  CDecomposition cd;
  cd.p = static_cast<Index>(keep.size());
  cd.E.resize(C.rows(), cd.p);
  cd.F_diag.resize(cd.p);
  for (Index j = 0; j < cd.p; ++j) {
    cd.E.col(j) = es.eigenvectors().col(keep[j]);
    cd.F_diag[j] = lambda[keep[j]];
  }
  return cd;
}

NullspaceBasis nullspace_basis(const MatrixStorage& B, const CDecomposition& cd) {
  const Index m = B.rows();
  const Index n = B.cols();
  const Index p = cd.p;
  DenseMatrix N(m, n + p);
  N.leftCols(n) = B.to_dense();
  N.rightCols(p) = cd.E;

  Eigen::JacobiSVD<DenseMatrix> svd(N, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double tol = (sv.size() ? sv[0] : 0.0) * 1e-12 * std::max<Index>(n + p, m);
  Index rank = 0;
  for (Index i = 0; i < sv.size(); ++i)
    if (sv[i] > tol) ++rank;
  if (rank < m)
    throw SingularMatrixError("nullspace_basis: [B E] is rank deficient, the expanded system "
                              "is singular");

  NullspaceBasis Z;
  Z.n = n;
  Z.p = p;
  Z.Z = svd.matrixV().rightCols(n + p - rank);
  return Z;
}

LanczosTrace projected_lanczos(const RegularizedSaddleSystem& sys, const MatrixStorage& G,
                               const CDecomposition& cd, const Vector& x0, const Vector& w0,
                               Index max_steps) {
  check_size(sys.n() + sys.m());
  const Index n = sys.n();
  const Index p = cd.p;
  if (x0.size() != n || w0.size() != p)
    throw DimensionError("projected_lanczos: start pair must have lengths (n, p)");
  {
    const double infeas = (sys.B().apply(x0) + cd.E * w0).norm();
    const double scale = sys.B().frobenius_norm() * x0.norm() + cd.E.norm() * w0.norm();
    if (infeas > 1e-10 * scale)
      throw InfeasibleStartError("projected_lanczos: start violates B x0 + E w0 = 0");
  }

  DenseSolver proj(expanded_projection_matrix(G, sys.B(), cd));
  const Vector Finv = cd.F_diag.cwiseInverse();

  LanczosTrace tr;
  Vector vx_prev = Vector::Zero(n), vw_prev = -w0;
  Vector ux = sys.b1() - sys.A().apply(x0);
  Vector uw = -(Finv.asDiagonal() * w0);

  auto project = [&](const Vector& rx, const Vector& rw) {
    Vector rhs = Vector::Zero(n + p + sys.m());
    rhs.head(n) = rx;
    rhs.segment(n, p) = rw;
    Vector sol = proj.solve(rhs);
    return std::make_pair(Vector(sol.head(n)), Vector(sol.segment(n, p)));
  };

  auto [vx, vw] = project(ux, uw);
  double beta = normalizer_or_zero(vx.dot(ux) + vw.dot(uw),
                                   vx.norm() * ux.norm() + vw.norm() * uw.norm());
  tr.beta.push_back(beta);
  if (beta == 0.0) return tr;
  vx /= beta;
  vw /= beta;

  for (Index k = 1; k <= max_steps; ++k) {
    tr.vx.push_back(vx);
    tr.vsecond.push_back(vw);
    ux = sys.A().apply(vx);
    uw = Finv.asDiagonal() * vw;
    const double alpha = vx.dot(ux) + vw.dot(uw);
    tr.alpha.push_back(alpha);

    auto [bx, bw] = project(ux, uw);
    Vector nx = bx - alpha * vx - beta * vx_prev;
    Vector nw = bw - alpha * vw - beta * vw_prev;
    const double scale =
        ux.norm() * (bx.norm() + std::abs(alpha) * vx.norm() + beta * vx_prev.norm()) +
        uw.norm() * (bw.norm() + std::abs(alpha) * vw.norm() + beta * vw_prev.norm());
    const double beta_next = normalizer_or_zero(nx.dot(ux) + nw.dot(uw), scale);
    tr.beta.push_back(beta_next);
    if (beta_next == 0.0) break;
    nx /= beta_next;
    nw /= beta_next;
    vx_prev = std::move(vx);
    vw_prev = std::move(vw);
    vx = std::move(nx);
    vw = std::move(nw);
    beta = beta_next;
  }
  return tr;
}

ArnoldiTrace projected_arnoldi(const RegularizedSaddleSystem& sys, const MatrixStorage& G,
                               const CDecomposition& cd, const Vector& x0, const Vector& w0,
                               Index max_steps) {
  check_size(sys.n() + sys.m());
  const Index n = sys.n();
  const Index p = cd.p;
  if (x0.size() != n || w0.size() != p)
    throw DimensionError("projected_arnoldi: start pair must have lengths (n, p)");

  DenseSolver proj(expanded_projection_matrix(G, sys.B(), cd));
  const Vector Finv = cd.F_diag.cwiseInverse();

  auto project = [&](const Vector& rx, const Vector& rw) {
    Vector rhs = Vector::Zero(n + p + sys.m());
    rhs.head(n) = rx;
    rhs.segment(n, p) = rw;
    Vector sol = proj.solve(rhs);
    return std::make_pair(Vector(sol.head(n)), Vector(sol.segment(n, p)));
  };

  ArnoldiTrace tr;
  Vector ux = sys.b1() - sys.A().apply(x0);
  Vector uw = -(Finv.asDiagonal() * w0);
  auto [vx, vw] = project(ux, uw);
  tr.h10 = normalizer_or_zero(vx.dot(ux) + vw.dot(uw),
                              vx.norm() * ux.norm() + vw.norm() * uw.norm());
  if (tr.h10 == 0.0) {
    tr.H.resize(1, 0);
    return tr;
  }
  vx /= tr.h10;
  vw /= tr.h10;
  tr.vx.push_back(vx);
  tr.vsecond.push_back(vw);

  tr.H = DenseMatrix::Zero(max_steps + 1, max_steps);
  Index k = 0;
  for (k = 1; k <= max_steps; ++k) {
    ux = sys.A().apply(tr.vx[k - 1]);
    uw = Finv.asDiagonal() * tr.vsecond[k - 1];
    auto [nx, nw] = project(ux, uw);
    double scale = ux.norm() * nx.norm() + uw.norm() * nw.norm();
    for (Index i = 0; i < k; ++i) {
      const double hik = tr.vx[i].dot(ux) + tr.vsecond[i].dot(uw);
      tr.H(i, k - 1) = hik;
      nx -= hik * tr.vx[i];
      nw -= hik * tr.vsecond[i];
      scale += std::abs(hik) * (ux.norm() * tr.vx[i].norm() + uw.norm() * tr.vsecond[i].norm());
    }
    const double hnext = normalizer_or_zero(nx.dot(ux) + nw.dot(uw), scale);
    tr.H(k, k - 1) = hnext;
    if (hnext == 0.0) break;
    nx /= hnext;
    nw /= hnext;
    tr.vx.push_back(std::move(nx));
    tr.vsecond.push_back(std::move(nw));
  }
  const Index cols = std::min<Index>(k, max_steps);
  tr.H.conservativeResize(cols + 1, cols);
  return tr;
}

LanczosTrace full_space_lanczos(const RegularizedSaddleSystem& sys, const MatrixStorage& G,
                                const Vector& x0, const Vector& y0, Index max_steps) {
  check_size(sys.n() + sys.m());
  const Index n = sys.n();
  const Index m = sys.m();
  if (x0.size() != n || y0.size() != m)
    throw DimensionError("full_space_lanczos: start pair must have lengths (n, m)");

  const DenseMatrix A = materialize(sys.A());
  DenseMatrix K(n + m, n + m);
  K.topLeftCorner(n, n) = A;
  K.topRightCorner(n, m) = sys.B().to_dense().transpose();
  K.bottomLeftCorner(m, n) = sys.B().to_dense();
  K.bottomRightCorner(m, m) = -sys.C().to_dense();
  DenseMatrix P = K;
  P.topLeftCorner(n, n) = G.to_dense();
  DenseSolver prec(P);

  LanczosTrace tr;
  Vector v_prev = Vector::Zero(n + m);
  Vector r0(n + m);
  r0.head(n) = sys.b1() - A * x0 - sys.B().to_dense().transpose() * y0;
  r0.tail(m).setZero();  // enforced by B x0 - C y0 = 0

  Vector v = prec.solve(r0);
  double beta = normalizer_or_zero(v.dot(r0), v.norm() * r0.norm());
  tr.beta.push_back(beta);
  if (beta == 0.0) return tr;
  v /= beta;

  Vector u(n + m);
  for (Index k = 1; k <= max_steps; ++k) {
    tr.vx.push_back(v.head(n));
    tr.vsecond.push_back(v.tail(m));
    u = K * v;
    const double alpha = u.dot(v);
    tr.alpha.push_back(alpha);
    Vector vn = prec.solve(u);
    const double scale =
        u.norm() * (vn.norm() + std::abs(alpha) * v.norm() + beta * v_prev.norm());
    vn -= alpha * v + beta * v_prev;
    const double beta_next = normalizer_or_zero(vn.dot(u), scale);
    tr.beta.push_back(beta_next);
    if (beta_next == 0.0) break;
    vn /= beta_next;
    v_prev = std::move(v);
    v = std::move(vn);
    beta = beta_next;
  }
  return tr;
}

ArnoldiTrace full_space_arnoldi(const RegularizedSaddleSystem& sys, const MatrixStorage& G,
                                const Vector& x0, const Vector& y0, Index max_steps) {
  check_size(sys.n() + sys.m());
  const Index n = sys.n();
  const Index m = sys.m();
  if (x0.size() != n || y0.size() != m)
    throw DimensionError("full_space_arnoldi: start pair must have lengths (n, m)");

  const DenseMatrix A = materialize(sys.A());
  DenseMatrix K(n + m, n + m);
  K.topLeftCorner(n, n) = A;
  K.topRightCorner(n, m) = sys.B().to_dense().transpose();
  K.bottomLeftCorner(m, n) = sys.B().to_dense();
  K.bottomRightCorner(m, m) = -sys.C().to_dense();
  DenseMatrix P = K;
  P.topLeftCorner(n, n) = G.to_dense();
  DenseSolver prec(P);

  ArnoldiTrace tr;
  Vector r0(n + m);
  r0.head(n) = sys.b1() - A * x0 - sys.B().to_dense().transpose() * y0;
  r0.tail(m).setZero();

  Vector v = prec.solve(r0);
  tr.h10 = normalizer_or_zero(v.dot(r0), v.norm() * r0.norm());
  if (tr.h10 == 0.0) {
    tr.H.resize(1, 0);
    return tr;
  }
  v /= tr.h10;

  std::vector<Vector> basis{v};
  tr.H = DenseMatrix::Zero(max_steps + 1, max_steps);
  Index k = 0;
  for (k = 1; k <= max_steps; ++k) {
    Vector u = K * basis[k - 1];
    Vector vn = prec.solve(u);
    double scale = u.norm() * vn.norm();
    for (Index i = 0; i < k; ++i) {
      const double hik = basis[i].dot(u);
      tr.H(i, k - 1) = hik;
      vn -= hik * basis[i];
      scale += std::abs(hik) * u.norm() * basis[i].norm();
    }
    const double hnext = normalizer_or_zero(vn.dot(u), scale);
    tr.H(k, k - 1) = hnext;
    if (hnext == 0.0) break;
    vn /= hnext;
    basis.push_back(std::move(vn));
  }
  const Index cols = std::min<Index>(k, max_steps);
  tr.H.conservativeResize(cols + 1, cols);
  for (const auto& b : basis) {
    tr.vx.push_back(b.head(n));
    tr.vsecond.push_back(b.tail(m));
  }
  return tr;
}

std::pair<Vector, Vector> direct_solve(const RegularizedSaddleSystem& sys) {
  check_size(sys.n() + sys.m());
  const Index n = sys.n();
  const Index m = sys.m();
  const DenseMatrix A = materialize(sys.A());
  const bool a_symmetric =
      sys.A().symmetric() ||
      (A - A.transpose()).cwiseAbs().maxCoeff() <= 1e-14 * std::max(A.cwiseAbs().maxCoeff(), 1e-300);

  Vector rhs(n + m);
  rhs.head(n) = sys.b1();
  rhs.tail(m) = sys.b2();

  if (a_symmetric) {
    MatrixStorage K = assemble_block_2x2(
        MatrixStorage::dense(0.5 * (A + A.transpose()), Symmetry::Symmetric), sys.B(), sys.C());
    Factorization F = Factorization::symmetric_indefinite(K);
    if (F.singular()) throw SingularMatrixError("direct_solve: K is singular");
    RefineResult r = refine_solve(F, K, rhs, 1e-12, 2);
    return {r.z.head(n), r.z.tail(m)};
  }

  DenseMatrix K(n + m, n + m);
  K.topLeftCorner(n, n) = A;
  K.topRightCorner(n, m) = sys.B().to_dense().transpose();
  K.bottomLeftCorner(m, n) = sys.B().to_dense();
  K.bottomRightCorner(m, m) = -sys.C().to_dense();
  Eigen::FullPivLU<DenseMatrix> lu(K);
  lu.setThreshold(1e-13);
  if (!lu.isInvertible()) throw SingularMatrixError("direct_solve: K is singular");
  Vector z = lu.solve(rhs);
  z += lu.solve(rhs - K * z);
  return {z.head(n), z.tail(m)};
}

std::vector<std::complex<double>> preconditioned_spectrum(const MatrixStorage& P,
                                                          const MatrixStorage& K) {
  if (P.rows() != P.cols() || K.rows() != K.cols() || P.rows() != K.rows())
    throw DimensionError("preconditioned_spectrum: P and K must be square of equal size");
  check_size(P.rows());
  const DenseMatrix Pd = P.to_dense();
  const DenseMatrix Kd = K.to_dense();
  Eigen::PartialPivLU<DenseMatrix> lu(Pd);
  const DenseMatrix M = lu.solve(Kd);
  Eigen::EigenSolver<DenseMatrix> es(M, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("preconditioned_spectrum: eigensolver failed");
  std::vector<std::complex<double>> out(M.rows());
  for (Index i = 0; i < M.rows(); ++i) out[i] = es.eigenvalues()[i];
  return out;
}

Index count_near(const std::vector<std::complex<double>>& spectrum, double where, double tol) {
  Index c = 0;
  for (const auto& z : spectrum)
    if (std::abs(z - std::complex<double>(where, 0.0)) <= tol) ++c;
  return c;
}

DenseMatrix materialize(const LinearOperator& op) {
  DenseMatrix M(op.rows(), op.cols());
  Vector e = Vector::Zero(op.cols());
  for (Index j = 0; j < op.cols(); ++j) {
    e[j] = 1.0;
    M.col(j) = op.apply(e);
    e[j] = 0.0;
  }
  return M;
}

}  // namespace oracle
}  // namespace cpk
