#include "cpkrylov/problems.hpp"

#include "cpkrylov/oracle.hpp"

#include <Eigen/LU>
#include <Eigen/QR>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace cpk {

namespace {

/// Seeded generator with a platform-stable normal deviate (Box-Muller over
/// the standardized mt19937_64 stream, rather than the
/// implementation-defined std::normal_distribution).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = (static_cast<double>(eng_() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  DenseMatrix gaussian(Index rows, Index cols) {
    DenseMatrix M(rows, cols);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) M(i, j) = normal();
    return M;
  }

  Vector gaussian_vector(Index n) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

DenseMatrix random_orthogonal(Rng& rng, Index n) {
  Eigen::HouseholderQR<DenseMatrix> qr(rng.gaussian(n, n));
  DenseMatrix Q = qr.householderQ();
  return Q;
}

DenseMatrix symmetric_with_spectrum(Rng& rng, Index n, bool definite) {
  const DenseMatrix Q = random_orthogonal(rng, n);
  Vector lambda(n);
  for (Index i = 0; i < n; ++i) {
    double v = rng.uniform(0.5, 5.0);
    if (!definite && rng.uniform() < 0.5) v = -v;
    lambda[i] = v;
  }
  DenseMatrix A = Q * lambda.asDiagonal() * Q.transpose();
  return 0.5 * (A + A.transpose());
}

bool dense_nonsingular(const DenseMatrix& M) {
  Eigen::FullPivLU<DenseMatrix> lu(M);
  lu.setThreshold(1e-10);
  return lu.isInvertible();
}

}  // namespace

GeneratedSystem gen_random_system(Index n, Index m, std::uint64_t seed, GenProps props) {
  if (n < 1 || m < 1) throw std::invalid_argument("gen_random_system: n and m must be positive");
  const Index p = props.c_rank < 0 ? m : props.c_rank;
  if (p < 0 || p > m) throw std::invalid_argument("gen_random_system: c_rank must lie in [0, m]");
  if (props.g_nullity > 0 && !(props.a_symmetric && props.a_definite && props.assumption_ok))
    throw std::invalid_argument(
        "gen_random_system: g_nullity requires a symmetric definite A and assumption_ok");
  if (props.g_nullity > n) throw std::invalid_argument("gen_random_system: g_nullity exceeds n");

  constexpr int kMaxAttempts = 50;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    // Derived stream per attempt keeps retries deterministic.
    Rng rng(seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(attempt) + 1);

    DenseMatrix A;
    if (props.a_symmetric) {
      A = symmetric_with_spectrum(rng, n, props.a_definite);
    } else {
      const DenseMatrix S = symmetric_with_spectrum(rng, n, true);
      const DenseMatrix N = rng.gaussian(n, n);
      A = S + 0.5 * (N - N.transpose());
    }

    DenseMatrix B = rng.gaussian(m, n) / std::sqrt(static_cast<double>(n));

    const DenseMatrix Qc = random_orthogonal(rng, m);
    Vector d = Vector::Zero(m);
    for (Index i = 0; i < p; ++i) {
      double v = rng.uniform(0.5, 2.0);
      if (!props.c_psd && rng.uniform() < 0.5) v = -v;
      d[i] = v;
    }
    DenseMatrix C = Qc * d.asDiagonal() * Qc.transpose();
    C = 0.5 * (C + C.transpose());

    DenseMatrix G;
    if (!props.assumption_ok) {
      G = -symmetric_with_spectrum(rng, n, true);
    } else if (props.g_near_a) {
      G = 0.5 * (A + A.transpose()) + 0.3 * symmetric_with_spectrum(rng, n, true);
      G = 0.5 * (G + G.transpose());
    } else if (props.g_nullity > 0) {
      // A - G of rank n - g_nullity keeps the unit eigenvalue of the
      // preconditioned matrix semisimple.
      const DenseMatrix W = rng.gaussian(n, n - props.g_nullity);
      DenseMatrix S = W * W.transpose();
      S = 0.5 * (S + S.transpose());
      Eigen::SelfAdjointEigenSolver<DenseMatrix> esA(A), esS(S);
      const double scale = 0.45 * esA.eigenvalues().minCoeff() / esS.eigenvalues().maxCoeff();
      G = A - scale * S;
      G = 0.5 * (G + G.transpose());
    } else {
      G = symmetric_with_spectrum(rng, n, true);
    }

    DenseMatrix K(n + m, n + m);
    K.topLeftCorner(n, n) = A;
    K.topRightCorner(n, m) = B.transpose();
    K.bottomLeftCorner(m, n) = B;
    K.bottomRightCorner(m, m) = -C;
    if (!dense_nonsingular(K)) continue;

    MatrixStorage Gs = MatrixStorage::dense(G, Symmetry::Symmetric);
    MatrixStorage Bs = MatrixStorage::dense(B);
    MatrixStorage Cs = MatrixStorage::dense(C, Symmetry::Symmetric);
    try {
      ConstraintPreconditioner P(Gs, Bs, Cs);
      if (P.assumption_report().holds != props.assumption_ok) continue;
    } catch (const SingularMatrixError&) {
      continue;
    }
    if (oracle::decompose_c(Cs).p != p) continue;

    Vector b1 = rng.gaussian_vector(n);
    Vector b2 = props.general_rhs ? rng.gaussian_vector(m) : Vector::Zero(m);

    Symmetry asym = props.a_symmetric ? Symmetry::Symmetric : Symmetry::General;
    return GeneratedSystem{
        RegularizedSaddleSystem(
            LinearOperator::from_matrix(MatrixStorage::dense(std::move(A), asym)), Bs, Cs,
            std::move(b1), std::move(b2)),
        std::move(Gs)};
  }
  throw GenerationError("gen_random_system: verification failed for every attempt; reseed");
}

RegularizedSaddleSystem counterexample_system() {
  DenseMatrix A(3, 3);
  A << 1, -1, 0,
       0,  0, 0,
       1,  0, 1;
  DenseMatrix B(2, 3);
  B << 1, 0, 0,
       0, 0, 1;
  return RegularizedSaddleSystem(LinearOperator::from_matrix(MatrixStorage::dense(A)),
                                 MatrixStorage::dense(B), MatrixStorage::identity(2),
                                 Vector::Ones(3), Vector::Zero(2));
}

ToyQP gen_toy_qp(Index nq, Index mq, std::uint64_t seed) {
  if (nq < 2 || mq < 1) throw std::invalid_argument("gen_toy_qp: need nq >= 2 and mq >= 1");
  Rng rng(seed * 0xD1B54A32D192ED03ull + 17);

  ToyQP qp;
  const DenseMatrix W = rng.gaussian(nq, nq);
  DenseMatrix H = W.transpose() * W / static_cast<double>(nq);
  H = 0.5 * (H + H.transpose());
  qp.H = MatrixStorage::dense(std::move(H), Symmetry::Symmetric);
  qp.c = rng.gaussian_vector(nq);
  qp.Bq = MatrixStorage::dense(rng.gaussian(mq, nq) / std::sqrt(static_cast<double>(nq)));
  qp.con_rhs = rng.gaussian_vector(mq);
  qp.l.resize(nq);
  qp.u.resize(nq);
  for (Index i = 0; i < nq; ++i) {
    qp.l[i] = -1.0 - std::abs(rng.normal());
    qp.u[i] = 1.0 + std::abs(rng.normal());
  }
  qp.d1.resize(nq);
  qp.d2.resize(mq);
  for (Index i = 0; i < nq; ++i) qp.d1[i] = rng.uniform(0.3, 1.0);
  for (Index i = 0; i < mq; ++i) qp.d2[i] = rng.uniform(0.3, 1.0);
  return qp;
}

IPState ip_initial_state(const ToyQP& qp) {
  IPState s;
  s.x = 0.5 * (qp.l + qp.u);
  s.x1 = s.x - qp.l;
  s.x2 = qp.u - s.x;
  s.y = Vector::Zero(qp.mq());
  s.z1 = Vector::Ones(qp.nq());
  s.z2 = Vector::Ones(qp.nq());
  s.mu = (s.x1.dot(s.z1) + s.x2.dot(s.z2)) / static_cast<double>(2 * qp.nq());
  return s;
}

KktKind kkt_kind_from_name(const std::string& name) {
  if (name == "K2" || name == "k2") return KktKind::K2;
  if (name == "K3.5" || name == "k3.5" || name == "K35" || name == "k35") return KktKind::K35;
  if (name == "K3p" || name == "k3p") return KktKind::K3p;
  throw std::invalid_argument("unknown formulation '" + name + "' (expected K2, K3.5 or K3p)");
}

const char* to_string(KktKind k) {
  switch (k) {
    case KktKind::K2: return "K2";
    case KktKind::K35: return "K3.5";
    case KktKind::K3p: return "K3p";
  }
  return "unknown";
}

namespace {

void check_state(const ToyQP& qp, const IPState& s) {
  if (s.x.size() != qp.nq() || s.y.size() != qp.mq())
    throw DimensionError("ip state: dimension mismatch");
  if (s.x1.minCoeff() <= 0 || s.x2.minCoeff() <= 0 || s.z1.minCoeff() <= 0 ||
      s.z2.minCoeff() <= 0 || s.mu <= 0)
    throw std::invalid_argument("ip state: interior-point invariants violated");
}

/// Dual residual Hx + c + D1^2 x + Bq' y - z1 + z2.
Vector dual_residual(const ToyQP& qp, const IPState& s) {
  return qp.H.apply(s.x) + qp.c + qp.d1.cwiseProduct(qp.d1).cwiseProduct(s.x) +
         qp.Bq.apply_transpose(s.y) - s.z1 + s.z2;
}

/// Primal residual con_rhs - Bq x + D2^2 y (the regularized constraint after
/// eliminating r = -D2 y).
Vector primal_residual(const ToyQP& qp, const IPState& s) {
  return qp.con_rhs - qp.Bq.apply(s.x) + qp.d2.cwiseProduct(qp.d2).cwiseProduct(s.y);
}

}  // namespace

GeneratedSystem formulate(const ToyQP& qp, const IPState& s, KktKind kind) {
  check_state(qp, s);
  const Index nq = qp.nq();
  const Index mq = qp.mq();

  const Vector rd = dual_residual(qp, s);
  const Vector rp = primal_residual(qp, s);
  const Vector rc1 = Vector::Constant(nq, s.mu) - s.x1.cwiseProduct(s.z1);
  const Vector rc2 = Vector::Constant(nq, s.mu) - s.x2.cwiseProduct(s.z2);
  const Vector d1sq = qp.d1.cwiseProduct(qp.d1);
  const Vector d2sq = qp.d2.cwiseProduct(qp.d2);
  const DenseMatrix Hd = qp.H.to_dense();
  const DenseMatrix Bd = qp.Bq.to_dense();

  switch (kind) {
    case KktKind::K2: {
      DenseMatrix A = Hd;
      A.diagonal() += d1sq;
      A.diagonal() += (s.z1.array() / s.x1.array()).matrix();
      A.diagonal() += (s.z2.array() / s.x2.array()).matrix();
      Vector b1 = -rd + (rc1.array() / s.x1.array()).matrix() -
                  (rc2.array() / s.x2.array()).matrix();
      MatrixStorage As = MatrixStorage::dense(A, Symmetry::Symmetric);
      MatrixStorage G = MatrixStorage::diagonal(A.diagonal());
      return GeneratedSystem{
          RegularizedSaddleSystem(LinearOperator::from_matrix(As), qp.Bq,
                                  MatrixStorage::diagonal(d2sq), std::move(b1), rp),
          std::move(G)};
    }
    case KktKind::K35: {
      // Unknowns (dx; dy, zeta) with dz = -Z^(1/2) zeta; the bound rows are
      // scaled by Z^(-1/2) to keep the matrix symmetric.
      DenseMatrix A = Hd;
      A.diagonal() += d1sq;
      const Vector sz1 = s.z1.cwiseSqrt();
      const Vector sz2 = s.z2.cwiseSqrt();
      DenseMatrix Bout(mq + 2 * nq, nq);
      Bout.topRows(mq) = Bd;
      Bout.middleRows(mq, nq) = DenseMatrix(sz1.asDiagonal());
      Bout.bottomRows(nq) = DenseMatrix((-sz2).asDiagonal());
      Vector cdiag(mq + 2 * nq);
      cdiag.head(mq) = d2sq;
      cdiag.segment(mq, nq) = s.x1;
      cdiag.tail(nq) = s.x2;
      Vector b2(mq + 2 * nq);
      b2.head(mq) = rp;
      b2.segment(mq, nq) = rc1.cwiseQuotient(sz1);
      b2.tail(nq) = rc2.cwiseQuotient(sz2);
      MatrixStorage As = MatrixStorage::dense(A, Symmetry::Symmetric);
      MatrixStorage G = MatrixStorage::diagonal(A.diagonal());
      return GeneratedSystem{
          RegularizedSaddleSystem(LinearOperator::from_matrix(As),
                                  MatrixStorage::dense(std::move(Bout)),
                                  MatrixStorage::diagonal(cdiag), -rd, std::move(b2)),
          std::move(G)};
    }
    case KktKind::K3p: {
      // Unknowns ((dx, dz); dy); the complementarity rows stay unscaled, so
      // the leading block is unsymmetric.
      DenseMatrix A = DenseMatrix::Zero(3 * nq, 3 * nq);
      A.topLeftCorner(nq, nq) = Hd;
      A.topLeftCorner(nq, nq).diagonal() += d1sq;
      A.block(0, nq, nq, nq) = -DenseMatrix::Identity(nq, nq);
      A.block(0, 2 * nq, nq, nq) = DenseMatrix::Identity(nq, nq);
      A.block(nq, 0, nq, nq) = DenseMatrix(s.z1.asDiagonal());
      A.block(2 * nq, 0, nq, nq) = DenseMatrix((-s.z2).asDiagonal());
      A.block(nq, nq, nq, nq) = DenseMatrix(s.x1.asDiagonal());
      A.block(2 * nq, 2 * nq, nq, nq) = DenseMatrix(s.x2.asDiagonal());
      DenseMatrix Bout(mq, 3 * nq);
      Bout.setZero();
      Bout.leftCols(nq) = Bd;
      Vector b1(3 * nq);
      b1.head(nq) = -rd;
      b1.segment(nq, nq) = rc1;
      b1.tail(nq) = rc2;
      MatrixStorage As = MatrixStorage::dense(A);
      MatrixStorage G = MatrixStorage::diagonal(A.diagonal());
      return GeneratedSystem{
          RegularizedSaddleSystem(LinearOperator::from_matrix(As),
                                  MatrixStorage::dense(std::move(Bout)),
                                  MatrixStorage::diagonal(d2sq), std::move(b1), rp),
          std::move(G)};
    }
  }
  throw std::logic_error("formulate: unreachable");
}

NewtonStep recover_newton_step(const ToyQP& qp, const IPState& s, KktKind kind,
                               const Vector& x_sol, const Vector& y_sol) {
  const Index nq = qp.nq();
  const Index mq = qp.mq();
  const Vector rc1 = Vector::Constant(nq, s.mu) - s.x1.cwiseProduct(s.z1);
  const Vector rc2 = Vector::Constant(nq, s.mu) - s.x2.cwiseProduct(s.z2);

  NewtonStep step;
  switch (kind) {
    case KktKind::K2:
      step.dx = x_sol;
      step.dy = y_sol;
      step.dz1 = (rc1 - s.z1.cwiseProduct(step.dx)).cwiseQuotient(s.x1);
      step.dz2 = (rc2 + s.z2.cwiseProduct(step.dx)).cwiseQuotient(s.x2);
      return step;
    case KktKind::K35: {
      if (y_sol.size() != mq + 2 * nq) throw DimensionError("recover: K3.5 multiplier size");
      step.dx = x_sol;
      step.dy = y_sol.head(mq);
      step.dz1 = -s.z1.cwiseSqrt().cwiseProduct(y_sol.segment(mq, nq));
      step.dz2 = -s.z2.cwiseSqrt().cwiseProduct(y_sol.tail(nq));
      return step;
    }
    case KktKind::K3p:
      if (x_sol.size() != 3 * nq) throw DimensionError("recover: K3p primal size");
      step.dx = x_sol.head(nq);
      step.dz1 = x_sol.segment(nq, nq);
      step.dz2 = x_sol.tail(nq);
      step.dy = y_sol;
      return step;
  }
  throw std::logic_error("recover_newton_step: unreachable");
}

double kkt_residual(const ToyQP& qp, const IPState& s) {
  const double rd = dual_residual(qp, s).cwiseAbs().maxCoeff();
  const double rp = primal_residual(qp, s).cwiseAbs().maxCoeff();
  const double comp = std::max(s.x1.cwiseProduct(s.z1).cwiseAbs().maxCoeff(),
                               s.x2.cwiseProduct(s.z2).cwiseAbs().maxCoeff());
  return std::max({rd, rp, comp});
}

namespace {

double max_step_to_boundary(const Vector& v, const Vector& dv) {
  double alpha = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < v.size(); ++i)
    if (dv[i] < 0) alpha = std::min(alpha, -v[i] / dv[i]);
  return alpha;
}

}  // namespace

IpReport toy_ip_solve(const ToyQP& qp, KktKind kind, Method method,
                      const SolverOptions& base_opts, Index max_outer) {
  IPState s = ip_initial_state(qp);
  IpReport report;

  for (Index outer = 1; outer <= max_outer; ++outer) {
    report.kkt_residual = kkt_residual(qp, s);
    if (report.kkt_residual <= 1e-6) {
      report.converged = true;
      report.final_state = s;
      return report;
    }
    const double mu_measure =
        (s.x1.dot(s.z1) + s.x2.dot(s.z2)) / static_cast<double>(2 * qp.nq());
    const double eps_a = std::max(std::min(1e-2 * mu_measure, 1e-2), 1e-6);
    report.mu_history.push_back(mu_measure);
    report.eps_history.push_back(eps_a);
    report.outer_it = outer;

    // Barrier target; the floor only matters once the measure has collapsed
    // far below the outer tolerance and keeps the state away from underflow.
    s.mu = std::max(0.1 * mu_measure, 1e-10);
    GeneratedSystem form = formulate(qp, s, kind);

    SolverOptions opts = base_opts;
    opts.atol = eps_a;
    opts.rtol = 0.0;
    if (opts.maxit <= 0) opts.maxit = 2 * (form.sys.n() + form.sys.m());
    SolveResult res = reg_cpkrylov(form.sys, form.G, method, opts);
    report.inner_it_total += res.iterations;

    NewtonStep stp = recover_newton_step(qp, s, kind, res.x, res.y);
    double alpha_p = std::min(1.0, 0.995 * std::min(max_step_to_boundary(s.x1, stp.dx),
                                                    max_step_to_boundary(s.x2, -stp.dx)));
    double alpha_d = std::min(1.0, 0.995 * std::min(max_step_to_boundary(s.z1, stp.dz1),
                                                    max_step_to_boundary(s.z2, stp.dz2)));
    if (alpha_p < 1e-12 || alpha_d < 1e-12)
      throw std::runtime_error("toy_ip_solve: step to the boundary collapsed");

    s.x += alpha_p * stp.dx;
    s.x1 = s.x - qp.l;
    s.x2 = qp.u - s.x;
    s.y += alpha_d * stp.dy;
    s.z1 += alpha_d * stp.dz1;
    s.z2 += alpha_d * stp.dz2;
  }
  report.kkt_residual = kkt_residual(qp, s);
  report.converged = report.kkt_residual <= 1e-6;
  report.final_state = s;
  return report;
}

}  // namespace cpk
