#include "cpkrylov/oracle.hpp"
#include "cpkrylov/problems.hpp"

#include "support/test_utils.hpp"

#include <Eigen/Eigenvalues>
#include <doctest.h>

using namespace cpk;
using namespace cpk::oracle;
using cpktest::TinySystem;

TEST_SUITE_BEGIN("oracle");

TEST_CASE("decompose_c on the identity") {
  CDecomposition cd = decompose_c(MatrixStorage::identity(2));
  CHECK(cd.p == 2);
  CHECK((cd.F_diag - Vector::Ones(2)).norm() <= 1e-14);
  CHECK((cd.E.transpose() * cd.E - DenseMatrix::Identity(2, 2)).norm() <= 1e-14);
}

TEST_CASE("decompose_c drops the zero eigenvalue") {
  DenseMatrix C(2, 2);
  C << 1, 0,
       0, 0;
  CDecomposition cd = decompose_c(MatrixStorage::dense(C, Symmetry::Symmetric));
  CHECK(cd.p == 1);
  CHECK(std::abs(cd.F_diag[0] - 1.0) <= 1e-14);
  CHECK(std::abs(std::abs(cd.E(0, 0)) - 1.0) <= 1e-14);
}

TEST_CASE("decompose_c keeps mixed signs") {
  CDecomposition cd = decompose_c(MatrixStorage::diagonal((Vector(2) << 2, -3).finished()));
  CHECK(cd.p == 2);
  CHECK(cd.F_diag.minCoeff() < 0);
  CHECK(cd.F_diag.maxCoeff() > 0);
  // reconstruction
  DenseMatrix R = cd.E * cd.F_diag.asDiagonal() * cd.E.transpose();
  CHECK((R - (DenseMatrix(2, 2) << 2, 0, 0, -3).finished()).norm() <= 1e-12);
}

TEST_CASE("nullspace basis spans Null([B E]) with orthonormal columns") {
  GenProps props;
  props.c_rank = 2;
  GeneratedSystem g = gen_random_system(10, 4, 3, props);
  CDecomposition cd = decompose_c(g.sys.C());
  NullspaceBasis Z = nullspace_basis(g.sys.B(), cd);
  CHECK(Z.Z.cols() == 10 + cd.p - 4);
  DenseMatrix N(4, 10 + cd.p);
  N.leftCols(10) = g.sys.B().to_dense();
  N.rightCols(cd.p) = cd.E;
  CHECK((N * Z.Z).norm() <= 1e-10 * N.norm());
  CHECK((Z.Z.transpose() * Z.Z - DenseMatrix::Identity(Z.Z.cols(), Z.Z.cols())).norm() <= 1e-12);
}

TEST_CASE("direct_solve hand examples") {
  TinySystem t;
  Vector b(2);
  b << 1, 1;
  auto [x, y] = direct_solve(t.system(b));
  CHECK(cpktest::rel_gap(x, (Vector(2) << 0.5, 1).finished()) <= 1e-13);
  CHECK(std::abs(y[0] - 0.5) <= 1e-13);

  // 1x1 blocks
  RegularizedSaddleSystem one(
      LinearOperator::from_matrix(MatrixStorage::dense((DenseMatrix(1, 1) << 2).finished(),
                                                       Symmetry::Symmetric)),
      MatrixStorage::dense((DenseMatrix(1, 1) << 1).finished()), MatrixStorage::identity(1),
      (Vector(1) << 3).finished());
  auto [x1, y1] = direct_solve(one);
  CHECK(std::abs(x1[0] - 1.0) <= 1e-14);
  CHECK(std::abs(y1[0] - 1.0) <= 1e-14);
}

TEST_CASE("direct_solve reports the singular example as singular") {
  CHECK_THROWS_AS(direct_solve(counterexample_system()), SingularMatrixError);
}

TEST_CASE("projected Lanczos equals CP-Lanczos (reduced-space route)") {
  for (std::uint64_t seed : {101ull, 102ull}) {
    GenProps props;
    props.c_rank = seed % 2 == 0 ? 3 : 5;
    const Index n = 12, m = 5;
    GeneratedSystem g = gen_random_system(n, m, seed, props);
    CpOptions cpo;
    cpo.refine_tol = 1e-14;
    cpo.refine_max = 3;
    ConstraintPreconditioner P(g.G, g.sys.B(), g.sys.C(), cpo);
    CDecomposition cd = decompose_c(g.sys.C());

    auto cp = cpktest::run_cp_lanczos(g.sys, P, Vector::Zero(n), Vector::Zero(m), 8);
    auto pr = projected_lanczos(g.sys, g.G, cd, Vector::Zero(n), Vector::Zero(cd.p), 8);

    const size_t K = cpktest::trusted_pairs(cp.beta, std::min(cp.p.size(), pr.vx.size()));
    REQUIRE(K >= 3);
    CHECK(cpktest::rel_gap(cp.beta[0], pr.beta[0]) <= 1e-8);
    for (size_t k = 0; k < K; ++k) {
      CHECK(cpktest::rel_gap(pr.vx[k], cp.p[k]) <= 1e-8);
      // v_{k,w} = F E^T q_k
      Vector vw = cd.F_diag.asDiagonal() * (cd.E.transpose() * cp.q[k]);
      CHECK(cpktest::rel_gap(pr.vsecond[k], vw) <= 1e-8);
      if (k < cp.alpha.size() && k < pr.alpha.size())
        CHECK(cpktest::rel_gap(cp.alpha[k], pr.alpha[k]) <= 1e-8);
      if (k + 1 < cp.beta.size() && k + 1 < pr.beta.size())
        CHECK(cpktest::rel_gap(cp.beta[k + 1], pr.beta[k + 1]) <= 1e-8);
    }
  }
}

TEST_CASE("projected Lanczos with zero residual terminates immediately") {
  TinySystem t;
  RegularizedSaddleSystem sys = t.system(Vector::Zero(2));
  CDecomposition cd = decompose_c(t.C);
  auto tr = projected_lanczos(sys, t.A, cd, Vector::Zero(2), Vector::Zero(1), 5);
  CHECK(tr.beta[0] == 0.0);
  CHECK(tr.vx.empty());
}

TEST_CASE("full-space Lanczos equals CP-Lanczos with flipped multiplier sign") {
  for (std::uint64_t seed : {201ull, 202ull}) {
    GenProps props;
    props.c_rank = 4;
    const Index n = 13, m = 4;
    GeneratedSystem g = gen_random_system(n, m, seed, props);
    CpOptions cpo;
    cpo.refine_tol = 1e-14;
    cpo.refine_max = 3;
    ConstraintPreconditioner P(g.G, g.sys.B(), g.sys.C(), cpo);

    auto cp = cpktest::run_cp_lanczos(g.sys, P, Vector::Zero(n), Vector::Zero(m), 8);
    auto fs = full_space_lanczos(g.sys, g.G, Vector::Zero(n), Vector::Zero(m), 8);

    const size_t K = cpktest::trusted_pairs(cp.beta, std::min(cp.p.size(), fs.vx.size()));
    REQUIRE(K >= 3);
    for (size_t k = 0; k < K; ++k) {
      CHECK(cpktest::rel_gap(fs.vx[k], cp.p[k]) <= 1e-8);
      CHECK(cpktest::rel_gap(fs.vsecond[k], Vector(-cp.q[k])) <= 1e-8);
      if (k < cp.alpha.size() && k < fs.alpha.size())
        CHECK(cpktest::rel_gap(cp.alpha[k], fs.alpha[k]) <= 1e-8);
      if (k + 1 < cp.beta.size() && k + 1 < fs.beta.size())
        CHECK(cpktest::rel_gap(cp.beta[k + 1], fs.beta[k + 1]) <= 1e-8);
    }
  }
}

TEST_CASE("full-space alpha via the expanded formula matches the p/q route") {
  GeneratedSystem g = gen_random_system(11, 3, 7);
  const DenseMatrix A = materialize(g.sys.A());
  const DenseMatrix B = g.sys.B().to_dense();
  const DenseMatrix C = g.sys.C().to_dense();
  ConstraintPreconditioner P(g.G, g.sys.B(), g.sys.C());

  // Pairs satisfying B p + C q = 0 via one projection of a random load.
  Vector u = Vector::LinSpaced(11, -1, 1);
  Vector qtilde = Vector::LinSpaced(3, 0.5, 1.5);
  auto [pbar, zbar] = P.project(u, g.sys.C().apply(qtilde));
  Vector p = pbar;
  Vector q = qtilde - zbar;

  // the full-space expansion with v = [p; -q] against the p/q route
  const double route1 = p.dot(A * p) + 2.0 * p.dot(B.transpose() * (-q)) -
                        (-q).dot(C * (-q));
  const double route2 = p.dot(A * p) + q.dot(C * q);
  CHECK(std::abs(route1 - route2) <= 1e-12 * (std::abs(route1) + std::abs(route2) + 1));
}

TEST_CASE("full-space Lanczos with zero residual terminates immediately") {
  TinySystem t;
  RegularizedSaddleSystem sys = t.system(Vector::Zero(2));
  auto tr = full_space_lanczos(sys, t.A, Vector::Zero(2), Vector::Zero(1), 5);
  CHECK(tr.beta[0] == 0.0);
  CHECK(tr.vx.empty());
}

TEST_CASE("projected and full-space Arnoldi match CP-Arnoldi on a nonsymmetric instance") {
  GenProps props;
  props.a_symmetric = false;
  props.c_rank = 3;
  const Index n = 12, m = 4;
  GeneratedSystem g = gen_random_system(n, m, 303, props);
  CpOptions cpo;
  cpo.refine_tol = 1e-14;
  cpo.refine_max = 3;
  ConstraintPreconditioner P(g.G, g.sys.B(), g.sys.C(), cpo);
  CDecomposition cd = decompose_c(g.sys.C());

  auto cp = cpktest::run_cp_arnoldi(g.sys, P, Vector::Zero(n), Vector::Zero(m), 8);
  auto pr = projected_arnoldi(g.sys, g.G, cd, Vector::Zero(n), Vector::Zero(cd.p), 8);
  auto fs = full_space_arnoldi(g.sys, g.G, Vector::Zero(n), Vector::Zero(m), 8);

  CHECK(cpktest::rel_gap(cp.h10, pr.h10) <= 1e-8);
  CHECK(cpktest::rel_gap(cp.h10, fs.h10) <= 1e-8);
  const Index K = std::min({cp.H.cols(), pr.H.cols(), fs.H.cols()});
  REQUIRE(K >= 5);
  for (Index k = 0; k < K; ++k)
    for (Index i = 0; i <= k + 1; ++i) {
      CHECK(cpktest::rel_gap(cp.H(i, k), pr.H(i, k)) <= 1e-8);
      CHECK(cpktest::rel_gap(cp.H(i, k), fs.H(i, k)) <= 1e-8);
    }
  const size_t KV = std::min({cp.p.size(), pr.vx.size(), fs.vx.size()});
  for (size_t k = 0; k < KV; ++k) {
    CHECK(cpktest::rel_gap(pr.vx[k], cp.p[k]) <= 1e-8);
    CHECK(cpktest::rel_gap(fs.vx[k], cp.p[k]) <= 1e-8);
    Vector vw = cd.F_diag.asDiagonal() * (cd.E.transpose() * cp.q[k]);
    CHECK(cpktest::rel_gap(pr.vsecond[k], vw) <= 1e-8);
    CHECK(cpktest::rel_gap(fs.vsecond[k], Vector(-cp.q[k])) <= 1e-8);
  }
}

TEST_CASE("preconditioned spectrum is all ones when G equals A") {
  TinySystem t;
  MatrixStorage K = assemble_block_2x2(t.A, t.B, t.C);
  auto ev = preconditioned_spectrum(K, K);
  CHECK(count_near(ev, 1.0, 1e-10) == 3);
}

TEST_CASE("unit eigenvalue count and realness on PSD instances") {
  // Full-rank C: multiplicity m; rank-deficient C with nullity(A - G) = m - p:
  // multiplicity 2m - p; both constructions keep the eigenvalue semisimple so
  // the dense eigensolver resolves it at machine accuracy.
  {
    GeneratedSystem g = gen_random_system(14, 5, 17);
    MatrixStorage K = assemble_block_2x2(
        MatrixStorage::dense(materialize(g.sys.A()), Symmetry::Symmetric), g.sys.B(),
        g.sys.C());
    ConstraintPreconditioner P(g.G, g.sys.B(), g.sys.C());
    auto ev = preconditioned_spectrum(P.matrix(), K);
    CHECK(count_near(ev, 1.0, 1e-8) >= 2 * 5 - 5);
    double max_imag = 0;
    for (auto z : ev) max_imag = std::max(max_imag, std::abs(z.imag()));
    CHECK(max_imag <= 1e-8);
  }
  {
    GenProps props;
    props.c_rank = 2;
    props.g_nullity = 3;  // m - p
    GeneratedSystem g = gen_random_system(14, 5, 18, props);
    MatrixStorage K = assemble_block_2x2(
        MatrixStorage::dense(materialize(g.sys.A()), Symmetry::Symmetric), g.sys.B(),
        g.sys.C());
    ConstraintPreconditioner P(g.G, g.sys.B(), g.sys.C());
    auto ev = preconditioned_spectrum(P.matrix(), K);
    CHECK(count_near(ev, 1.0, 1e-8) >= 2 * 5 - 2);
  }
}

TEST_CASE("reduced-system consistency closes the loop on the derivation") {
  GenProps props;
  props.c_rank = 3;
  GeneratedSystem g = gen_random_system(10, 4, 23, props);
  CDecomposition cd = decompose_c(g.sys.C());
  NullspaceBasis Z = nullspace_basis(g.sys.B(), cd);
  const DenseMatrix A = materialize(g.sys.A());
  const DenseMatrix Z1 = Z.Z1(), Z2 = Z.Z2();

  DenseMatrix Mhat = Z1.transpose() * A * Z1 +
                     Z2.transpose() * cd.F_diag.cwiseInverse().asDiagonal() * Z2;
  Vector bhat = Z1.transpose() * g.sys.b1();
  Vector xhat = Mhat.fullPivLu().solve(bhat);
  Vector x_reduced = Z1 * xhat;

  auto [x_direct, y_direct] = direct_solve(g.sys);
  CHECK(cpktest::rel_gap(x_reduced, x_direct) <= 1e-8);
}

TEST_CASE("inertia test agrees with definiteness of the reduced preconditioner") {
  for (std::uint64_t seed : {61ull, 62ull, 63ull, 64ull}) {
    GenProps props;
    props.c_rank = 3;
    props.c_psd = seed % 2 == 0;
    props.assumption_ok = seed > 62;
    GeneratedSystem g = gen_random_system(9, 4, seed, props);
    ConstraintPreconditioner P(g.G, g.sys.B(), g.sys.C());
    CDecomposition cd = decompose_c(g.sys.C());
    NullspaceBasis Z = nullspace_basis(g.sys.B(), cd);
    DenseMatrix Phat = Z.Z1().transpose() * g.G.to_dense() * Z.Z1() +
                       Z.Z2().transpose() * cd.F_diag.cwiseInverse().asDiagonal() * Z.Z2();
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(0.5 * (Phat + Phat.transpose()));
    const bool reduced_pd = es.eigenvalues().minCoeff() > 0;
    CHECK(P.assumption_report().holds == reduced_pd);
    CHECK(P.assumption_report().holds == props.assumption_ok);
  }
}

TEST_CASE("the oblique projector is idempotent") {
  GenProps props;
  props.c_rank = 2;
  GeneratedSystem g = gen_random_system(8, 3, 29, props);
  CDecomposition cd = decompose_c(g.sys.C());
  const Index n = 8, p = cd.p, m = 3;

  DenseMatrix proj3 = DenseMatrix::Zero(n + p + m, n + p + m);
  proj3.topLeftCorner(n, n) = g.G.to_dense();
  proj3.block(n, n, p, p) = cd.F_diag.cwiseInverse().asDiagonal();
  proj3.block(0, n + p, n, m) = g.sys.B().to_dense().transpose();
  proj3.block(n, n + p, p, m) = cd.E.transpose();
  proj3.block(n + p, 0, m, n) = g.sys.B().to_dense();
  proj3.block(n + p, n, m, p) = cd.E;

  DenseMatrix rhs = DenseMatrix::Zero(n + p + m, n + p);
  rhs.topRows(n + p) = DenseMatrix::Identity(n + p, n + p);
  DenseMatrix PG = proj3.fullPivLu().solve(rhs).topRows(n + p);

  DenseMatrix metric = DenseMatrix::Zero(n + p, n + p);
  metric.topLeftCorner(n, n) = g.G.to_dense();
  metric.bottomRightCorner(p, p) = cd.F_diag.cwiseInverse().asDiagonal();

  DenseMatrix Q = PG * metric;
  CHECK((Q * Q - Q).norm() <= 1e-8 * std::max(1.0, Q.norm()));
}

TEST_CASE("oracle size cap is enforced") {
  CHECK_THROWS_AS(
      preconditioned_spectrum(MatrixStorage::identity(401), MatrixStorage::identity(401)),
      std::invalid_argument);
}

TEST_SUITE_END();
