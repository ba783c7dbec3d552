#include "cpkrylov/processes.hpp"
#include "cpkrylov/problems.hpp"

#include "support/test_utils.hpp"

#include <doctest.h>

#include <random>

using namespace cpk;
using cpktest::TinySystem;

TEST_SUITE_BEGIN("processes");

TEST_CASE("cp_lanczos_init reproduces the hand-worked tiny start") {
  TinySystem t;
  Vector b(2);
  b << 1, 1;
  RegularizedSaddleSystem sys = t.system(b);
  ConstraintPreconditioner P(t.A, t.B, t.C);  // G = A

  LanczosState st = cp_lanczos_init(sys, P, Vector::Zero(2), Vector::Zero(1));
  const double beta1 = std::sqrt(1.5);
  CHECK(std::abs(st.beta - beta1) <= 1e-14);
  Vector p_expected(2);
  p_expected << 0.5, 1.0;
  p_expected /= beta1;
  CHECK(cpktest::rel_gap(st.p, p_expected) <= 1e-14);
  CHECK(std::abs(st.q[0] - (-0.5 / beta1)) <= 1e-14);
  CHECK_FALSE(st.finished);
}

TEST_CASE("cp_lanczos_init with a zero residual finishes immediately") {
  TinySystem t;
  RegularizedSaddleSystem sys = t.system(Vector::Zero(2));
  ConstraintPreconditioner P(t.A, t.B, t.C);
  LanczosState st = cp_lanczos_init(sys, P, Vector::Zero(2), Vector::Zero(1));
  CHECK(st.finished);
  CHECK(st.beta == 0.0);
}

TEST_CASE("cp_lanczos_init rejects an infeasible start") {
  TinySystem t;
  RegularizedSaddleSystem sys = t.system(Vector::Ones(2));
  ConstraintPreconditioner P(t.A, t.B, t.C);
  Vector x0(2);
  x0 << 1, 0;  // B x0 = 1 but C q0 = 0
  CHECK_THROWS_AS(cp_lanczos_init(sys, P, x0, Vector::Zero(1)), InfeasibleStartError);
}

TEST_CASE("exact preconditioner collapses the Krylov space after one step") {
  TinySystem t;
  Vector b(2);
  b << 1, 1;
  RegularizedSaddleSystem sys = t.system(b);
  ConstraintPreconditioner P(t.A, t.B, t.C);  // G = A means P = K
  LanczosState st = cp_lanczos_init(sys, P, Vector::Zero(2), Vector::Zero(1));
  cp_lanczos_step(st, sys, P);
  CHECK(std::abs(st.alpha - 1.0) <= 1e-13);
  CHECK(st.beta == 0.0);
  CHECK(st.finished);
  CHECK_THROWS_AS(cp_lanczos_step(st, sys, P), std::logic_error);
}

TEST_CASE("Lanczos pairs satisfy B p + C q = 0 throughout") {
  for (std::uint64_t seed : {11ull, 12ull, 13ull}) {
    const Index n = 14, m = 4;
    GenProps props;
    props.c_rank = seed % 2 == 0 ? 2 : 4;
    GeneratedSystem g = gen_random_system(n, m, seed, props);
    CpOptions cpo;
    cpo.refine_tol = 1e-14;
    cpo.refine_max = 3;
    ConstraintPreconditioner P(g.G, g.sys.B(), g.sys.C(), cpo);
    // The exact process stops once the reduced Krylov space saturates at
    // n + p - m directions; only that prefix is under test.
    const Index dim = n + props.c_rank - m;
    auto tr = cpktest::run_cp_lanczos(g.sys, P, Vector::Zero(n), Vector::Zero(m), dim - 1);
    const size_t K = cpktest::trusted_pairs(tr.beta, tr.p.size());
    REQUIRE(K >= 4);
    const double bnorm = g.sys.B().frobenius_norm();
    const double cnorm = g.sys.C().frobenius_norm();
    for (size_t k = 0; k < K; ++k) {
      const double lhs = (g.sys.B().apply(tr.p[k]) + g.sys.C().apply(tr.q[k])).norm();
      CHECK(lhs <= 1e-10 * (bnorm * tr.p[k].norm() + cnorm * tr.q[k].norm()));
    }
  }
}

TEST_CASE("basis pairs are orthonormal in the preconditioner metric") {
  GeneratedSystem g = gen_random_system(40, 5, 31);
  ConstraintPreconditioner P(g.G, g.sys.B(), g.sys.C());
  auto tr = cpktest::run_cp_lanczos(g.sys, P, Vector::Zero(40), Vector::Zero(5), 15);
  const size_t K = std::min<size_t>(tr.p.size(), 15);
  REQUIRE(K == 15);
  for (size_t i = 0; i < K; ++i)
    for (size_t j = 0; j < K; ++j) {
      const double ip = tr.p[i].dot(g.G.apply(tr.p[j])) + tr.q[i].dot(g.sys.C().apply(tr.q[j]));
      CHECK(std::abs(ip - (i == j ? 1.0 : 0.0)) <= 1e-6);
    }
}

TEST_CASE("the process terminates within the Krylov dimension bound") {
  // A with a single eigenvalue and uniform C make the preconditioned reduced
  // operator have at most m + 2 distinct eigenvalues, so exact termination
  // shows through cleanly in floating point.
  const Index n = 14, m = 3;
  std::mt19937_64 eng(4242);
  std::uniform_real_distribution<double> dist(-1, 1);
  DenseMatrix Bd(m, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < m; ++i) Bd(i, j) = dist(eng);
  MatrixStorage A = MatrixStorage::dense(2.0 * DenseMatrix::Identity(n, n), Symmetry::Symmetric);
  MatrixStorage B = MatrixStorage::dense(Bd);
  MatrixStorage C = MatrixStorage::dense(0.5 * DenseMatrix::Identity(m, m), Symmetry::Symmetric);
  MatrixStorage G = MatrixStorage::identity(n);
  Vector b = Vector::LinSpaced(n, -1, 1);
  RegularizedSaddleSystem sys(LinearOperator::from_matrix(A), B, C, b);
  ConstraintPreconditioner P(G, B, C);

  LanczosState st = cp_lanczos_init(sys, P, Vector::Zero(n), Vector::Zero(m));
  const double beta1 = st.beta;
  const Index bound = std::min<Index>(n - m + m + 2, n + m);
  Index steps = 0;
  while (!st.finished && st.beta > 1e-4 * beta1 && steps <= bound) {
    cp_lanczos_step(st, sys, P);
    ++steps;
  }
  // Exhaustion shows either through the dust detector or through a collapsed
  // normalizer; both must occur within the sharper m + 2 count here.
  CHECK((st.finished || st.beta <= 1e-4 * beta1));
  CHECK(steps <= m + 2);
}

TEST_CASE("cp_arnoldi_init matches cp_lanczos_init") {
  TinySystem t;
  Vector b(2);
  b << 1, 1;
  RegularizedSaddleSystem sys = t.system(b);
  ConstraintPreconditioner P(t.A, t.B, t.C);
  LanczosState lz = cp_lanczos_init(sys, P, Vector::Zero(2), Vector::Zero(1));
  ArnoldiState ar = cp_arnoldi_init(sys, P, Vector::Zero(2), Vector::Zero(1));
  CHECK(std::abs(ar.h_init - lz.beta) <= 1e-15);
  CHECK(cpktest::rel_gap(ar.basis_p.back(), lz.p) <= 1e-15);
}

TEST_CASE("cp_arnoldi with a zero start finishes immediately") {
  TinySystem t;
  RegularizedSaddleSystem sys = t.system(Vector::Zero(2));
  ConstraintPreconditioner P(t.A, t.B, t.C);
  ArnoldiState st = cp_arnoldi_init(sys, P, Vector::Zero(2), Vector::Zero(1));
  CHECK(st.finished);
  CHECK(st.h_init == 0.0);
}

TEST_CASE("Arnoldi pairs satisfy B p + C q = 0 throughout") {
  GenProps props;
  props.a_symmetric = false;
  GeneratedSystem g = gen_random_system(13, 4, 55, props);
  CpOptions cpo;
  cpo.refine_tol = 1e-14;
  cpo.refine_max = 3;
  ConstraintPreconditioner P(g.G, g.sys.B(), g.sys.C(), cpo);
  auto tr = cpktest::run_cp_arnoldi(g.sys, P, Vector::Zero(13), Vector::Zero(4), 12);
  const double bnorm = g.sys.B().frobenius_norm();
  const double cnorm = g.sys.C().frobenius_norm();
  for (size_t k = 0; k < tr.p.size(); ++k) {
    const double lhs = (g.sys.B().apply(tr.p[k]) + g.sys.C().apply(tr.q[k])).norm();
    CHECK(lhs <= 1e-10 * (bnorm * tr.p[k].norm() + cnorm * tr.q[k].norm()));
  }
}

TEST_CASE("unbounded Arnoldi on a symmetric operator is tridiagonal and matches Lanczos") {
  GeneratedSystem g = gen_random_system(15, 4, 91);
  ConstraintPreconditioner Pl(g.G, g.sys.B(), g.sys.C());
  ConstraintPreconditioner Pa(g.G, g.sys.B(), g.sys.C());
  auto lz = cpktest::run_cp_lanczos(g.sys, Pl, Vector::Zero(15), Vector::Zero(4), 12);
  auto ar = cpktest::run_cp_arnoldi(g.sys, Pa, Vector::Zero(15), Vector::Zero(4), 12);

  CHECK(std::abs(ar.h10 - lz.beta[0]) <= 1e-12);
  const Index K = std::min<Index>(ar.H.cols(), static_cast<Index>(lz.alpha.size()));
  REQUIRE(K >= 8);
  for (Index k = 0; k < K; ++k) {
    CHECK(cpktest::rel_gap(ar.H(k, k), lz.alpha[k]) <= 1e-8);
    CHECK(cpktest::rel_gap(ar.H(k + 1, k), lz.beta[k + 1]) <= 1e-8);
    if (k >= 2)
      for (Index i = 0; i + 2 <= k; ++i) CHECK(std::abs(ar.H(i, k)) <= 1e-7);
  }
}

TEST_CASE("windowed Arnoldi reproduces the unbounded pairs on symmetric operators") {
  GeneratedSystem g = gen_random_system(15, 4, 92);
  ConstraintPreconditioner P1(g.G, g.sys.B(), g.sys.C());
  ConstraintPreconditioner P2(g.G, g.sys.B(), g.sys.C());
  auto full = cpktest::run_cp_arnoldi(g.sys, P1, Vector::Zero(15), Vector::Zero(4), 10, 0);
  auto windowed = cpktest::run_cp_arnoldi(g.sys, P2, Vector::Zero(15), Vector::Zero(4), 10, 2);
  const size_t K = std::min(full.p.size(), windowed.p.size());
  REQUIRE(K >= 6);
  for (size_t k = 0; k < K; ++k) {
    CHECK(cpktest::rel_gap(full.p[k], windowed.p[k]) <= 1e-8);
    CHECK(cpktest::rel_gap(full.q[k], windowed.q[k]) <= 1e-8);
  }
}

TEST_CASE("the truncated window stores mem + 1 pairs") {
  GeneratedSystem g = gen_random_system(12, 3, 93, {.a_symmetric = false});
  ConstraintPreconditioner P(g.G, g.sys.B(), g.sys.C());
  ArnoldiState st = cp_arnoldi_init(g.sys, P, Vector::Zero(12), Vector::Zero(3));
  for (int k = 0; k < 8 && !st.finished; ++k) {
    cp_arnoldi_step(st, g.sys, P, /*mem=*/3);
    CHECK(static_cast<Index>(st.basis_p.size()) <= 4);
  }
}

TEST_SUITE_END();
