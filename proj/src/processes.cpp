#include "cpkrylov/processes.hpp"

#include <cmath>
#include <limits>

namespace cpk {

namespace {

// Indefiniteness threshold on squared normalizers. A preconditioner that is
// genuinely indefinite on the nullspace produces squared normalizers of the
// order of the recurrence scale itself. Near exhaustion the square can dip
// mildly negative (the cancellation error accumulated over the run), which
// must read as exhaustion, not indefiniteness.
constexpr double kNegativeRel = 1e-4;
// Squared normalizers at or below this multiple of the recurrence scale are
// cancellation dust: the Krylov space is exhausted.
constexpr double kZeroRelSquared = 64.0 * std::numeric_limits<double>::epsilon();

void check_feasible_start(const RegularizedSaddleSystem& sys, const Vector& x0,
                          const Vector& q0) {
  if (x0.size() != sys.n() || q0.size() != sys.m())
    throw DimensionError("process init: start pair must have lengths (n, m)");
  const double lhs = (sys.B().apply(x0) - sys.C().apply(q0)).norm();
  const double scale = sys.B().frobenius_norm() * x0.norm() + sys.C().frobenius_norm() * q0.norm();
  if (lhs > 1e-10 * scale)
    throw InfeasibleStartError("process init: start violates B x0 - C q0 = 0");
}

/// Normalizer from its squared value; throws on indefiniteness, returns 0 at
/// exhaustion. `scale` must carry the pre-cancellation magnitude of the
/// inner products so roundoff dust is classified correctly. Negative squares
/// inside the indefiniteness threshold also read as exhaustion.
double normalizer(double squared, double scale) {
  if (squared < -kNegativeRel * scale)
    throw IndefiniteError("constraint-preconditioned process: negative squared normalizer, "
                          "preconditioner is indefinite on the constraint nullspace");
  if (squared <= kZeroRelSquared * scale) return 0.0;
  return std::sqrt(squared);
}

}  // namespace

LanczosState cp_lanczos_init(const RegularizedSaddleSystem& sys, ConstraintPreconditioner& P,
                             const Vector& x0, const Vector& q0) {
  check_feasible_start(sys, x0, q0);
  P.reset_projection_memory();

  LanczosState s;
  s.u = sys.b1() - sys.A().apply(x0);
  s.t = sys.C().apply(q0);
  auto [pbar, zbar] = P.project(s.u, s.t);
  s.p = pbar;
  s.q = q0 - zbar;  // s_1 = q_0 - zbar_1, q_1 = s_1
  s.p_prev = Vector::Zero(sys.n());
  s.q_prev = Vector::Zero(sys.m());

  const double beta_sq = s.p.dot(s.u) + s.q.dot(s.t);
  const double scale = s.p.norm() * s.u.norm() + s.q.norm() * s.t.norm();
  s.beta = normalizer(beta_sq, scale);
  if (s.beta == 0.0) {
    s.finished = true;
    s.p.setZero();
    s.q.setZero();
  } else {
    s.p /= s.beta;
    s.q /= s.beta;
  }
  s.k = 1;
  return s;
}

void cp_lanczos_step(LanczosState& s, const RegularizedSaddleSystem& sys,
                     ConstraintPreconditioner& P) {
  if (s.finished) throw std::logic_error("cp_lanczos_step: process already terminated");

  s.u = sys.A().apply(s.p);
  s.t = sys.C().apply(s.q);
  const double alpha = s.p.dot(s.u) + s.q.dot(s.t);

  auto [pbar, zbar] = P.project(s.u, s.t);
  zbar = s.q - zbar;  // s_{k+1} overwrites zbar
  Vector p_next = pbar - alpha * s.p - s.beta * s.p_prev;
  Vector q_next = zbar - alpha * s.q - s.beta * s.q_prev;

  const double beta_sq = p_next.dot(s.u) + q_next.dot(s.t);
  // Pre-cancellation magnitudes of the two inner products.
  const double scale =
      s.u.norm() * (pbar.norm() + std::abs(alpha) * s.p.norm() + s.beta * s.p_prev.norm()) +
      s.t.norm() * (zbar.norm() + std::abs(alpha) * s.q.norm() + s.beta * s.q_prev.norm());
  const double beta_next = normalizer(beta_sq, scale);
  if (beta_next == 0.0) {
    s.finished = true;
    p_next.setZero();
    q_next.setZero();
  } else {
    p_next /= beta_next;
    q_next /= beta_next;
  }

  s.p_prev = std::move(s.p);
  s.q_prev = std::move(s.q);
  s.p = std::move(p_next);
  s.q = std::move(q_next);
  s.alpha = alpha;
  s.beta = beta_next;
  ++s.k;
}

ArnoldiState cp_arnoldi_init(const RegularizedSaddleSystem& sys, ConstraintPreconditioner& P,
                             const Vector& x0, const Vector& q0) {
  check_feasible_start(sys, x0, q0);
  P.reset_projection_memory();

  ArnoldiState s;
  Vector u = sys.b1() - sys.A().apply(x0);
  Vector t = sys.C().apply(q0);
  auto [pbar, zbar] = P.project(u, t);
  Vector p1 = pbar;
  Vector q1 = q0 - zbar;

  const double h_sq = p1.dot(u) + q1.dot(t);
  s.h_init = normalizer(h_sq, p1.norm() * u.norm() + q1.norm() * t.norm());
  if (s.h_init == 0.0) {
    s.finished = true;
    p1.setZero();
    q1.setZero();
  } else {
    p1 /= s.h_init;
    q1 /= s.h_init;
  }
  s.basis_p.push_back(std::move(p1));
  s.basis_q.push_back(std::move(q1));
  s.first_index = 1;
  s.k = 1;
  return s;
}

void cp_arnoldi_step(ArnoldiState& s, const RegularizedSaddleSystem& sys,
                     ConstraintPreconditioner& P, Index mem) {
  if (s.finished) throw std::logic_error("cp_arnoldi_step: process already terminated");

  // Keep only the last `mem` pairs for the orthogonalization window.
  if (mem > 0) {
    while (static_cast<Index>(s.basis_p.size()) > mem) {
      s.basis_p.pop_front();
      s.basis_q.pop_front();
      ++s.first_index;
    }
  }

  const Vector& pk = s.basis_p.back();
  const Vector& qk = s.basis_q.back();
  Vector u = sys.A().apply(pk);
  Vector t = sys.C().apply(qk);

  auto [pbar, zbar] = P.project(u, t);
  Vector p_next = std::move(pbar);
  Vector q_next = qk - zbar;
  const double un = u.norm(), tn = t.norm();
  double scale = un * p_next.norm() + tn * q_next.norm();

  s.h.clear();
  s.h_first = s.first_index;
  for (size_t idx = 0; idx < s.basis_p.size(); ++idx) {
    const double hik = s.basis_p[idx].dot(u) + s.basis_q[idx].dot(t);
    s.h.push_back(hik);
    p_next -= hik * s.basis_p[idx];
    q_next -= hik * s.basis_q[idx];
    scale += std::abs(hik) * (un * s.basis_p[idx].norm() + tn * s.basis_q[idx].norm());
  }

  const double h_sq = p_next.dot(u) + q_next.dot(t);
  const double h_next = normalizer(h_sq, scale);
  s.h.push_back(h_next);
  if (h_next == 0.0) {
    s.finished = true;
    p_next.setZero();
    q_next.setZero();
  } else {
    p_next /= h_next;
    q_next /= h_next;
  }
  s.basis_p.push_back(std::move(p_next));
  s.basis_q.push_back(std::move(q_next));
  ++s.k;
}

}  // namespace cpk
