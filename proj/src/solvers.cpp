#include "cpkrylov/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace cpk {

namespace {

constexpr double kTiny = 1e-300;

Index effective_maxit(const SolverOptions& opts, const RegularizedSaddleSystem& sys) {
  return opts.maxit > 0 ? opts.maxit : 2 * (sys.n() + sys.m());
}

void validate_inputs(const RegularizedSaddleSystem& sys, const ConstraintPreconditioner& P,
                     const Vector& x0, const Vector& y0, const SolverOptions& opts) {
  if (P.n() != sys.n() || P.m() != sys.m())
    throw DimensionError("solver: preconditioner shape does not match the system");
  if (x0.size() != sys.n() || y0.size() != sys.m())
    throw DimensionError("solver: start pair must have lengths (n, m)");
  if (sys.b2().norm() != 0.0)
    throw std::invalid_argument("solver: b2 must be zero at this layer; use reg_cpkrylov for a "
                                "general right-hand side");
  if (opts.atol < 0 || opts.rtol < 0)
    throw std::invalid_argument("solver: tolerances must be nonnegative");
  if (opts.maxit < 0)
    throw std::invalid_argument("solver: maxit must be positive (0 selects the default)");
  if (opts.mem < 2) throw std::invalid_argument("solver: mem must be at least 2");
  if (opts.restart < 1) throw std::invalid_argument("solver: restart must be at least 1");
}

/// Advisory inertia check; hard error under the strict flag.
void enforce_assumption(ConstraintPreconditioner& P, const SolverOptions& opts) {
  P.set_semi_refine(opts.semi_refine);
  const AssumptionReport rep = P.assumption_report();
  if (rep.holds) return;
  if (opts.strict_assumption)
    throw AssumptionError("preconditioner fails the inertia test neg(P) + neg(C) = m");
  std::fprintf(stderr,
               "cpkrylov: warning: preconditioner fails the inertia test neg(P) + neg(C) = m "
               "(neg(P) = %ld, neg(C) = %ld, m = %ld); proceeding\n",
               static_cast<long>(rep.neg_precond), static_cast<long>(rep.neg_c),
               static_cast<long>(rep.m));
}

void call_hook(const SolverOptions& opts, Index k, const Vector& x, const Vector& y) {
  if (opts.iterate_hook) opts.iterate_hook(k, x, y);
}

/// A negative squared normalizer on the first projection exposes a genuinely
/// indefinite preconditioner; deep into a converging run it is the basis
/// recurrence hitting the exhausted Krylov space, which ends the solve as a
/// breakdown with the best iterate kept.
SolveStatus classify_indefinite(const std::vector<double>& history) {
  if (history.empty()) return SolveStatus::IndefiniteDetected;
  return history.back() <= 1e-2 * history.front() ? SolveStatus::Breakdown
                                                  : SolveStatus::IndefiniteDetected;
}

}  // namespace

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIterations: return "max_iterations";
    case SolveStatus::Breakdown: return "breakdown";
    case SolveStatus::IndefiniteDetected: return "indefinite_detected";
  }
  return "unknown";
}

SolveResult solve_cp_minres(const RegularizedSaddleSystem& sys, ConstraintPreconditioner& P,
                            const Vector& x0, const Vector& y0, const SolverOptions& opts) {
  validate_inputs(sys, P, x0, y0, opts);
  enforce_assumption(P, opts);
  const Index maxit = effective_maxit(opts, sys);

  SolveResult out;
  out.x = x0;
  out.y = y0;

  LanczosState st;
  try {
    st = cp_lanczos_init(sys, P, x0, y0);
  } catch (const IndefiniteError&) {
    out.history.push_back(std::numeric_limits<double>::quiet_NaN());
    out.status = SolveStatus::IndefiniteDetected;
    return out;
  }

  const double beta1 = st.beta;
  out.history.push_back(beta1);
  const double threshold = opts.atol + beta1 * opts.rtol;
  if (beta1 <= threshold) {
    out.status = SolveStatus::Converged;
    return out;
  }

  // Plane-rotation QR of the growing tridiagonal; directions carry the
  // (p, -q) pairs of the full-space basis.
  Vector vx = st.p, vy = -st.q;
  Vector w1x = Vector::Zero(sys.n()), w1y = Vector::Zero(sys.m());
  Vector w2x = Vector::Zero(sys.n()), w2y = Vector::Zero(sys.m());
  double cs = -1.0, sn = 0.0, dbar = 0.0, epsln = 0.0, phibar = beta1;

  for (Index it = 1; it <= maxit; ++it) {
    try {
      cp_lanczos_step(st, sys, P);
    } catch (const IndefiniteError&) {
      out.status = classify_indefinite(out.history);
      return out;
    }
    const double alfa = st.alpha;
    const double beta_next = st.beta;
    Vector vnx = st.p;
    Vector vny = -st.q;

    const double oldeps = epsln;
    const double delta = cs * dbar + sn * alfa;
    const double gbar = sn * dbar - cs * alfa;
    epsln = sn * beta_next;
    dbar = -cs * beta_next;

    const double gamma = std::max(std::hypot(gbar, beta_next), kTiny);
    cs = gbar / gamma;
    sn = beta_next / gamma;
    const double phi = cs * phibar;
    phibar = sn * phibar;

    Vector wx = (vx - oldeps * w1x - delta * w2x) / gamma;
    Vector wy = (vy - oldeps * w1y - delta * w2y) / gamma;
    out.x += phi * wx;
    out.y += phi * wy;
    w1x = std::move(w2x);
    w1y = std::move(w2y);
    w2x = std::move(wx);
    w2y = std::move(wy);
    vx = std::move(vnx);
    vy = std::move(vny);

    out.iterations = it;
    out.history.push_back(std::abs(phibar));
    call_hook(opts, it, out.x, out.y);
    if (std::abs(phibar) <= threshold) {
      out.status = SolveStatus::Converged;
      return out;
    }
    if (st.finished) {
      // Krylov space exhausted: beta_{k+1} = 0 forces phibar = 0, so this is
      // unreachable unless the threshold logic changes; report it honestly.
      out.status = SolveStatus::Breakdown;
      return out;
    }
  }
  out.status = SolveStatus::MaxIterations;
  return out;
}

namespace {

SolveResult cp_cg_lanczos_form(const RegularizedSaddleSystem& sys, ConstraintPreconditioner& P,
                               const Vector& x0, const Vector& y0, const SolverOptions& opts) {
  const Index maxit = effective_maxit(opts, sys);

  SolveResult out;
  out.x = x0;
  out.y = y0;

  LanczosState st;
  try {
    st = cp_lanczos_init(sys, P, x0, y0);
  } catch (const IndefiniteError&) {
    out.history.push_back(std::numeric_limits<double>::quiet_NaN());
    out.status = SolveStatus::IndefiniteDetected;
    return out;
  }

  const double beta1 = st.beta;
  out.history.push_back(beta1);
  const double threshold = opts.atol + beta1 * opts.rtol;
  if (beta1 <= threshold) {
    out.status = SolveStatus::Converged;
    return out;
  }

  // Incremental LDL^T of the tridiagonal: delta_k pivots, eta_k the forward
  // substitution of beta1 e1, c_k the search pairs.
  Vector vx = st.p, vy = -st.q;
  Vector cx = vx, cy = vy;
  double delta_prev = 0.0, eta_prev = 0.0;
  double beta_prev = 0.0;  // beta_k while stepping produces beta_{k+1}

  for (Index it = 1; it <= maxit; ++it) {
    beta_prev = st.beta;
    try {
      cp_lanczos_step(st, sys, P);
    } catch (const IndefiniteError&) {
      out.status = classify_indefinite(out.history);
      return out;
    }
    const double alfa = st.alpha;
    const double beta_next = st.beta;

    double delta, eta;
    if (it == 1) {
      delta = alfa;
      eta = beta1;
    } else {
      const double mu = beta_prev / delta_prev;
      delta = alfa - beta_prev * mu;
      eta = -mu * eta_prev;
      cx = vx - mu * cx;
      cy = vy - mu * cy;
    }
    if (delta <= 0.0) {
      out.status = SolveStatus::Breakdown;  // nonpositive pivot: K indefinite on the nullspace
      return out;
    }
    const double zeta = eta / delta;
    out.x += zeta * cx;
    out.y += zeta * cy;
    delta_prev = delta;
    eta_prev = eta;
    vx = st.p;
    vy = -st.q;

    out.iterations = it;
    const double resnorm = beta_next * std::abs(zeta);
    out.history.push_back(resnorm);
    call_hook(opts, it, out.x, out.y);
    if (resnorm <= threshold) {
      out.status = SolveStatus::Converged;
      return out;
    }
    if (st.finished) {
      out.status = SolveStatus::Breakdown;
      return out;
    }
  }
  out.status = SolveStatus::MaxIterations;
  return out;
}

SolveResult cp_cg_traditional_form(const RegularizedSaddleSystem& sys,
                                   ConstraintPreconditioner& P, const Vector& x0,
                                   const Vector& y0, const SolverOptions& opts) {
  const Index maxit = effective_maxit(opts, sys);

  SolveResult out;
  out.x = x0;
  out.y = y0;

  Vector r = sys.residual_x(x0, y0);
  const Vector zero_m = Vector::Zero(sys.m());
  auto [zx, zy] = P.apply(r, zero_m);
  double rho = r.dot(zx);
  if (rho < -1e-10 * r.squaredNorm()) {
    out.history.push_back(std::numeric_limits<double>::quiet_NaN());
    out.status = SolveStatus::IndefiniteDetected;
    return out;
  }
  double seminorm = std::sqrt(std::max(rho, 0.0));
  out.history.push_back(seminorm);
  const double threshold = opts.atol + seminorm * opts.rtol;
  if (seminorm <= threshold) {
    out.status = SolveStatus::Converged;
    return out;
  }

  Vector dx = zx, dy = zy;
  for (Index it = 1; it <= maxit; ++it) {
    const Vector Adx = sys.A().apply(dx);
    const Vector Cdy = sys.C().apply(dy);
    // d^T K d collapses to dx' A dx + dy' C dy because B dx - C dy = 0.
    const double curvature = dx.dot(Adx) + dy.dot(Cdy);
    if (curvature <= 0.0) {
      out.status = SolveStatus::Breakdown;
      return out;
    }
    const double step = rho / curvature;
    out.x += step * dx;
    out.y += step * dy;
    r -= step * (Adx + sys.B().apply_transpose(dy));

    auto [nzx, nzy] = P.apply(r, zero_m);
    const double rho_next = r.dot(nzx);
    if (rho_next < -1e-10 * r.squaredNorm()) {
      out.status = classify_indefinite(out.history);
      return out;
    }
    seminorm = std::sqrt(std::max(rho_next, 0.0));
    out.iterations = it;
    out.history.push_back(seminorm);
    call_hook(opts, it, out.x, out.y);
    if (seminorm <= threshold) {
      out.status = SolveStatus::Converged;
      return out;
    }
    const double ratio = rho_next / rho;
    dx = nzx + ratio * dx;
    dy = nzy + ratio * dy;
    rho = rho_next;
  }
  out.status = SolveStatus::MaxIterations;
  return out;
}

}  // namespace

SolveResult solve_cp_cg(const RegularizedSaddleSystem& sys, ConstraintPreconditioner& P,
                        const Vector& x0, const Vector& y0, const SolverOptions& opts,
                        CgForm form) {
  validate_inputs(sys, P, x0, y0, opts);
  enforce_assumption(P, opts);
  return form == CgForm::Lanczos ? cp_cg_lanczos_form(sys, P, x0, y0, opts)
                                 : cp_cg_traditional_form(sys, P, x0, y0, opts);
}

SolveResult solve_cp_symmlq(const RegularizedSaddleSystem& sys, ConstraintPreconditioner& P,
                            const Vector& x0, const Vector& y0, const SolverOptions& opts) {
  validate_inputs(sys, P, x0, y0, opts);
  enforce_assumption(P, opts);
  const Index maxit = effective_maxit(opts, sys);

  SolveResult out;
  out.x = x0;
  out.y = y0;

  LanczosState st;
  try {
    st = cp_lanczos_init(sys, P, x0, y0);
  } catch (const IndefiniteError&) {
    out.history.push_back(std::numeric_limits<double>::quiet_NaN());
    out.status = SolveStatus::IndefiniteDetected;
    return out;
  }

  const double beta1 = st.beta;
  out.history.push_back(beta1);
  const double threshold = opts.atol + beta1 * opts.rtol;
  if (beta1 <= threshold) {
    out.status = SolveStatus::Converged;
    return out;
  }

  // LQ recurrences; the iterate moves along rotated basis directions w. The
  // recurrences do not expose the LQ-point seminorm, so it is measured
  // directly each iteration, together with the CG point of the current
  // tridiagonal, and the run stops on whichever passes the test first.
  Vector wx = st.p, wy = -st.q;
  double cs = -1.0, sn = 0.0, dbar = 0.0, epsln = 0.0;
  double zeta_prev1 = 0.0, zeta_prev2 = 0.0;

  auto measured = [&](const Vector& x, const Vector& y) {
    return P.p_seminorm(sys.residual_x(x, y));
  };
  auto measured_or_nan = [&](const Vector& x, const Vector& y) {
    try {
      return measured(x, y);
    } catch (const IndefiniteError&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };

  bool have_cg = false;
  Vector cg_x, cg_y;
  double cg_norm = std::numeric_limits<double>::infinity();

  auto finish = [&](SolveStatus fallback) {
    const double lq_norm = out.history.back();
    if (have_cg && (!(cg_norm >= lq_norm))) {  // NaN-safe: adopt only when smaller
      out.x = cg_x;
      out.y = cg_y;
      out.history.back() = cg_norm;
    }
    out.status = out.history.back() <= threshold ? SolveStatus::Converged : fallback;
  };

  for (Index it = 1; it <= maxit; ++it) {
    bool step_failed = false;
    try {
      cp_lanczos_step(st, sys, P);
    } catch (const IndefiniteError&) {
      step_failed = true;
    }
    if (step_failed) {
      if (out.iterations == 0) {
        out.status = SolveStatus::IndefiniteDetected;
        return out;
      }
      finish(classify_indefinite(out.history));
      return out;
    }
    const double alfa = st.alpha;
    const double beta_next = st.beta;
    Vector vnx = st.p, vny = -st.q;

    const double oldeps = epsln;
    const double delta = cs * dbar + sn * alfa;
    const double gbar = sn * dbar - cs * alfa;
    epsln = sn * beta_next;
    dbar = -cs * beta_next;

    const double rhs = (it == 1 ? beta1 : 0.0) - delta * zeta_prev1 - oldeps * zeta_prev2;

    // CG point of the square tridiagonal: the un-rotated final diagonal.
    if (std::abs(gbar) > kTiny) {
      cg_x = out.x + (rhs / gbar) * wx;
      cg_y = out.y + (rhs / gbar) * wy;
      cg_norm = measured_or_nan(cg_x, cg_y);
      have_cg = true;
    }

    const double gamma = std::max(std::hypot(gbar, beta_next), kTiny);
    cs = gbar / gamma;
    sn = beta_next / gamma;
    const double zeta = rhs / gamma;

    out.x += zeta * (cs * wx + sn * vnx);
    out.y += zeta * (cs * wy + sn * vny);
    Vector wnx = sn * wx - cs * vnx;
    Vector wny = sn * wy - cs * vny;
    wx = std::move(wnx);
    wy = std::move(wny);

    zeta_prev2 = zeta_prev1;
    zeta_prev1 = zeta;

    out.iterations = it;
    out.history.push_back(measured_or_nan(out.x, out.y));
    call_hook(opts, it, out.x, out.y);
    if (out.history.back() <= threshold || (have_cg && cg_norm <= threshold)) {
      finish(SolveStatus::MaxIterations);
      return out;
    }
    if (st.finished) {
      finish(SolveStatus::Breakdown);
      return out;
    }
  }
  finish(SolveStatus::MaxIterations);
  return out;
}

namespace {

struct GivensRotation {
  double c = 1.0;
  double s = 0.0;

  void apply(double& a, double& b) const {
    const double ta = c * a + s * b;
    b = -s * a + c * b;
    a = ta;
  }
};

GivensRotation make_rotation(double a, double b) {
  const double r = std::hypot(a, b);
  if (r <= kTiny) return {1.0, 0.0};
  return {a / r, b / r};
}

}  // namespace

SolveResult solve_cp_gmres(const RegularizedSaddleSystem& sys, ConstraintPreconditioner& P,
                           const Vector& x0, const Vector& y0, const SolverOptions& opts) {
  validate_inputs(sys, P, x0, y0, opts);
  enforce_assumption(P, opts);
  const Index maxit = effective_maxit(opts, sys);

  SolveResult out;
  out.x = x0;
  out.y = y0;

  double threshold = 0.0;
  bool have_threshold = false;

  while (true) {
    ArnoldiState st;
    try {
      st = cp_arnoldi_init(sys, P, out.x, out.y);
    } catch (const IndefiniteError&) {
      if (!have_threshold) out.history.push_back(std::numeric_limits<double>::quiet_NaN());
      out.status = SolveStatus::IndefiniteDetected;
      return out;
    }
    const double beta = st.h_init;
    if (!have_threshold) {
      out.history.push_back(beta);
      threshold = opts.atol + beta * opts.rtol;
      have_threshold = true;
    }
    if (beta <= threshold) {
      out.status = SolveStatus::Converged;
      return out;
    }

    const Index cycle = std::min<Index>(opts.restart, maxit - out.iterations);
    if (cycle <= 0) {
      out.status = SolveStatus::MaxIterations;
      return out;
    }

    DenseMatrix R = DenseMatrix::Zero(cycle, cycle);
    std::vector<GivensRotation> rotations;
    Vector g = Vector::Zero(cycle + 1);
    g[0] = beta;

    Index k = 0;
    bool indefinite = false;
    for (k = 1; k <= cycle; ++k) {
      try {
        cp_arnoldi_step(st, sys, P, /*mem=*/0);
      } catch (const IndefiniteError&) {
        indefinite = true;
        --k;
        break;
      }
      // Column k of H sits in st.h (entries 1..k plus the subdiagonal).
      Vector col = Vector::Zero(k + 1);
      for (Index i = 0; i < static_cast<Index>(st.h.size()) - 1; ++i)
        col[st.h_first - 1 + i] = st.h[i];
      double hsub = st.h.back();
      for (Index i = 0; i + 1 < k; ++i) rotations[i].apply(col[i], col[i + 1]);
      GivensRotation rot = make_rotation(col[k - 1], hsub);
      rot.apply(col[k - 1], hsub);
      rotations.push_back(rot);
      R.col(k - 1).head(k) = col.head(k);
      rot.apply(g[k - 1], g[k]);

      ++out.iterations;
      out.history.push_back(std::abs(g[k]));
      if (opts.iterate_hook) {
        // Assemble the in-cycle iterate for observers.
        Vector zx = out.x, zy = out.y;
        const double dmax = R.topLeftCorner(k, k).diagonal().cwiseAbs().maxCoeff();
        Index kk = k;
        while (kk > 0 && std::abs(R(kk - 1, kk - 1)) <= 1e-14 * dmax) --kk;
        Vector gg = g.head(kk);
        Vector zeta = R.topLeftCorner(kk, kk).triangularView<Eigen::Upper>().solve(gg);
        for (Index i = 0; i < kk; ++i) {
          zx += zeta[i] * st.p(i + 1);
          zy -= zeta[i] * st.q(i + 1);
        }
        opts.iterate_hook(out.iterations, zx, zy);
      }
      if (std::abs(g[k]) <= threshold || st.finished || out.iterations >= maxit) break;
    }
    k = std::min(k, cycle);

    if (k > 0) {
      // Columns whose rotated diagonal has collapsed belong to the exhausted
      // part of the basis; the least-squares solution restricted to the
      // leading well-determined block is the meaningful one.
      const double dmax = R.topLeftCorner(k, k).diagonal().cwiseAbs().maxCoeff();
      Index kk = k;
      while (kk > 0 && std::abs(R(kk - 1, kk - 1)) <= 1e-14 * dmax) --kk;
      Vector gg = g.head(kk);
      Vector zeta = R.topLeftCorner(kk, kk).triangularView<Eigen::Upper>().solve(gg);
      for (Index i = 0; i < kk; ++i) {
        out.x += zeta[i] * st.p(i + 1);
        out.y -= zeta[i] * st.q(i + 1);
      }
    }

    if (indefinite) {
      out.status = classify_indefinite(out.history);
      return out;
    }
    if (!out.history.empty() && out.history.back() <= threshold) {
      out.status = SolveStatus::Converged;
      return out;
    }
    if (out.iterations >= maxit) {
      out.status = SolveStatus::MaxIterations;
      return out;
    }
    // otherwise restart from the current iterate
  }
}

SolveResult solve_cp_dqgmres(const RegularizedSaddleSystem& sys, ConstraintPreconditioner& P,
                             const Vector& x0, const Vector& y0, const SolverOptions& opts) {
  validate_inputs(sys, P, x0, y0, opts);
  enforce_assumption(P, opts);
  const Index maxit = effective_maxit(opts, sys);
  const Index mem = opts.mem;

  SolveResult out;
  out.history_is_estimate = true;
  out.x = x0;
  out.y = y0;

  ArnoldiState st;
  try {
    st = cp_arnoldi_init(sys, P, x0, y0);
  } catch (const IndefiniteError&) {
    out.history.push_back(std::numeric_limits<double>::quiet_NaN());
    out.status = SolveStatus::IndefiniteDetected;
    return out;
  }
  const double beta = st.h_init;
  out.history.push_back(beta);
  const double threshold = opts.atol + beta * opts.rtol;
  if (beta <= threshold) {
    out.status = SolveStatus::Converged;
    return out;
  }

  std::deque<GivensRotation> rotations;  // last `mem` rotations, first is index jmin
  Index rot_first = 1;
  std::deque<Vector> dir_x, dir_y;  // last `mem` direction pairs, first is index jmin
  Index dir_first = 1;
  double gamma_k = beta;
  double rkk_max = 0.0;

  for (Index k = 1; k <= maxit; ++k) {
    const Vector vkx = st.p(k);
    const Vector vky = st.q(k);
    try {
      cp_arnoldi_step(st, sys, P, mem);
    } catch (const IndefiniteError&) {
      out.status = classify_indefinite(out.history);
      return out;
    }

    // Dense copy of column k over rows jmin..k+1 (fill enters one row above
    // the truncated window).
    const Index jmin = std::max<Index>(1, k - mem);
    const Index len = k + 2 - jmin;  // rows jmin..k+1
    Vector col = Vector::Zero(len);
    for (Index i = 0; i < static_cast<Index>(st.h.size()) - 1; ++i) {
      const Index row = st.h_first + i;
      col[row - jmin] = st.h[i];
    }
    col[len - 1] = st.h.back();  // h_{k+1,k}

    while (!rotations.empty() && rot_first < jmin) {
      rotations.pop_front();
      ++rot_first;
    }
    for (size_t r = 0; r < rotations.size(); ++r) {
      const Index j = rot_first + static_cast<Index>(r);  // acts on rows (j, j+1)
      rotations[r].apply(col[j - jmin], col[j + 1 - jmin]);
    }
    GivensRotation rot = make_rotation(col[k - jmin], col[len - 1]);
    rot.apply(col[k - jmin], col[len - 1]);
    rotations.push_back(rot);
    if (rotations.size() == 1) rot_first = k;

    const double gamma_next = -rot.s * gamma_k;
    gamma_k = rot.c * gamma_k;

    Vector dx = vkx, dy = -vky;
    while (!dir_x.empty() && dir_first < jmin) {
      dir_x.pop_front();
      dir_y.pop_front();
      ++dir_first;
    }
    for (size_t r = 0; r < dir_x.size(); ++r) {
      const Index j = dir_first + static_cast<Index>(r);
      dx -= col[j - jmin] * dir_x[r];
      dy -= col[j - jmin] * dir_y[r];
    }
    const double rkk = col[k - jmin];
    rkk_max = std::max(rkk_max, std::abs(rkk));
    if (std::abs(rkk) <= 1e-14 * rkk_max) {
      // degenerate column: the basis is numerically exhausted
      out.status = SolveStatus::Breakdown;
      return out;
    }
    dx /= rkk;
    dy /= rkk;
    out.x += gamma_k * dx;
    out.y += gamma_k * dy;
    dir_x.push_back(std::move(dx));
    dir_y.push_back(std::move(dy));
    if (dir_x.size() == 1) dir_first = k;

    out.iterations = k;
    out.history.push_back(std::abs(gamma_next));
    call_hook(opts, k, out.x, out.y);
    if (std::abs(gamma_next) <= threshold) {
      out.status = SolveStatus::Converged;
      return out;
    }
    if (st.finished) {
      out.status = std::abs(gamma_next) <= threshold ? SolveStatus::Converged
                                                     : SolveStatus::Breakdown;
      return out;
    }
    gamma_k = gamma_next;
  }
  out.status = SolveStatus::MaxIterations;
  return out;
}

Method method_from_name(const std::string& name) {
  if (name == "cg") return Method::Cg;
  if (name == "cg-lanczos") return Method::CgLanczos;
  if (name == "minres") return Method::Minres;
  if (name == "symmlq") return Method::Symmlq;
  if (name == "gmres") return Method::Gmres;
  if (name == "dqgmres") return Method::Dqgmres;
  throw std::invalid_argument("unknown method '" + name +
                              "' (expected cg, cg-lanczos, minres, symmlq, gmres or dqgmres)");
}

const char* to_string(Method m) {
  switch (m) {
    case Method::Cg: return "cg";
    case Method::CgLanczos: return "cg-lanczos";
    case Method::Minres: return "minres";
    case Method::Symmlq: return "symmlq";
    case Method::Gmres: return "gmres";
    case Method::Dqgmres: return "dqgmres";
  }
  return "unknown";
}

SolveResult reg_cpkrylov(const RegularizedSaddleSystem& sys, const MatrixStorage& G,
                         Method method, const SolverOptions& opts, const CpOptions& cp_opts) {
  if (G.rows() != sys.n() || G.cols() != sys.n())
    throw DimensionError("reg_cpkrylov: G must be n-by-n");

  CpOptions cpo = cp_opts;
  cpo.semi_refine = opts.semi_refine;
  ConstraintPreconditioner P(G, sys.B(), sys.C(), cpo);

  // Reduce [b1; b2] to the zero-b2 form: one preconditioner application
  // yields (dx, dy) with B dx - C dy = b2.
  Vector dx = Vector::Zero(sys.n());
  Vector dy = Vector::Zero(sys.m());
  Vector b = sys.b1();
  if (sys.b2().norm() > 0.0) {
    std::tie(dx, dy) = P.apply(Vector::Zero(sys.n()), sys.b2());
    b -= sys.A().apply(dx) + sys.B().apply_transpose(dy);
  }
  RegularizedSaddleSystem shifted(sys.A(), sys.B(), sys.C(), std::move(b));

  const Vector zx = Vector::Zero(sys.n());
  const Vector zy = Vector::Zero(sys.m());
  SolveResult res;
  switch (method) {
    case Method::Cg: res = solve_cp_cg(shifted, P, zx, zy, opts, CgForm::Traditional); break;
    case Method::CgLanczos: res = solve_cp_cg(shifted, P, zx, zy, opts, CgForm::Lanczos); break;
    case Method::Minres: res = solve_cp_minres(shifted, P, zx, zy, opts); break;
    case Method::Symmlq: res = solve_cp_symmlq(shifted, P, zx, zy, opts); break;
    case Method::Gmres: res = solve_cp_gmres(shifted, P, zx, zy, opts); break;
    case Method::Dqgmres: res = solve_cp_dqgmres(shifted, P, zx, zy, opts); break;
  }

  res.x += dx;
  res.y += dy;
  res.final_relative_residual = sys.relative_residual(res.x, res.y);
  if (res.status == SolveStatus::Converged && !res.history.empty()) {
    // The seminorm test passed; make sure the actual residual is consistent
    // with what was asked for. The guard scales with the requested seminorm
    // level so deliberately loose solves are not second-guessed; it exists to
    // catch solutions whose seminorm vanished while the true residual did not
    // (a rank-deficient C cannot determine the multiplier).
    const double requested = opts.atol + opts.rtol * res.history.front();
    const double rhs_norm = std::max(std::hypot(sys.b1().norm(), sys.b2().norm()), 1e-300);
    const double guard = std::max(1e-6, 1e3 * requested / rhs_norm);
    if (res.final_relative_residual > guard) res.status = SolveStatus::MaxIterations;
  }
  return res;
}

}  // namespace cpk
