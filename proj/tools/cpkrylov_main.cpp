// Command-line front end: solve saddle-point systems from Matrix Market
// files, generate test problems, report preconditioned spectra, and run the
// toy interior-point benchmark. All reports are CSV with a leading
// '#'-commented manifest line so runs are diffable.

#include "cpkrylov/matrix_market.hpp"
#include "cpkrylov/oracle.hpp"
#include "cpkrylov/problems.hpp"
#include "cpkrylov/solvers.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace cpk;

namespace {

constexpr int kExitConverged = 0;
constexpr int kExitUsage = 1;
constexpr int kExitMaxIterations = 2;
constexpr int kExitBreakdown = 3;

struct RunConfig {
  std::string method = "minres";
  std::string path_A, path_B, path_C, path_G, path_b1, path_b2;
  double atol = 1e-8;
  double rtol = 1e-6;
  long maxit = 0;
  long mem = 2;
  long restart = 20;
  bool semi_refine = false;
  bool strict_assumption = false;
  double refine_tol = 1e-10;
  long refine_max = 2;
  std::uint64_t seed = 0;
  std::string out = ".";
};

SolverOptions solver_options(const RunConfig& cfg) {
  SolverOptions opts;
  opts.atol = cfg.atol;
  opts.rtol = cfg.rtol;
  opts.maxit = cfg.maxit;
  opts.mem = cfg.mem;
  opts.restart = cfg.restart;
  opts.semi_refine = cfg.semi_refine;
  opts.strict_assumption = cfg.strict_assumption;
  return opts;
}

CpOptions cp_options(const RunConfig& cfg) {
  CpOptions opts;
  opts.refine_tol = cfg.refine_tol;
  opts.refine_max = cfg.refine_max;
  opts.semi_refine = cfg.semi_refine;
  return opts;
}

std::string manifest(const RunConfig& cfg, const std::string& subcommand) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "# cpkrylov %s method=%s atol=%g rtol=%g maxit=%ld mem=%ld restart=%ld "
                "semi-refine=%d refine-tol=%g refine-max=%ld seed=%llu",
                subcommand.c_str(), cfg.method.c_str(), cfg.atol, cfg.rtol, cfg.maxit, cfg.mem,
                cfg.restart, int(cfg.semi_refine), cfg.refine_tol, cfg.refine_max,
                static_cast<unsigned long long>(cfg.seed));
  return buf;
}

MatrixStorage load_symmetric(const std::string& path, const char* what) {
  MatrixStorage M = read_matrix_market(path);
  if (M.symmetric()) return M;
  if (M.rows() != M.cols())
    throw std::runtime_error(std::string(what) + " must be square: " + path);
  // accept a symmetric matrix stored as general
  return MatrixStorage::dense(M.to_dense(), Symmetry::Symmetric);
}

MatrixStorage diagonal_of(const MatrixStorage& A) {
  return MatrixStorage::diagonal(A.to_dense().diagonal());
}

int exit_code(SolveStatus status) {
  switch (status) {
    case SolveStatus::Converged: return kExitConverged;
    case SolveStatus::MaxIterations: return kExitMaxIterations;
    case SolveStatus::Breakdown:
    case SolveStatus::IndefiniteDetected: return kExitBreakdown;
  }
  return kExitUsage;
}

void write_history_csv(const fs::path& path, const RunConfig& cfg, const SolveResult& res) {
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  if (!f) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  std::fprintf(f, "%s\n", manifest(cfg, "solve").c_str());
  std::fprintf(f, "iter,seminorm_residual,is_estimate\n");
  for (size_t k = 0; k < res.history.size(); ++k)
    std::fprintf(f, "%zu,%.17g,%d\n", k, res.history[k], int(res.history_is_estimate));
  std::fclose(f);
}

int cmd_solve(const RunConfig& cfg) {
  MatrixStorage A = read_matrix_market(cfg.path_A);
  MatrixStorage B = read_matrix_market(cfg.path_B);
  MatrixStorage C = load_symmetric(cfg.path_C, "C");
  Vector b1 = read_vector(cfg.path_b1);
  Vector b2;
  if (!cfg.path_b2.empty()) b2 = read_vector(cfg.path_b2);

  MatrixStorage G = cfg.path_G.empty() ? diagonal_of(A) : load_symmetric(cfg.path_G, "G");
  RegularizedSaddleSystem sys(LinearOperator::from_matrix(std::move(A)), std::move(B),
                              std::move(C), std::move(b1), std::move(b2));

  SolveResult res = reg_cpkrylov(sys, G, method_from_name(cfg.method), solver_options(cfg),
                                 cp_options(cfg));

  fs::create_directories(cfg.out);
  write_history_csv(fs::path(cfg.out) / "history.csv", cfg, res);
  write_vector((fs::path(cfg.out) / "x.mtx").string(), res.x);
  write_vector((fs::path(cfg.out) / "y.mtx").string(), res.y);

  std::printf("status=%s iterations=%ld relative_residual=%.6e\n", to_string(res.status),
              static_cast<long>(res.iterations), res.final_relative_residual);
  return exit_code(res.status);
}

struct GenConfig {
  std::string kind = "random";
  long n = 10;
  long m = 3;
  long c_rank = -1;
  bool c_indefinite = false;
  bool nonsymmetric = false;
  bool general_rhs = false;
};

int cmd_gen(const RunConfig& cfg, const GenConfig& gen) {
  fs::create_directories(cfg.out);
  const fs::path out(cfg.out);

  MatrixStorage A, B, C, G;
  Vector b1, b2;

  if (gen.kind == "counterexample") {
    RegularizedSaddleSystem sys = counterexample_system();
    A = MatrixStorage::dense(oracle::materialize(sys.A()));
    B = sys.B();
    C = sys.C();
    G = diagonal_of(A);
    b1 = sys.b1();
  } else if (gen.kind == "random") {
    GenProps props;
    props.c_rank = gen.c_rank;
    props.c_psd = !gen.c_indefinite;
    props.a_symmetric = !gen.nonsymmetric;
    props.general_rhs = gen.general_rhs;
    GeneratedSystem g = gen_random_system(gen.n, gen.m, cfg.seed, props);
    A = MatrixStorage::dense(oracle::materialize(g.sys.A()),
                             gen.nonsymmetric ? Symmetry::General : Symmetry::Symmetric);
    B = g.sys.B();
    C = g.sys.C();
    G = g.G;
    b1 = g.sys.b1();
    if (gen.general_rhs) b2 = g.sys.b2();
  } else {
    std::fprintf(stderr, "cpkrylov: unknown --kind '%s' (expected random or counterexample)\n",
                 gen.kind.c_str());
    return kExitUsage;
  }

  write_matrix_market((out / "A.mtx").string(), A);
  write_matrix_market((out / "B.mtx").string(), B);
  write_matrix_market((out / "C.mtx").string(), C);
  write_matrix_market((out / "G.mtx").string(), G);
  write_vector((out / "b1.mtx").string(), b1);
  if (b2.size() > 0) write_vector((out / "b2.mtx").string(), b2);
  std::printf("wrote %s/{A,B,C,G,b1%s}.mtx\n", cfg.out.c_str(), b2.size() ? ",b2" : "");
  return kExitConverged;
}

int cmd_spectrum(const RunConfig& cfg) {
  MatrixStorage A = read_matrix_market(cfg.path_A);
  MatrixStorage B = read_matrix_market(cfg.path_B);
  MatrixStorage C = load_symmetric(cfg.path_C, "C");
  MatrixStorage G = cfg.path_G.empty() ? diagonal_of(A) : load_symmetric(cfg.path_G, "G");

  if (A.rows() + B.rows() > oracle::kMaxSize) {
    std::fprintf(stderr, "cpkrylov: spectrum size cap exceeded (n + m = %ld > %ld)\n",
                 static_cast<long>(A.rows() + B.rows()), static_cast<long>(oracle::kMaxSize));
    return kExitUsage;
  }

  MatrixStorage K = assemble_block_2x2(A, B, C);
  MatrixStorage P = assemble_block_2x2(G, B, C);
  auto ev = oracle::preconditioned_spectrum(P, K);
  const Index p = oracle::decompose_c(C).p;
  const Index near_one = oracle::count_near(ev, 1.0, 1e-8);

  fs::create_directories(cfg.out);
  const fs::path path = fs::path(cfg.out) / "spectrum.csv";
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  if (!f) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  std::fprintf(f, "%s\n", manifest(cfg, "spectrum").c_str());
  std::fprintf(f, "re,im\n");
  for (auto z : ev) std::fprintf(f, "%.17g,%.17g\n", z.real(), z.imag());
  std::fclose(f);

  std::printf("eigenvalues=%zu near_one=%ld bound_2m_minus_p=%ld rank_C=%ld\n", ev.size(),
              static_cast<long>(near_one), static_cast<long>(2 * B.rows() - p),
              static_cast<long>(p));
  return kExitConverged;
}

struct BenchConfig {
  long count = 3;
  long nq = 6;
  long mq = 2;
  std::vector<std::string> methods{"minres", "cg"};
  std::vector<std::string> kinds{"K2", "K3.5", "K3p"};
};

int cmd_bench(const RunConfig& cfg, const BenchConfig& bench) {
  if (bench.count < 1) {
    std::fprintf(stderr, "cpkrylov: bench needs a nonempty instance set (--count >= 1)\n");
    return kExitUsage;
  }
  fs::create_directories(cfg.out);
  const fs::path path = fs::path(cfg.out) / "bench.csv";
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  if (!f) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  std::fprintf(f, "%s\n", manifest(cfg, "bench").c_str());
  std::fprintf(f, "name,formulation,method,outer_it,inner_it,converged\n");

  for (long i = 0; i < bench.count; ++i) {
    ToyQP qp = gen_toy_qp(bench.nq, bench.mq, cfg.seed + static_cast<std::uint64_t>(i));
    for (const std::string& kind_name : bench.kinds) {
      KktKind kind = kkt_kind_from_name(kind_name);
      for (const std::string& method_name : bench.methods) {
        Method method = method_from_name(method_name);
        SolverOptions opts = solver_options(cfg);
        if (kind == KktKind::K3p &&
            (method == Method::Minres || method == Method::Cg ||
             method == Method::CgLanczos || method == Method::Symmlq))
          continue;  // symmetric methods do not apply to the unsymmetric form
        IpReport rep = toy_ip_solve(qp, kind, method, opts);
        std::fprintf(f, "qp%02ld,%s,%s,%ld,%ld,%d\n", i, to_string(kind), method_name.c_str(),
                     static_cast<long>(rep.outer_it), static_cast<long>(rep.inner_it_total),
                     int(rep.converged));
      }
    }
  }
  std::fclose(f);
  std::printf("wrote %s\n", path.string().c_str());
  return kExitConverged;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constraint-preconditioned Krylov solvers for regularized saddle-point systems"};
  app.require_subcommand(1);

  RunConfig cfg;
  GenConfig gen;
  BenchConfig bench;

  auto add_solver_flags = [&](CLI::App* cmd) {
    cmd->add_option("--method", cfg.method,
                    "one of cg, cg-lanczos, minres, symmlq, gmres, dqgmres")
        ->capture_default_str();
    cmd->add_option("--atol", cfg.atol, "absolute residual tolerance")->capture_default_str();
    cmd->add_option("--rtol", cfg.rtol, "relative residual tolerance")->capture_default_str();
    cmd->add_option("--maxit", cfg.maxit, "iteration cap; 0 selects 2(n+m)")
        ->capture_default_str();
    cmd->add_option("--mem", cfg.mem, "DQGMRES window")->capture_default_str();
    cmd->add_option("--restart", cfg.restart, "GMRES cycle length")->capture_default_str();
    cmd->add_flag("--semi-refine", cfg.semi_refine, "apply iterative semi-refinement");
    cmd->add_flag("--strict-assumption", cfg.strict_assumption,
                  "treat a failed inertia test as an error");
    cmd->add_option("--refine-tol", cfg.refine_tol, "preconditioner refinement tolerance")
        ->capture_default_str();
    cmd->add_option("--refine-max", cfg.refine_max, "preconditioner refinement step cap")
        ->capture_default_str();
  };

  CLI::App* solve = app.add_subcommand("solve", "solve a system from Matrix Market files");
  solve->add_option("--A", cfg.path_A, "leading block")->required();
  solve->add_option("--B", cfg.path_B, "constraint block")->required();
  solve->add_option("--C", cfg.path_C, "regularization block")->required();
  solve->add_option("--G", cfg.path_G, "preconditioner leading block (default: diag of A)");
  solve->add_option("--b1", cfg.path_b1, "first right-hand side block")->required();
  solve->add_option("--b2", cfg.path_b2, "second right-hand side block (default: zero)");
  solve->add_option("--out", cfg.out, "output directory")->capture_default_str();
  add_solver_flags(solve);

  CLI::App* genc = app.add_subcommand("gen", "write a Matrix Market problem bundle");
  genc->add_option("--kind", gen.kind, "random or counterexample")->capture_default_str();
  genc->add_option("--n", gen.n, "primal dimension")->capture_default_str();
  genc->add_option("--m", gen.m, "constraint dimension")->capture_default_str();
  genc->add_option("--c-rank", gen.c_rank, "rank of C; -1 selects full")->capture_default_str();
  genc->add_flag("--c-indefinite", gen.c_indefinite, "draw C with mixed eigenvalue signs");
  genc->add_flag("--nonsymmetric", gen.nonsymmetric, "draw a nonsymmetric leading block");
  genc->add_flag("--general-rhs", gen.general_rhs, "emit a nonzero b2");
  genc->add_option("--seed", cfg.seed, "generator seed")->capture_default_str();
  genc->add_option("--out", cfg.out, "output directory")->capture_default_str();

  CLI::App* spec = app.add_subcommand("spectrum", "eigenvalues of the preconditioned matrix");
  spec->add_option("--A", cfg.path_A, "leading block")->required();
  spec->add_option("--B", cfg.path_B, "constraint block")->required();
  spec->add_option("--C", cfg.path_C, "regularization block")->required();
  spec->add_option("--G", cfg.path_G, "preconditioner leading block (default: diag of A)");
  spec->add_option("--out", cfg.out, "output directory")->capture_default_str();

  CLI::App* ben = app.add_subcommand("bench", "toy interior-point benchmark");
  ben->add_option("--count", bench.count, "number of seeded instances")->capture_default_str();
  ben->add_option("--nq", bench.nq, "QP primal dimension")->capture_default_str();
  ben->add_option("--mq", bench.mq, "QP constraint dimension")->capture_default_str();
  ben->add_option("--methods", bench.methods, "methods to run")->capture_default_str();
  ben->add_option("--kinds", bench.kinds, "formulations to run")->capture_default_str();
  ben->add_option("--seed", cfg.seed, "base seed")->capture_default_str();
  ben->add_option("--out", cfg.out, "output directory")->capture_default_str();
  add_solver_flags(ben);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitConverged : kExitUsage;
  }

  try {
    if (solve->parsed()) return cmd_solve(cfg);
    if (genc->parsed()) return cmd_gen(cfg, gen);
    if (spec->parsed()) return cmd_spectrum(cfg);
    if (ben->parsed()) return cmd_bench(cfg, bench);
  } catch (const ParseError& e) {
    std::fprintf(stderr, "cpkrylov: %s\n", e.what());
    return kExitUsage;
  } catch (const SingularMatrixError& e) {
    std::fprintf(stderr, "cpkrylov: %s\n", e.what());
    return kExitBreakdown;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "cpkrylov: %s\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}
