// Python bindings for the main operations: solving regularized saddle-point
// systems with the constraint-preconditioned Krylov solvers, the dense direct
// solve, the preconditioned spectrum, and the seeded problem generator.
// Dense numpy arrays map to Eigen matrices at this desk scale.

#include "cpkrylov/oracle.hpp"
#include "cpkrylov/problems.hpp"
#include "cpkrylov/solvers.hpp"

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace cpk;

namespace {

MatrixStorage symmetric_storage(const DenseMatrix& M, const char* what) {
  try {
    return MatrixStorage::dense(M, Symmetry::Symmetric);
  } catch (const DimensionError& e) {
    throw py::value_error(std::string(what) + ": " + e.what());
  }
}

RegularizedSaddleSystem make_system(const DenseMatrix& A, const DenseMatrix& B,
                                    const DenseMatrix& C, const Vector& b1,
                                    std::optional<Vector> b2) {
  const bool a_symmetric =
      A.rows() == A.cols() &&
      (A - A.transpose()).cwiseAbs().maxCoeff() <= 1e-14 * std::max(A.cwiseAbs().maxCoeff(), 1e-300);
  MatrixStorage As = MatrixStorage::dense(A, a_symmetric ? Symmetry::Symmetric
                                                         : Symmetry::General);
  return RegularizedSaddleSystem(LinearOperator::from_matrix(std::move(As)),
                                 MatrixStorage::dense(B), symmetric_storage(C, "C"), b1,
                                 b2.value_or(Vector()));
}

MatrixStorage g_or_default(const std::optional<DenseMatrix>& G, const DenseMatrix& A) {
  if (G) return symmetric_storage(*G, "G");
  return MatrixStorage::diagonal(A.diagonal());
}

}  // namespace

PYBIND11_MODULE(_cpkrylov, m) {
  m.doc() = "Constraint-preconditioned Krylov solvers for regularized saddle-point systems";

  py::enum_<SolveStatus>(m, "SolveStatus")
      .value("converged", SolveStatus::Converged)
      .value("max_iterations", SolveStatus::MaxIterations)
      .value("breakdown", SolveStatus::Breakdown)
      .value("indefinite_detected", SolveStatus::IndefiniteDetected);

  py::class_<SolveResult>(m, "SolveResult")
      .def_readonly("x", &SolveResult::x)
      .def_readonly("y", &SolveResult::y)
      .def_readonly("iterations", &SolveResult::iterations)
      .def_readonly("history", &SolveResult::history)
      .def_readonly("history_is_estimate", &SolveResult::history_is_estimate)
      .def_readonly("status", &SolveResult::status)
      .def_readonly("final_relative_residual", &SolveResult::final_relative_residual)
      .def_property_readonly("converged",
                             [](const SolveResult& r) { return r.status == SolveStatus::Converged; })
      .def("__repr__", [](const SolveResult& r) {
        return "<cpkrylov.SolveResult status=" + std::string(to_string(r.status)) +
               " iterations=" + std::to_string(r.iterations) + ">";
      });

  m.def(
      "solve",
      [](const DenseMatrix& A, const DenseMatrix& B, const DenseMatrix& C, const Vector& b1,
         std::optional<Vector> b2, std::optional<DenseMatrix> G, const std::string& method,
         double atol, double rtol, long maxit, long mem, long restart, bool semi_refine,
         bool strict_assumption, double refine_tol, long refine_max) {
        RegularizedSaddleSystem sys = make_system(A, B, C, b1, std::move(b2));
        SolverOptions opts;
        opts.atol = atol;
        opts.rtol = rtol;
        opts.maxit = maxit;
        opts.mem = mem;
        opts.restart = restart;
        opts.semi_refine = semi_refine;
        opts.strict_assumption = strict_assumption;
        CpOptions cpo;
        cpo.refine_tol = refine_tol;
        cpo.refine_max = refine_max;
        return reg_cpkrylov(sys, g_or_default(G, A), method_from_name(method), opts, cpo);
      },
      py::arg("A"), py::arg("B"), py::arg("C"), py::arg("b1"), py::arg("b2") = std::nullopt,
      py::arg("G") = std::nullopt, py::arg("method") = "minres", py::arg("atol") = 1e-8,
      py::arg("rtol") = 1e-6, py::arg("maxit") = 0, py::arg("mem") = 2, py::arg("restart") = 20,
      py::arg("semi_refine") = false, py::arg("strict_assumption") = false,
      py::arg("refine_tol") = 1e-10, py::arg("refine_max") = 2,
      "Solve [A B'; B -C][x;y] = [b1;b2] with a constraint-preconditioned Krylov method.\n"
      "G defaults to the diagonal of A. Returns a SolveResult.");

  m.def(
      "direct_solve",
      [](const DenseMatrix& A, const DenseMatrix& B, const DenseMatrix& C, const Vector& b1,
         std::optional<Vector> b2) {
        RegularizedSaddleSystem sys = make_system(A, B, C, b1, std::move(b2));
        return oracle::direct_solve(sys);
      },
      py::arg("A"), py::arg("B"), py::arg("C"), py::arg("b1"), py::arg("b2") = std::nullopt,
      "Dense direct solve of the full system; raises on a singular matrix.");

  m.def(
      "spectrum",
      [](const DenseMatrix& A, const DenseMatrix& B, const DenseMatrix& C,
         std::optional<DenseMatrix> G) {
        const bool a_symmetric =
            (A - A.transpose()).cwiseAbs().maxCoeff() <=
            1e-14 * std::max(A.cwiseAbs().maxCoeff(), 1e-300);
        MatrixStorage As =
            MatrixStorage::dense(A, a_symmetric ? Symmetry::Symmetric : Symmetry::General);
        MatrixStorage Cs = symmetric_storage(C, "C");
        MatrixStorage Bs = MatrixStorage::dense(B);
        MatrixStorage K = assemble_block_2x2(As, Bs, Cs);
        MatrixStorage P = assemble_block_2x2(g_or_default(G, A), Bs, Cs);
        return oracle::preconditioned_spectrum(P, K);
      },
      py::arg("A"), py::arg("B"), py::arg("C"), py::arg("G") = std::nullopt,
      "Eigenvalues of inv(P) K with the constraint preconditioner built from G.");

  m.def(
      "gen_random_system",
      [](long n, long m, std::uint64_t seed, long c_rank, bool c_psd, bool a_symmetric,
         bool assumption_ok, bool g_near_a, bool general_rhs) {
        GenProps props;
        props.c_rank = c_rank;
        props.c_psd = c_psd;
        props.a_symmetric = a_symmetric;
        props.assumption_ok = assumption_ok;
        props.g_near_a = g_near_a;
        props.general_rhs = general_rhs;
        GeneratedSystem g = gen_random_system(n, m, seed, props);
        py::dict out;
        out["A"] = oracle::materialize(g.sys.A());
        out["B"] = g.sys.B().to_dense();
        out["C"] = g.sys.C().to_dense();
        out["G"] = g.G.to_dense();
        out["b1"] = g.sys.b1();
        out["b2"] = g.sys.b2();
        return out;
      },
      py::arg("n"), py::arg("m"), py::arg("seed"), py::arg("c_rank") = -1,
      py::arg("c_psd") = true, py::arg("a_symmetric") = true, py::arg("assumption_ok") = true,
      py::arg("g_near_a") = false, py::arg("general_rhs") = false,
      "Deterministic random test system as a dict of numpy arrays.");

  py::register_exception<SingularMatrixError>(m, "SingularMatrixError");
  py::register_exception<IndefiniteError>(m, "IndefiniteError");
}
