#pragma once

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include <vector>

#include "conelab/errors.hpp"
#include "conelab/operators.hpp"

namespace conelab {

struct LinearSolveOptions {
    double tol = 1e-10;
    int max_iterations = 50000;
    int chunk = 500; // iterations between residual-history samples
};

struct LinearSolveResult {
    Eigen::VectorXd x;
    int iterations = 0;
    double relative_residual = 0.0;
    std::vector<double> history;
};

namespace detail {

template <class Solver>
LinearSolveResult run_chunked(Solver& solver, const SparseMatrix& A, const Eigen::VectorXd& b, Eigen::VectorXd x,
                              const LinearSolveOptions& opt, const char* what) {
    LinearSolveResult out;
    const double bnorm = b.norm();
    if (bnorm == 0.0) {
        out.x = Eigen::VectorXd::Zero(b.size());
        return out;
    }
    solver.setTolerance(opt.tol);
    solver.compute(A);
    if (solver.info() != Eigen::Success) throw SolverError(std::string(what) + ": preconditioner setup failed");
    while (out.iterations < opt.max_iterations) {
        solver.setMaxIterations(std::min(opt.chunk, opt.max_iterations - out.iterations));
        x = solver.solveWithGuess(b, x);
        out.iterations += static_cast<int>(solver.iterations());
        out.relative_residual = (b - A * x).norm() / bnorm;
        out.history.push_back(out.relative_residual);
        if (!std::isfinite(out.relative_residual)) break;
        if (out.relative_residual <= opt.tol) {
            out.x = std::move(x);
            return out;
        }
        if (solver.iterations() == 0) break;
    }
    throw SolverError(std::string(what) + ": no convergence (relative residual " +
                          std::to_string(out.relative_residual) + ")",
                      out.history);
}

} // namespace detail

/// Conjugate gradients with a diagonal preconditioner; A must be symmetric positive definite.
inline LinearSolveResult solve_spd(const SparseMatrix& A, const Eigen::VectorXd& b, const Eigen::VectorXd& guess,
                                   const LinearSolveOptions& opt = {}) {
    Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg;
    return detail::run_chunked(cg, A, b, guess, opt, "conjugate gradients");
}

/// BiCGSTAB with a diagonal preconditioner for non-symmetric systems.
inline LinearSolveResult solve_general(const SparseMatrix& A, const Eigen::VectorXd& b, const Eigen::VectorXd& guess,
                                       const LinearSolveOptions& opt = {}) {
    Eigen::BiCGSTAB<SparseMatrix, Eigen::DiagonalPreconditioner<double>> bicg;
    return detail::run_chunked(bicg, A, b, guess, opt, "BiCGSTAB");
}

/// Splits nodes into unknowns and prescribed (Dirichlet) values.
struct Partition {
    std::vector<long> unknowns;
    std::vector<long> position; // index into unknowns, or -1

    explicit Partition(const std::vector<char>& dirichlet) : position(dirichlet.size(), -1) {
        for (std::size_t n = 0; n < dirichlet.size(); ++n)
            if (!dirichlet[n]) {
                position[n] = static_cast<long>(unknowns.size());
                unknowns.push_back(static_cast<long>(n));
            }
    }
    [[nodiscard]] long size() const { return static_cast<long>(unknowns.size()); }

    /// Rows and columns of A restricted to unknowns, each row scaled by row_scale[node].
    [[nodiscard]] SparseMatrix restrict_matrix(const SparseMatrix& A, const std::vector<double>* row_scale = nullptr) const {
        std::vector<Eigen::Triplet<double>> trips;
        for (long k = 0; k < size(); ++k) {
            const long r = unknowns[k];
            const double s = row_scale ? (*row_scale)[r] : 1.0;
            for (SparseMatrix::InnerIterator it(A, r); it; ++it)
                if (position[it.col()] >= 0) trips.emplace_back(k, position[it.col()], s * it.value());
        }
        SparseMatrix out(size(), size());
        out.setFromTriplets(trips.begin(), trips.end());
        out.makeCompressed();
        return out;
    }

    /// (A_IB u_B) for unknown rows, scaled like restrict_matrix.
    [[nodiscard]] Eigen::VectorXd boundary_action(const SparseMatrix& A, const std::vector<double>& u,
                                                  const std::vector<double>* row_scale = nullptr) const {
        Eigen::VectorXd out(size());
        for (long k = 0; k < size(); ++k) {
            const long r = unknowns[k];
            double acc = 0.0;
            for (SparseMatrix::InnerIterator it(A, r); it; ++it)
                if (position[it.col()] < 0) acc += it.value() * u[it.col()];
            out[k] = (row_scale ? (*row_scale)[r] : 1.0) * acc;
        }
        return out;
    }

    [[nodiscard]] Eigen::VectorXd gather(const std::vector<double>& u) const {
        Eigen::VectorXd out(size());
        for (long k = 0; k < size(); ++k) out[k] = u[unknowns[k]];
        return out;
    }
    void scatter(const Eigen::VectorXd& x, std::vector<double>& u) const {
        for (long k = 0; k < size(); ++k) u[unknowns[k]] = x[k];
    }
};

} // namespace conelab
