#pragma once

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <string>
#include <vector>

#include "tpml/errors.hpp"
#include "tpml/kernels.hpp"
#include "tpml/sites.hpp"

namespace tpml {

/// Sparse symmetric Gramian M_i with (M_i)_{k,m} = Phi_i(x_{i,k} - x_{i,m}).
/// Entries are present exactly where the site distance is below epsilon.
struct Gramian {
    int level = 0;
    Eigen::SparseMatrix<double> M;
};

inline Gramian assemble_gramian(const LevelSites& sites, KernelFamily family, int level = 0) {
    const int n = static_cast<int>(sites.points.size());
    const ScaledKernel kernel{family, sites.epsilon};
    std::vector<Eigen::Triplet<double>> trips;
    for (int k = 0; k < n; ++k) {
        const SparseEvalVector r = sites.r_vector(family, sites.points[k]);
        for (const auto& [m, v] : r.entries) {
            if (m != k && v == 1.0 && distance(sites.points[k], sites.points[m]) == 0.0)
                throw DataError("assemble_gramian: duplicate sites " + std::to_string(k) + ", " +
                                std::to_string(m) + " on level " + std::to_string(level));
            trips.emplace_back(k, m, v);
        }
    }
    Gramian g;
    g.level = level;
    g.M.resize(n, n);
    g.M.setFromTriplets(trips.begin(), trips.end());
    return g;
}

enum class SolveMode { interpolation, penalized_ls };

/// Dense block of Lagrange coefficients: column k is alpha_{i,k}, i.e.
/// A = M^{-1} (interpolation) or (M + lambda I)^{-1} (penalized).
struct CoefficientBlock {
    int level = 0;
    Eigen::MatrixXd A;
    SolveMode mode = SolveMode::interpolation;
    double lambda_reg = 0.0;
    double residual = 0.0;  // achieved max-norm of M*A - I
    bool used_fallback = false;
};

struct SolverOptions {
    double cg_tolerance = 1e-12;
    int cg_max_iter_factor = 10;  // max iterations = factor * N
};

/// Solve for all coefficient columns with one sparse Cholesky factorization,
/// falling back to conjugate gradients if the factorization fails.
inline CoefficientBlock solve_coefficients(const Gramian& gramian, SolveMode mode,
                                           double lambda_reg = 0.0,
                                           const SolverOptions& opts = {}) {
    const int n = static_cast<int>(gramian.M.rows());
    Eigen::SparseMatrix<double> M = gramian.M;
    if (mode == SolveMode::penalized_ls && lambda_reg != 0.0) {
        Eigen::SparseMatrix<double> id(n, n);
        id.setIdentity();
        M = M + lambda_reg * id;
    }

    CoefficientBlock block;
    block.level = gramian.level;
    block.mode = mode;
    block.lambda_reg = (mode == SolveMode::penalized_ls) ? lambda_reg : 0.0;

    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(M);
    if (llt.info() == Eigen::Success) {
        block.A = llt.solve(Eigen::MatrixXd::Identity(n, n));
    } else {
        Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg(M);
        cg.setTolerance(opts.cg_tolerance);
        cg.setMaxIterations(static_cast<Eigen::Index>(opts.cg_max_iter_factor) * n);
        block.A = cg.solve(Eigen::MatrixXd::Identity(n, n));
        block.used_fallback = true;
        if (cg.info() != Eigen::Success)
            throw NumericalError("solve_coefficients: factorization and CG both failed on level " +
                                 std::to_string(gramian.level) + " (n=" + std::to_string(n) +
                                 ", estimated residual " + std::to_string(cg.error()) + ")");
    }
    block.residual = (M * block.A - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
    return block;
}

/// chi_{i,k}(x) = alpha_{i,k}^T r_i(x), via the sparse evaluation vector.
inline double eval_lagrange(const CoefficientBlock& block, int k, const SparseEvalVector& r) {
    if (k < 0 || k >= block.A.cols()) throw ContractError("eval_lagrange: index out of range");
    double s = 0.0;
    for (const auto& [idx, v] : r.entries) s += block.A(idx, k) * v;
    return s;
}

/// All Lagrange values at once: (A^T r)_k for every k.
inline Eigen::VectorXd eval_lagrange_all(const CoefficientBlock& block, const SparseEvalVector& r) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(block.A.cols());
    for (const auto& [idx, v] : r.entries) out += v * block.A.row(idx).transpose();
    return out;
}

}  // namespace tpml
