#pragma once

#include <Eigen/Dense>

#include <vector>

#include "tpml/errors.hpp"
#include "tpml/lagrange.hpp"
#include "tpml/sites.hpp"

namespace tpml {

/// Upper-triangular store of matrices indexed by level pairs (m, p) with
/// 1 <= m <= p <= L.
class LevelPairStore {
public:
    LevelPairStore() = default;
    explicit LevelPairStore(int L) : L_(L), mats_(static_cast<std::size_t>(L) * L) {}

    int depth() const { return L_; }
    Eigen::MatrixXd& at(int m, int p) { return mats_[idx(m, p)]; }
    const Eigen::MatrixXd& at(int m, int p) const { return mats_[idx(m, p)]; }

private:
    std::size_t idx(int m, int p) const {
        if (m < 1 || p < m || p > L_) throw ContractError("LevelPairStore: bad level pair");
        return static_cast<std::size_t>(m - 1) * L_ + (p - 1);
    }
    int L_ = 0;
    std::vector<Eigen::MatrixXd> mats_;
};

/// Transfer matrix B_{a,b} = sum_k r_a(x_{b,k}) alpha_{b,k}^T, the single
/// consecutive-level factor of the P_u products.
inline Eigen::MatrixXd compute_transfer(int a, int b, const DirectionHierarchy& hierarchy,
                                        const std::vector<CoefficientBlock>& coeffs) {
    if (!(1 <= a && a < b && b <= hierarchy.depth()))
        throw ContractError("compute_transfer: need 1 <= a < b <= depth");
    const auto& sites_b = hierarchy.level(b).points;
    const int na = static_cast<int>(hierarchy.level(a).points.size());
    const int nb = static_cast<int>(sites_b.size());
    // B = R * A_b with R(:,k) = r_a(x_{b,k}) sparse
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(na, nb);
    const auto& Ab = coeffs[b - 1].A;
    for (int k = 0; k < nb; ++k) {
        const SparseEvalVector r = hierarchy.r_vector(a, sites_b[k]);
        for (const auto& [p, v] : r.entries) B.row(p) += v * Ab.col(k).transpose();
    }
    return B;
}

/// All consecutive and skipping transfers B_{a,b} for 1 <= a < b <= L.
inline LevelPairStore compute_all_transfers(const DirectionHierarchy& hierarchy,
                                            const std::vector<CoefficientBlock>& coeffs,
                                            int L) {
    LevelPairStore store(L);
    for (int a = 1; a <= L; ++a)
        for (int b = a + 1; b <= L; ++b) store.at(a, b) = compute_transfer(a, b, hierarchy, coeffs);
    return store;
}

/// P_u = B_{u1,u2} * B_{u2,u3} * ... ; identity for singletons.
inline Eigen::MatrixXd compute_P(const std::vector<int>& u, const LevelPairStore& transfers,
                                 const std::vector<int>& level_sizes) {
    if (u.empty()) throw ContractError("compute_P: empty ordered set");
    for (std::size_t i = 1; i < u.size(); ++i)
        if (u[i] <= u[i - 1]) throw ContractError("compute_P: set is not strictly increasing");
    const int n1 = level_sizes[u.front() - 1];
    Eigen::MatrixXd P = Eigen::MatrixXd::Identity(n1, n1);
    for (std::size_t i = 1; i < u.size(); ++i) P = P * transfers.at(u[i - 1], u[i]);
    return P;
}

/// Summed blocks S_{m,p} = sum over ordered subsets with first element m and
/// last element p of (-1)^{#u} P_u, computed by the linear recurrence
/// S_{p,p} = -I, S_{m,p} = -sum_{m<q<=p} B_{m,q} S_{q,p}.
inline LevelPairStore compute_S_blocks(int L, const LevelPairStore& transfers,
                                       const std::vector<int>& level_sizes) {
    LevelPairStore S(L);
    for (int p = L; p >= 1; --p) {
        S.at(p, p) = -Eigen::MatrixXd::Identity(level_sizes[p - 1], level_sizes[p - 1]);
        for (int m = p - 1; m >= 1; --m) {
            Eigen::MatrixXd acc =
                Eigen::MatrixXd::Zero(level_sizes[m - 1], level_sizes[p - 1]);
            for (int q = m + 1; q <= p; ++q) acc.noalias() += transfers.at(m, q) * S.at(q, p);
            S.at(m, p) = -acc;
        }
    }
    return S;
}

/// Everything the per-direction operator needs after fitting: coefficient
/// blocks, transfers, S blocks, and the evaluation-point-independent products
/// W_{m,p} = A_m^T S_{m,p}.
struct DirectionOperator {
    const DirectionHierarchy* hierarchy = nullptr;
    std::vector<CoefficientBlock> coeffs;  // per level 1..L
    std::vector<int> level_sizes;
    LevelPairStore transfers;
    LevelPairStore S;
    LevelPairStore W;  // A_m^T * S_{m,p}
    int depth = 0;

    static DirectionOperator fit(const DirectionHierarchy& h, SolveMode mode,
                                 const std::vector<double>& lambda_reg, int L,
                                 const SolverOptions& opts = {}) {
        DirectionOperator op;
        op.hierarchy = &h;
        op.depth = L;
        for (int i = 1; i <= L; ++i) {
            Gramian g = assemble_gramian(h.level(i), h.kernel, i);
            const double reg = (mode == SolveMode::penalized_ls && !lambda_reg.empty())
                                   ? lambda_reg[std::min<std::size_t>(i - 1, lambda_reg.size() - 1)]
                                   : 0.0;
            op.coeffs.push_back(solve_coefficients(g, mode, reg, opts));
            op.level_sizes.push_back(static_cast<int>(h.level(i).points.size()));
        }
        op.transfers = compute_all_transfers(h, op.coeffs, L);
        op.S = compute_S_blocks(L, op.transfers, op.level_sizes);
        op.W = LevelPairStore(L);
        for (int m = 1; m <= L; ++m)
            for (int p = m; p <= L; ++p)
                op.W.at(m, p) = op.coeffs[m - 1].A.transpose() * op.S.at(m, p);
        return op;
    }

    SparseEvalVector r_vector(int level, std::span<const double> x) const {
        return hierarchy->r_vector(level, x);
    }
};

/// A^T S r accumulation of the innermost combination sum: the vector whose
/// k-th entry is sum_{p=u1}^{lam} (xi_{u1,p}(x))_k. For lam == u1 in
/// interpolation mode this is minus the Lagrange evaluation vector.
inline Eigen::VectorXd xi_row(const DirectionOperator& op, int u1, int lam,
                              std::span<const double> x) {
    if (u1 < 1 || u1 > lam || lam > op.depth) throw ContractError("xi_row: bad level range");
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(op.level_sizes[u1 - 1]);
    for (int p = u1; p <= lam; ++p) {
        const SparseEvalVector r = op.r_vector(p, x);
        for (const auto& [idx, v] : r.entries) acc += v * op.W.at(u1, p).col(idx);
    }
    return acc;
}

/// Direction-wise multilevel operator A_L(f)(x) as the signed sum over
/// ordered level subsets, each combined operator evaluated through its
/// alpha^T P_u r form. `samples[i-1]` holds f at the level-i sites.
inline double multilevel_apply(const DirectionOperator& op,
                               const std::vector<Eigen::VectorXd>& samples,
                               std::span<const double> x, int L) {
    if (L < 1 || L > op.depth) throw ContractError("multilevel_apply: bad level");
    for (int i = 1; i <= L; ++i)
        if (samples[i - 1].size() != op.level_sizes[i - 1])
            throw DataError("multilevel_apply: missing samples on level " + std::to_string(i) +
                            " (have " + std::to_string(samples[i - 1].size()) + ", need " +
                            std::to_string(op.level_sizes[i - 1]) + ")");

    double total = 0.0;
    std::vector<int> u;
    for (unsigned mask = 1; mask < (1u << L); ++mask) {
        u.clear();
        for (int i = 1; i <= L; ++i)
            if (mask & (1u << (i - 1))) u.push_back(i);
        const Eigen::MatrixXd P = compute_P(u, op.transfers, op.level_sizes);
        const SparseEvalVector r = op.r_vector(u.back(), x);
        Eigen::VectorXd rv = Eigen::VectorXd::Zero(op.level_sizes[u.back() - 1]);
        for (const auto& [idx, v] : r.entries) rv[idx] = v;
        const double term =
            samples[u.front() - 1].dot(op.coeffs[u.front() - 1].A.transpose() * (P * rv));
        total += (u.size() % 2 == 1 ? 1.0 : -1.0) * term;
    }
    return total;
}

/// Tensorizable weight function of one sparse-grid point component:
/// A_{{u(y),...,L}} chi_{L,k(y,L)} materialized as one coefficient vector per
/// level, so evaluation is sum_p coeffs[p] . r_p(x).
struct NodalWeightFunction {
    int first_level = 1;   // u(y)
    int finest_index = 0;  // k(y, L)
    std::vector<Eigen::VectorXd> coeffs;  // levels first_level..L

    double eval(const DirectionOperator& op, std::span<const double> x, int up_to) const {
        double s = 0.0;
        for (int p = first_level; p <= up_to; ++p) {
            const SparseEvalVector r = op.r_vector(p, x);
            const auto& c = coeffs[p - first_level];
            for (const auto& [idx, v] : r.entries) s += c[idx] * v;
        }
        return s;
    }
};

/// Nodal weight functions for every point of X_L of a nested hierarchy,
/// through the S-block recurrence: the level-p coefficient vector is
/// -sum_{u1=u(y)}^{p} S_{u1,p}^T alpha_{u1,k(y,u1)}. The result is indexed by
/// the point's position in X_L.
inline std::vector<NodalWeightFunction> nodal_weights(const DirectionOperator& op, int L) {
    const DirectionHierarchy& h = *op.hierarchy;
    if (!h.nested)
        throw CapabilityError("nodal_weights: hierarchy is not nested");

    // positions of each X_L point across the coarser levels
    std::vector<PointIndexMap> maps;
    for (int i = 1; i < L; ++i) maps.emplace_back(h.level(i).points);
    const auto& sites_L = h.level(L).points;

    std::vector<NodalWeightFunction> out(sites_L.size());
    for (std::size_t t = 0; t < sites_L.size(); ++t) {
        std::vector<int> pos(L, -1);
        pos[L - 1] = static_cast<int>(t);
        int first = L;
        for (int i = 1; i < L; ++i) {
            pos[i - 1] = maps[i - 1].find(sites_L[t]);
            if (pos[i - 1] >= 0) first = std::min(first, i);
        }
        NodalWeightFunction w;
        w.first_level = first;
        w.finest_index = static_cast<int>(t);
        for (int p = first; p <= L; ++p) {
            Eigen::VectorXd c = Eigen::VectorXd::Zero(op.level_sizes[p - 1]);
            for (int u1 = first; u1 <= p; ++u1)
                c.noalias() -= op.S.at(u1, p).transpose() * op.coeffs[u1 - 1].A.col(pos[u1 - 1]);
            w.coeffs.push_back(std::move(c));
        }
        out[t] = std::move(w);
    }
    return out;
}

}  // namespace tpml
