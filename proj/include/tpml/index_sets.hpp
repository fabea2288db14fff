#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "tpml/errors.hpp"

namespace tpml {

/// Per-direction importance weights for the anisotropic index set. Weights are
/// kept in the user's direction order; `ascending` only records whether the
/// ordering assumption of the error theory holds.
struct WeightVector {
    std::vector<double> omega;
    double omega_min = 0.0;
    bool ascending = true;

    static WeightVector make(std::vector<double> w) {
        if (w.empty()) throw ContractError("WeightVector: empty");
        for (double v : w)
            if (!(v > 0.0)) throw ContractError("WeightVector: weights must be positive");
        WeightVector out;
        out.omega_min = *std::min_element(w.begin(), w.end());
        out.ascending = std::is_sorted(w.begin(), w.end());
        out.omega = std::move(w);
        return out;
    }

    int d() const { return static_cast<int>(omega.size()); }
    double norm1() const { return std::accumulate(omega.begin(), omega.end(), 0.0); }
};

/// 1-based multi-index.
using MultiIndex = std::vector<int>;

inline bool index_set_contains(const WeightVector& w, double ell, const MultiIndex& lambda) {
    double s = 0.0;
    for (int j = 0; j < w.d(); ++j) s += (lambda[j] - 1) * w.omega[j];
    return s <= ell * w.omega_min;
}

/// Largest level in direction j (0-based j) present in I_omega(ell, d).
inline int lambda_max(const WeightVector& w, double ell, int j) {
    if (ell < 0) return 0;
    // consistent with the enumeration: largest m with (m-1)*omega_j <= ell*omega_min
    const double t = ell * w.omega_min;
    int m = 1;
    while (m * w.omega[j] <= t) ++m;
    return m;
}

namespace detail {
inline void enumerate_rec(const WeightVector& w, double budget, int j, MultiIndex& cur,
                          std::vector<MultiIndex>& out) {
    if (j == w.d()) {
        out.push_back(cur);
        return;
    }
    for (int lam = 1; (lam - 1) * w.omega[j] <= budget; ++lam) {
        cur[j] = lam;
        enumerate_rec(w, budget - (lam - 1) * w.omega[j], j + 1, cur, out);
    }
}
}  // namespace detail

/// All lambda in I_omega(ell, d), lexicographic. Empty when ell < 0.
inline std::vector<MultiIndex> enumerate_index_set(const WeightVector& w, double ell) {
    std::vector<MultiIndex> out;
    if (ell < 0) return out;
    MultiIndex cur(w.d(), 1);
    detail::enumerate_rec(w, ell * w.omega_min, 0, cur, out);
    return out;
}

/// The surface J_omega(ell, d) = I(ell) \ I(ell - |omega|_1 / omega_min).
/// The inner threshold is generally non-integer and is used as-is.
inline std::vector<MultiIndex> enumerate_surface(const WeightVector& w, double ell) {
    std::vector<MultiIndex> out;
    const double inner_ell = ell - w.norm1() / w.omega_min;
    for (auto& lam : enumerate_index_set(w, ell)) {
        if (inner_ell < 0 || !index_set_contains(w, inner_ell, lam)) out.push_back(std::move(lam));
    }
    return out;
}

/// One term of the combination-technique sum.
struct CombinationPair {
    MultiIndex lambda;        // in J_omega(ell, d)
    std::vector<int> beta;    // in {0,1}^d, lambda + beta in I_omega(ell, d)
    int sign;                 // (-1)^{|beta|_1}

    int beta_ones() const { return std::accumulate(beta.begin(), beta.end(), 0); }
};

/// All (lambda, beta) pairs of the Smolyak combination technique, ordered
/// lambda-lexicographic then beta-lexicographic.
inline std::vector<CombinationPair> combination_pairs(const WeightVector& w, double ell) {
    std::vector<CombinationPair> out;
    const int d = w.d();
    MultiIndex shifted(d);
    for (const auto& lam : enumerate_surface(w, ell)) {
        for (unsigned mask = 0; mask < (1u << d); ++mask) {
            int ones = 0;
            for (int j = 0; j < d; ++j) {
                const int b = (mask >> (d - 1 - j)) & 1;  // lexicographic in beta
                shifted[j] = lam[j] + b;
                ones += b;
            }
            if (index_set_contains(w, ell, shifted)) {
                std::vector<int> beta(d);
                for (int j = 0; j < d; ++j) beta[j] = (mask >> (d - 1 - j)) & 1;
                out.push_back({lam, std::move(beta), (ones % 2 == 0) ? 1 : -1});
            }
        }
    }
    return out;
}

}  // namespace tpml
