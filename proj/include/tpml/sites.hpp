#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "tpml/errors.hpp"
#include "tpml/kernels.hpp"
#include "tpml/neighbor_search.hpp"
#include "tpml/point_set.hpp"

namespace tpml {

/// One level of a direction hierarchy: the sites, their separation distance q
/// and the support radius epsilon = c * q. Larger levels carry a grid index
/// for fixed-radius queries.
struct LevelSites {
    PointSet points;
    double q = 0.0;
    double epsilon = 0.0;
    std::shared_ptr<const RadiusSearch> index;  // null for small levels

    void build_index() {
        if (points.size() > kRadiusScanThreshold && epsilon > 0.0)
            index = std::make_shared<RadiusSearch>(points, epsilon);
    }

    SparseEvalVector r_vector(KernelFamily family, std::span<const double> x) const {
        return eval_r_vector(points, index.get(), ScaledKernel{family, epsilon}, x);
    }
};

/// Separation distance q = half the minimal pairwise distance.
inline double separation_distance(const PointSet& points) {
    const std::size_t n = points.size();
    if (n < 2) throw ContractError("separation_distance: need at least 2 points");
    double min_d2 = std::numeric_limits<double>::infinity();
    if (n <= 512) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                min_d2 = std::min(min_d2, squared_distance(points[i], points[j]));
    } else {
        // grid-accelerated nearest neighbor per point
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (double v : points.data()) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        const double extent = std::max(hi - lo, 1e-300);
        const double cell = extent / std::max(1.0, std::pow(static_cast<double>(n), 1.0 / points.dim()));
        RadiusSearch search(points, cell);
        for (std::size_t i = 0; i < n; ++i) {
            const double d = search.nearest_distance(points[i], static_cast<int>(i));
            min_d2 = std::min(min_d2, d * d);
        }
    }
    if (min_d2 == 0.0) throw DataError("separation_distance: duplicate points");
    return 0.5 * std::sqrt(min_d2);
}

/// Per-direction sequence of site sets. When `nested`, every level is an
/// exact-coordinate subset of the next and the first-occurrence maps are
/// available for the finest-level points.
struct DirectionHierarchy {
    std::vector<LevelSites> levels;  // levels[i-1] is level i
    bool nested = false;
    KernelFamily kernel = KernelFamily::wendland_1_1;
    double coupling = 4.0;  // epsilon_i = coupling * q_i
    bool thinning_degraded = false;  // a thinning level missed its target separation

    // nested only; indexed by position in the finest level
    std::vector<int> first_level;                 // u(x), 1-based
    std::vector<std::vector<int>> level_position; // k(x,i) for i = 1..L, -1 where absent

    int dim() const { return levels.empty() ? 0 : levels.front().points.dim(); }
    int depth() const { return static_cast<int>(levels.size()); }
    const LevelSites& level(int i) const { return levels[i - 1]; }  // 1-based

    SparseEvalVector r_vector(int i, std::span<const double> x) const {
        return level(i).r_vector(kernel, x);
    }
};

/// Verify X_1 subset X_2 subset ... by exact coordinate equality and fill the
/// first-occurrence maps u(x) and k(x, i).
inline void first_occurrence_maps(DirectionHierarchy& h) {
    if (!h.nested) throw CapabilityError("first_occurrence_maps: hierarchy is not nested");
    const int L = h.depth();
    std::vector<PointIndexMap> maps;
    maps.reserve(L);
    for (int i = 1; i <= L; ++i) maps.emplace_back(h.level(i).points);

    for (int i = 1; i < L; ++i) {
        const auto& pts = h.level(i).points;
        for (std::size_t k = 0; k < pts.size(); ++k)
            if (maps[i].find(pts[k]) < 0)
                throw DataError("hierarchy declared nested but level " + std::to_string(i) +
                                " point " + std::to_string(k) + " is missing from level " +
                                std::to_string(i + 1));
    }

    const auto& finest = h.level(L).points;
    h.first_level.assign(finest.size(), L);
    h.level_position.assign(finest.size(), std::vector<int>(L, -1));
    for (std::size_t t = 0; t < finest.size(); ++t) {
        for (int i = 1; i <= L; ++i) {
            const int pos = maps[i - 1].find(finest[t]);
            h.level_position[t][i - 1] = pos;
            if (pos >= 0) h.first_level[t] = std::min(h.first_level[t], i);
        }
    }
}

/// Equidistant 1D sites on [a, b] for level i: 2^i + 1 points including both
/// endpoints. Coordinates are bitwise nested across levels.
inline LevelSites equidistant_1d(double a, double b, int level, double coupling) {
    if (!(a < b)) throw ContractError("equidistant_1d: need a < b");
    if (level < 1) throw ContractError("equidistant_1d: level must be >= 1");
    const int n = (1 << level) + 1;
    const double h = (b - a) / (1 << level);
    LevelSites ls;
    ls.points = PointSet(1);
    for (int k = 0; k < n; ++k) {
        const double x = (k == n - 1) ? b : a + k * h;
        ls.points.add({x});
    }
    ls.q = 0.5 * h;
    ls.epsilon = coupling * ls.q;
    ls.build_index();
    return ls;
}

inline DirectionHierarchy equidistant_hierarchy(double a, double b, int max_level,
                                                KernelFamily family, double coupling) {
    DirectionHierarchy h;
    h.kernel = family;
    h.coupling = coupling;
    h.nested = true;
    for (int i = 1; i <= max_level; ++i) h.levels.push_back(equidistant_1d(a, b, i, coupling));
    first_occurrence_maps(h);
    return h;
}

namespace detail {

/// Greedy farthest-point (maximin) ordering. Returns the permutation and the
/// insertion distances d_k = dist(p_k, {p_1..p_{k-1}}); d_k is non-increasing
/// and the minimal pairwise distance of the length-m prefix equals d_m.
inline void maximin_order(const PointSet& cloud, std::vector<int>& order,
                          std::vector<double>& insert_dist) {
    const std::size_t n = cloud.size();
    const int dim = cloud.dim();
    // deterministic seed: point closest to the centroid
    std::vector<double> centroid(dim, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (int j = 0; j < dim; ++j) centroid[j] += cloud[i][j];
    for (int j = 0; j < dim; ++j) centroid[j] /= static_cast<double>(n);
    std::size_t seed = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const double d2 = squared_distance(cloud[i], {centroid.data(), centroid.size()});
        if (d2 < best) {
            best = d2;
            seed = i;
        }
    }

    order.clear();
    insert_dist.clear();
    order.reserve(n);
    insert_dist.reserve(n);
    std::vector<double> dist2(n, std::numeric_limits<double>::infinity());
    std::vector<char> taken(n, 0);
    std::size_t cur = seed;
    order.push_back(static_cast<int>(cur));
    insert_dist.push_back(std::numeric_limits<double>::infinity());
    taken[cur] = 1;
    for (std::size_t step = 1; step < n; ++step) {
        std::size_t far = n;
        double far_d2 = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (taken[i]) continue;
            dist2[i] = std::min(dist2[i], squared_distance(cloud[i], cloud[cur]));
            if (dist2[i] > far_d2) {
                far_d2 = dist2[i];
                far = i;
            }
        }
        cur = far;
        taken[cur] = 1;
        order.push_back(static_cast<int>(cur));
        insert_dist.push_back(std::sqrt(far_d2));
    }
}

}  // namespace detail

/// Build a nested hierarchy from a scattered cloud by maximin thinning.
/// X_L is the full cloud in maximin order; coarser levels are the longest
/// prefixes whose separation still meets the level's target
/// q_i = q_L / ratio^(L-i). Unreachable targets degrade to the best prefix
/// and set `thinning_degraded`.
inline DirectionHierarchy thin_to_hierarchy(const PointSet& cloud, int num_levels,
                                            KernelFamily family, double coupling,
                                            double ratio = 0.5) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw ContractError("thin_to_hierarchy: ratio must be in (0,1)");
    if (num_levels < 1) throw ContractError("thin_to_hierarchy: need at least one level");
    if (cloud.size() < 2) throw DataError("thin_to_hierarchy: cloud too small");

    std::vector<int> order;
    std::vector<double> insert_dist;
    detail::maximin_order(cloud, order, insert_dist);
    if (insert_dist.back() == 0.0) throw DataError("thin_to_hierarchy: duplicate points in cloud");

    const std::size_t n = cloud.size();
    const double q_full = 0.5 * insert_dist.back();

    DirectionHierarchy h;
    h.kernel = family;
    h.coupling = coupling;
    h.nested = true;
    for (int i = 1; i <= num_levels; ++i) {
        LevelSites ls;
        ls.points = PointSet(cloud.dim());
        if (i == num_levels) {
            for (std::size_t m = 0; m < n; ++m) ls.points.add(cloud[order[m]]);
            ls.q = q_full;
        } else {
            const double target = q_full / std::pow(ratio, num_levels - i);
            // longest prefix with separation 0.5 * insert_dist[m] >= target
            std::size_t len = 1;
            while (len < n && 0.5 * insert_dist[len] >= target) ++len;
            for (std::size_t m = 0; m < len; ++m) ls.points.add(cloud[order[m]]);
            // a singleton prefix cannot witness its own separation; fall back
            // to the target so epsilon stays finite
            ls.q = (len >= 2) ? 0.5 * insert_dist[len - 1] : target;
            if (len < 2 || ls.q < target) h.thinning_degraded = true;
        }
        ls.epsilon = coupling * ls.q;
        ls.build_index();
        h.levels.push_back(std::move(ls));
    }
    first_occurrence_maps(h);
    return h;
}

}  // namespace tpml
