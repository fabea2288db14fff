#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <unordered_map>
#include <vector>

#include "tpml/point_set.hpp"

namespace tpml {

/// Fixed-radius neighbor queries over a static point set, backed by a uniform
/// grid hash. Results are exact: every candidate is distance-checked, and the
/// cutoff is strict (dist < radius).
class RadiusSearch {
public:
    // owns a copy of the points so the index stays valid when the original
    // set is moved
    RadiusSearch(const PointSet& points, double cell_size)
        : points_(points), cell_(cell_size > 0 ? cell_size : 1.0) {
        for (std::size_t i = 0; i < points_.size(); ++i)
            cells_[cell_key(points_[i])].push_back(static_cast<int>(i));
    }

    /// Indices of all points with distance(x, p) < radius, ascending.
    void query(std::span<const double> x, double radius, std::vector<int>& out) const {
        out.clear();
        const int dim = points_.dim();
        const int reach = static_cast<int>(std::ceil(radius / cell_));
        std::vector<int64_t> base(dim), offset(dim, -reach);
        for (int j = 0; j < dim; ++j) base[j] = cell_coord(x[j]);

        const double r2 = radius * radius;
        // walk the (2*reach+1)^dim block of cells around x
        for (;;) {
            std::vector<int64_t> cc(dim);
            for (int j = 0; j < dim; ++j) cc[j] = base[j] + offset[j];
            auto it = cells_.find(hash_cell(cc));
            if (it != cells_.end()) {
                for (int idx : it->second)
                    if (squared_distance(x, points_[idx]) < r2) out.push_back(idx);
            }
            int j = 0;
            while (j < dim && ++offset[j] > reach) offset[j++] = -reach;
            if (j == dim) break;
        }
        std::sort(out.begin(), out.end());
    }

    std::vector<int> query(std::span<const double> x, double radius) const {
        std::vector<int> out;
        query(x, radius, out);
        return out;
    }

    /// Distance from x to its nearest point distinct from index `exclude`
    /// (pass -1 to consider all points). Expanding-radius search.
    double nearest_distance(std::span<const double> x, int exclude = -1) const {
        double r = cell_;
        std::vector<int> hits;
        for (;;) {
            query(x, r, hits);
            double best = std::numeric_limits<double>::infinity();
            for (int idx : hits) {
                if (idx == exclude) continue;
                best = std::min(best, distance(x, points_[idx]));
            }
            if (best < std::numeric_limits<double>::infinity()) return best;
            if (hits.size() >= points_.size() && points_.size() > (exclude >= 0 ? 1u : 0u))
                return best;  // all points excluded
            r *= 2.0;
        }
    }

private:
    int64_t cell_coord(double v) const { return static_cast<int64_t>(std::floor(v / cell_)); }

    uint64_t cell_key(std::span<const double> p) const {
        std::vector<int64_t> cc(p.size());
        for (std::size_t j = 0; j < p.size(); ++j) cc[j] = cell_coord(p[j]);
        return hash_cell(cc);
    }

    static uint64_t hash_cell(const std::vector<int64_t>& cc) {
        uint64_t h = 1469598103934665603ull;
        for (int64_t c : cc) {
            h ^= static_cast<uint64_t>(c);
            h *= 1099511628211ull;
        }
        return h;
    }

    PointSet points_;
    double cell_;
    std::unordered_map<uint64_t, std::vector<int>> cells_;
};

}  // namespace tpml
