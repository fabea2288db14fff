#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "tpml/errors.hpp"
#include "tpml/index_sets.hpp"
#include "tpml/point_set.hpp"
#include "tpml/sites.hpp"

namespace tpml {

/// The sparse grid H_{I_omega(ell,d)}: union of the tensor grids over the
/// index set, deduplicated by exact coordinate identity. For nested
/// hierarchies each point carries its componentwise first-occurrence levels
/// and the component's position in the top level used by the operator.
struct SparseGrid {
    int d = 0;
    std::vector<int> comp_dims;                  // n_j per direction
    std::vector<int> tops;                       // top level per direction
    PointSet points;                             // dim = sum n_j
    bool annotated = false;
    std::vector<std::vector<int>> first_levels;  // u_j(x) per point (annotated only)
    std::vector<std::vector<int>> top_index;     // component index in X^(j)_{tops[j]}

    std::size_t size() const { return points.size(); }
};

/// Union over lambda in I_omega(ell, d) of the per-direction tensor grids.
/// `annotate` requires all hierarchies nested. `tops` bounds the levels the
/// annotation refers to; it defaults to the per-direction lambda_max.
inline SparseGrid sparse_grid_points(const std::vector<DirectionHierarchy>& hierarchies,
                                     const WeightVector& omega, double ell,
                                     bool annotate = true, std::vector<int> tops = {}) {
    const int d = omega.d();
    if (static_cast<int>(hierarchies.size()) != d)
        throw ShapeError("sparse_grid_points: direction count mismatch");
    if (tops.empty()) {
        tops.resize(d);
        for (int j = 0; j < d; ++j) tops[j] = lambda_max(omega, ell, j);
    }
    for (int j = 0; j < d; ++j)
        if (tops[j] > hierarchies[j].depth())
            throw ShapeError("sparse_grid_points: hierarchy " + std::to_string(j + 1) +
                             " has depth " + std::to_string(hierarchies[j].depth()) +
                             " but needs level " + std::to_string(tops[j]));
    if (annotate)
        for (const auto& h : hierarchies)
            if (!h.nested)
                throw CapabilityError("sparse_grid_points: level annotations need nested hierarchies");

    SparseGrid grid;
    grid.d = d;
    grid.tops = tops;
    int total_dim = 0;
    for (const auto& h : hierarchies) {
        grid.comp_dims.push_back(h.dim());
        total_dim += h.dim();
    }
    grid.points = PointSet(total_dim);
    grid.annotated = annotate;

    // per direction, per level up to tops[j]: exact coordinate lookup
    std::vector<std::vector<PointIndexMap>> level_maps(d);
    if (annotate)
        for (int j = 0; j < d; ++j)
            for (int i = 1; i <= tops[j]; ++i)
                level_maps[j].emplace_back(hierarchies[j].level(i).points);

    std::unordered_map<std::string, int> seen;
    std::vector<double> buf(total_dim);
    std::vector<int> comp(d);

    for (const auto& lambda : enumerate_index_set(omega, ell)) {
        for (int j = 0; j < d; ++j) comp[j] = 0;
        // walk the tensor grid X_{lambda_1} x ... x X_{lambda_d}
        for (;;) {
            int off = 0;
            for (int j = 0; j < d; ++j) {
                auto p = hierarchies[j].level(lambda[j]).points[comp[j]];
                std::copy(p.begin(), p.end(), buf.begin() + off);
                off += grid.comp_dims[j];
            }
            std::span<const double> pt(buf.data(), buf.size());
            auto [it, inserted] = seen.emplace(coord_key(pt), static_cast<int>(grid.points.size()));
            if (inserted) {
                grid.points.add(pt);
                if (annotate) {
                    std::vector<int> u(d), top(d);
                    int o = 0;
                    for (int j = 0; j < d; ++j) {
                        std::span<const double> c(buf.data() + o,
                                                  static_cast<std::size_t>(grid.comp_dims[j]));
                        int first = -1, in_top = -1;
                        for (int i = 1; i <= tops[j]; ++i) {
                            const int pos = level_maps[j][i - 1].find(c);
                            if (pos >= 0 && first < 0) first = i;
                            if (i == tops[j]) in_top = pos;
                        }
                        if (first < 0 || in_top < 0)
                            throw DataError("sparse_grid_points: component missing from top level");
                        u[j] = first;
                        top[j] = in_top;
                        o += grid.comp_dims[j];
                    }
                    grid.first_levels.push_back(std::move(u));
                    grid.top_index.push_back(std::move(top));
                }
            }
            int j = d - 1;
            while (j >= 0 &&
                   ++comp[j] == static_cast<int>(hierarchies[j].level(lambda[j]).points.size()))
                comp[j--] = 0;
            if (j < 0) break;
        }
    }
    return grid;
}

}  // namespace tpml
