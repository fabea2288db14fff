#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "tpml/errors.hpp"
#include "tpml/neighbor_search.hpp"
#include "tpml/point_set.hpp"

namespace tpml {

/// Compactly supported Wendland kernels. The subscripts follow the usual
/// phi_{d,k} naming; the positive-definiteness dimension bound is not
/// enforced here (phi_{1,1} and phi_{1,2} are PD up to dimension 3,
/// phi_{3,1} up to dimension 5).
enum class KernelFamily {
    wendland_1_1,  // (1-r)^3_+ (3r+1)
    wendland_1_2,  // (1-r)^5_+ (8r^2+5r+1)
    wendland_3_1,  // (1-r)^4_+ (4r+1)
};

inline std::string to_string(KernelFamily f) {
    switch (f) {
        case KernelFamily::wendland_1_1: return "wendland_1_1";
        case KernelFamily::wendland_1_2: return "wendland_1_2";
        case KernelFamily::wendland_3_1: return "wendland_3_1";
    }
    return "?";
}

inline double eval_kernel(KernelFamily family, double r) {
    if (r < 0.0) throw ContractError("eval_kernel: negative radius");
    if (r >= 1.0) return 0.0;
    const double t = 1.0 - r;
    switch (family) {
        case KernelFamily::wendland_1_1: return t * t * t * (3.0 * r + 1.0);
        case KernelFamily::wendland_1_2: {
            const double t2 = t * t;
            return t2 * t2 * t * ((8.0 * r + 5.0) * r + 1.0);
        }
        case KernelFamily::wendland_3_1: {
            const double t2 = t * t;
            return t2 * t2 * (4.0 * r + 1.0);
        }
    }
    return 0.0;
}

/// Kernel scaled to support radius epsilon: value(x,y) = phi(|x-y| / epsilon).
struct ScaledKernel {
    KernelFamily family;
    double epsilon;

    double at_distance(double dist) const {
        return dist >= epsilon ? 0.0 : eval_kernel(family, dist / epsilon);
    }
    double value(std::span<const double> x, std::span<const double> y) const {
        return at_distance(distance(x, y));
    }
};

/// Sparse evaluation vector r_i(x): only the components whose site lies
/// strictly inside the support radius are stored. Indices are 0-based and
/// strictly increasing.
struct SparseEvalVector {
    int length = 0;
    std::vector<std::pair<int, double>> entries;
};

/// Site counts above this use the per-level grid index instead of a full scan.
inline constexpr std::size_t kRadiusScanThreshold = 64;

/// Evaluate r_i(x) over a site set. `index` may be null, in which case a
/// full scan is used regardless of size.
inline SparseEvalVector eval_r_vector(const PointSet& sites, const RadiusSearch* index,
                                      const ScaledKernel& kernel, std::span<const double> x) {
    if (static_cast<int>(x.size()) != sites.dim())
        throw ShapeError("eval_r_vector: point dimension " + std::to_string(x.size()) +
                         " does not match site dimension " + std::to_string(sites.dim()));
    SparseEvalVector r;
    r.length = static_cast<int>(sites.size());
    if (index != nullptr) {
        for (int k : index->query(x, kernel.epsilon)) {
            const double v = kernel.value(x, sites[k]);
            if (v != 0.0) r.entries.emplace_back(k, v);
        }
    } else {
        for (std::size_t k = 0; k < sites.size(); ++k) {
            const double d = distance(x, sites[k]);
            if (d < kernel.epsilon) {
                const double v = kernel.at_distance(d);
                if (v != 0.0) r.entries.emplace_back(static_cast<int>(k), v);
            }
        }
    }
    return r;
}

}  // namespace tpml
