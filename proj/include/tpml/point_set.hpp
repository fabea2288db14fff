#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace tpml {

/// Flat storage for a list of points of fixed dimension.
class PointSet {
public:
    PointSet() = default;
    explicit PointSet(int dim) : dim_(dim) {}

    int dim() const { return dim_; }
    std::size_t size() const { return dim_ == 0 ? 0 : coords_.size() / dim_; }
    bool empty() const { return coords_.empty(); }

    std::span<const double> operator[](std::size_t i) const {
        return {coords_.data() + i * dim_, static_cast<std::size_t>(dim_)};
    }

    void add(std::span<const double> p) {
        coords_.insert(coords_.end(), p.begin(), p.end());
    }
    void add(std::initializer_list<double> p) {
        coords_.insert(coords_.end(), p.begin(), p.end());
    }

    const std::vector<double>& data() const { return coords_; }
    std::vector<double>& data() { return coords_; }

private:
    int dim_ = 0;
    std::vector<double> coords_;
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double distance(std::span<const double> a, std::span<const double> b) {
    return std::sqrt(squared_distance(a, b));
}

/// Byte-exact key for a coordinate tuple. Nestedness and sample lookup both
/// rely on exact identity, so no fuzzy matching anywhere.
inline std::string coord_key(std::span<const double> p) {
    std::string k(p.size() * sizeof(double), '\0');
    std::memcpy(k.data(), p.data(), k.size());
    return k;
}

/// Exact coordinate-tuple -> index map.
class PointIndexMap {
public:
    PointIndexMap() = default;
    explicit PointIndexMap(const PointSet& pts) {
        for (std::size_t i = 0; i < pts.size(); ++i)
            map_.emplace(coord_key(pts[i]), static_cast<int>(i));
    }

    void insert(std::span<const double> p, int idx) { map_.emplace(coord_key(p), idx); }

    /// Returns -1 if the point is not present.
    int find(std::span<const double> p) const {
        auto it = map_.find(coord_key(p));
        return it == map_.end() ? -1 : it->second;
    }

    std::size_t size() const { return map_.size(); }

private:
    std::unordered_map<std::string, int> map_;
};

}  // namespace tpml
