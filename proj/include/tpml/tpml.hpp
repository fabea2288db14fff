#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "tpml/errors.hpp"
#include "tpml/index_sets.hpp"
#include "tpml/multilevel.hpp"
#include "tpml/sparse_grid.hpp"

namespace tpml {

enum class Representation { naive, efficient, nodal };

inline std::string to_string(Representation r) {
    switch (r) {
        case Representation::naive: return "naive";
        case Representation::efficient: return "efficient";
        case Representation::nodal: return "nodal";
    }
    return "?";
}

struct DirectionConfig {
    DirectionHierarchy hierarchy;
    SolveMode mode = SolveMode::interpolation;
    std::vector<double> lambda_reg;  // per level, penalized mode only
};

struct TpmlConfig {
    std::vector<DirectionConfig> directions;
    WeightVector omega;
    int ell = 0;
    Representation representation = Representation::efficient;
    double cost_guard = 1e8;
    SolverOptions solver;

    int d() const { return static_cast<int>(directions.size()); }
    bool all_nested() const {
        for (const auto& dc : directions)
            if (!dc.hierarchy.nested) return false;
        return true;
    }
    std::vector<int> lambda_maxima() const {
        std::vector<int> out(d());
        for (int j = 0; j < d(); ++j) out[j] = lambda_max(omega, ell, j);
        return out;
    }
};

/// Function samples keyed by exact coordinate tuple. Reads are counted so the
/// data-access contracts of the evaluation paths can be checked.
class SampleTable {
public:
    SampleTable() : reads_(std::make_shared<std::atomic<long long>>(0)) {}

    void set(std::span<const double> point, double value) { map_[coord_key(point)] = value; }

    std::optional<double> get(std::span<const double> point) const {
        auto it = map_.find(coord_key(point));
        if (it == map_.end()) return std::nullopt;
        ++*reads_;
        return it->second;
    }

    double at(std::span<const double> point) const {
        auto v = get(point);
        if (!v)
            throw DataError("SampleTable: no sample for the requested point");
        return *v;
    }

    bool contains(std::span<const double> point) const { return map_.count(coord_key(point)) > 0; }
    std::size_t size() const { return map_.size(); }
    long long reads() const { return reads_->load(); }
    void reset_reads() const { reads_->store(0); }

private:
    std::unordered_map<std::string, double> map_;
    mutable std::shared_ptr<std::atomic<long long>> reads_;
};

namespace detail {

inline void check_config(const TpmlConfig& config) {
    if (config.directions.empty()) throw ConfigError("config: no directions");
    if (config.omega.d() != config.d())
        throw ConfigError("config: weight count does not match direction count");
    if (config.ell < 0) throw ConfigError("config: threshold must be nonnegative");
    const auto lm = config.lambda_maxima();
    for (int j = 0; j < config.d(); ++j)
        if (config.directions[j].hierarchy.depth() < lm[j])
            throw ConfigError("config: direction " + std::to_string(j + 1) + " provides " +
                              std::to_string(config.directions[j].hierarchy.depth()) +
                              " levels but lambda_max is " + std::to_string(lm[j]));
    if (config.representation == Representation::nodal && !config.all_nested())
        throw CapabilityError("config: nodal representation requires nested hierarchies");
}

/// Contract a row-major tensor with one vector per mode, last mode first.
inline double contract_tensor(const std::vector<double>& values,
                              const std::vector<const Eigen::VectorXd*>& vecs) {
    std::vector<double> buf = values;
    std::vector<double> next;
    for (int j = static_cast<int>(vecs.size()) - 1; j >= 0; --j) {
        const Eigen::VectorXd& v = *vecs[j];
        const std::size_t n = static_cast<std::size_t>(v.size());
        const std::size_t rows = buf.size() / n;
        next.assign(rows, 0.0);
        for (std::size_t i = 0; i < rows; ++i) {
            double s = 0.0;
            const double* row = buf.data() + i * n;
            for (std::size_t t = 0; t < n; ++t) s += row[t] * v[t];
            next[i] = s;
        }
        buf.swap(next);
    }
    return buf[0];
}

}  // namespace detail

/// The points where the target must be sampled: exactly the sparse grid.
inline SparseGrid required_samples(const TpmlConfig& config) {
    detail::check_config(config);
    std::vector<DirectionHierarchy> hs;
    for (const auto& dc : config.directions) hs.push_back(dc.hierarchy);
    return sparse_grid_points(hs, config.omega, config.ell, config.all_nested());
}

struct FitDiagnostics {
    struct LevelInfo {
        int direction, level, n;
        double q, epsilon, solve_residual;
        bool used_fallback;
    };
    std::vector<LevelInfo> levels;
    std::size_t grid_size = 0;
};

/// Dense f-value tensor over one tensor grid of the index set (row-major in
/// direction order).
struct SampleTensor {
    MultiIndex levels;
    std::vector<int> dims;
    std::vector<double> values;
};

/// A fitted tensor product multilevel model. Immutable after fit; evaluation
/// is pure up to the instrumentation counter.
struct Model {
    TpmlConfig config;
    Representation rep = Representation::efficient;
    std::vector<DirectionOperator> dirs;
    std::vector<int> lam_max;

    std::vector<MultiIndex> surface;       // J_omega(ell, d)
    std::vector<double> surface_weight;    // sum_beta (-1)^{|beta|_1 + d} per surface index

    // efficient representation
    std::vector<SampleTensor> tensors;     // one per lambda in I, lexicographic
    std::map<MultiIndex, int> tensor_of;   // lambda -> index into tensors

    // nodal representation
    SparseGrid grid;
    std::vector<double> f_values;          // aligned with grid.points
    std::vector<std::vector<NodalWeightFunction>> nodal;  // [direction][index in X_top]

    FitDiagnostics diagnostics;
    mutable std::shared_ptr<std::atomic<long long>> f_reads =
        std::make_shared<std::atomic<long long>>(0);

    int total_dim() const {
        int s = 0;
        for (const auto& dc : config.directions) s += dc.hierarchy.dim();
        return s;
    }
};

/// Offline phase: Gramian solves, transfers, S blocks, and the
/// representation-specific artifacts (sample tensors or nodal weights).
inline Model fit(const TpmlConfig& config, const SampleTable& samples) {
    detail::check_config(config);
    if (config.representation == Representation::naive)
        throw ConfigError("fit: the naive path evaluates directly from config and samples; "
                          "choose the efficient or nodal representation for fitting");

    Model model;
    model.config = config;
    model.rep = config.representation;
    model.lam_max = config.lambda_maxima();
    const int d = config.d();

    for (int j = 0; j < d; ++j) {
        const auto& dc = model.config.directions[j];
        model.dirs.push_back(DirectionOperator::fit(dc.hierarchy, dc.mode, dc.lambda_reg,
                                                    model.lam_max[j], config.solver));
        for (int i = 1; i <= model.lam_max[j]; ++i) {
            const auto& ls = dc.hierarchy.level(i);
            model.diagnostics.levels.push_back({j + 1, i, static_cast<int>(ls.points.size()),
                                                ls.q, ls.epsilon,
                                                model.dirs[j].coeffs[i - 1].residual,
                                                model.dirs[j].coeffs[i - 1].used_fallback});
        }
    }
    // the operators reference the hierarchies owned by model.config
    for (int j = 0; j < d; ++j) model.dirs[j].hierarchy = &model.config.directions[j].hierarchy;

    model.surface = enumerate_surface(config.omega, config.ell);
    model.surface_weight.assign(model.surface.size(), 0.0);
    {
        const auto pairs = combination_pairs(config.omega, config.ell);
        const double sd = (d % 2 == 0) ? 1.0 : -1.0;  // (-1)^d
        std::map<MultiIndex, int> pos;
        for (std::size_t s = 0; s < model.surface.size(); ++s) pos[model.surface[s]] = static_cast<int>(s);
        for (const auto& p : pairs) model.surface_weight[pos.at(p.lambda)] += sd * p.sign;
    }

    std::vector<DirectionHierarchy> hs;
    for (const auto& dc : model.config.directions) hs.push_back(dc.hierarchy);
    model.grid = sparse_grid_points(hs, config.omega, config.ell, config.all_nested());

    // completeness check before touching any representation artifacts
    std::vector<std::size_t> missing;
    for (std::size_t i = 0; i < model.grid.size(); ++i)
        if (!samples.contains(model.grid.points[i])) missing.push_back(i);
    if (!missing.empty()) {
        std::ostringstream os;
        os << "fit: " << missing.size() << " sparse-grid points have no sample (ids:";
        for (std::size_t i = 0; i < missing.size() && i < 10; ++i) os << ' ' << missing[i];
        if (missing.size() > 10) os << " ...";
        os << ")";
        throw DataError(os.str());
    }
    model.diagnostics.grid_size = model.grid.size();

    if (model.rep == Representation::efficient) {
        const auto index_set = enumerate_index_set(config.omega, config.ell);
        std::vector<double> buf(model.total_dim());
        for (const auto& lambda : index_set) {
            SampleTensor t;
            t.levels = lambda;
            std::size_t total = 1;
            for (int j = 0; j < d; ++j) {
                t.dims.push_back(static_cast<int>(hs[j].level(lambda[j]).points.size()));
                total *= t.dims.back();
            }
            t.values.reserve(total);
            std::vector<int> comp(d, 0);
            for (;;) {
                int off = 0;
                for (int j = 0; j < d; ++j) {
                    auto p = hs[j].level(lambda[j]).points[comp[j]];
                    std::copy(p.begin(), p.end(), buf.begin() + off);
                    off += hs[j].dim();
                }
                t.values.push_back(samples.at({buf.data(), buf.size()}));
                int j = d - 1;
                while (j >= 0 && ++comp[j] == t.dims[j]) comp[j--] = 0;
                if (j < 0) break;
            }
            model.tensor_of[lambda] = static_cast<int>(model.tensors.size());
            model.tensors.push_back(std::move(t));
        }
    } else {
        model.f_values.resize(model.grid.size());
        for (std::size_t i = 0; i < model.grid.size(); ++i)
            model.f_values[i] = samples.at(model.grid.points[i]);
        for (int j = 0; j < d; ++j)
            model.nodal.push_back(nodal_weights(model.dirs[j], model.lam_max[j]));
    }
    return model;
}

namespace detail {

inline void split_components(const Model& model, std::span<const double> x,
                             std::vector<std::span<const double>>& comps) {
    if (static_cast<int>(x.size()) != model.total_dim())
        throw ShapeError("eval: point has dimension " + std::to_string(x.size()) + ", expected " +
                         std::to_string(model.total_dim()));
    comps.clear();
    std::size_t off = 0;
    for (const auto& dc : model.config.directions) {
        comps.push_back(x.subspan(off, dc.hierarchy.dim()));
        off += dc.hierarchy.dim();
    }
}

}  // namespace detail

/// Evaluation via the precomputed representation: per-direction A^T S r
/// partial sums contracted against the cached sample tensors.
inline double eval_efficient(const Model& model, std::span<const double> x) {
    if (model.rep != Representation::efficient)
        throw CapabilityError("eval_efficient: model was fitted for " + to_string(model.rep));
    const int d = model.config.d();
    std::vector<std::span<const double>> comps;
    detail::split_components(model, x, comps);

    // xi[j][u1-1][lam-1] = A_{u1}^T sum_{p=u1}^{lam} S_{u1,p} r_p(x_j)
    std::vector<std::vector<std::vector<Eigen::VectorXd>>> xi(d);
    for (int j = 0; j < d; ++j) {
        const int L = model.lam_max[j];
        std::vector<SparseEvalVector> r(L);
        for (int p = 1; p <= L; ++p) r[p - 1] = model.dirs[j].r_vector(p, comps[j]);
        xi[j].resize(L);
        for (int u1 = 1; u1 <= L; ++u1) {
            Eigen::VectorXd acc = Eigen::VectorXd::Zero(model.dirs[j].level_sizes[u1 - 1]);
            xi[j][u1 - 1].resize(L);
            for (int lam = u1; lam <= L; ++lam) {
                for (const auto& [idx, v] : r[lam - 1].entries)
                    acc += v * model.dirs[j].W.at(u1, lam).col(idx);
                xi[j][u1 - 1][lam - 1] = acc;
            }
        }
    }

    double total = 0.0;
    std::vector<const Eigen::VectorXd*> vecs(d);
    std::vector<int> u1(d, 1);
    MultiIndex key(d);
    for (std::size_t s = 0; s < model.surface.size(); ++s) {
        const double w = model.surface_weight[s];
        if (w == 0.0) continue;
        const MultiIndex& lambda = model.surface[s];
        for (int j = 0; j < d; ++j) u1[j] = 1;
        for (;;) {
            for (int j = 0; j < d; ++j) {
                vecs[j] = &xi[j][u1[j] - 1][lambda[j] - 1];
                key[j] = u1[j];
            }
            const auto& tensor = model.tensors[model.tensor_of.at(key)];
            total += w * detail::contract_tensor(tensor.values, vecs);
            int j = d - 1;
            while (j >= 0 && ++u1[j] > lambda[j]) u1[j--] = 1;
            if (j < 0) break;
        }
    }
    return total;
}

/// Evaluation via the nodal representation: one pass over the sparse grid,
/// each data value used exactly once. Per-direction weight values are
/// computed once per (direction, top-level index) and looked up.
inline double eval_nodal(const Model& model, std::span<const double> x) {
    if (model.rep != Representation::nodal)
        throw CapabilityError("eval_nodal: model was fitted for " + to_string(model.rep));
    const int d = model.config.d();
    std::vector<std::span<const double>> comps;
    detail::split_components(model, x, comps);

    // T[j][t][lam-1] = weight of range {u(t)..lam} at x_j (prefix sums)
    std::vector<std::vector<std::vector<double>>> T(d);
    for (int j = 0; j < d; ++j) {
        const int L = model.lam_max[j];
        std::vector<SparseEvalVector> r(L);
        for (int p = 1; p <= L; ++p) r[p - 1] = model.dirs[j].r_vector(p, comps[j]);
        T[j].resize(model.nodal[j].size());
        for (std::size_t t = 0; t < model.nodal[j].size(); ++t) {
            const auto& w = model.nodal[j][t];
            T[j][t].assign(L, 0.0);
            double acc = 0.0;
            for (int p = w.first_level; p <= L; ++p) {
                const auto& c = w.coeffs[p - w.first_level];
                for (const auto& [idx, v] : r[p - 1].entries) acc += c[idx] * v;
                T[j][t][p - 1] = acc;
            }
        }
    }

    double total = 0.0;
    for (std::size_t i = 0; i < model.grid.size(); ++i) {
        const auto& u = model.grid.first_levels[i];
        const auto& fin = model.grid.top_index[i];
        double weight = 0.0;
        for (std::size_t s = 0; s < model.surface.size(); ++s) {
            const MultiIndex& lambda = model.surface[s];
            bool covered = true;
            for (int j = 0; j < d; ++j)
                if (lambda[j] < u[j]) {
                    covered = false;
                    break;
                }
            if (!covered || model.surface_weight[s] == 0.0) continue;
            double prod = model.surface_weight[s];
            for (int j = 0; j < d; ++j) prod *= T[j][fin[j]][lambda[j] - 1];
            weight += prod;
        }
        ++*model.f_reads;
        total += model.f_values[i] * weight;
    }
    return total;
}

inline double eval(const Model& model, std::span<const double> x) {
    return model.rep == Representation::nodal ? eval_nodal(model, x) : eval_efficient(model, x);
}

/// Order-preserving batch evaluation; results are identical to a sequential
/// loop regardless of the thread count.
inline std::vector<double> eval_batch(const Model& model, const PointSet& points,
                                      int num_threads = 1) {
    std::vector<double> out(points.size());
    if (num_threads <= 1 || points.size() < 2) {
        for (std::size_t i = 0; i < points.size(); ++i) out[i] = eval(model, points[i]);
        return out;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= points.size()) return;
            out[i] = eval(model, points[i]);
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < num_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    return out;
}

/// Literal evaluation of the quadruple-sum definition of the operator.
/// Only usable on tiny instances; the cost guard refuses anything whose
/// estimated term count exceeds the configured bound.
class NaiveEvaluator {
public:
    NaiveEvaluator(const TpmlConfig& config, const SampleTable& samples)
        : config_(config), samples_(&samples) {
        detail::check_config(config_);
        lam_max_ = config_.lambda_maxima();
        const int d = config_.d();
        for (int j = 0; j < d; ++j) {
            const auto& dc = config_.directions[j];
            const int L = lam_max_[j];
            std::vector<CoefficientBlock> blocks;
            std::vector<int> sizes;
            for (int i = 1; i <= L; ++i) {
                Gramian g = assemble_gramian(dc.hierarchy.level(i), dc.hierarchy.kernel, i);
                const double reg =
                    (dc.mode == SolveMode::penalized_ls && !dc.lambda_reg.empty())
                        ? dc.lambda_reg[std::min<std::size_t>(i - 1, dc.lambda_reg.size() - 1)]
                        : 0.0;
                blocks.push_back(solve_coefficients(g, dc.mode, reg, config_.solver));
                sizes.push_back(static_cast<int>(dc.hierarchy.level(i).points.size()));
            }
            // chi tables: chi_ab(k_a, k_b) = chi_{a,k_a}(x_{b,k_b})
            LevelPairStore chi(L);
            for (int a = 1; a < L; ++a)
                for (int b = a + 1; b <= L; ++b) {
                    const auto& sites_b = dc.hierarchy.level(b).points;
                    Eigen::MatrixXd tab(sizes[a - 1], sizes[b - 1]);
                    for (int k = 0; k < sizes[b - 1]; ++k)
                        tab.col(k) =
                            eval_lagrange_all(blocks[a - 1], dc.hierarchy.r_vector(a, sites_b[k]));
                    chi.at(a, b) = std::move(tab);
                }
            coeffs_.push_back(std::move(blocks));
            sizes_.push_back(std::move(sizes));
            chi_.push_back(std::move(chi));
        }
        pairs_ = combination_pairs(config_.omega, config_.ell);
    }

    double estimated_terms() const {
        double total = 0.0;
        for (const auto& pair : pairs_) {
            double prod = 1.0;
            for (int j = 0; j < config_.d(); ++j) prod *= chain_cost(j, pair.lambda[j]);
            total += prod;
        }
        return total;
    }

    double eval(std::span<const double> x) const {
        if (estimated_terms() > config_.cost_guard)
            throw CostGuardError(
                "eval_naive: estimated term count " + std::to_string(estimated_terms()) +
                " exceeds the cost guard (" + std::to_string(config_.cost_guard) +
                "); use the efficient representation");
        const int d = config_.d();
        std::vector<std::span<const double>> comps;
        std::size_t off = 0;
        for (const auto& dc : config_.directions) {
            comps.push_back(x.subspan(off, dc.hierarchy.dim()));
            off += dc.hierarchy.dim();
        }
        if (off != x.size()) throw ShapeError("eval_naive: point dimension mismatch");

        // chi_{L, .}(x_j) per direction and level
        std::vector<std::vector<Eigen::VectorXd>> chi_at_x(d);
        for (int j = 0; j < d; ++j)
            for (int i = 1; i <= lam_max_[j]; ++i)
                chi_at_x[j].push_back(eval_lagrange_all(
                    coeffs_[j][i - 1], config_.directions[j].hierarchy.r_vector(i, comps[j])));

        // per-direction D vectors for each ordered subset, cached per call
        std::vector<std::map<std::vector<int>, Eigen::VectorXd>> dcache(d);

        double total = 0.0;
        for (const auto& pair : pairs_) {
            // iterate all combinations of ordered subsets u^(1) x ... x u^(d)
            std::vector<std::vector<std::vector<int>>> subsets(d);
            for (int j = 0; j < d; ++j) subsets[j] = ordered_subsets(pair.lambda[j]);
            std::vector<std::size_t> pick(d, 0);
            for (;;) {
                int sum_card = 0;
                std::vector<const Eigen::VectorXd*> dvecs(d);
                for (int j = 0; j < d; ++j) {
                    const auto& u = subsets[j][pick[j]];
                    sum_card += static_cast<int>(u.size());
                    auto it = dcache[j].find(u);
                    if (it == dcache[j].end())
                        it = dcache[j].emplace(u, chain_vector(j, u, chi_at_x[j])).first;
                    dvecs[j] = &it->second;
                }
                const double c = ((pair.beta_ones() + d + sum_card) % 2 == 0) ? 1.0 : -1.0;
                total += c * contract_samples(subsets, pick, dvecs);
                int j = d - 1;
                while (j >= 0 && ++pick[j] == subsets[j].size()) pick[j--] = 0;
                if (j < 0) break;
            }
        }
        return total;
    }

private:
    // D[k1] = sum_{k2..km} prod_l chi_{u_l,k_l}(x_{u_{l+1},k_{l+1}}) * chi_{u_m,k_m}(x)
    Eigen::VectorXd chain_vector(int j, const std::vector<int>& u,
                                 const std::vector<Eigen::VectorXd>& chi_x) const {
        const int m = static_cast<int>(u.size());
        Eigen::VectorXd cur = chi_x[u[m - 1] - 1];
        for (int l = m - 2; l >= 0; --l) {
            // literal sum over k_{l+1}
            const Eigen::MatrixXd& tab = chi_.at(j).at(u[l], u[l + 1]);
            Eigen::VectorXd next = Eigen::VectorXd::Zero(sizes_[j][u[l] - 1]);
            for (int ka = 0; ka < next.size(); ++ka)
                for (int kb = 0; kb < cur.size(); ++kb) next[ka] += tab(ka, kb) * cur[kb];
            cur = std::move(next);
        }
        return cur;
    }

    double contract_samples(const std::vector<std::vector<std::vector<int>>>& subsets,
                            const std::vector<std::size_t>& pick,
                            const std::vector<const Eigen::VectorXd*>& dvecs) const {
        const int d = config_.d();
        std::vector<int> k1(d, 0);
        std::vector<double> buf;
        int total_dim = 0;
        for (const auto& dc : config_.directions) total_dim += dc.hierarchy.dim();
        buf.resize(total_dim);
        double sum = 0.0;
        for (;;) {
            int off = 0;
            double prod = 1.0;
            for (int j = 0; j < d; ++j) {
                const int u1 = subsets[j][pick[j]].front();
                auto p = config_.directions[j].hierarchy.level(u1).points[k1[j]];
                std::copy(p.begin(), p.end(), buf.begin() + off);
                off += config_.directions[j].hierarchy.dim();
                prod *= (*dvecs[j])[k1[j]];
            }
            sum += samples_->at({buf.data(), buf.size()}) * prod;
            int j = d - 1;
            while (j >= 0) {
                const int u1 = subsets[j][pick[j]].front();
                if (++k1[j] < sizes_[j][u1 - 1]) break;
                k1[j--] = 0;
            }
            if (j < 0) break;
        }
        return sum;
    }

    double chain_cost(int j, int lam) const {
        double total = 0.0;
        for (const auto& u : ordered_subsets(lam)) {
            double prod = 1.0;
            for (int i : u) prod *= sizes_[j][i - 1];
            total += prod;
        }
        return total;
    }

    static std::vector<std::vector<int>> ordered_subsets(int lam) {
        std::vector<std::vector<int>> out;
        for (unsigned mask = 1; mask < (1u << lam); ++mask) {
            std::vector<int> u;
            for (int i = 1; i <= lam; ++i)
                if (mask & (1u << (i - 1))) u.push_back(i);
            out.push_back(std::move(u));
        }
        return out;
    }

    TpmlConfig config_;
    const SampleTable* samples_;
    std::vector<int> lam_max_;
    std::vector<std::vector<CoefficientBlock>> coeffs_;
    std::vector<std::vector<int>> sizes_;
    std::vector<LevelPairStore> chi_;
    std::vector<CombinationPair> pairs_;
};

inline double eval_naive(const TpmlConfig& config, const SampleTable& samples,
                         std::span<const double> x) {
    return NaiveEvaluator(config, samples).eval(x);
}

}  // namespace tpml
