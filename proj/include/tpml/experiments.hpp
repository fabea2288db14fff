#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "tpml/csv.hpp"
#include "tpml/errors.hpp"
#include "tpml/tpml.hpp"

namespace tpml {

/// A named analytic target together with the model configuration the
/// convergence study uses at a given threshold.
struct ExperimentTarget {
    std::string name;
    int dim = 0;
    std::function<double(std::span<const double>)> f;
    std::vector<std::array<double, 2>> bounds;  // evaluation sampling box
    std::function<TpmlConfig(int ell)> make_config;
};

namespace detail {

/// Deterministic 33x33 grid cloud on [0,1]^2, the spatial site source of the
/// sinprod3 study.
inline PointSet sinprod3_cloud() {
    PointSet cloud(2);
    for (int i = 0; i <= 32; ++i)
        for (int j = 0; j <= 32; ++j) cloud.add({i / 32.0, j / 32.0});
    return cloud;
}

inline TpmlConfig sinprod3_config(int ell) {
    TpmlConfig config;
    const int L = ell + 1;  // lambda_max with weights (1, 1)

    DirectionConfig space;
    space.hierarchy = thin_to_hierarchy(sinprod3_cloud(), L, KernelFamily::wendland_3_1, 6.0);
    config.directions.push_back(std::move(space));

    DirectionConfig time;
    // epsilon = 6 * spacing = 12 * q for the equidistant levels
    time.hierarchy = equidistant_hierarchy(0.0, 1.0, L, KernelFamily::wendland_1_1, 12.0);
    config.directions.push_back(std::move(time));

    config.omega = WeightVector::make({1.0, 1.0});
    config.ell = ell;
    config.representation = Representation::efficient;
    return config;
}

inline TpmlConfig aniso7_config(int ell) {
    TpmlConfig config;
    std::vector<double> w;
    for (int j = 1; j <= 7; ++j) {
        w.push_back(static_cast<double>(j));
        const int L = lambda_max(WeightVector::make({static_cast<double>(j), 1.0}), ell, 0);
        DirectionConfig dc;
        dc.hierarchy = equidistant_hierarchy(-1.0, 1.0, std::max(L, 1),
                                             KernelFamily::wendland_1_1, 4.0);
        config.directions.push_back(std::move(dc));
    }
    config.omega = WeightVector::make(std::move(w));
    config.ell = ell;
    config.representation = Representation::efficient;
    return config;
}

}  // namespace detail

inline const std::vector<ExperimentTarget>& experiment_registry() {
    static const std::vector<ExperimentTarget> registry = [] {
        std::vector<ExperimentTarget> r;
        {
            ExperimentTarget t;
            t.name = "sinprod3";
            t.dim = 3;
            t.f = [](std::span<const double> p) {
                return std::sin(M_PI * p[0]) * std::sin(M_PI * p[1]) * std::exp(-p[2]);
            };
            t.bounds = {{0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0}};
            t.make_config = detail::sinprod3_config;
            r.push_back(std::move(t));
        }
        {
            ExperimentTarget t;
            t.name = "aniso7";
            t.dim = 7;
            t.f = [](std::span<const double> p) {
                double s = 0.0;
                for (int j = 0; j < 7; ++j) s += (j + 1) * p[j] * p[j] / 7.0;
                return std::exp(-s);
            };
            t.bounds.assign(7, {-1.0, 1.0});
            t.make_config = detail::aniso7_config;
            r.push_back(std::move(t));
        }
        return r;
    }();
    return registry;
}

inline const ExperimentTarget& find_target(const std::string& name) {
    for (const auto& t : experiment_registry())
        if (t.name == name) return t;
    std::string known;
    for (const auto& t : experiment_registry()) known += (known.empty() ? "" : ", ") + t.name;
    throw ConfigError("unknown experiment target '" + name + "' (known: " + known + ")");
}

struct ErrorRow {
    int ell = 0;
    std::size_t grid_size = 0;
    int eval_n = 0;
    double max_abs = 0.0;
    double max_rel = 0.0;
    double mean_abs = 0.0;
    double order = 0.0;  // log2(e_prev / e_this) in max_abs; 0 on the first row
    double seconds = 0.0;
};

struct ErrorReport {
    std::string target;
    std::vector<ErrorRow> rows;
};

/// Seeded evaluation points, uniform in the target's box. The set is fixed per
/// (seed, n) across all levels of a study.
inline PointSet experiment_eval_points(const ExperimentTarget& target, int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    PointSet pts(target.dim);
    std::vector<double> buf(target.dim);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < target.dim; ++j) {
            std::uniform_real_distribution<double> dist(target.bounds[j][0], target.bounds[j][1]);
            buf[j] = dist(rng);
        }
        pts.add({buf.data(), buf.size()});
    }
    return pts;
}

/// Build, sample, fit and evaluate the target for each threshold in
/// [ell_lo, ell_hi], reporting max absolute, max relative (global-max
/// denominator) and mean absolute error on one fixed evaluation set.
inline ErrorReport run_convergence(const ExperimentTarget& target, int ell_lo, int ell_hi,
                                   int eval_n, std::uint64_t seed,
                                   Representation rep = Representation::efficient,
                                   int threads = 1) {
    if (ell_lo < 0 || ell_hi < ell_lo) throw ConfigError("run_convergence: bad threshold range");
    if (eval_n < 1) throw ConfigError("run_convergence: eval set must be nonempty");

    const PointSet eval_pts = experiment_eval_points(target, eval_n, seed);
    std::vector<double> truth(eval_pts.size());
    double fmax = 0.0;
    for (std::size_t i = 0; i < eval_pts.size(); ++i) {
        truth[i] = target.f(eval_pts[i]);
        fmax = std::max(fmax, std::abs(truth[i]));
    }

    ErrorReport report;
    report.target = target.name;
    for (int ell = ell_lo; ell <= ell_hi; ++ell) {
        const auto t0 = std::chrono::steady_clock::now();
        TpmlConfig config = target.make_config(ell);
        config.representation = rep;

        const SparseGrid grid = required_samples(config);
        SampleTable samples;
        for (std::size_t i = 0; i < grid.size(); ++i)
            samples.set(grid.points[i], target.f(grid.points[i]));

        const Model model = fit(config, samples);
        const std::vector<double> approx = eval_batch(model, eval_pts, threads);

        ErrorRow row;
        row.ell = ell;
        row.grid_size = grid.size();
        row.eval_n = eval_n;
        for (std::size_t i = 0; i < approx.size(); ++i) {
            const double e = std::abs(approx[i] - truth[i]);
            row.max_abs = std::max(row.max_abs, e);
            row.mean_abs += e;
        }
        row.mean_abs /= static_cast<double>(approx.size());
        row.max_rel = (fmax > 0.0) ? row.max_abs / fmax : row.max_abs;
        if (!report.rows.empty() && row.max_abs > 0.0)
            row.order = std::log2(report.rows.back().max_abs / row.max_abs);
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report.rows.push_back(row);
    }
    return report;
}

inline ErrorReport run_convergence(const std::string& target_name, int ell_lo, int ell_hi,
                                   int eval_n, std::uint64_t seed,
                                   Representation rep = Representation::efficient,
                                   int threads = 1) {
    return run_convergence(find_target(target_name), ell_lo, ell_hi, eval_n, seed, rep, threads);
}

/// Level-vs-error table for external log-scale plotting.
inline void emit_plot_data(const ErrorReport& report, std::ostream& os) {
    os << "level,grid_size,eval_n,max_abs,max_rel,mean_abs,order,seconds\n";
    for (const auto& r : report.rows)
        os << r.ell << ',' << r.grid_size << ',' << r.eval_n << ',' << format_coord(r.max_abs)
           << ',' << format_coord(r.max_rel) << ',' << format_coord(r.mean_abs) << ','
           << format_coord(r.order) << ',' << format_coord(r.seconds) << '\n';
}

inline void emit_plot_data(const ErrorReport& report, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot open '" + path + "' for writing");
    emit_plot_data(report, os);
    if (!os) throw DataError("failed while writing '" + path + "'");
}

}  // namespace tpml
