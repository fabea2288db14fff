// Command line driver for the tensor product multilevel library:
// grid -> fit -> eval workflow plus representation cross-checks and the
// built-in convergence studies.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tpml/config_io.hpp"
#include "tpml/experiments.hpp"
#include "tpml/model_io.hpp"

namespace {

using namespace tpml;

void print_grid(const SparseGrid& grid, std::ostream& os) {
    os << "point_id";
    for (int j = 0; j < grid.d; ++j)
        for (int k = 1; k <= grid.comp_dims[j]; ++k)
            os << ",dir" << (j + 1) << "_c" << k;
    os << "\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
        os << i;
        for (double v : grid.points[i]) os << ',' << format_coord(v);
        os << "\n";
    }
}

int cmd_grid(const std::string& config_path, const std::string& out_path) {
    const TpmlConfig config = load_config(config_path);
    const SparseGrid grid = required_samples(config);
    if (out_path.empty()) {
        print_grid(grid, std::cout);
    } else {
        std::ofstream os(out_path);
        if (!os) throw DataError("cannot open '" + out_path + "' for writing");
        print_grid(grid, os);
    }
    return 0;
}

/// Samples CSV in either form: `point_id,value` against this config's grid
/// ordering, or full coordinates with a trailing `value` column.
SampleTable read_samples(const std::string& path, const TpmlConfig& config,
                         const SparseGrid& grid) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open samples file '" + path + "'");
    const CsvTable t = read_csv(in, path);

    SampleTable samples;
    if (t.header.size() == 2 && t.header[0] == "point_id") {
        std::vector<char> seen(grid.size(), 0);
        std::vector<long long> extra;
        for (const auto& row : t.rows) {
            const long long id = static_cast<long long>(parse_double(row[0], path));
            if (id < 0 || id >= static_cast<long long>(grid.size())) {
                extra.push_back(id);
                continue;
            }
            seen[static_cast<std::size_t>(id)] = 1;
            samples.set(grid.points[static_cast<std::size_t>(id)], parse_double(row[1], path));
        }
        if (!extra.empty()) {
            std::string ids;
            for (std::size_t i = 0; i < extra.size() && i < 10; ++i)
                ids += (i ? " " : "") + std::to_string(extra[i]);
            throw DataError("samples file '" + path + "': " + std::to_string(extra.size()) +
                            " ids outside the grid (" + ids + ")");
        }
        std::string missing;
        std::size_t nmissing = 0;
        for (std::size_t i = 0; i < grid.size(); ++i)
            if (!seen[i]) {
                if (nmissing < 10) missing += (nmissing ? " " : "") + std::to_string(i);
                ++nmissing;
            }
        if (nmissing > 0)
            throw DataError("samples file '" + path + "': " + std::to_string(nmissing) +
                            " grid points missing (ids: " + missing + ")");
        return samples;
    }

    int total_dim = 0;
    for (const auto& dc : config.directions) total_dim += dc.hierarchy.dim();
    if (static_cast<int>(t.header.size()) != total_dim + 1 || t.header.back() != "value")
        throw DataError("samples file '" + path + "' must have columns point_id,value or " +
                        std::to_string(total_dim) + " coordinates plus a final value column");
    std::vector<double> buf(total_dim);
    for (const auto& row : t.rows) {
        for (int j = 0; j < total_dim; ++j) buf[j] = parse_double(row[j], path);
        samples.set({buf.data(), buf.size()}, parse_double(row.back(), path));
    }
    return samples;
}

int cmd_fit(const std::string& config_path, const std::string& samples_path,
            const std::string& model_path, double cost_guard_override) {
    TpmlConfig config = load_config(config_path);
    if (cost_guard_override > 0.0) config.cost_guard = cost_guard_override;
    const SparseGrid grid = required_samples(config);
    const SampleTable samples = read_samples(samples_path, config, grid);
    const Model model = fit(config, samples);

    std::cout << "grid points: " << model.diagnostics.grid_size << "\n";
    std::cout << "dir level      N            q      epsilon     residual\n";
    for (const auto& li : model.diagnostics.levels)
        std::printf("%3d %5d %6d %12.6g %12.6g %12.3e%s\n", li.direction, li.level, li.n, li.q,
                    li.epsilon, li.solve_residual, li.used_fallback ? "  (cg fallback)" : "");
    save_model(model, model_path);
    std::cout << "model written to " << model_path << "\n";
    return 0;
}

PointSet read_points(const std::string& path, int total_dim) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open points file '" + path + "'");
    const CsvTable t = read_csv(in, path);
    const bool with_id = !t.header.empty() && t.header.front() == "point_id";
    const int offset = with_id ? 1 : 0;
    if (static_cast<int>(t.header.size()) != total_dim + offset)
        throw ShapeError("points file '" + path + "' has " +
                         std::to_string(t.header.size() - offset) + " coordinate columns, model needs " +
                         std::to_string(total_dim));
    PointSet pts(total_dim);
    std::vector<double> buf(total_dim);
    for (const auto& row : t.rows) {
        for (int j = 0; j < total_dim; ++j) buf[j] = parse_double(row[j + offset], path);
        pts.add({buf.data(), buf.size()});
    }
    return pts;
}

int cmd_eval(const std::string& model_path, const std::string& points_path,
             const std::string& out_path, int threads) {
    const Model model = load_model(model_path);
    const PointSet pts = read_points(points_path, model.total_dim());
    const std::vector<double> values = eval_batch(model, pts, threads);
    std::ostream* os = &std::cout;
    std::ofstream file;
    if (!out_path.empty()) {
        file.open(out_path);
        if (!file) throw DataError("cannot open '" + out_path + "' for writing");
        os = &file;
    }
    *os << "point_id,value\n";
    for (std::size_t i = 0; i < values.size(); ++i)
        *os << i << ',' << format_coord(values[i]) << "\n";
    return 0;
}

int cmd_validate(const std::string& config_path, const std::string& samples_path, int reps,
                 std::uint64_t seed, double cost_guard_override, int threads) {
    TpmlConfig config = load_config(config_path);
    if (cost_guard_override > 0.0) config.cost_guard = cost_guard_override;
    const SparseGrid grid = required_samples(config);
    const SampleTable samples = read_samples(samples_path, config, grid);

    // random points inside the bounding box of the sparse grid
    const int total_dim = grid.points.dim();
    std::vector<double> lo(total_dim, 1e300), hi(total_dim, -1e300);
    for (std::size_t i = 0; i < grid.size(); ++i)
        for (int j = 0; j < total_dim; ++j) {
            lo[j] = std::min(lo[j], grid.points[i][j]);
            hi[j] = std::max(hi[j], grid.points[i][j]);
        }
    std::mt19937_64 rng(seed);
    PointSet pts(total_dim);
    std::vector<double> buf(total_dim);
    for (int i = 0; i < reps; ++i) {
        for (int j = 0; j < total_dim; ++j) {
            std::uniform_real_distribution<double> dist(lo[j], hi[j]);
            buf[j] = dist(rng);
        }
        pts.add({buf.data(), buf.size()});
    }

    std::vector<std::string> names;
    std::vector<std::vector<double>> results;

    {
        TpmlConfig c = config;
        c.representation = Representation::efficient;
        const Model m = fit(c, samples);
        results.push_back(eval_batch(m, pts, threads));
        names.push_back("efficient");
    }
    if (config.all_nested()) {
        TpmlConfig c = config;
        c.representation = Representation::nodal;
        const Model m = fit(c, samples);
        results.push_back(eval_batch(m, pts, threads));
        names.push_back("nodal");
    } else {
        std::cout << "nodal: skipped (hierarchies are not nested)\n";
    }
    {
        TpmlConfig c = config;
        c.representation = Representation::naive;
        const NaiveEvaluator naive(c, samples);
        if (naive.estimated_terms() <= c.cost_guard) {
            std::vector<double> vals(pts.size());
            for (std::size_t i = 0; i < pts.size(); ++i) vals[i] = naive.eval(pts[i]);
            results.push_back(std::move(vals));
            names.push_back("naive");
        } else {
            std::cout << "naive: skipped (estimated term count " << naive.estimated_terms()
                      << " exceeds the cost guard " << c.cost_guard << ")\n";
        }
    }

    if (results.size() < 2) {
        std::cout << "only one representation available, nothing to compare\n";
        return 0;
    }
    double scale = 0.0;
    for (const auto& r : results)
        for (double v : r) scale = std::max(scale, std::abs(v));
    scale = std::max(scale, 1e-12);
    double worst = 0.0;
    for (std::size_t a = 0; a < results.size(); ++a)
        for (std::size_t b = a + 1; b < results.size(); ++b) {
            double diff = 0.0;
            for (std::size_t i = 0; i < pts.size(); ++i)
                diff = std::max(diff, std::abs(results[a][i] - results[b][i]));
            std::cout << names[a] << " vs " << names[b]
                      << ": max relative difference " << diff / scale << "\n";
            worst = std::max(worst, diff / scale);
        }
    std::cout << "overall max relative difference: " << worst
              << (worst <= 1e-9 ? " (ok)" : " (FAIL)") << "\n";
    return worst <= 1e-9 ? 0 : 5;
}

int cmd_convergence(const std::string& target, const std::string& levels, int eval_n,
                    std::uint64_t seed, const std::string& out_path, int threads) {
    int lo = 1, hi = 1;
    if (std::sscanf(levels.c_str(), "%d:%d", &lo, &hi) != 2) {
        if (std::sscanf(levels.c_str(), "%d", &lo) == 1)
            hi = lo;
        else
            throw ConfigError("convergence: --levels must be LO:HI or a single integer");
    }
    const ErrorReport report = run_convergence(target, lo, hi, eval_n, seed,
                                               Representation::efficient, threads);
    emit_plot_data(report, std::cout);
    if (!out_path.empty()) emit_plot_data(report, out_path);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tensor product multilevel approximation on sparse grids"};
    app.require_subcommand(1);

    std::string config_path, samples_path, model_path, points_path, out_path;
    std::string target = "sinprod3", levels = "1:3";
    int threads = 1, reps = 100, eval_n = 200;
    std::uint64_t seed = 0;
    double cost_guard = -1.0;

    auto* grid = app.add_subcommand("grid", "emit the required sample points as CSV");
    grid->add_option("config", config_path, "config JSON")->required();
    grid->add_option("-o,--out", out_path, "output CSV (default: stdout)");

    auto* fit = app.add_subcommand("fit", "fit a model from samples");
    fit->add_option("config", config_path, "config JSON")->required();
    fit->add_option("samples", samples_path, "samples CSV")->required();
    fit->add_option("-o,--out", model_path, "model output path")->required();
    fit->add_option("--cost-guard", cost_guard, "override the config's cost guard");

    auto* eval = app.add_subcommand("eval", "evaluate a model at points");
    eval->add_option("model", model_path, "model file")->required();
    eval->add_option("points", points_path, "points CSV")->required();
    eval->add_option("-o,--out", out_path, "output CSV (default: stdout)");
    eval->add_option("--threads", threads, "evaluation threads");

    auto* validate = app.add_subcommand("validate", "cross-check the representations");
    validate->add_option("config", config_path, "config JSON")->required();
    validate->add_option("samples", samples_path, "samples CSV")->required();
    validate->add_option("--reps", reps, "number of random check points");
    validate->add_option("--seed", seed, "random seed");
    validate->add_option("--cost-guard", cost_guard, "override the config's cost guard");
    validate->add_option("--threads", threads, "evaluation threads");

    auto* conv = app.add_subcommand("convergence", "run a built-in convergence study");
    conv->add_option("--target", target, "registry target (sinprod3, aniso7)");
    conv->add_option("--levels", levels, "threshold range LO:HI");
    conv->add_option("--eval-n", eval_n, "evaluation set size");
    conv->add_option("--seed", seed, "random seed");
    conv->add_option("--out", out_path, "also write the CSV here");
    conv->add_option("--threads", threads, "evaluation threads");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (grid->parsed()) return cmd_grid(config_path, out_path);
        if (fit->parsed()) return cmd_fit(config_path, samples_path, model_path, cost_guard);
        if (eval->parsed()) return cmd_eval(model_path, points_path, out_path, threads);
        if (validate->parsed())
            return cmd_validate(config_path, samples_path, reps, seed, cost_guard, threads);
        if (conv->parsed())
            return cmd_convergence(target, levels, eval_n, seed, out_path, threads);
    } catch (const tpml::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return tpml::exit_code(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 5;
    }
    return 0;
}
