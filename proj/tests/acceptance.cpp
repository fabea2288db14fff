// Acceptance suite: one pass/fail line per criterion, exit 0 only if all
// ten hold. Tolerances are pinned here and intentionally not configurable.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "tpml/config_io.hpp"
#include "tpml/experiments.hpp"
#include "tpml/model_io.hpp"

using namespace tpml;

namespace {

int failures = 0;

void report(int criterion, const std::string& what, bool ok, const std::string& detail = "") {
    std::printf("%s  criterion %2d: %s%s%s\n", ok ? "PASS" : "FAIL", criterion, what.c_str(),
                detail.empty() ? "" : " -- ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

bool within_one_ulp(double a, double b) {
    return a == b || a == std::nextafter(b, a);
}

double rel_scale(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s = std::max(s, std::abs(x));
    return std::max(s, 1e-12);
}

// ---- criterion 1: kernel values ----------------------------------------

void criterion_kernels() {
    bool ok = true;
    ok &= within_one_ulp(eval_kernel(KernelFamily::wendland_3_1, 0.0), 1.0);
    ok &= within_one_ulp(eval_kernel(KernelFamily::wendland_3_1, 1.0), 0.0);
    ok &= within_one_ulp(eval_kernel(KernelFamily::wendland_3_1, 0.5), 0.1875);
    ok &= within_one_ulp(eval_kernel(KernelFamily::wendland_1_1, 0.5), 0.3125);
    ok &= within_one_ulp(eval_kernel(KernelFamily::wendland_1_2, 0.5), 0.171875);
    report(1, "kernel reference values exact to 1 ulp", ok);
}

// ---- criterion 2: index sets vs brute force -----------------------------

void criterion_index_sets() {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> wdist(0.5, 3.0);
    bool ok = true;
    for (int trial = 0; trial < 200 && ok; ++trial) {
        const int d = 1 + static_cast<int>(rng() % 4);
        std::vector<double> omega(d);
        for (double& v : omega) v = wdist(rng);
        const auto w = WeightVector::make(omega);
        const int ell = static_cast<int>(rng() % 7);

        ok &= enumerate_index_set(w, ell) == oracles::bf_index_set(w, ell);
        ok &= enumerate_surface(w, ell) == oracles::bf_surface(w, ell);
        const auto pairs = combination_pairs(w, ell);
        const auto bf = oracles::bf_combination_pairs(w, ell);
        ok &= pairs.size() == bf.size();
        for (std::size_t i = 0; ok && i < pairs.size(); ++i)
            ok &= pairs[i].lambda == bf[i].lambda && pairs[i].beta == bf[i].beta &&
                  pairs[i].sign == bf[i].sign;
    }
    report(2, "index set / surface / combination pairs match brute force (200 cases)", ok);
}

// ---- criterion 3: combination technique vs telescoping ------------------

void criterion_combination() {
    std::mt19937_64 rng(3030);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> wdist(0.5, 3.0);
    double worst = 0.0;
    for (int trial = 0; trial < 30; ++trial) {
        const int d = 2 + static_cast<int>(rng() % 2);
        std::vector<double> omega(d);
        for (double& v : omega) v = wdist(rng);
        const auto w = WeightVector::make(omega);
        const int ell = static_cast<int>(rng() % 5);
        std::vector<std::vector<Eigen::MatrixXd>> V(d);
        for (int j = 0; j < d; ++j)
            for (int i = 0; i < lambda_max(w, ell, j); ++i) {
                Eigen::MatrixXd m(3, 3);
                for (int r = 0; r < 3; ++r)
                    for (int c = 0; c < 3; ++c) m(r, c) = gauss(rng);
                V[j].push_back(std::move(m));
            }
        worst = std::max(worst, (oracles::telescoping_sum(w, ell, V) -
                                 oracles::combination_sum(w, ell, V))
                                    .cwiseAbs()
                                    .maxCoeff());
    }
    std::ostringstream det;
    det << "max entrywise deviation " << worst;
    report(3, "combination technique equals telescoping oracle (tol 1e-12)", worst <= 1e-12,
           det.str());
}

// ---- criterion 4: Lagrange delta property -------------------------------

void criterion_lagrange() {
    std::mt19937_64 rng(4040);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    double worst_delta = 0.0, worst_res = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
        LevelSites ls;
        ls.points = PointSet(2);
        for (int i = 0; i < 40; ++i) ls.points.add({dist(rng), dist(rng)});
        ls.q = separation_distance(ls.points);
        ls.epsilon = 4.0 * ls.q;
        ls.build_index();
        const auto g = assemble_gramian(ls, KernelFamily::wendland_3_1, 1);
        const auto block = solve_coefficients(g, SolveMode::interpolation);
        worst_res = std::max(worst_res, block.residual);
        for (std::size_t m = 0; m < ls.points.size(); ++m) {
            const auto r = ls.r_vector(KernelFamily::wendland_3_1, ls.points[m]);
            const Eigen::VectorXd chi = eval_lagrange_all(block, r);
            for (int k = 0; k < chi.size(); ++k)
                worst_delta = std::max(
                    worst_delta,
                    std::abs(chi[k] - (static_cast<std::size_t>(k) == m ? 1.0 : 0.0)));
        }
    }
    std::ostringstream det;
    det << "max delta deviation " << worst_delta << ", max residual " << worst_res;
    report(4, "Lagrange delta property (tol 1e-8) and solve residual (tol 1e-10)",
           worst_delta <= 1e-8 && worst_res <= 1e-10, det.str());
}

// ---- criterion 5: direction multilevel equivalences ---------------------

void criterion_multilevel() {
    std::mt19937_64 rng(5050);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 3; ++trial) {
        DirectionHierarchy h;
        h.kernel = KernelFamily::wendland_1_1;
        h.coupling = 5.0;
        const int L = 2 + static_cast<int>(rng() % 3);  // L <= 4
        for (int i = 1; i <= L; ++i) {
            LevelSites ls;
            ls.points = PointSet(1);
            const int n = std::min(60, 8 << (i - 1));
            std::vector<double> xs(n);
            for (double& x : xs) x = dist(rng);
            std::sort(xs.begin(), xs.end());
            for (double x : xs) ls.points.add({x});
            ls.q = separation_distance(ls.points);
            ls.epsilon = h.coupling * ls.q;
            ls.build_index();
            h.levels.push_back(std::move(ls));
        }
        const auto op = DirectionOperator::fit(h, SolveMode::interpolation, {}, L);
        std::vector<Eigen::VectorXd> samples;
        for (int i = 1; i <= L; ++i) {
            const auto& pts = h.level(i).points;
            Eigen::VectorXd v(pts.size());
            for (std::size_t k = 0; k < pts.size(); ++k)
                v[static_cast<Eigen::Index>(k)] =
                    std::sin(6.0 * pts[k][0]) + 0.2 * std::cos(19.0 * pts[k][0]);
            samples.push_back(std::move(v));
        }
        const auto oracle = oracles::ResidualOracle::build(h, L, samples);
        double scale = 1.0;
        for (int t = 0; t < 200; ++t) {
            const double x = dist(rng);
            const double a = multilevel_apply(op, samples, {&x, 1}, L);
            const double b = oracle.eval({&x, 1});
            const double c = oracles::subset_expansion_eval(h, op.coeffs, L, samples, {&x, 1});
            const double d = oracles::summed_block_eval(op, samples, {&x, 1}, L);
            scale = std::max(scale, std::abs(a));
            worst = std::max({worst, std::abs(a - b) / scale, std::abs(a - c) / scale,
                              std::abs(a - d) / scale});
        }
    }
    std::ostringstream det;
    det << "max relative difference " << worst;
    report(5, "multilevel operator: four forms agree (tol 1e-10)", worst <= 1e-10, det.str());
}

// ---- criterion 6: S recurrence vs subset enumeration --------------------

void criterion_s_blocks() {
    std::mt19937_64 rng(6060);
    std::normal_distribution<double> gauss(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const int L = 2 + static_cast<int>(rng() % 5);  // <= 6
        std::vector<int> sizes(L);
        for (int& n : sizes) n = 2 + static_cast<int>(rng() % 4);
        LevelPairStore transfers(L);
        for (int a = 1; a <= L; ++a)
            for (int b = a + 1; b <= L; ++b) {
                Eigen::MatrixXd B(sizes[a - 1], sizes[b - 1]);
                for (int r = 0; r < B.rows(); ++r)
                    for (int c = 0; c < B.cols(); ++c) B(r, c) = gauss(rng);
                transfers.at(a, b) = std::move(B);
            }
        const auto S = compute_S_blocks(L, transfers, sizes);
        for (int m = 1; m <= L; ++m)
            for (int p = m; p <= L; ++p)
                worst = std::max(worst, (S.at(m, p) - oracles::bf_S(m, p, transfers, sizes))
                                            .cwiseAbs()
                                            .maxCoeff());
    }
    std::ostringstream det;
    det << "max entrywise deviation " << worst;
    report(6, "S block recurrence equals literal subset enumeration (tol 1e-12)",
           worst <= 1e-12, det.str());
}

// ---- criteria 7 and 8: representation equivalence, single-use -----------

TpmlConfig config_2d_1d(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    PointSet cloud(2);
    for (int i = 0; i < 200; ++i) cloud.add({dist(rng), dist(rng)});
    TpmlConfig config;
    DirectionConfig space;
    space.hierarchy = thin_to_hierarchy(cloud, 3, KernelFamily::wendland_3_1, 5.0);
    DirectionConfig time;
    time.hierarchy = equidistant_hierarchy(0.0, 1.0, 3, KernelFamily::wendland_1_1, 6.0);
    config.directions.push_back(std::move(space));
    config.directions.push_back(std::move(time));
    config.omega = WeightVector::make({1.0, 1.0});
    config.ell = 2;
    return config;
}

TpmlConfig config_1d_1d() {
    TpmlConfig config;
    DirectionConfig a, b;
    a.hierarchy = equidistant_hierarchy(0.0, 1.0, 4, KernelFamily::wendland_1_2, 6.0);
    b.hierarchy = equidistant_hierarchy(-1.0, 1.0, 4, KernelFamily::wendland_1_1, 6.0);
    config.directions.push_back(std::move(a));
    config.directions.push_back(std::move(b));
    config.omega = WeightVector::make({1.0, 1.0});
    config.ell = 3;
    return config;
}

void criteria_representations_and_single_use() {
    std::mt19937_64 rng(7070);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    double worst = 0.0;
    bool single_use_ok = true;
    long long grid_sizes = 0;

    for (int which = 0; which < 2; ++which) {
        TpmlConfig config = which == 0 ? config_2d_1d(rng) : config_1d_1d();
        const int dim = which == 0 ? 3 : 2;
        const SparseGrid grid = required_samples(config);
        SampleTable samples;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const auto p = grid.points[i];
            double v = std::exp(-0.5 * p[0]) * std::sin(3.0 * p[1]);
            if (dim == 3) v *= std::cos(2.0 * p[2]);
            samples.set(p, v);
        }

        config.representation = Representation::efficient;
        const Model eff = fit(config, samples);
        config.representation = Representation::nodal;
        const Model nod = fit(config, samples);
        const NaiveEvaluator naive(config, samples);

        std::vector<double> a, b, c;
        nod.f_reads->store(0);
        long long evals = 0;
        for (int t = 0; t < 100; ++t) {
            std::vector<double> x(dim);
            for (int j = 0; j < dim; ++j)
                x[j] = (which == 1 && j == 1) ? 2.0 * dist(rng) - 1.0 : dist(rng);
            a.push_back(eval(eff, {x.data(), x.size()}));
            b.push_back(eval(nod, {x.data(), x.size()}));
            c.push_back(naive.eval({x.data(), x.size()}));
            ++evals;
        }
        single_use_ok &= nod.f_reads->load() == evals * static_cast<long long>(grid.size());
        grid_sizes += static_cast<long long>(grid.size());

        const double scale = rel_scale(a);
        for (std::size_t i = 0; i < a.size(); ++i)
            worst = std::max({worst, std::abs(a[i] - b[i]) / scale,
                              std::abs(a[i] - c[i]) / scale, std::abs(b[i] - c[i]) / scale});
    }
    std::ostringstream det;
    det << "max pairwise relative difference " << worst;
    report(7, "naive / efficient / nodal representations agree (tol 1e-9)", worst <= 1e-9,
           det.str());
    std::ostringstream det8;
    det8 << "grid sizes total " << grid_sizes;
    report(8, "nodal evaluation reads each data value exactly once", single_use_ok, det8.str());
}

// ---- criterion 9: sinprod3 convergence ----------------------------------

void criterion_convergence() {
    const auto t0 = std::chrono::steady_clock::now();
    const ErrorReport rep = run_convergence("sinprod3", 1, 4, 200, 1);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool ok = rep.rows.size() == 4;
    std::ostringstream det;
    det << "max errors:";
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        det << ' ' << rep.rows[i].max_abs;
        if (i > 0) ok &= rep.rows[i].max_abs < rep.rows[i - 1].max_abs;
    }
    det << " (total " << secs << " s)";
    ok &= secs < 300.0;
    report(9, "sinprod3 study: max error strictly decreasing, runtime bounded", ok, det.str());
}

// ---- criterion 10: CLI round trip ---------------------------------------

void criterion_cli() {
#ifndef TPML_BIN_DIR
    report(10, "CLI round trip", false, "binary location not configured");
    return;
#else
    namespace fs = std::filesystem;
    const std::string bin = std::string(TPML_BIN_DIR) + "/tpml";
    const fs::path dir = fs::temp_directory_path() / "tpml_acceptance";
    fs::create_directories(dir);
    const auto p = [&](const char* name) { return (dir / name).string(); };

    std::ofstream(p("config.json")) << R"({
      "directions": [
        {"dimension": 1, "kernel": "wendland_1_1", "coupling": 6.0,
         "sites": {"equidistant": {"interval": [0, 1], "max_level": 3}}},
        {"dimension": 1, "kernel": "wendland_1_2", "coupling": 6.0,
         "sites": {"equidistant": {"interval": [0, 1], "max_level": 3}}}
      ],
      "weights": [1.0, 1.0],
      "threshold": 2,
      "representation": "efficient"
    })";

    auto run = [&](const std::string& cmd) {
        const int rc = std::system(cmd.c_str());
        return rc == -1 ? -1 : WEXITSTATUS(rc);
    };

    bool ok = true;
    std::string detail;
    do {
        if (run(bin + " grid " + p("config.json") + " -o " + p("grid.csv")) != 0) {
            ok = false;
            detail = "grid command failed";
            break;
        }
        // compute sample values in-process from the emitted grid
        const TpmlConfig config = load_config(p("config.json"));
        const SparseGrid grid = required_samples(config);
        {
            std::ifstream in(p("grid.csv"));
            const CsvTable t = read_csv(in, "grid.csv");
            if (t.rows.size() != grid.size()) {
                ok = false;
                detail = "grid csv row count mismatch";
                break;
            }
            std::ofstream os(p("samples.csv"));
            os << "point_id,value\n";
            for (const auto& row : t.rows) {
                const double x = parse_double(row[1], "grid.csv");
                const double y = parse_double(row[2], "grid.csv");
                os << row[0] << ',' << format_coord(std::sin(2.0 * x) * std::exp(y)) << "\n";
            }
        }
        if (run(bin + " fit " + p("config.json") + " " + p("samples.csv") + " -o " +
                p("model.bin") + " > " + p("fit.log")) != 0) {
            ok = false;
            detail = "fit command failed";
            break;
        }

        std::mt19937_64 rng(1010);
        std::uniform_real_distribution<double> dist(0.0, 1.0);
        PointSet pts(2);
        {
            std::ofstream os(p("points.csv"));
            os << "c1,c2\n";
            for (int i = 0; i < 100; ++i) {
                const double x[2] = {dist(rng), dist(rng)};
                pts.add({x, 2});
                os << format_coord(x[0]) << ',' << format_coord(x[1]) << "\n";
            }
        }
        if (run(bin + " eval " + p("model.bin") + " " + p("points.csv") + " -o " +
                p("values.csv")) != 0) {
            ok = false;
            detail = "eval command failed";
            break;
        }

        // in-memory reference: same config and samples, never serialized
        SampleTable samples;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const auto q = grid.points[i];
            samples.set(q, std::sin(2.0 * q[0]) * std::exp(q[1]));
        }
        const Model model = fit(config, samples);
        const std::vector<double> ref = eval_batch(model, pts, 1);

        std::ifstream in(p("values.csv"));
        const CsvTable vt = read_csv(in, "values.csv");
        if (vt.rows.size() != ref.size()) {
            ok = false;
            detail = "values csv row count mismatch";
            break;
        }
        for (std::size_t i = 0; i < ref.size(); ++i)
            if (parse_double(vt.rows[i][1], "values.csv") != ref[i]) {
                ok = false;
                detail = "CLI value differs from in-memory evaluation";
                break;
            }
        if (!ok) break;

        // the loaded model must also agree bitwise in-process
        const Model loaded = load_model(p("model.bin"));
        for (std::size_t i = 0; i < pts.size(); ++i)
            if (eval(loaded, pts[i]) != ref[i]) {
                ok = false;
                detail = "loaded model differs bitwise";
                break;
            }
        if (!ok) break;

        // corrupted model must be rejected with the data-error exit code
        {
            std::ifstream mi(p("model.bin"), std::ios::binary);
            std::string bytes((std::istreambuf_iterator<char>(mi)),
                              std::istreambuf_iterator<char>());
            bytes[bytes.size() / 2] ^= 0x40;
            std::ofstream mo(p("model_bad.bin"), std::ios::binary);
            mo.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        }
        const int rc = run(bin + " eval " + p("model_bad.bin") + " " + p("points.csv") +
                           " -o " + p("bad.csv") + " 2> " + p("bad.log"));
        if (rc == 0) {
            ok = false;
            detail = "corrupted model was accepted";
            break;
        }
    } while (false);

    report(10, "CLI grid/fit/eval round trip bitwise, corrupted model rejected", ok, detail);
    fs::remove_all(dir);
#endif
}

}  // namespace

int main() {
    try {
        criterion_kernels();
        criterion_index_sets();
        criterion_combination();
        criterion_lagrange();
        criterion_multilevel();
        criterion_s_blocks();
        criteria_representations_and_single_use();
        criterion_convergence();
        criterion_cli();
    } catch (const std::exception& e) {
        std::cerr << "acceptance suite aborted: " << e.what() << "\n";
        return 1;
    }
    if (failures == 0) {
        std::printf("all 10 acceptance criteria passed\n");
        return 0;
    }
    std::printf("%d criteria FAILED\n", failures);
    return 1;
}
