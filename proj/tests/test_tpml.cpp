#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "tpml/tpml.hpp"

using namespace tpml;

namespace {

TpmlConfig two_dir_config(int ell, int depth, double coupling = 6.0) {
    TpmlConfig config;
    DirectionConfig a, b;
    a.hierarchy = equidistant_hierarchy(0.0, 1.0, depth, KernelFamily::wendland_1_1, coupling);
    b.hierarchy = equidistant_hierarchy(0.0, 1.0, depth, KernelFamily::wendland_1_2, coupling);
    config.directions.push_back(std::move(a));
    config.directions.push_back(std::move(b));
    config.omega = WeightVector::make({1.0, 1.0});
    config.ell = ell;
    return config;
}

double target2(std::span<const double> p) {
    return std::sin(3.0 * p[0]) * std::exp(-p[1]) + 0.25 * p[0] * p[1];
}

SampleTable sample_target(const TpmlConfig& config, double (*f)(std::span<const double>)) {
    const SparseGrid grid = required_samples(config);
    SampleTable samples;
    for (std::size_t i = 0; i < grid.size(); ++i) samples.set(grid.points[i], f(grid.points[i]));
    return samples;
}

}  // namespace

TEST_CASE("required samples: counts and determinism") {
    const TpmlConfig config = two_dir_config(1, 2);
    const SparseGrid g1 = required_samples(config);
    CHECK(g1.size() == 21);  // |3x5 union 5x3|
    const SparseGrid g2 = required_samples(config);
    REQUIRE(g1.size() == g2.size());
    for (std::size_t i = 0; i < g1.size(); ++i)
        CHECK(coord_key(g1.points[i]) == coord_key(g2.points[i]));

    TpmlConfig shallow = two_dir_config(3, 2);  // needs level 4, has 2
    CHECK_THROWS_AS(required_samples(shallow), ConfigError);
}

TEST_CASE("fit validates inputs") {
    TpmlConfig config = two_dir_config(1, 2);
    SampleTable empty;
    CHECK_THROWS_AS(fit(config, empty), DataError);

    config.representation = Representation::naive;
    const SampleTable samples = sample_target(two_dir_config(1, 2), target2);
    CHECK_THROWS_AS(fit(config, samples), ConfigError);
}

TEST_CASE("three representations agree at random points") {
    TpmlConfig config = two_dir_config(2, 3);
    const SampleTable samples = sample_target(config, target2);

    config.representation = Representation::efficient;
    const Model eff = fit(config, samples);
    config.representation = Representation::nodal;
    const Model nod = fit(config, samples);
    const NaiveEvaluator naive(config, samples);

    std::mt19937_64 rng(131);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    double scale = 1.0;
    for (int t = 0; t < 100; ++t) {
        const double x[2] = {dist(rng), dist(rng)};
        const double a = eval(eff, {x, 2});
        const double b = eval(nod, {x, 2});
        const double c = naive.eval({x, 2});
        scale = std::max(scale, std::abs(a));
        CHECK(std::abs(a - b) <= 1e-9 * scale);
        CHECK(std::abs(a - c) <= 1e-9 * scale);
    }
}

TEST_CASE("wrong-representation eval entry points are rejected") {
    TpmlConfig config = two_dir_config(1, 2);
    const SampleTable samples = sample_target(config, target2);
    const Model eff = fit(config, samples);
    const double x[2] = {0.5, 0.5};
    CHECK_THROWS_AS(eval_nodal(eff, {x, 2}), CapabilityError);
    const double bad[3] = {0.5, 0.5, 0.5};
    CHECK_THROWS_AS(eval(eff, {bad, 3}), ShapeError);
}

TEST_CASE("nodal evaluation reads every sample exactly once") {
    TpmlConfig config = two_dir_config(2, 3);
    config.representation = Representation::nodal;
    const SampleTable samples = sample_target(config, target2);
    const Model model = fit(config, samples);
    const std::size_t H = model.grid.size();
    REQUIRE(H > 0);

    model.f_reads->store(0);
    const double x[2] = {0.37, 0.81};
    (void)eval(model, {x, 2});
    CHECK(model.f_reads->load() == static_cast<long long>(H));
    (void)eval(model, {x, 2});
    (void)eval(model, {x, 2});
    CHECK(model.f_reads->load() == static_cast<long long>(3 * H));
}

TEST_CASE("evaluation is linear in the data") {
    TpmlConfig config = two_dir_config(1, 2);
    const SparseGrid grid = required_samples(config);
    std::mt19937_64 rng(141);
    std::normal_distribution<double> gauss(0.0, 1.0);
    SampleTable s1, s2, s12;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double v1 = gauss(rng), v2 = gauss(rng);
        s1.set(grid.points[i], v1);
        s2.set(grid.points[i], v2);
        s12.set(grid.points[i], 2.0 * v1 - 3.0 * v2);
    }
    const Model m1 = fit(config, s1), m2 = fit(config, s2), m12 = fit(config, s12);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (int t = 0; t < 50; ++t) {
        const double x[2] = {dist(rng), dist(rng)};
        const double lhs = eval(m12, {x, 2});
        const double rhs = 2.0 * eval(m1, {x, 2}) - 3.0 * eval(m2, {x, 2});
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-11));
    }
}

TEST_CASE("zero data fits the zero function") {
    TpmlConfig config = two_dir_config(2, 3);
    const SparseGrid grid = required_samples(config);
    SampleTable zeros;
    for (std::size_t i = 0; i < grid.size(); ++i) zeros.set(grid.points[i], 0.0);
    const Model model = fit(config, zeros);
    std::mt19937_64 rng(151);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (int t = 0; t < 20; ++t) {
        const double x[2] = {dist(rng), dist(rng)};
        CHECK(eval(model, {x, 2}) == 0.0);
    }
}

TEST_CASE("batch evaluation is identical across thread counts") {
    TpmlConfig config = two_dir_config(2, 3);
    const SampleTable samples = sample_target(config, target2);
    const Model model = fit(config, samples);
    std::mt19937_64 rng(161);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    PointSet pts(2);
    for (int i = 0; i < 64; ++i) pts.add({dist(rng), dist(rng)});
    const auto seq = eval_batch(model, pts, 1);
    for (int threads : {2, 4, 7}) {
        const auto par = eval_batch(model, pts, threads);
        REQUIRE(par.size() == seq.size());
        for (std::size_t i = 0; i < seq.size(); ++i) CHECK(par[i] == seq[i]);
    }
}

TEST_CASE("cost guard refuses oversized naive evaluations") {
    TpmlConfig config = two_dir_config(2, 3);
    config.cost_guard = 10.0;
    const SampleTable samples = sample_target(config, target2);
    const NaiveEvaluator naive(config, samples);
    CHECK(naive.estimated_terms() > 10.0);
    const double x[2] = {0.5, 0.5};
    CHECK_THROWS_AS(naive.eval({x, 2}), CostGuardError);
}

TEST_CASE("nodal representation requires nested hierarchies") {
    TpmlConfig config;
    DirectionConfig a;
    a.hierarchy = equidistant_hierarchy(0.0, 1.0, 2, KernelFamily::wendland_1_1, 4.0);
    DirectionConfig b;
    // two unrelated scattered levels, not nested
    for (int i = 1; i <= 2; ++i) {
        LevelSites ls;
        ls.points = PointSet(1);
        for (int k = 0; k <= 4 * i; ++k) ls.points.add({(k + 0.25 * i) / (4.0 * i + 1.0)});
        ls.q = separation_distance(ls.points);
        ls.epsilon = 5.0 * ls.q;
        b.hierarchy.levels.push_back(std::move(ls));
    }
    b.hierarchy.nested = false;
    config.directions.push_back(std::move(a));
    config.directions.push_back(std::move(b));
    config.omega = WeightVector::make({1.0, 1.0});
    config.ell = 1;
    config.representation = Representation::efficient;

    const SparseGrid grid = required_samples(config);
    SampleTable samples;
    for (std::size_t i = 0; i < grid.size(); ++i)
        samples.set(grid.points[i], target2(grid.points[i]));

    TpmlConfig nodal_cfg = config;
    nodal_cfg.representation = Representation::nodal;
    CHECK_THROWS_AS(fit(nodal_cfg, samples), CapabilityError);

    // efficient and naive still work and agree
    config.representation = Representation::efficient;
    const Model eff = fit(config, samples);
    const NaiveEvaluator naive(config, samples);
    std::mt19937_64 rng(171);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (int t = 0; t < 40; ++t) {
        const double x[2] = {dist(rng), dist(rng)};
        const double a1 = eval(eff, {x, 2});
        const double a2 = naive.eval({x, 2});
        CHECK(a1 == doctest::Approx(a2).epsilon(1e-10));
    }
}

TEST_CASE("anisotropic weights change the required grid") {
    TpmlConfig config = two_dir_config(2, 3);
    config.omega = WeightVector::make({1.0, 2.0});
    const SparseGrid grid = required_samples(config);
    // I = {(1,1),(1,2),(2,1),(3,1)}: (3,1) covers 9x3 = 27, and (1,2) adds
    // the 3 coarse x values against the 2 new y values
    CHECK(grid.size() == 27 + 3 * 2);
    const auto lm = config.lambda_maxima();
    CHECK(lm == std::vector<int>{3, 2});
}

TEST_CASE("sample table counts reads and keys exactly") {
    SampleTable t;
    const double p[2] = {0.1, 0.2};
    t.set({p, 2}, 7.0);
    CHECK(t.size() == 1);
    CHECK(t.contains({p, 2}));
    CHECK(t.reads() == 0);
    CHECK(t.at({p, 2}) == 7.0);
    CHECK(t.reads() == 1);
    const double q[2] = {0.1, 0.2000000000000001};
    CHECK(!t.contains({q, 2}));
    CHECK_THROWS_AS(t.at({q, 2}), DataError);
    t.reset_reads();
    CHECK(t.reads() == 0);
}
