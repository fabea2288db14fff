#pragma once

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "tpml/csv.hpp"
#include "tpml/errors.hpp"
#include "tpml/tpml.hpp"

namespace tpml {

using json = nlohmann::json;

namespace detail {

inline void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                                const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("config: unknown key '" + it.key() + "' in " + where);
}

inline KernelFamily parse_kernel(const std::string& name) {
    if (name == "wendland_1_1") return KernelFamily::wendland_1_1;
    if (name == "wendland_1_2") return KernelFamily::wendland_1_2;
    if (name == "wendland_3_1") return KernelFamily::wendland_3_1;
    throw ConfigError("config: unknown kernel family '" + name +
                      "' (expected wendland_1_1, wendland_1_2 or wendland_3_1)");
}

inline Representation parse_representation(const std::string& name) {
    if (name == "naive") return Representation::naive;
    if (name == "efficient") return Representation::efficient;
    if (name == "nodal") return Representation::nodal;
    throw ConfigError("config: unknown representation '" + name + "'");
}

/// Cloud CSV: header c1..cn, one point per row.
inline PointSet read_cloud_csv(const std::string& path, int dim) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open sites file '" + path + "'");
    CsvTable t = read_csv(in, path);
    if (static_cast<int>(t.header.size()) != dim)
        throw ConfigError("config: sites file '" + path + "' has " +
                          std::to_string(t.header.size()) + " columns, direction needs " +
                          std::to_string(dim));
    PointSet pts(dim);
    std::vector<double> buf(dim);
    for (const auto& row : t.rows) {
        for (int j = 0; j < dim; ++j) buf[j] = parse_double(row[j], path);
        pts.add({buf.data(), buf.size()});
    }
    return pts;
}

/// Explicit per-level sites CSV: header level,c1..cn.
inline std::vector<PointSet> read_leveled_csv(const std::string& path, int dim) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open sites file '" + path + "'");
    CsvTable t = read_csv(in, path);
    if (static_cast<int>(t.header.size()) != dim + 1 || t.header[0] != "level")
        throw ConfigError("config: leveled sites file '" + path +
                          "' must have header level,c1,...,c" + std::to_string(dim));
    std::vector<PointSet> levels;
    for (const auto& row : t.rows) {
        const int lv = static_cast<int>(parse_double(row[0], path));
        if (lv < 1) throw DataError("sites file '" + path + "': level must be >= 1");
        while (static_cast<int>(levels.size()) < lv) levels.emplace_back(dim);
        std::vector<double> buf(dim);
        for (int j = 0; j < dim; ++j) buf[j] = parse_double(row[j + 1], path);
        levels[lv - 1].add({buf.data(), buf.size()});
    }
    for (std::size_t i = 0; i < levels.size(); ++i)
        if (levels[i].empty())
            throw DataError("sites file '" + path + "': level " + std::to_string(i + 1) +
                            " has no points");
    return levels;
}

inline bool is_nested(const std::vector<LevelSites>& levels) {
    for (std::size_t i = 0; i + 1 < levels.size(); ++i) {
        PointIndexMap next(levels[i + 1].points);
        for (std::size_t k = 0; k < levels[i].points.size(); ++k)
            if (next.find(levels[i].points[k]) < 0) return false;
    }
    return true;
}

inline DirectionConfig parse_direction(const json& j, int index) {
    const std::string where = "directions[" + std::to_string(index) + "]";
    if (!j.is_object()) throw ConfigError("config: " + where + " must be an object");
    reject_unknown_keys(j, {"dimension", "kernel", "mode", "coupling", "lambda", "sites"}, where);
    for (const char* key : {"dimension", "kernel", "sites"})
        if (!j.contains(key)) throw ConfigError("config: " + where + " is missing '" + key + "'");

    DirectionConfig dc;
    const int dim = j.at("dimension").get<int>();
    if (dim < 1) throw ConfigError("config: " + where + ".dimension must be >= 1");
    dc.hierarchy.kernel = parse_kernel(j.at("kernel").get<std::string>());
    dc.hierarchy.coupling = j.value("coupling", 4.0);
    if (!(dc.hierarchy.coupling > 0.0))
        throw ConfigError("config: " + where + ".coupling must be positive");

    const std::string mode = j.value("mode", std::string("interpolation"));
    if (mode == "interpolation") {
        dc.mode = SolveMode::interpolation;
    } else if (mode == "penalized_ls") {
        dc.mode = SolveMode::penalized_ls;
        if (!j.contains("lambda") || j.at("lambda").is_null())
            throw ConfigError("config: " + where +
                              ".mode penalized_ls requires an explicit 'lambda' list");
        dc.lambda_reg = j.at("lambda").get<std::vector<double>>();
    } else {
        throw ConfigError("config: " + where + ".mode must be interpolation or penalized_ls");
    }

    const json& sites = j.at("sites");
    if (!sites.is_object() || sites.size() != 1)
        throw ConfigError("config: " + where + ".sites must hold exactly one of "
                          "equidistant | csv | thin");
    if (sites.contains("equidistant")) {
        const json& e = sites.at("equidistant");
        reject_unknown_keys(e, {"interval", "max_level"}, where + ".sites.equidistant");
        if (dim != 1)
            throw ConfigError("config: " + where + ": equidistant sites require dimension 1");
        const auto interval = e.at("interval").get<std::vector<double>>();
        if (interval.size() != 2)
            throw ConfigError("config: " + where + ".sites.equidistant.interval needs [a, b]");
        const int max_level = e.at("max_level").get<int>();
        auto h = equidistant_hierarchy(interval[0], interval[1], max_level, dc.hierarchy.kernel,
                                       dc.hierarchy.coupling);
        h.kernel = dc.hierarchy.kernel;
        h.coupling = dc.hierarchy.coupling;
        dc.hierarchy = std::move(h);
    } else if (sites.contains("thin")) {
        const json& t = sites.at("thin");
        reject_unknown_keys(t, {"csv", "levels", "ratio"}, where + ".sites.thin");
        const PointSet cloud = read_cloud_csv(t.at("csv").get<std::string>(), dim);
        auto h = thin_to_hierarchy(cloud, t.at("levels").get<int>(), dc.hierarchy.kernel,
                                   dc.hierarchy.coupling, t.value("ratio", 0.5));
        dc.hierarchy = std::move(h);
    } else if (sites.contains("csv")) {
        auto levels = read_leveled_csv(sites.at("csv").get<std::string>(), dim);
        DirectionHierarchy h;
        h.kernel = dc.hierarchy.kernel;
        h.coupling = dc.hierarchy.coupling;
        for (auto& pts : levels) {
            LevelSites ls;
            ls.points = std::move(pts);
            ls.q = (ls.points.size() >= 2) ? separation_distance(ls.points) : 1.0;
            ls.epsilon = h.coupling * ls.q;
            ls.build_index();
            h.levels.push_back(std::move(ls));
        }
        h.nested = is_nested(h.levels);
        if (h.nested) first_occurrence_maps(h);
        dc.hierarchy = std::move(h);
    } else {
        throw ConfigError("config: " + where + ".sites must hold one of equidistant | csv | thin");
    }
    return dc;
}

}  // namespace detail

/// Parse and validate a config document. Unknown keys are rejected.
inline TpmlConfig parse_config(const json& doc) {
    if (!doc.is_object()) throw ConfigError("config: document must be a JSON object");
    detail::reject_unknown_keys(
        doc, {"directions", "weights", "threshold", "representation", "cost_guard", "solver"},
        "document root");
    for (const char* key : {"directions", "weights", "threshold"})
        if (!doc.contains(key)) throw ConfigError("config: missing '" + std::string(key) + "'");

    TpmlConfig config;
    const json& dirs = doc.at("directions");
    if (!dirs.is_array() || dirs.empty())
        throw ConfigError("config: 'directions' must be a nonempty array");
    for (std::size_t i = 0; i < dirs.size(); ++i)
        config.directions.push_back(detail::parse_direction(dirs[i], static_cast<int>(i)));

    auto weights = doc.at("weights").get<std::vector<double>>();
    if (weights.size() != config.directions.size())
        throw ConfigError("config: 'weights' has " + std::to_string(weights.size()) +
                          " entries for " + std::to_string(config.directions.size()) +
                          " directions");
    config.omega = WeightVector::make(std::move(weights));

    config.ell = doc.at("threshold").get<int>();
    if (config.ell < 0) throw ConfigError("config: 'threshold' must be >= 0");
    config.representation =
        detail::parse_representation(doc.value("representation", std::string("efficient")));
    config.cost_guard = doc.value("cost_guard", 1e8);
    if (doc.contains("solver")) {
        const json& s = doc.at("solver");
        detail::reject_unknown_keys(s, {"cg_tolerance", "cg_max_iter_factor"}, "solver");
        config.solver.cg_tolerance = s.value("cg_tolerance", config.solver.cg_tolerance);
        config.solver.cg_max_iter_factor =
            s.value("cg_max_iter_factor", config.solver.cg_max_iter_factor);
    }
    return config;
}

inline TpmlConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ConfigError("config: invalid JSON in '" + path + "': " + e.what());
    }
    return parse_config(doc);
}

}  // namespace tpml
