#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tpml/config_io.hpp"
#include "tpml/errors.hpp"
#include "tpml/tpml.hpp"

namespace tpml {

/// Binary model container: magic "TPMLMDL1", version, config hash, an
/// embedded logical-config JSON, and a self-describing table of contents of
/// little-endian float64 arrays. A loaded model reproduces evaluation results
/// bitwise because every evaluation-relevant array is stored, none recomputed
/// through floating-point work.
namespace model_file {

inline constexpr char kMagic[8] = {'T', 'P', 'M', 'L', 'M', 'D', 'L', '1'};
inline constexpr uint32_t kVersion = 1;

struct Entry {
    std::string name;
    std::vector<uint64_t> dims;
    std::vector<double> values;
};

inline uint64_t fnv1a(const char* data, std::size_t n) {
    uint64_t h = 1469598103934665603ull;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= static_cast<unsigned char>(data[i]);
        h *= 1099511628211ull;
    }
    return h;
}

inline uint64_t fnv1a(const std::string& s) { return fnv1a(s.data(), s.size()); }

template <typename T>
void write_pod(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const std::string& what) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw DataError("model file: truncated while reading " + what);
    return v;
}

/// Serializes into a buffer first so a checksum of the whole payload can be
/// appended; any single flipped byte in the file is then detectable.
inline void write(std::ostream& out, const std::string& config_json,
                  const std::vector<Entry>& entries) {
    std::ostringstream os(std::ios::binary);
    os.write(kMagic, sizeof(kMagic));
    write_pod<uint32_t>(os, kVersion);
    write_pod<uint64_t>(os, fnv1a(config_json));
    write_pod<uint32_t>(os, static_cast<uint32_t>(config_json.size()));
    os.write(config_json.data(), static_cast<std::streamsize>(config_json.size()));

    // table of contents with absolute offsets
    uint64_t offset = static_cast<uint64_t>(os.tellp()) + sizeof(uint64_t);
    for (const auto& e : entries) {
        offset += sizeof(uint32_t) + e.name.size() + sizeof(uint32_t) +
                  e.dims.size() * sizeof(uint64_t) + sizeof(uint64_t);
    }
    write_pod<uint64_t>(os, static_cast<uint64_t>(entries.size()));
    uint64_t data_at = offset;
    for (const auto& e : entries) {
        write_pod<uint32_t>(os, static_cast<uint32_t>(e.name.size()));
        os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        write_pod<uint32_t>(os, static_cast<uint32_t>(e.dims.size()));
        for (uint64_t d : e.dims) write_pod<uint64_t>(os, d);
        write_pod<uint64_t>(os, data_at);
        data_at += e.values.size() * sizeof(double);
    }
    for (const auto& e : entries)
        os.write(reinterpret_cast<const char*>(e.values.data()),
                 static_cast<std::streamsize>(e.values.size() * sizeof(double)));

    const std::string body = os.str();
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    write_pod<uint64_t>(out, fnv1a(body.data(), body.size()));
}

struct Contents {
    std::string config_json;
    uint64_t config_hash = 0;
    std::map<std::string, Entry> entries;

    const Entry& at(const std::string& name) const {
        auto it = entries.find(name);
        if (it == entries.end()) throw DataError("model file: missing array '" + name + "'");
        return it->second;
    }
    bool has(const std::string& name) const { return entries.count(name) > 0; }
};

inline Contents read(std::istream& in) {
    std::string file((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (file.size() < sizeof(kMagic) + sizeof(uint64_t))
        throw DataError("model file: too short to be a TPMLMDL1 file");
    const std::size_t body_len = file.size() - sizeof(uint64_t);
    uint64_t stored = 0;
    std::memcpy(&stored, file.data() + body_len, sizeof(stored));
    if (fnv1a(file.data(), body_len) != stored)
        throw DataError("model file: payload checksum mismatch, file is corrupted");
    std::istringstream is(file.substr(0, body_len), std::ios::binary);

    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw DataError("model file: bad magic, not a TPMLMDL1 file");
    const auto version = read_pod<uint32_t>(is, "version");
    if (version != kVersion)
        throw DataError("model file: unsupported format version " + std::to_string(version));

    Contents c;
    c.config_hash = read_pod<uint64_t>(is, "config hash");
    const auto cfg_len = read_pod<uint32_t>(is, "config length");
    c.config_json.resize(cfg_len);
    is.read(c.config_json.data(), cfg_len);
    if (!is) throw DataError("model file: truncated config block");
    if (fnv1a(c.config_json) != c.config_hash)
        throw DataError("model file: config hash mismatch, file is corrupted");

    const auto count = read_pod<uint64_t>(is, "toc count");
    struct Raw {
        std::string name;
        std::vector<uint64_t> dims;
        uint64_t offset;
        uint64_t size;
    };
    std::vector<Raw> raws;
    for (uint64_t i = 0; i < count; ++i) {
        Raw r;
        const auto nlen = read_pod<uint32_t>(is, "toc name length");
        if (nlen > (1u << 20)) throw DataError("model file: implausible toc entry");
        r.name.resize(nlen);
        is.read(r.name.data(), nlen);
        const auto ndims = read_pod<uint32_t>(is, "toc rank");
        if (ndims > 16) throw DataError("model file: implausible array rank");
        r.size = 1;
        for (uint32_t k = 0; k < ndims; ++k) {
            r.dims.push_back(read_pod<uint64_t>(is, "toc dims"));
            r.size *= r.dims.back();
        }
        r.offset = read_pod<uint64_t>(is, "toc offset");
        raws.push_back(std::move(r));
    }
    for (const auto& r : raws) {
        is.seekg(static_cast<std::streamoff>(r.offset));
        Entry e;
        e.name = r.name;
        e.dims = r.dims;
        e.values.resize(r.size);
        is.read(reinterpret_cast<char*>(e.values.data()),
                static_cast<std::streamsize>(r.size * sizeof(double)));
        if (!is) throw DataError("model file: truncated array '" + r.name + "'");
        c.entries.emplace(e.name, std::move(e));
    }
    return c;
}

}  // namespace model_file

namespace detail {

inline nlohmann::json logical_config_json(const Model& model) {
    const TpmlConfig& c = model.config;
    nlohmann::json doc;
    doc["weights"] = c.omega.omega;
    doc["threshold"] = c.ell;
    doc["representation"] = to_string(c.representation);
    doc["cost_guard"] = c.cost_guard;
    doc["solver"] = {{"cg_tolerance", c.solver.cg_tolerance},
                     {"cg_max_iter_factor", c.solver.cg_max_iter_factor}};
    doc["directions"] = nlohmann::json::array();
    for (std::size_t j = 0; j < c.directions.size(); ++j) {
        const auto& dc = c.directions[j];
        nlohmann::json d;
        d["dimension"] = dc.hierarchy.dim();
        d["kernel"] = to_string(dc.hierarchy.kernel);
        d["mode"] = dc.mode == SolveMode::interpolation ? "interpolation" : "penalized_ls";
        d["coupling"] = dc.hierarchy.coupling;
        d["lambda"] = dc.lambda_reg;
        d["nested"] = dc.hierarchy.nested;
        d["levels"] = model.lam_max[j];
        doc["directions"].push_back(std::move(d));
    }
    return doc;
}

inline std::vector<double> to_flat(const Eigen::MatrixXd& m) {
    std::vector<double> out(static_cast<std::size_t>(m.rows()) * m.cols());
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            out[static_cast<std::size_t>(r) * m.cols() + c] = m(r, c);
    return out;
}

inline Eigen::MatrixXd from_flat(const model_file::Entry& e) {
    if (e.dims.size() != 2) throw DataError("model file: array '" + e.name + "' is not a matrix");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(e.dims[0]), static_cast<Eigen::Index>(e.dims[1]));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            m(r, c) = e.values[static_cast<std::size_t>(r) * m.cols() + c];
    return m;
}

}  // namespace detail

inline void save_model(const Model& model, std::ostream& os) {
    using model_file::Entry;
    std::vector<Entry> entries;
    const int d = model.config.d();

    for (int j = 0; j < d; ++j) {
        const auto& h = model.config.directions[j].hierarchy;
        const std::string dj = "dir" + std::to_string(j) + "/";
        for (int i = 1; i <= model.lam_max[j]; ++i) {
            const auto& ls = h.level(i);
            const std::string li = dj + "level" + std::to_string(i) + "/";
            entries.push_back({li + "points",
                               {ls.points.size(), static_cast<uint64_t>(ls.points.dim())},
                               ls.points.data()});
            entries.push_back({li + "meta", {2}, {ls.q, ls.epsilon}});
        }
        if (model.rep == Representation::efficient) {
            for (int m = 1; m <= model.lam_max[j]; ++m)
                for (int p = m; p <= model.lam_max[j]; ++p) {
                    const auto& W = model.dirs[j].W.at(m, p);
                    entries.push_back({dj + "W/" + std::to_string(m) + "/" + std::to_string(p),
                                       {static_cast<uint64_t>(W.rows()),
                                        static_cast<uint64_t>(W.cols())},
                                       detail::to_flat(W)});
                }
        } else {
            for (std::size_t t = 0; t < model.nodal[j].size(); ++t) {
                const auto& w = model.nodal[j][t];
                const std::string nt = dj + "nodal/" + std::to_string(t) + "/";
                entries.push_back({nt + "meta", {2},
                                   {static_cast<double>(w.first_level),
                                    static_cast<double>(w.finest_index)}});
                for (std::size_t p = 0; p < w.coeffs.size(); ++p)
                    entries.push_back({nt + "coef" + std::to_string(w.first_level + p),
                                       {static_cast<uint64_t>(w.coeffs[p].size())},
                                       std::vector<double>(w.coeffs[p].data(),
                                                           w.coeffs[p].data() + w.coeffs[p].size())});
            }
        }
    }

    if (model.rep == Representation::efficient) {
        for (std::size_t t = 0; t < model.tensors.size(); ++t) {
            const auto& st = model.tensors[t];
            const std::string base = "tensor/" + std::to_string(t) + "/";
            entries.push_back({base + "levels", {st.levels.size()},
                               std::vector<double>(st.levels.begin(), st.levels.end())});
            entries.push_back({base + "values", {st.values.size()}, st.values});
        }
    } else {
        entries.push_back({"grid/f", {model.f_values.size()}, model.f_values});
    }

    model_file::write(os, detail::logical_config_json(model).dump(), entries);
}

inline void save_model(const Model& model, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open '" + path + "' for writing");
    save_model(model, os);
    if (!os) throw DataError("failed while writing '" + path + "'");
}

inline Model load_model(std::istream& is) {
    const model_file::Contents file = model_file::read(is);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(file.config_json);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("model file: embedded config is invalid: ") + e.what());
    }

    Model model;
    model.config.omega = WeightVector::make(doc.at("weights").get<std::vector<double>>());
    model.config.ell = doc.at("threshold").get<int>();
    model.config.representation =
        doc.at("representation") == "nodal" ? Representation::nodal : Representation::efficient;
    model.config.cost_guard = doc.at("cost_guard").get<double>();
    model.config.solver.cg_tolerance = doc.at("solver").at("cg_tolerance").get<double>();
    model.config.solver.cg_max_iter_factor = doc.at("solver").at("cg_max_iter_factor").get<int>();
    model.rep = model.config.representation;

    const auto& dirs = doc.at("directions");
    const int d = static_cast<int>(dirs.size());
    for (int j = 0; j < d; ++j) {
        const auto& dj = dirs[j];
        DirectionConfig dc;
        dc.hierarchy.kernel = detail::parse_kernel(dj.at("kernel").get<std::string>());
        dc.hierarchy.coupling = dj.at("coupling").get<double>();
        dc.hierarchy.nested = dj.at("nested").get<bool>();
        dc.mode = dj.at("mode") == "penalized_ls" ? SolveMode::penalized_ls
                                                  : SolveMode::interpolation;
        dc.lambda_reg = dj.at("lambda").get<std::vector<double>>();
        const int dim = dj.at("dimension").get<int>();
        const int levels = dj.at("levels").get<int>();
        const std::string base = "dir" + std::to_string(j) + "/";
        for (int i = 1; i <= levels; ++i) {
            const std::string li = base + "level" + std::to_string(i) + "/";
            const auto& pts = file.at(li + "points");
            const auto& meta = file.at(li + "meta");
            if (pts.dims.size() != 2 || static_cast<int>(pts.dims[1]) != dim)
                throw DataError("model file: bad site array shape in " + li);
            LevelSites ls;
            ls.points = PointSet(dim);
            ls.points.data() = pts.values;
            ls.q = meta.values.at(0);
            ls.epsilon = meta.values.at(1);
            ls.build_index();
            dc.hierarchy.levels.push_back(std::move(ls));
        }
        if (dc.hierarchy.nested) first_occurrence_maps(dc.hierarchy);
        model.config.directions.push_back(std::move(dc));
    }

    model.lam_max = model.config.lambda_maxima();
    for (int j = 0; j < d; ++j)
        if (model.config.directions[j].hierarchy.depth() < model.lam_max[j])
            throw DataError("model file: direction " + std::to_string(j + 1) +
                            " is missing levels");

    model.surface = enumerate_surface(model.config.omega, model.config.ell);
    model.surface_weight.assign(model.surface.size(), 0.0);
    {
        const auto pairs = combination_pairs(model.config.omega, model.config.ell);
        const double sd = (d % 2 == 0) ? 1.0 : -1.0;
        std::map<MultiIndex, int> pos;
        for (std::size_t s = 0; s < model.surface.size(); ++s)
            pos[model.surface[s]] = static_cast<int>(s);
        for (const auto& p : pairs) model.surface_weight[pos.at(p.lambda)] += sd * p.sign;
    }

    for (int j = 0; j < d; ++j) {
        DirectionOperator op;
        op.hierarchy = &model.config.directions[j].hierarchy;
        op.depth = model.lam_max[j];
        for (int i = 1; i <= op.depth; ++i)
            op.level_sizes.push_back(
                static_cast<int>(model.config.directions[j].hierarchy.level(i).points.size()));
        const std::string base = "dir" + std::to_string(j) + "/";
        if (model.rep == Representation::efficient) {
            op.W = LevelPairStore(op.depth);
            for (int m = 1; m <= op.depth; ++m)
                for (int p = m; p <= op.depth; ++p)
                    op.W.at(m, p) = detail::from_flat(
                        file.at(base + "W/" + std::to_string(m) + "/" + std::to_string(p)));
        } else {
            std::vector<NodalWeightFunction> ws;
            for (std::size_t t = 0;; ++t) {
                const std::string nt = base + "nodal/" + std::to_string(t) + "/";
                if (!file.has(nt + "meta")) break;
                NodalWeightFunction w;
                const auto& meta = file.at(nt + "meta");
                w.first_level = static_cast<int>(meta.values.at(0));
                w.finest_index = static_cast<int>(meta.values.at(1));
                for (int p = w.first_level; p <= op.depth; ++p) {
                    const auto& c = file.at(nt + "coef" + std::to_string(p));
                    w.coeffs.push_back(Eigen::Map<const Eigen::VectorXd>(
                        c.values.data(), static_cast<Eigen::Index>(c.values.size())));
                }
                ws.push_back(std::move(w));
            }
            const std::size_t expect =
                model.config.directions[j].hierarchy.level(op.depth).points.size();
            if (ws.size() != expect)
                throw DataError("model file: nodal weight count mismatch in direction " +
                                std::to_string(j + 1));
            model.nodal.push_back(std::move(ws));
        }
        model.dirs.push_back(std::move(op));
    }
    // hierarchy pointers must refer to the final config storage
    for (int j = 0; j < d; ++j)
        model.dirs[j].hierarchy = &model.config.directions[j].hierarchy;

    if (model.rep == Representation::efficient) {
        for (std::size_t t = 0;; ++t) {
            const std::string base = "tensor/" + std::to_string(t) + "/";
            if (!file.has(base + "levels")) break;
            SampleTensor st;
            for (double v : file.at(base + "levels").values) st.levels.push_back(static_cast<int>(v));
            for (int j = 0; j < d; ++j)
                st.dims.push_back(static_cast<int>(
                    model.config.directions[j].hierarchy.level(st.levels[j]).points.size()));
            st.values = file.at(base + "values").values;
            std::size_t total = 1;
            for (int n : st.dims) total *= static_cast<std::size_t>(n);
            if (st.values.size() != total)
                throw DataError("model file: tensor " + std::to_string(t) + " has wrong size");
            model.tensor_of[st.levels] = static_cast<int>(model.tensors.size());
            model.tensors.push_back(std::move(st));
        }
        // every index-set member must have its tensor
        for (const auto& lambda : enumerate_index_set(model.config.omega, model.config.ell))
            if (!model.tensor_of.count(lambda))
                throw DataError("model file: missing sample tensor for an index-set member");
    } else {
        std::vector<DirectionHierarchy> hs;
        for (const auto& dc : model.config.directions) hs.push_back(dc.hierarchy);
        model.grid = sparse_grid_points(hs, model.config.omega, model.config.ell, true);
        model.f_values = file.at("grid/f").values;
        if (model.f_values.size() != model.grid.size())
            throw DataError("model file: grid value count mismatch");
    }
    return model;
}

inline Model load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open model file '" + path + "'");
    return load_model(is);
}

}  // namespace tpml
