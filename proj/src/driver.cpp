#include "ms/driver.hpp"

#include "ms/adaptivity.hpp"
#include "ms/dg.hpp"
#include "ms/gmsfem.hpp"
#include "ms/homogenization.hpp"
#include "ms/mixed.hpp"
#include "ms/msfem.hpp"
#include "ms/online.hpp"

#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <set>

namespace ms {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed,
                const std::string& where) {
    if (!j.is_object())
        throw std::invalid_argument("config: " + where + " must be an object");
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key))
            throw std::invalid_argument("config: unknown key '" + key +
                                        "' in " + where);
}

template <typename T> void get_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void validate(const ExperimentConfig& c) {
    auto fail = [](const std::string& m) {
        throw std::invalid_argument("config: " + m);
    };
    if (c.nx < 1 || c.ny < 1 || c.refine < 1) fail("grid sizes must be >= 1");
    static const std::set<std::string> methods{
        "homogenize", "msfem", "gmsfem", "adapt", "online", "mixed", "dg"};
    if (!methods.count(c.method)) fail("unknown method '" + c.method + "'");
    if (c.l < 0) fail("l must be >= 0");
    if (c.sweep < 0) fail("sweep must be >= 0");
    if (!(c.theta > 0.0 && c.theta <= 1.0)) fail("theta must be in (0, 1]");
    if (c.tol < 0) fail("tol must be >= 0");
    if (c.max_iter < 1) fail("max_iter must be >= 1");
    if (c.increment < 1) fail("increment must be >= 1");
    if (c.buffer < 0) fail("buffer must be >= 0");
    if (c.threads < 1) fail("threads must be >= 1");
    if (c.variant != "linear" && c.variant != "oversampled")
        fail("variant must be linear or oversampled");
    if (c.pou != "ms" && c.pou != "linear") fail("pou must be ms or linear");
    snapshot_kind_from_string(c.snapshots); // throws on unknown kinds
    data_function(c.bc);
    data_function(c.f);
}

json to_json(const ExperimentConfig& c) {
    json j;
    j["grid"] = {{"nx", c.nx}, {"ny", c.ny}, {"refine", c.refine}};
    j["field"] = {{"kind", c.field.kind},
                  {"value", c.field.value},
                  {"contrast", c.field.contrast},
                  {"period", c.field.period},
                  {"num_channels", c.field.num_channels},
                  {"num_inclusions", c.field.num_inclusions},
                  {"seed", c.field.seed},
                  {"path", c.field.path}};
    j["method"] = c.method;
    j["options"] = {{"snapshots", c.snapshots}, {"variant", c.variant},
                    {"pou", c.pou},             {"l", c.l},
                    {"sweep", c.sweep},         {"layers", c.layers},
                    {"buffer", c.buffer},       {"theta", c.theta},
                    {"tol", c.tol},             {"max_iter", c.max_iter},
                    {"increment", c.increment}, {"gamma", c.gamma},
                    {"dump_basis", c.dump_basis}};
    j["bc"] = c.bc;
    j["f"] = c.f;
    j["seed"] = c.seed;
    return j;
}

int effective_layers(const GridHierarchy& g, int layers) {
    return layers < 0 ? g.default_layers() : layers;
}

GmsfemOptions gms_options(const ExperimentConfig& c) {
    GmsfemOptions o;
    o.kind = snapshot_kind_from_string(c.snapshots);
    o.l = c.l;
    o.layers = c.layers;
    o.buffer = c.buffer;
    o.seed = c.seed;
    o.pou = c.pou == "ms" ? PouKind::Ms : PouKind::Linear;
    return o;
}

std::vector<int> sweep_values(const ExperimentConfig& c) {
    if (c.sweep <= 0) return {c.l};
    std::vector<int> ls(c.sweep);
    for (int k = 0; k < c.sweep; ++k) ls[k] = k + 1;
    return ls;
}

} // namespace

std::function<double(Eigen::Vector2d)> data_function(const std::string& name) {
    if (name == "zero") return [](Eigen::Vector2d) { return 0.0; };
    if (name == "one") return [](Eigen::Vector2d) { return 1.0; };
    if (name == "x") return [](Eigen::Vector2d p) { return p.x(); };
    if (name == "y") return [](Eigen::Vector2d p) { return p.y(); };
    if (name == "xy") return [](Eigen::Vector2d p) { return p.x() * p.y(); };
    if (name == "localized")
        return [](Eigen::Vector2d p) {
            return std::exp(-100.0 * (p - Eigen::Vector2d(0.5, 0.5)).squaredNorm());
        };
    if (name == "balanced")
        return [](Eigen::Vector2d p) { return p.x() < 0.5 ? 1.0 : -1.0; };
    throw std::invalid_argument("config: unknown data function '" + name + "'");
}

std::string ExperimentConfig::canonical() const { return to_json(*this).dump(); }

ExperimentConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: bad JSON: ") + e.what());
    }
    ExperimentConfig c;
    try {
        check_keys(j, {"grid", "field", "method", "options", "bc", "f", "seed",
                       "out_dir", "threads"},
                   "top level");
        get_if(j, "seed", c.seed);
        get_if(j, "out_dir", c.out_dir);
        get_if(j, "threads", c.threads);
        get_if(j, "method", c.method);
        get_if(j, "bc", c.bc);
        get_if(j, "f", c.f);
        if (j.contains("grid")) {
            const json& g = j.at("grid");
            check_keys(g, {"nx", "ny", "refine"}, "grid");
            get_if(g, "nx", c.nx);
            get_if(g, "ny", c.ny);
            get_if(g, "refine", c.refine);
        }
        c.field.seed = c.seed;
        if (j.contains("field")) {
            const json& f = j.at("field");
            check_keys(f,
                       {"kind", "value", "contrast", "period", "num_channels",
                        "num_inclusions", "seed", "path"},
                       "field");
            get_if(f, "kind", c.field.kind);
            get_if(f, "value", c.field.value);
            get_if(f, "contrast", c.field.contrast);
            get_if(f, "period", c.field.period);
            get_if(f, "num_channels", c.field.num_channels);
            get_if(f, "num_inclusions", c.field.num_inclusions);
            get_if(f, "seed", c.field.seed);
            get_if(f, "path", c.field.path);
        }
        if (j.contains("options")) {
            const json& o = j.at("options");
            check_keys(o,
                       {"snapshots", "variant", "pou", "l", "sweep", "layers",
                        "buffer", "theta", "tol", "max_iter", "increment",
                        "gamma", "dump_basis"},
                       "options");
            get_if(o, "snapshots", c.snapshots);
            get_if(o, "variant", c.variant);
            get_if(o, "pou", c.pou);
            get_if(o, "l", c.l);
            get_if(o, "sweep", c.sweep);
            get_if(o, "layers", c.layers);
            get_if(o, "buffer", c.buffer);
            get_if(o, "theta", c.theta);
            get_if(o, "tol", c.tol);
            get_if(o, "max_iter", c.max_iter);
            get_if(o, "increment", c.increment);
            get_if(o, "gamma", c.gamma);
            get_if(o, "dump_basis", c.dump_basis);
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: bad value: ") + e.what());
    }
    validate(c);
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::invalid_argument("config: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(is)),
                     std::istreambuf_iterator<char>());
    return parse_config(text);
}

ExperimentReport run(const ExperimentConfig& cfg) {
    validate(cfg);
    GridHierarchy g(cfg.nx, cfg.ny, cfg.refine);
    CoefficientField kappa = generate_field(cfg.field, g);
    auto f = data_function(cfg.f);
    auto bc = data_function(cfg.bc);

    ExperimentReport rep;
    rep.seed = cfg.seed;
    rep.config_hash = stable_hash(cfg.canonical());

    if (cfg.method == "homogenize") {
        FineProblem fp(g, kappa);
        auto plain = solve_homogenized(g, homogenize_all(g, kappa, 0), fp, f, bc);
        rep.rows.push_back({"homogenize-plain", g.num_coarse_nodes(),
                            plain.errors.energy_pct, plain.errors.l2_pct,
                            std::numeric_limits<double>::quiet_NaN(), 0});
        int layers = effective_layers(g, cfg.layers);
        auto over =
            solve_homogenized(g, homogenize_all(g, kappa, layers), fp, f, bc);
        rep.rows.push_back({"homogenize-oversampled", g.num_coarse_nodes(),
                            over.errors.energy_pct, over.errors.l2_pct,
                            std::numeric_limits<double>::quiet_NaN(), 0});
    } else if (cfg.method == "msfem") {
        FineProblem fp(g, kappa);
        MsBasisSet basis =
            cfg.variant == "oversampled"
                ? ms_basis_oversampled(g, kappa, effective_layers(g, cfg.layers))
                : ms_basis(g, kappa);
        auto sol = msfem_solve(g, basis, fp, f, bc);
        rep.rows.push_back({"msfem-" + cfg.variant, g.num_coarse_nodes(),
                            sol.errors.energy_pct, sol.errors.l2_pct,
                            std::numeric_limits<double>::quiet_NaN(), 0});
    } else if (cfg.method == "gmsfem") {
        FineProblem fp(g, kappa);
        GmsfemOptions opts = gms_options(cfg);
        for (int l : sweep_values(cfg)) {
            opts.l = l;
            auto off = build_offline(g, kappa, opts);
            auto sol = gmsfem_solve(g, off, fp, f, bc);
            rep.rows.push_back({"gmsfem", off.dof(), sol.errors.energy_pct,
                                sol.errors.l2_pct, off.lambda_star(), 0});
        }
    } else if (cfg.method == "adapt") {
        FineProblem fp(g, kappa);
        AdaptOptions opts;
        opts.gms = gms_options(cfg);
        opts.theta = cfg.theta;
        opts.tol = cfg.tol;
        opts.max_iter = cfg.max_iter;
        opts.increment = cfg.increment;
        auto res = adapt_loop(g, kappa, fp, f, bc, opts);
        for (const HistoryRow& h : res.history)
            rep.rows.push_back({"adapt", h.dof, h.energy_pct, h.l2_pct,
                                res.space.lambda_star(), h.iteration});
    } else if (cfg.method == "online") {
        FineProblem fp(g, kappa);
        auto off = build_offline(g, kappa, gms_options(cfg));
        OnlineOptions opts;
        opts.theta = cfg.theta;
        opts.tol = cfg.tol;
        opts.max_iter = cfg.max_iter;
        auto res = online_loop(g, kappa, off, fp, f, bc, opts);
        for (const HistoryRow& h : res.history)
            rep.rows.push_back({"online-" + h.kind, h.dof, h.energy_pct,
                                h.l2_pct, off.lambda_star(), h.iteration});
    } else if (cfg.method == "mixed") {
        FineMixedProblem fp(g, kappa);
        auto flux_bc = [](Eigen::Vector2d, Eigen::Vector2d) { return 0.0; };
        for (int l : sweep_values(cfg)) {
            auto off = build_mixed_offline(g, kappa, l);
            auto sol = mixed_coarse_solve(g, kappa, off, fp, f, flux_bc);
            rep.rows.push_back({"mixed", off.dof(), sol.velocity_err_pct, 0.0,
                                std::numeric_limits<double>::quiet_NaN(), 0});
        }
    } else if (cfg.method == "dg") {
        FineProblem fp(g, kappa);
        for (int l : sweep_values(cfg)) {
            auto off = build_dg_offline(g, kappa, l,
                                        effective_layers(g, cfg.layers),
                                        cfg.gamma);
            auto sol = ipdg_solve(g, kappa, off, fp, f, bc);
            rep.rows.push_back({"dg", off.dof(), sol.energy_pct, sol.l2_pct,
                                std::numeric_limits<double>::quiet_NaN(), 0});
        }
    }
    rep.sort_rows();
    return rep;
}

ExperimentReport run_and_write(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    ExperimentReport rep = run(cfg);
    GridHierarchy g(cfg.nx, cfg.ny, cfg.refine);
    save_field(generate_field(cfg.field, g), g,
               (fs::path(cfg.out_dir) / "field.txt").string());
    rep.save_csv((fs::path(cfg.out_dir) / "report.csv").string());
    rep.save_json((fs::path(cfg.out_dir) / "report.json").string());
    if (cfg.dump_basis &&
        (cfg.method == "gmsfem" || cfg.method == "adapt" ||
         cfg.method == "online")) {
        fs::create_directories(fs::path(cfg.out_dir) / "basis");
        CoefficientField kappa = generate_field(cfg.field, g);
        GmsfemOptions opts = gms_options(cfg);
        auto off = build_offline(g, kappa, opts);
        save_offline(off, g,
                     (fs::path(cfg.out_dir) / "basis" / "offline.bin").string());
    }
    return rep;
}

} // namespace ms
