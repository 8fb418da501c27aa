#include "ms/driver.hpp"
#include "ms/fem.hpp"

#include "CLI11.hpp"

#include <Eigen/Core>
#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;

namespace {

struct CommonFlags {
    std::string config;
    std::string out_dir;
    long long seed = -1;
    int threads = 0;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config, "JSON experiment config");
    cmd->add_option("--seed", flags.seed, "override the root seed");
    cmd->add_option("--out-dir", flags.out_dir, "artifact output directory");
    cmd->add_option("--threads", flags.threads, "worker count");
}

ms::ExperimentConfig make_config(const CommonFlags& flags,
                                 const std::string& method) {
    ms::ExperimentConfig cfg =
        flags.config.empty() ? ms::parse_config("{}")
                             : ms::load_config(flags.config);
    if (!method.empty()) cfg.method = method;
    if (flags.seed >= 0) {
        cfg.seed = static_cast<std::uint64_t>(flags.seed);
        cfg.field.seed = cfg.seed;
    }
    if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
    if (flags.threads > 0) cfg.threads = flags.threads;
    Eigen::setNbThreads(cfg.threads);
    return cfg;
}

void print_report(const ms::ExperimentReport& rep) {
    for (const ms::ReportRow& r : rep.rows)
        std::cout << r.method << "  dof=" << r.dof
                  << "  energy%=" << r.energy_pct << "  l2%=" << r.l2_pct
                  << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multiscale model-reduction experiment driver"};
    app.require_subcommand(1);

    static const char* methods[] = {"homogenize", "msfem", "gmsfem", "adapt",
                                    "online",     "mixed", "dg"};
    std::map<std::string, CommonFlags> flags;
    for (const char* m : methods)
        add_common(app.add_subcommand(m, std::string("run the ") + m +
                                             " experiment"),
                   flags[m]);
    add_common(app.add_subcommand("field",
                                  "generate the coefficient field only"),
               flags["field"]);
    add_common(app.add_subcommand("solve-fine",
                                  "fine reference solve and report"),
               flags["solve-fine"]);
    add_common(app.add_subcommand("report",
                                  "regenerate report.csv from report.json"),
               flags["report"]);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    const std::string cmd = app.get_subcommands().front()->get_name();
    try {
        if (cmd == "field") {
            auto cfg = make_config(flags[cmd], "");
            ms::GridHierarchy g(cfg.nx, cfg.ny, cfg.refine);
            fs::create_directories(cfg.out_dir);
            ms::save_field(ms::generate_field(cfg.field, g), g,
                           (fs::path(cfg.out_dir) / "field.txt").string());
        } else if (cmd == "solve-fine") {
            auto cfg = make_config(flags[cmd], "");
            ms::GridHierarchy g(cfg.nx, cfg.ny, cfg.refine);
            auto kappa = ms::generate_field(cfg.field, g);
            ms::FineProblem fp(g, kappa);
            fp.solve(ms::data_function(cfg.f), ms::data_function(cfg.bc));
            ms::ExperimentReport rep;
            rep.seed = cfg.seed;
            rep.config_hash = ms::stable_hash(cfg.canonical());
            rep.rows.push_back({"fine", g.num_fine_nodes(), 0.0, 0.0,
                                std::numeric_limits<double>::quiet_NaN(), 0});
            fs::create_directories(cfg.out_dir);
            rep.save_csv((fs::path(cfg.out_dir) / "report.csv").string());
            rep.save_json((fs::path(cfg.out_dir) / "report.json").string());
            print_report(rep);
        } else if (cmd == "report") {
            auto cfg = make_config(flags[cmd], "");
            auto rep = ms::ExperimentReport::load_json(
                (fs::path(cfg.out_dir) / "report.json").string());
            rep.save_csv((fs::path(cfg.out_dir) / "report.csv").string());
            print_report(rep);
        } else {
            auto rep = ms::run_and_write(make_config(flags[cmd], cmd));
            print_report(rep);
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
