#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "avi/experiments.hpp"

namespace {

int run_command(const avi::ExperimentConfig& cfg) {
    using namespace avi;
    if (cfg.experiment == "gauss-scale") {
        const GaussScaleResult r = cmd_gauss_scale(cfg);
        std::cout << "gauss-scale: " << r.cells.size() << " cells -> " << r.summary_csv << "\n";
        return 0;
    }
    if (cfg.experiment == "logreg") {
        const LogRegResult r = cmd_logreg(cfg);
        std::cout << "logreg (n=" << r.dataset_n << ", d=" << r.dataset_d << "): " << r.cells.size()
                  << " cells -> " << r.summary_csv << "\n";
        return 0;
    }
    if (cfg.experiment == "snr-table") {
        const SnrTableResult r = cmd_snr_table(cfg);
        std::cout << "snr-table: " << r.rows.size() << " rows -> " << r.csv_path << "\n";
        return 0;
    }
    if (cfg.experiment == "snr-validate") {
        const SnrValidateResult r = cmd_snr_validate(cfg);
        int pass = 0, fail = 0, skipped = 0;
        for (const auto& o : r.outcomes) {
            if (o.verdict == ValidateVerdict::Pass) ++pass;
            else if (o.verdict == ValidateVerdict::Fail) ++fail;
            else ++skipped;
        }
        std::cout << "snr-validate: " << pass << " pass, " << fail << " fail, " << skipped
                  << " skipped -> " << r.csv_path << "\n";
        return r.all_pass ? 0 : 1;
    }
    if (cfg.experiment == "snr-path") {
        const SnrPathResult r = cmd_snr_path(cfg);
        std::cout << "snr-path: " << r.table.cells.size() << " cells -> " << r.csv_path << "\n";
        return 0;
    }
    if (cfg.experiment == "var-check") {
        const VarCheckResult r = cmd_var_check(cfg);
        std::cout << "var-check: " << r.rows.size() << " rows -> " << r.csv_path << "\n";
        return r.all_hold ? 0 : 1;
    }
    throw avi::ConfigError("experiment: unknown experiment '" + cfg.experiment + "'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Unbiased alpha-divergence variational inference experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    bool quick = false;

    for (const auto& name : avi::kExperimentNames) {
        CLI::App* sub = app.add_subcommand(name, "Run the " + name + " experiment");
        sub->add_option("--config", config_path, "JSON config file (defaults apply without one)");
        sub->add_option("--override", overrides,
                        "Field override as dot.path=json-value; repeatable");
        sub->add_flag("--quick", quick, "Desk-scale profile (smaller grids and sample counts)");
    }

    CLI11_PARSE(app, argc, argv);

    try {
        nlohmann::json raw = nlohmann::json::object();
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) {
                std::cerr << "error: cannot open config file " << config_path << "\n";
                return 2;
            }
            try {
                in >> raw;
            } catch (const std::exception& e) {
                std::cerr << "error: config parse: " << e.what() << "\n";
                return 2;
            }
        }
        raw["experiment"] = app.get_subcommands().front()->get_name();
        for (const auto& o : overrides) avi::apply_override(raw, o);

        avi::ExperimentConfig cfg = avi::parse_config(raw);
        if (quick || cfg.quick) avi::apply_quick_profile(cfg);
        return run_command(cfg);
    } catch (const avi::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
