#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "avi/experiments.hpp"

using avi::ExperimentConfig;
using nlohmann::json;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string temp_dir(const std::string& tag) {
    const auto dir = std::filesystem::temp_directory_path() / ("avi_exp_" + tag);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir.string();
}

}  // namespace

TEST_SUITE_BEGIN("experiments");

TEST_CASE("config defaults mirror the protocol") {
    const ExperimentConfig c = avi::parse_config(json{{"experiment", "gauss-scale"}});
    CHECK(c.steps == 1000);
    CHECK(c.replications == 15);
    CHECK(c.step_size_grid.size() == 15);
    CHECK(c.step_size_grid.front() == doctest::Approx(1e-7));
    CHECK(c.step_size_grid.back() == doctest::Approx(1e7));
    CHECK(c.alphas == std::vector<double>{0.0, 0.4, 0.9, 1.5});
    CHECK(c.dims == std::vector<int>{8, 32, 128});
    CHECK(c.n_samples_list == std::vector<int>{1, 10, 100, 1000, 10000});

    const ExperimentConfig lr = avi::parse_config(json{{"experiment", "logreg"},
                                                       {"dataset_path", "data/iris.csv"},
                                                       {"label_column", "species"},
                                                       {"positive_label", "setosa"}});
    CHECK(lr.alphas == std::vector<double>{0.0, 0.1, 0.2, 0.3});
    CHECK(lr.loss_eval_samples == 250000);
}

TEST_CASE("config validation errors carry field paths") {
    CHECK_THROWS_WITH_AS(avi::parse_config(json{{"experiment", "nope"}}),
                         doctest::Contains("experiment"), avi::ConfigError);
    CHECK_THROWS_WITH_AS(
        avi::parse_config(json{{"experiment", "gauss-scale"}, {"alphas", json::array()}}),
        doctest::Contains("alphas"), avi::ConfigError);
    CHECK_THROWS_WITH_AS(avi::parse_config(json{{"experiment", "gauss-scale"}, {"steps", 0}}),
                         doctest::Contains("steps"), avi::ConfigError);
    CHECK_THROWS_WITH_AS(avi::parse_config(json{{"experiment", "gauss-scale"}, {"bogus", 1}}),
                         doctest::Contains("bogus"), avi::ConfigError);
    CHECK_THROWS_WITH_AS(avi::parse_config(json{{"experiment", "logreg"}}),
                         doctest::Contains("dataset_path"), avi::ConfigError);
    CHECK_THROWS_WITH_AS(
        avi::parse_config(json{{"experiment", "gauss-scale"}, {"estimator", "rep"}, {"alphas", {0.0, 1.0}}}),
        doctest::Contains("alpha"), avi::ConfigError);
}

TEST_CASE("config round-trip is idempotent") {
    json j{{"experiment", "gauss-scale"}, {"steps", 77}, {"alphas", {0.0, 0.9}}};
    const ExperimentConfig c1 = avi::parse_config(j);
    const json full = avi::config_to_json(c1);
    const ExperimentConfig c2 = avi::parse_config(full);
    CHECK(avi::config_to_json(c2) == full);
    CHECK(c2.steps == 77);
}

TEST_CASE("overrides set dot paths with JSON values") {
    json j{{"experiment", "gauss-scale"}};
    avi::apply_override(j, "steps=123");
    avi::apply_override(j, "alphas=[0,0.4]");
    avi::apply_override(j, "optimizer=adam");
    const ExperimentConfig c = avi::parse_config(j);
    CHECK(c.steps == 123);
    CHECK(c.alphas == std::vector<double>{0.0, 0.4});
    CHECK(c.optimizer == "adam");
    CHECK_THROWS_AS(avi::apply_override(j, "nonsense"), avi::ConfigError);
}

TEST_CASE("quick profile shrinks the grids") {
    ExperimentConfig c = avi::parse_config(json{{"experiment", "gauss-scale"}});
    avi::apply_quick_profile(c);
    CHECK(c.dims == std::vector<int>{8, 32});
    CHECK(c.n_samples_list == std::vector<int>{1, 10, 100});
    CHECK(c.replications == 5);
    CHECK(c.quick);
}

TEST_CASE("validate_cells flags a corrupted closed form") {
    const auto p = avi::make_standard_gaussian_target(1);
    const avi::DiagonalGaussian q = avi::DiagonalGaussian::mean_zero({2.0});
    const auto sampler =
        avi::make_sampler(avi::EstimatorKind::Drep, p, q, avi::AlphaParam::general(0.5));

    avi::ValidateCell good;
    good.desc = "good";
    good.theory = 0.6826667;
    good.sampler = sampler;

    avi::ValidateCell corrupted;
    corrupted.desc = "corrupted";
    corrupted.theory = 0.6826667 * 1.2;  // deliberately wrong
    corrupted.sampler = sampler;

    avi::ValidateCell skipped;
    skipped.desc = "undefined";
    skipped.undefined = true;

    const auto res =
        avi::validate_cells({good, corrupted, skipped}, 300000, avi::RngStream(50, 0));
    REQUIRE(res.outcomes.size() == 3);
    CHECK(res.outcomes[0].verdict == avi::ValidateVerdict::Pass);
    CHECK(res.outcomes[1].verdict == avi::ValidateVerdict::Fail);
    CHECK(res.outcomes[2].verdict == avi::ValidateVerdict::SkippedUndefined);
    CHECK_FALSE(res.all_pass);
}

TEST_CASE("snr-table contains the anchor rows") {
    ExperimentConfig c = avi::parse_config(json{{"experiment", "snr-table"},
                                                {"dims", {5}},
                                                {"alphas", {0.0, 0.5}},
                                                {"sigma_q_grid_size", 3},
                                                {"sigma_q_min", 1.0},
                                                {"sigma_q_max", 2.0}});
    c.output_dir = temp_dir("table");
    const avi::SnrTableResult res = avi::cmd_snr_table(c);

    bool saw_zero_limit = false, saw_unit_factor = false, saw_f = false;
    for (const auto& row : res.rows) {
        if (row.lambda_spec == "frg-zero-limit" && row.d == 5) {
            saw_zero_limit = true;
            CHECK(row.snr_or_bound == doctest::Approx(1.0 / 7.0));
        }
        if (row.lambda_spec == "ratio-power:lambda=1" && row.alpha == 0.5) {
            saw_unit_factor = true;
            CHECK(row.snr_or_bound == doctest::Approx(1.0));
        }
        if (row.lambda_spec == "ratio-power:lambda=4" && row.alpha == 0.5) {
            saw_f = true;
            CHECK(row.snr_or_bound == doctest::Approx(0.8));
        }
    }
    CHECK(saw_zero_limit);
    CHECK(saw_unit_factor);
    CHECK(saw_f);
}

TEST_CASE("CSV outputs carry metadata and reproduce byte-identically") {
    ExperimentConfig c = avi::parse_config(json{{"experiment", "gauss-scale"},
                                                {"dims", {2}},
                                                {"alphas", {0.0}},
                                                {"n_samples_list", {1}},
                                                {"steps", 30},
                                                {"replications", 2},
                                                {"step_size_grid", {0.1}},
                                                {"seed_base", 5}});
    c.output_dir = temp_dir("repro1");
    const auto r1 = avi::cmd_gauss_scale(c);
    const std::string first = slurp(r1.cells.at(0).csv_path);
    CHECK(first.find("# version: avi") == 0);
    CHECK(first.find("# config:") != std::string::npos);
    CHECK(first.find("# seed_base: 5") != std::string::npos);
    CHECK(first.find("step,mean_error,stderr_error,chosen_step_size") != std::string::npos);

    // identical config (same output dir): the whole file reproduces
    const auto r2 = avi::cmd_gauss_scale(c);
    const std::string second = slurp(r2.cells.at(0).csv_path);
    CHECK(first == second);

    // different output dir: every data row still reproduces byte-for-byte
    c.output_dir = temp_dir("repro2");
    const auto r3 = avi::cmd_gauss_scale(c);
    const std::string third = slurp(r3.cells.at(0).csv_path);
    const auto data_rows = [](const std::string& text) {
        std::string rows;
        std::stringstream stream(text);
        for (std::string line; std::getline(stream, line);)
            if (!line.empty() && line[0] != '#') rows += line + "\n";
        return rows;
    };
    CHECK(data_rows(first) == data_rows(third));

    // floats serialized at 17 significant digits round-trip exactly
    std::stringstream ss(first);
    std::string line;
    bool checked_roundtrip = false;
    while (std::getline(ss, line)) {
        if (line.empty() || line[0] == '#' || line[0] == 's') continue;
        const auto last_comma = line.rfind(',');
        const auto prev_comma = line.rfind(',', last_comma - 1);
        const auto field = line.substr(prev_comma + 1, last_comma - prev_comma - 1);
        const double v = std::stod(field);
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        CHECK(field == buf);
        checked_roundtrip = true;
        break;
    }
    CHECK(checked_roundtrip);
}

TEST_CASE("gauss-scale smoke run converges in the easy cell") {
    ExperimentConfig c = avi::parse_config(json{{"experiment", "gauss-scale"},
                                                {"dims", {2}},
                                                {"alphas", {0.0}},
                                                {"n_samples_list", {1}},
                                                {"steps", 120},
                                                {"replications", 2},
                                                {"step_size_grid", {0.001, 0.1}},
                                                {"seed_base", 6}});
    c.output_dir = temp_dir("smoke");
    const auto res = avi::cmd_gauss_scale(c);
    const auto& cell = res.cell(2, 0.0, 1);
    CHECK(cell.chosen_step_size == doctest::Approx(0.1));
    CHECK(cell.final_mean_error < 1e-2);
    CHECK(std::filesystem::exists(res.summary_csv));
}

TEST_CASE("var-check smoke includes the sigma_p = sigma_q row") {
    ExperimentConfig c = avi::parse_config(json{{"experiment", "var-check"},
                                                {"dims", {1, 4}},
                                                {"alphas", {0.25}},
                                                {"mc_samples", 50000},
                                                {"seed_base", 7}});
    c.output_dir = temp_dir("var");
    const auto res = avi::cmd_var_check(c);
    CHECK(res.all_hold);
    bool saw_unit = false;
    for (const auto& row : res.rows) {
        if (row.lambda_spec == "iso:lambda=1:j=0") {
            saw_unit = true;
            CHECK(row.mc_variance_j == 0.0);
            CHECK(row.bound == 0.0);
            CHECK(row.bound_holds);
        }
        if (!row.undefined) CHECK(row.mc_variance_j <= row.bound * (1.0 + 1e-9));
    }
    CHECK(saw_unit);
}

TEST_CASE("logreg smoke run produces loss curves and a summary") {
    ExperimentConfig c = avi::parse_config(json{{"experiment", "logreg"},
                                                {"dataset_path", "data/iris.csv"},
                                                {"label_column", "species"},
                                                {"positive_label", "setosa"},
                                                {"negative_label", "versicolor"},
                                                {"alphas", {0.0}},
                                                {"n_samples_list", {1}},
                                                {"steps", 60},
                                                {"replications", 2},
                                                {"step_size_grid", {0.0001, 0.001, 0.01}},
                                                {"loss_eval_every", 20},
                                                {"loss_eval_samples", 4000},
                                                {"loss_eval_run_samples", 500},
                                                {"seed_base", 9}});
    c.output_dir = temp_dir("logreg");
    const auto res = avi::cmd_logreg(c);
    CHECK(res.dataset_n == 100);
    CHECK(res.dataset_d == 4);
    REQUIRE(res.cells.size() == 1);
    const auto& cell = res.cells.front();
    CHECK_FALSE(cell.failed);
    CHECK(std::isfinite(cell.final_loss));
    CHECK(cell.final_loss_se > 0.0);

    // the loss curve improved from the standard-normal start
    const std::string csv = slurp(cell.csv_path);
    CHECK(csv.find("step,mean_loss,stderr_loss,chosen_step_size") != std::string::npos);
    std::stringstream ss(csv);
    double first_loss = 0.0, last_loss = 0.0;
    bool have_first = false;
    for (std::string line; std::getline(ss, line);) {
        if (line.empty() || line[0] == '#' || line[0] == 's') continue;
        std::stringstream row(line);
        std::string step, loss;
        std::getline(row, step, ',');
        std::getline(row, loss, ',');
        last_loss = std::stod(loss);
        if (!have_first) {
            first_loss = last_loss;
            have_first = true;
        }
    }
    CHECK(have_first);
    CHECK(last_loss > first_loss);
}

TEST_CASE("snr-path runs on the logistic model") {
    ExperimentConfig c = avi::parse_config(json{{"experiment", "snr-path"},
                                                {"dataset_path", "data/iris.csv"},
                                                {"label_column", "species"},
                                                {"positive_label", "setosa"},
                                                {"negative_label", "versicolor"},
                                                {"alphas", {0.0, 0.3}},
                                                {"steps", 40},
                                                {"path_checkpoint_every", 20},
                                                {"path_step_size", 0.005},
                                                {"mc_samples", 20000},
                                                {"seed_base", 10}});
    c.output_dir = temp_dir("logreg_path");
    const auto res = avi::cmd_snr_path(c);
    REQUIRE(res.table.cells.size() == 6);  // steps {0, 20, 40} x alphas {0, 0.3}
    for (const auto& cell : res.table.cells) {
        CHECK(cell.status == avi::PathCellStatus::Ok);
        CHECK(cell.snr > 0.0);
        CHECK(cell.snr <= 1.0 + 1e-9);
    }
}

TEST_CASE("snr-path on the 1-d Gaussian shows the 1/3 plateau away from the optimum") {
    ExperimentConfig c = avi::parse_config(json{{"experiment", "snr-path"},
                                                {"alphas", {0.0, 0.5}},
                                                {"steps", 60},
                                                {"path_checkpoint_every", 30},
                                                {"path_step_size", 0.05},
                                                {"mc_samples", 50000},
                                                {"seed_base", 8}});
    c.output_dir = temp_dir("path");
    const auto res = avi::cmd_snr_path(c);
    REQUIRE(!res.table.cells.empty());
    const auto& first = res.table.cells.front();  // step 0, alpha -> 0, sigma = 2
    CHECK(first.step == 0);
    CHECK(first.alpha == 0.0);
    CHECK(first.status == avi::PathCellStatus::Ok);
    CHECK(first.snr == doctest::Approx(1.0 / 3.0).epsilon(0.05));
    CHECK(std::filesystem::exists(res.csv_path));
}

TEST_SUITE_END();
