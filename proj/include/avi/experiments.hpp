#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "avi/estimators.hpp"
#include "avi/models.hpp"
#include "avi/optimizers.hpp"
#include "avi/snr_empirical.hpp"
#include "avi/snr_theory.hpp"

namespace avi {

inline constexpr const char* kVersion = "0.1.0";

/// One flat configuration drives every experiment; unused fields are ignored
/// by commands that do not need them. `alphas` uses 0 for the alpha -> 0
/// limit and 1 for the alpha -> 1 limit.
struct ExperimentConfig {
    std::string experiment;

    std::vector<int> dims = {8, 32, 128};
    std::vector<double> alphas;  // default depends on the experiment
    std::vector<int> n_samples_list = {1, 10, 100, 1000, 10000};
    int steps = 1000;
    int replications = 15;
    std::vector<double> step_size_grid;  // default {10^-7, ..., 10^7}
    std::string optimizer = "sgd";
    std::string estimator = "drep";
    std::uint64_t seed_base = 20210614;

    std::string dataset_path;
    std::string label_column;
    std::string positive_label;
    std::string negative_label;
    bool standardize_features = true;
    int subsample_n = 100;
    std::uint64_t subsample_seed = 1;
    double prior_scale = 1.0;

    std::string output_dir = "out";

    std::int64_t mc_samples = 0;  // 0: per-command default (recorded in output metadata)
    std::int64_t loss_eval_samples = 250000;
    int loss_eval_every = 10;
    std::int64_t loss_eval_run_samples = 1000;

    std::vector<double> lambda_grid = {0.25, 1.0, 4.0};
    int sigma_q_grid_size = 40;
    double sigma_q_min = 0.5;
    double sigma_q_max = 4.0;

    int path_checkpoint_every = 100;
    double path_step_size = 0.0;  // 0: pick by sweep
    bool quick = false;

    OptimizerKind optimizer_kind() const;
    EstimatorKind estimator_kind() const;
};

extern const std::vector<std::string> kExperimentNames;

/// Parse + validate; throws ConfigError naming the offending field path.
ExperimentConfig parse_config(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& c);

/// Sets a dot-separated field path to a JSON-parsed value ("steps=500",
/// "alphas=[0,0.4]"). Strings may be given bare.
void apply_override(nlohmann::json& j, const std::string& assignment);

/// Desk-scale profile: d in {8,32}, N in {1,10,100}, 5 replications, 1e5
/// Monte Carlo samples, reduced loss-evaluation sample counts.
void apply_quick_profile(ExperimentConfig& c);

// ---- command results -------------------------------------------------------------

struct GaussScaleCell {
    int d = 0;
    double alpha = 0.0;
    int n_samples = 0;
    double chosen_step_size = 0.0;
    double final_mean_error = 0.0;
    bool failed = false;
    std::string csv_path;
};

struct GaussScaleResult {
    std::vector<GaussScaleCell> cells;
    std::string summary_csv;

    const GaussScaleCell& cell(int d, double alpha, int n_samples) const;
};

struct LogRegCell {
    double alpha = 0.0;
    int n_samples = 0;
    double chosen_step_size = 0.0;
    double final_loss = 0.0;
    double final_loss_se = 0.0;
    bool failed = false;
    std::string csv_path;
};

struct LogRegResult {
    std::vector<LogRegCell> cells;
    std::string summary_csv;
    int dataset_n = 0;
    int dataset_d = 0;

    const LogRegCell& cell(double alpha, int n_samples) const;
};

struct SnrTableRow {
    int d = 0;
    double alpha = 0.0;
    std::string lambda_spec;
    std::string status;
    double snr_or_bound = 0.0;
    double existence_margin = 0.0;
};

struct SnrTableResult {
    std::vector<SnrTableRow> rows;
    std::string csv_path;
};

enum class ValidateVerdict { Pass, Fail, SkippedUndefined };

/// One theory-vs-Monte-Carlo comparison cell. `theory` and the sampler are
/// supplied by the caller so the harness itself stays checkable.
struct ValidateCell {
    std::string desc;
    double theory = 0.0;
    GradSampler sampler;
    bool undefined = false;  // cell known undefined; recorded as skipped
};

struct ValidateOutcome {
    std::string desc;
    ValidateVerdict verdict = ValidateVerdict::Pass;
    double theory = 0.0;
    double mc = 0.0;
    double rel_err = 0.0;
    double se = 0.0;
};

struct SnrValidateResult {
    std::vector<ValidateOutcome> outcomes;
    bool all_pass = true;
    std::string csv_path;
};

/// Relative tolerance 2% for values >= 1e-3, otherwise 3 MC standard errors.
SnrValidateResult validate_cells(const std::vector<ValidateCell>& cells, std::int64_t n,
                                 const RngStream& rng);

/// Default theory-vs-MC grid over factorized and full-rank Gaussian cells.
std::vector<ValidateCell> default_validate_cells(const ExperimentConfig& c);

struct SnrPathResult {
    PathSnrTable table;
    std::string csv_path;
};

struct VarCheckRow {
    int d = 0;
    double alpha = 0.0;
    std::string lambda_spec;
    double mc_variance_j = 0.0;
    double bound = 0.0;
    bool bound_holds = false;
    bool undefined = false;
};

struct VarCheckResult {
    std::vector<VarCheckRow> rows;
    bool all_hold = true;
    std::string csv_path;
};

// ---- commands -------------------------------------------------------------------

GaussScaleResult cmd_gauss_scale(const ExperimentConfig& c);
LogRegResult cmd_logreg(const ExperimentConfig& c);
SnrTableResult cmd_snr_table(const ExperimentConfig& c);
SnrValidateResult cmd_snr_validate(const ExperimentConfig& c);
SnrPathResult cmd_snr_path(const ExperimentConfig& c);
VarCheckResult cmd_var_check(const ExperimentConfig& c);

/// Loads, optionally subsamples to `subsample_n`, and standardizes a dataset
/// per the config.
Dataset load_dataset(const ExperimentConfig& c);

}  // namespace avi
