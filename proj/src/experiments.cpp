#include "avi/experiments.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace avi {

namespace {

using nlohmann::json;

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_short(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

class CsvFile {
public:
    CsvFile(const std::string& path, const json& config, std::int64_t mc_samples_note = -1)
        : out_(path) {
        if (!out_) throw std::runtime_error("cannot open output file " + path);
        out_ << "# version: avi " << kVersion << "\n";
        out_ << "# config: " << config.dump() << "\n";
        out_ << "# seed_base: " << config.value("seed_base", 0ull) << "\n";
        if (mc_samples_note >= 0) out_ << "# mc_samples: " << mc_samples_note << "\n";
    }

    void columns(const std::vector<std::string>& names) {
        for (std::size_t i = 0; i < names.size(); ++i) out_ << (i ? "," : "") << names[i];
        out_ << "\n";
    }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
        out_ << "\n";
    }

private:
    std::ofstream out_;
};

std::vector<double> default_step_grid() {
    std::vector<double> g;
    for (int i = -7; i <= 7; ++i) g.push_back(std::pow(10.0, i));
    return g;
}

const std::set<std::string> kKnownKeys = {
    "experiment", "dims", "alphas", "n_samples_list", "steps", "replications", "step_size_grid",
    "optimizer", "estimator", "seed_base", "dataset_path", "label_column", "positive_label",
    "negative_label", "standardize_features", "subsample_n", "subsample_seed", "prior_scale",
    "output_dir", "mc_samples", "loss_eval_samples", "loss_eval_every", "loss_eval_run_samples",
    "lambda_grid", "sigma_q_grid_size", "sigma_q_min", "sigma_q_max", "path_checkpoint_every",
    "path_step_size", "quick"};

template <class T>
void read_field(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const std::exception& e) {
        throw ConfigError(std::string(key) + ": " + e.what());
    }
}

std::string alpha_tag(double a) {
    std::string s = fmt_short(a);
    for (auto& ch : s)
        if (ch == '.' || ch == '-') ch = 'p';
    return s;
}

GradSampler component_sampler(GradSampler inner, int j) {
    return [inner = std::move(inner), j](RngStream rng) {
        GradEstimate g = inner(rng);
        return GradEstimate{{g.values.at(static_cast<std::size_t>(j))}, g.n_samples_averaged};
    };
}

std::string status_string(SnrStatus s) {
    switch (s) {
        case SnrStatus::Defined: return "defined";
        case SnrStatus::UndefinedInfiniteVariance: return "undefined-infinite-variance";
        case SnrStatus::UndefinedZeroEstimator: return "undefined-zero-estimator";
    }
    return "unknown";
}

}  // namespace

const std::vector<std::string> kExperimentNames = {"gauss-scale", "logreg",   "snr-table",
                                                   "snr-validate", "snr-path", "var-check"};

OptimizerKind ExperimentConfig::optimizer_kind() const {
    return optimizer == "adam" ? OptimizerKind::Adam : OptimizerKind::Sgd;
}

EstimatorKind ExperimentConfig::estimator_kind() const {
    return estimator == "rep" ? EstimatorKind::Rep : EstimatorKind::Drep;
}

ExperimentConfig parse_config(const json& j) {
    if (!j.is_object()) throw ConfigError("config: must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (!kKnownKeys.count(key)) throw ConfigError(key + ": unknown field");

    ExperimentConfig c;
    read_field(j, "experiment", c.experiment);
    if (c.experiment.empty()) throw ConfigError("experiment: required");
    if (std::find(kExperimentNames.begin(), kExperimentNames.end(), c.experiment) ==
        kExperimentNames.end())
        throw ConfigError("experiment: unknown experiment '" + c.experiment + "'");

    // Per-experiment defaults, overridden by explicit fields below.
    if (c.experiment == "logreg" || c.experiment == "snr-path")
        c.alphas = {0.0, 0.1, 0.2, 0.3};
    else if (c.experiment == "var-check")
        c.alphas = {0.1, 0.25, 0.4};
    else
        c.alphas = {0.0, 0.4, 0.9, 1.5};

    if (c.experiment == "snr-validate")
        c.dims = {1, 2, 4};
    else if (c.experiment == "var-check")
        c.dims = {1, 4, 16};
    else if (c.experiment == "snr-path")
        c.dims = {1};

    if (c.experiment == "var-check") c.lambda_grid = {2.0, 4.0};

    c.step_size_grid = default_step_grid();

    read_field(j, "dims", c.dims);
    read_field(j, "alphas", c.alphas);
    read_field(j, "n_samples_list", c.n_samples_list);
    read_field(j, "steps", c.steps);
    read_field(j, "replications", c.replications);
    read_field(j, "step_size_grid", c.step_size_grid);
    read_field(j, "optimizer", c.optimizer);
    read_field(j, "estimator", c.estimator);
    read_field(j, "seed_base", c.seed_base);
    read_field(j, "dataset_path", c.dataset_path);
    read_field(j, "label_column", c.label_column);
    read_field(j, "positive_label", c.positive_label);
    read_field(j, "negative_label", c.negative_label);
    read_field(j, "standardize_features", c.standardize_features);
    read_field(j, "subsample_n", c.subsample_n);
    read_field(j, "subsample_seed", c.subsample_seed);
    read_field(j, "prior_scale", c.prior_scale);
    read_field(j, "output_dir", c.output_dir);
    read_field(j, "mc_samples", c.mc_samples);
    read_field(j, "loss_eval_samples", c.loss_eval_samples);
    read_field(j, "loss_eval_every", c.loss_eval_every);
    read_field(j, "loss_eval_run_samples", c.loss_eval_run_samples);
    read_field(j, "lambda_grid", c.lambda_grid);
    read_field(j, "sigma_q_grid_size", c.sigma_q_grid_size);
    read_field(j, "sigma_q_min", c.sigma_q_min);
    read_field(j, "sigma_q_max", c.sigma_q_max);
    read_field(j, "path_checkpoint_every", c.path_checkpoint_every);
    read_field(j, "path_step_size", c.path_step_size);
    read_field(j, "quick", c.quick);

    if (c.mc_samples == 0) {
        if (c.experiment == "snr-validate" || c.experiment == "var-check") c.mc_samples = 1000000;
        if (c.experiment == "snr-path") c.mc_samples = 10000;
    }

    if (c.alphas.empty()) throw ConfigError("alphas: must be a non-empty list");
    if (c.dims.empty()) throw ConfigError("dims: must be a non-empty list");
    for (int d : c.dims)
        if (d < 1) throw ConfigError("dims: dimensions must be >= 1");
    if (c.n_samples_list.empty()) throw ConfigError("n_samples_list: must be a non-empty list");
    for (int n : c.n_samples_list)
        if (n < 1) throw ConfigError("n_samples_list: entries must be >= 1");
    if (c.steps < 1) throw ConfigError("steps: must be >= 1");
    if (c.replications < 1) throw ConfigError("replications: must be >= 1");
    if (c.step_size_grid.empty()) throw ConfigError("step_size_grid: must be a non-empty list");
    for (double s : c.step_size_grid)
        if (!(s > 0.0)) throw ConfigError("step_size_grid: entries must be positive");
    if (c.optimizer != "sgd" && c.optimizer != "adam")
        throw ConfigError("optimizer: must be 'sgd' or 'adam'");
    if (c.estimator != "rep" && c.estimator != "drep")
        throw ConfigError("estimator: must be 'rep' or 'drep'");
    if (c.estimator == "rep")
        for (double a : c.alphas)
            if (a == 1.0) throw ConfigError("alphas: alpha = 1 is not defined for the rep estimator");
    if (c.experiment == "logreg") {
        if (c.dataset_path.empty()) throw ConfigError("dataset_path: required for logreg");
        if (c.label_column.empty()) throw ConfigError("label_column: required for logreg");
        if (c.positive_label.empty()) throw ConfigError("positive_label: required for logreg");
        for (double a : c.alphas)
            if (a == 1.0) throw ConfigError("alphas: alpha = 1 has no loss-estimate form");
    }
    if (!(c.prior_scale > 0.0)) throw ConfigError("prior_scale: must be positive");
    if (c.sigma_q_grid_size < 1) throw ConfigError("sigma_q_grid_size: must be >= 1");
    if (!(c.sigma_q_min > 0.0) || c.sigma_q_max < c.sigma_q_min)
        throw ConfigError("sigma_q_min/sigma_q_max: need 0 < min <= max");
    for (double l : c.lambda_grid)
        if (!(l > 0.0)) throw ConfigError("lambda_grid: entries must be positive");
    if (c.mc_samples < 0) throw ConfigError("mc_samples: must be nonnegative");

    return c;
}

json config_to_json(const ExperimentConfig& c) {
    json j;
    j["experiment"] = c.experiment;
    j["dims"] = c.dims;
    j["alphas"] = c.alphas;
    j["n_samples_list"] = c.n_samples_list;
    j["steps"] = c.steps;
    j["replications"] = c.replications;
    j["step_size_grid"] = c.step_size_grid;
    j["optimizer"] = c.optimizer;
    j["estimator"] = c.estimator;
    j["seed_base"] = c.seed_base;
    j["dataset_path"] = c.dataset_path;
    j["label_column"] = c.label_column;
    j["positive_label"] = c.positive_label;
    j["negative_label"] = c.negative_label;
    j["standardize_features"] = c.standardize_features;
    j["subsample_n"] = c.subsample_n;
    j["subsample_seed"] = c.subsample_seed;
    j["prior_scale"] = c.prior_scale;
    j["output_dir"] = c.output_dir;
    j["mc_samples"] = c.mc_samples;
    j["loss_eval_samples"] = c.loss_eval_samples;
    j["loss_eval_every"] = c.loss_eval_every;
    j["loss_eval_run_samples"] = c.loss_eval_run_samples;
    j["lambda_grid"] = c.lambda_grid;
    j["sigma_q_grid_size"] = c.sigma_q_grid_size;
    j["sigma_q_min"] = c.sigma_q_min;
    j["sigma_q_max"] = c.sigma_q_max;
    j["path_checkpoint_every"] = c.path_checkpoint_every;
    j["path_step_size"] = c.path_step_size;
    j["quick"] = c.quick;
    return j;
}

void apply_override(json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("override: expected key=value, got '" + assignment + "'");
    const std::string path = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);

    json value;
    try {
        value = json::parse(raw);
    } catch (...) {
        value = raw;  // bare string
    }

    json* node = &j;
    std::stringstream ss(path);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    if (parts.empty()) throw ConfigError("override: empty key in '" + assignment + "'");
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
    (*node)[parts.back()] = value;
}

void apply_quick_profile(ExperimentConfig& c) {
    c.quick = true;
    c.replications = std::min(c.replications, 5);
    if (c.experiment == "gauss-scale") {
        std::vector<int> dims;
        for (int d : c.dims)
            if (d <= 32) dims.push_back(d);
        if (dims.empty()) dims = {8, 32};
        c.dims = dims;
    }
    {
        std::vector<int> ns;
        for (int n : c.n_samples_list)
            if (n <= 100) ns.push_back(n);
        if (ns.empty()) ns = {1, 10, 100};
        c.n_samples_list = ns;
    }
    if (c.mc_samples > 100000 || c.mc_samples == 0) c.mc_samples = 100000;
    c.loss_eval_samples = std::min<std::int64_t>(c.loss_eval_samples, 50000);
    c.loss_eval_run_samples = std::min<std::int64_t>(c.loss_eval_run_samples, 500);
    c.loss_eval_every = std::max(c.loss_eval_every, 50);
}

Dataset load_dataset(const ExperimentConfig& c) {
    Dataset ds = load_csv(c.dataset_path, c.label_column, c.positive_label, c.negative_label);
    if (c.subsample_n > 0 && c.subsample_n < ds.n())
        ds = subsample(ds, c.subsample_n, c.subsample_seed);
    if (c.standardize_features) ds = standardize(ds);
    return ds;
}

// ---- gauss-scale ------------------------------------------------------------------

GaussScaleResult cmd_gauss_scale(const ExperimentConfig& c) {
    namespace fs = std::filesystem;
    fs::create_directories(c.output_dir);
    const json cfg_json = config_to_json(c);

    GaussScaleResult result;
    CsvFile summary(c.output_dir + "/gauss_scale_summary.csv", cfg_json);
    summary.columns({"d", "alpha", "n_samples", "chosen_step_size", "final_mean_error", "failed"});

    for (int d : c.dims) {
        const TargetContract target = make_standard_gaussian_target(d);
        for (double alpha_value : c.alphas) {
            const AlphaParam alpha = AlphaParam::from_value(alpha_value);
            for (int n_samples : c.n_samples_list) {
                SweepConfig sweep_cfg;
                sweep_cfg.step_size_grid = c.step_size_grid;
                sweep_cfg.replications = c.replications;
                sweep_cfg.seed_base =
                    c.seed_base ^ hash_combine(static_cast<std::uint64_t>(d),
                                               hash_combine(static_cast<std::uint64_t>(n_samples),
                                                            std::bit_cast<std::uint64_t>(alpha_value)));
                sweep_cfg.selection = SelectionMode::MinFinalError;
                sweep_cfg.run.steps = c.steps;
                sweep_cfg.run.n_samples = n_samples;
                sweep_cfg.run.optimizer = c.optimizer_kind();

                const EstimatorKind kind = c.estimator_kind();
                const auto make_run = [&](double step_size, int, RngStream rng) {
                    GradObjective objective = [&target, d, kind, alpha](std::span<const double> params,
                                                                        RngStream r) {
                        const DiagonalGaussian q = unpack_diagonal(params, d, true);
                        std::vector<double> eps(static_cast<std::size_t>(d));
                        for (auto& e : eps) e = r.normal();
                        return kind == EstimatorKind::Rep ? g_rep(target, q, alpha, eps)
                                                          : g_drep(target, q, alpha, eps);
                    };
                    ErrorFn error_fn = [d](std::span<const double> params) {
                        return scale_error(unpack_diagonal(params, d, true));
                    };
                    ProjectFn project = [d](std::vector<double>& p) { project_diagonal(p, d, true); };
                    RunConfig rc = sweep_cfg.run;
                    rc.step_size = step_size;
                    RunTrace t = run(objective, std::vector<double>(static_cast<std::size_t>(d), 2.0),
                                     project, error_fn, nullptr, rc, rng);
                    t.metadata.alpha = alpha.value;
                    t.metadata.d = d;
                    return t;
                };

                const SweepResult swept = sweep(make_run, sweep_cfg);
                const SweepCell& best = swept.chosen();

                GaussScaleCell cell;
                cell.d = d;
                cell.alpha = alpha_value;
                cell.n_samples = n_samples;
                cell.chosen_step_size = swept.chosen_step_size;
                cell.final_mean_error = best.mean_final_error;
                cell.failed = best.failed;
                cell.csv_path = c.output_dir + "/gauss_scale_d" + std::to_string(d) + "_a" +
                                alpha_tag(alpha_value) + "_N" + std::to_string(n_samples) + ".csv";

                CsvFile csv(cell.csv_path, cfg_json);
                csv.columns({"step", "mean_error", "stderr_error", "chosen_step_size"});
                for (std::size_t s = 0; s < best.mean_error_curve.size(); ++s)
                    csv.row({std::to_string(s), fmt_double(best.mean_error_curve[s]),
                             fmt_double(best.se_error_curve[s]), fmt_double(cell.chosen_step_size)});

                summary.row({std::to_string(d), fmt_double(alpha_value), std::to_string(n_samples),
                             fmt_double(cell.chosen_step_size), fmt_double(cell.final_mean_error),
                             cell.failed ? "1" : "0"});
                result.cells.push_back(std::move(cell));
            }
        }
    }
    result.summary_csv = c.output_dir + "/gauss_scale_summary.csv";
    return result;
}

const GaussScaleCell& GaussScaleResult::cell(int d, double alpha, int n_samples) const {
    for (const auto& cell : cells)
        if (cell.d == d && cell.alpha == alpha && cell.n_samples == n_samples) return cell;
    throw std::out_of_range("GaussScaleResult: no such cell");
}

// ---- logreg -----------------------------------------------------------------------

LogRegResult cmd_logreg(const ExperimentConfig& c) {
    namespace fs = std::filesystem;
    fs::create_directories(c.output_dir);
    const json cfg_json = config_to_json(c);

    const Dataset ds = load_dataset(c);
    const LogRegTarget model{ds, c.prior_scale};
    const TargetContract joint = model.contract();
    const int d = ds.d();

    LogRegResult result;
    result.dataset_n = ds.n();
    result.dataset_d = d;
    CsvFile summary(c.output_dir + "/logreg_summary.csv", cfg_json);
    summary.columns({"alpha", "n_samples", "chosen_step_size", "final_loss", "final_loss_se", "failed"});

    for (double alpha_value : c.alphas) {
        const AlphaParam alpha = AlphaParam::from_value(alpha_value);
        for (int n_samples : c.n_samples_list) {
            SweepConfig sweep_cfg;
            sweep_cfg.step_size_grid = c.step_size_grid;
            sweep_cfg.replications = c.replications;
            sweep_cfg.seed_base =
                c.seed_base ^ hash_combine(static_cast<std::uint64_t>(n_samples),
                                           std::bit_cast<std::uint64_t>(alpha_value) + 77);
            sweep_cfg.selection = SelectionMode::MaxFinalLoss;
            sweep_cfg.run.steps = c.steps;
            sweep_cfg.run.n_samples = n_samples;
            sweep_cfg.run.optimizer = c.optimizer_kind();
            sweep_cfg.run.loss_every = c.loss_eval_every;

            const std::int64_t run_loss_n = c.loss_eval_run_samples;
            const auto make_run = [&](double step_size, int, RngStream rng) {
                GradObjective objective = [&joint, d, alpha](std::span<const double> params, RngStream r) {
                    const DiagonalGaussian q = unpack_diagonal(params, d, false);
                    std::vector<double> eps(static_cast<std::size_t>(d));
                    for (auto& e : eps) e = r.normal();
                    GradEstimate g = alpha_elbo_grad(joint, q, alpha, eps);
                    for (auto& v : g.values) v = -v;  // descend -L_alpha
                    return g;
                };
                LossFn loss_fn = [&joint, d, alpha, run_loss_n](std::span<const double> params,
                                                                RngStream r) {
                    const DiagonalGaussian q = unpack_diagonal(params, d, false);
                    const AlphaElboEstimate est = alpha_elbo_estimate(joint, q, alpha, run_loss_n, r);
                    return std::make_pair(est.value, est.std_error);
                };
                ProjectFn project = [d](std::vector<double>& p) { project_diagonal(p, d, false); };

                std::vector<double> init(static_cast<std::size_t>(2 * d), 0.0);
                for (int i = 0; i < d; ++i) init[static_cast<std::size_t>(d + i)] = 1.0;

                RunConfig rc = sweep_cfg.run;
                rc.step_size = step_size;
                RunTrace t = run(objective, std::move(init), project, nullptr, loss_fn, rc, rng);
                t.metadata.alpha = alpha.value;
                t.metadata.d = d;
                return t;
            };

            const SweepResult swept = sweep(make_run, sweep_cfg);
            const SweepCell& best = swept.chosen();

            // High-precision final loss on each surviving replication.
            double mean_loss = 0.0, loss_se = 0.0;
            int reps = 0;
            {
                double sum = 0.0, sum2 = 0.0, se2 = 0.0;
                for (std::size_t ri = 0; ri < best.traces.size(); ++ri) {
                    const RunTrace& t = best.traces[ri];
                    if (t.metadata.aborted) continue;
                    const DiagonalGaussian q = unpack_diagonal(t.final_params, d, false);
                    const AlphaElboEstimate est = alpha_elbo_estimate(
                        joint, q, alpha, c.loss_eval_samples,
                        RngStream(c.seed_base, hash_combine(0xF1A5ull, static_cast<std::uint64_t>(ri))));
                    sum += est.value;
                    sum2 += est.value * est.value;
                    se2 += est.std_error * est.std_error;
                    ++reps;
                }
                if (reps > 0) {
                    mean_loss = sum / reps;
                    const double var_rep =
                        reps > 1 ? std::max(0.0, (sum2 - sum * sum / reps) / (reps - 1)) : 0.0;
                    loss_se = std::sqrt(var_rep / reps + se2 / (static_cast<double>(reps) * reps));
                }
            }

            LogRegCell cell;
            cell.alpha = alpha_value;
            cell.n_samples = n_samples;
            cell.chosen_step_size = swept.chosen_step_size;
            cell.final_loss = mean_loss;
            cell.final_loss_se = loss_se;
            cell.failed = best.failed || reps == 0;
            cell.csv_path = c.output_dir + "/logreg_a" + alpha_tag(alpha_value) + "_N" +
                            std::to_string(n_samples) + ".csv";

            // Loss-vs-step curve over replications at the recorded cadence.
            CsvFile csv(cell.csv_path, cfg_json, c.loss_eval_run_samples);
            csv.columns({"step", "mean_loss", "stderr_loss", "chosen_step_size"});
            if (!best.traces.empty()) {
                const auto& ref = best.traces.front().records;
                for (std::size_t s = 0; s < ref.size(); ++s) {
                    if (!ref[s].loss_estimate) continue;
                    double sum = 0.0, sum2 = 0.0;
                    int k = 0;
                    for (const auto& t : best.traces) {
                        if (s >= t.records.size() || !t.records[s].loss_estimate) continue;
                        sum += *t.records[s].loss_estimate;
                        sum2 += *t.records[s].loss_estimate * *t.records[s].loss_estimate;
                        ++k;
                    }
                    if (k == 0) continue;
                    const double mean = sum / k;
                    const double se =
                        k > 1 ? std::sqrt(std::max(0.0, (sum2 - sum * sum / k) / (k - 1) / k)) : 0.0;
                    csv.row({std::to_string(ref[s].step), fmt_double(mean), fmt_double(se),
                             fmt_double(cell.chosen_step_size)});
                }
            }

            summary.row({fmt_double(alpha_value), std::to_string(n_samples),
                         fmt_double(cell.chosen_step_size), fmt_double(cell.final_loss),
                         fmt_double(cell.final_loss_se), cell.failed ? "1" : "0"});
            result.cells.push_back(std::move(cell));
        }
    }
    result.summary_csv = c.output_dir + "/logreg_summary.csv";
    return result;
}

const LogRegCell& LogRegResult::cell(double alpha, int n_samples) const {
    for (const auto& cell : cells)
        if (cell.alpha == alpha && cell.n_samples == n_samples) return cell;
    throw std::out_of_range("LogRegResult: no such cell");
}

// ---- snr-table --------------------------------------------------------------------

SnrTableResult cmd_snr_table(const ExperimentConfig& c) {
    namespace fs = std::filesystem;
    fs::create_directories(c.output_dir);
    const json cfg_json = config_to_json(c);

    SnrTableResult result;
    result.csv_path = c.output_dir + "/snr_table.csv";
    CsvFile csv(result.csv_path, cfg_json);
    csv.columns({"d", "alpha", "lambda_spec", "status", "snr_or_bound", "existence_margin"});

    std::vector<double> sigma_qs;
    for (int i = 0; i < c.sigma_q_grid_size; ++i) {
        const double t = c.sigma_q_grid_size == 1
                             ? 0.0
                             : static_cast<double>(i) / (c.sigma_q_grid_size - 1);
        sigma_qs.push_back(c.sigma_q_min * std::pow(c.sigma_q_max / c.sigma_q_min, t));
    }

    const auto emit = [&](int d, double alpha, const std::string& spec, SnrStatus status, double value,
                          double margin) {
        SnrTableRow row{d, alpha, spec, status_string(status), value, margin};
        csv.row({std::to_string(d), fmt_double(alpha), spec, row.status, fmt_double(value),
                 fmt_double(margin)});
        result.rows.push_back(std::move(row));
    };

    for (double alpha : c.alphas) {
        for (double sq : sigma_qs) {
            const double lambda = sq * sq;
            const double margin = 1.0 + 2.0 * alpha * (lambda - 1.0);
            const std::string lam = fmt_short(lambda);

            if (margin > 0.0)
                emit(1, alpha, "ratio-power:lambda=" + lam, SnrStatus::Defined,
                     ratio_power_snr(lambda, alpha), margin);
            else
                emit(1, alpha, "ratio-power:lambda=" + lam, SnrStatus::UndefinedInfiniteVariance,
                     std::numeric_limits<double>::quiet_NaN(), margin);

            for (int d : c.dims) {
                const std::vector<double> sp(static_cast<std::size_t>(d), 1.0);
                const std::vector<double> sqv(static_cast<std::size_t>(d), sq);

                const SnrReport fact = snr_factorized_gaussian(sp, sqv, alpha, 0);
                emit(d, alpha, "fact-iso:lambda=" + lam + ":j=0", fact.status,
                     fact.value.value_or(std::numeric_limits<double>::quiet_NaN()),
                     fact.existence_margin);

                const Matrix sigma_p = Matrix::identity(d);
                Matrix scale_q(d, d);
                for (int i = 0; i < d; ++i) scale_q(i, i) = sq;
                const SnrReport bound = alpha == 0.0 ? snr_fullrank_bound(sigma_p, scale_q, 0.0)
                                                     : snr_fullrank_bound(sigma_p, scale_q, alpha);
                emit(d, alpha, "frg-iso-bound:lambda=" + lam, bound.status,
                     bound.upper_bound.value_or(std::numeric_limits<double>::quiet_NaN()),
                     bound.existence_margin);

                if (alpha != 0.0) {
                    const VarianceBound vb = variance_bound_factorized(sp, sqv, alpha, 0);
                    emit(d, alpha, "varbound-iso:lambda=" + lam + ":j=0", vb.status, vb.bound,
                         vb.existence_margin);
                }
            }
        }
        if (alpha == 0.0)
            for (int d : c.dims)
                emit(d, alpha, "frg-zero-limit", SnrStatus::Defined, 1.0 / (d + 2), 1.0);
    }
    return result;
}

// ---- snr-validate -----------------------------------------------------------------

SnrValidateResult validate_cells(const std::vector<ValidateCell>& cells, std::int64_t n,
                                 const RngStream& rng) {
    SnrValidateResult result;
    std::uint64_t cell_id = 0;
    for (const auto& cell : cells) {
        ValidateOutcome out;
        out.desc = cell.desc;
        out.theory = cell.theory;
        if (cell.undefined) {
            out.verdict = ValidateVerdict::SkippedUndefined;
            result.outcomes.push_back(std::move(out));
            ++cell_id;
            continue;
        }
        const McSnrEstimate est = mc_snr(cell.sampler, n, rng.split(cell_id));
        out.mc = est.snr;
        out.se = est.se_snr();
        out.rel_err = cell.theory != 0.0 ? std::abs(out.mc - cell.theory) / std::abs(cell.theory)
                                         : std::abs(out.mc);
        // 2% relative where the Monte Carlo resolves that fine; 3 standard
        // errors where it cannot (tiny values, or heavy-tailed cells whose
        // fourth moment diverges near the existence boundary).
        const bool pass =
            out.rel_err <= 0.02 || std::abs(out.mc - cell.theory) <= 3.0 * out.se;
        out.verdict = pass ? ValidateVerdict::Pass : ValidateVerdict::Fail;
        if (!pass) result.all_pass = false;
        result.outcomes.push_back(std::move(out));
        ++cell_id;
    }
    return result;
}

std::vector<ValidateCell> default_validate_cells(const ExperimentConfig& c) {
    std::vector<ValidateCell> cells;

    const auto add_factorized = [&](int d, const std::vector<double>& lambdas, double alpha, int j) {
        std::vector<double> sp(static_cast<std::size_t>(d), 1.0);
        std::vector<double> sq(static_cast<std::size_t>(d));
        for (int i = 0; i < d; ++i) sq[static_cast<std::size_t>(i)] = std::sqrt(lambdas[static_cast<std::size_t>(i)]);

        std::string desc = "fact:d=" + std::to_string(d) + ":alpha=" + fmt_short(alpha) + ":j=" +
                           std::to_string(j) + ":lambda=[";
        for (int i = 0; i < d; ++i) desc += (i ? "," : "") + fmt_short(lambdas[static_cast<std::size_t>(i)]);
        desc += "]";

        const SnrReport theory = snr_factorized_gaussian(sp, sq, alpha, j);
        ValidateCell cell;
        cell.desc = std::move(desc);
        if (!theory.defined()) {
            cell.undefined = true;
            cells.push_back(std::move(cell));
            return;
        }
        cell.theory = *theory.value;
        const DiagonalGaussian q = DiagonalGaussian::mean_zero(sq);
        const TargetContract target = make_standard_gaussian_target(d);
        cell.sampler = component_sampler(
            make_sampler(EstimatorKind::Drep, target, q, AlphaParam::from_value(alpha)), j);
        cells.push_back(std::move(cell));
    };

    for (int d : c.dims) {
        if (d > 4) continue;  // desk-scale default grid
        std::vector<std::vector<double>> patterns;
        for (double l : c.lambda_grid) patterns.emplace_back(static_cast<std::size_t>(d), l);
        if (d > 1) {
            std::vector<double> mixed(static_cast<std::size_t>(d));
            for (int i = 0; i < d; ++i) mixed[static_cast<std::size_t>(i)] = i % 2 == 0 ? 4.0 : 0.25;
            patterns.push_back(mixed);
            std::vector<double> with_unit(static_cast<std::size_t>(d));
            for (int i = 0; i < d; ++i) with_unit[static_cast<std::size_t>(i)] = i % 2 == 0 ? 1.0 : 4.0;
            patterns.push_back(with_unit);
        }
        for (const auto& pattern : patterns)
            for (double alpha : c.alphas) {
                add_factorized(d, pattern, alpha, 0);
                if (d > 1) add_factorized(d, pattern, alpha, d - 1);
            }
    }

    // Full-rank cells: isotropic and a fixed correlated pair per dimension.
    for (int d : c.dims) {
        if (d < 2 || d > 4) continue;
        for (int variant = 0; variant < 2; ++variant) {
            Matrix sigma_p = Matrix::identity(d);
            Matrix scale_q(d, d);
            if (variant == 0) {
                for (int i = 0; i < d; ++i) scale_q(i, i) = 2.0;
            } else {
                for (int i = 0; i < d; ++i) {
                    sigma_p(i, i) = 1.0 + 0.5 * i;
                    scale_q(i, i) = 1.2 + 0.3 * i;
                    for (int j = 0; j < i; ++j) scale_q(i, j) = 0.4 / (1 + i - j);
                }
            }
            for (double alpha : c.alphas) {
                std::string desc = "frg:d=" + std::to_string(d) + ":alpha=" + fmt_short(alpha) +
                                   ":variant=" + std::to_string(variant);
                ValidateCell cell;
                cell.desc = std::move(desc);
                const SnrReport theory = alpha == 0.0 ? snr_fullrank_zero_limit(d)
                                                      : snr_fullrank_exact(sigma_p, scale_q, alpha);
                if (!theory.defined()) {
                    cell.undefined = true;
                    cells.push_back(std::move(cell));
                    continue;
                }
                cell.theory = *theory.value;
                const FullRankGaussian q = FullRankGaussian::mean_zero(scale_q, ScaleParam::FullMatrix);
                std::vector<double> mu(static_cast<std::size_t>(d), 0.0);
                const TargetContract target = make_fullrank_gaussian_target(mu, cholesky(sigma_p));
                cell.sampler =
                    make_sampler(EstimatorKind::Drep, target, q, AlphaParam::from_value(alpha));
                cells.push_back(std::move(cell));
            }
        }
    }
    return cells;
}

SnrValidateResult cmd_snr_validate(const ExperimentConfig& c) {
    namespace fs = std::filesystem;
    fs::create_directories(c.output_dir);
    const json cfg_json = config_to_json(c);

    const auto cells = default_validate_cells(c);
    SnrValidateResult result = validate_cells(cells, c.mc_samples, RngStream(c.seed_base, 0x7A11DA7Eull));
    result.csv_path = c.output_dir + "/snr_validate.csv";

    CsvFile csv(result.csv_path, cfg_json, c.mc_samples);
    csv.columns({"cell", "verdict", "theory", "mc", "rel_err", "se"});
    for (const auto& out : result.outcomes) {
        const char* verdict = out.verdict == ValidateVerdict::Pass ? "pass"
                              : out.verdict == ValidateVerdict::Fail ? "fail"
                                                                     : "skipped-undefined";
        csv.row({out.desc, verdict, fmt_double(out.theory), fmt_double(out.mc),
                 fmt_double(out.rel_err), fmt_double(out.se)});
    }
    return result;
}

// ---- snr-path ---------------------------------------------------------------------

SnrPathResult cmd_snr_path(const ExperimentConfig& c) {
    namespace fs = std::filesystem;
    fs::create_directories(c.output_dir);
    const json cfg_json = config_to_json(c);

    TargetContract target;
    int d = 0;
    std::vector<double> init;
    bool mean_frozen = false;
    SelectionMode selection = SelectionMode::MinFinalError;

    if (c.dataset_path.empty()) {
        d = c.dims.front();
        target = make_standard_gaussian_target(d);
        init.assign(static_cast<std::size_t>(d), 2.0);
        mean_frozen = true;
    } else {
        const Dataset ds = load_dataset(c);
        d = ds.d();
        target = LogRegTarget{ds, c.prior_scale}.contract();
        init.assign(static_cast<std::size_t>(2 * d), 0.0);
        for (int i = 0; i < d; ++i) init[static_cast<std::size_t>(d + i)] = 1.0;
        mean_frozen = false;
        selection = SelectionMode::MaxFinalLoss;
    }

    const AlphaParam alpha0 = AlphaParam::zero_limit();
    const bool is_logreg = !c.dataset_path.empty();

    const GradObjective objective = [&target, d, mean_frozen, alpha0,
                                     is_logreg](std::span<const double> params, RngStream r) {
        const DiagonalGaussian q = unpack_diagonal(params, d, mean_frozen);
        std::vector<double> eps(static_cast<std::size_t>(d));
        for (auto& e : eps) e = r.normal();
        if (is_logreg) {
            GradEstimate g = alpha_elbo_grad(target, q, alpha0, eps);
            for (auto& v : g.values) v = -v;
            return g;
        }
        return g_drep(target, q, alpha0, eps);
    };
    const ProjectFn project = [d, mean_frozen](std::vector<double>& p) {
        project_diagonal(p, d, mean_frozen);
    };
    const ErrorFn error_fn = [d, mean_frozen, is_logreg](std::span<const double> params) {
        if (is_logreg) return std::numeric_limits<double>::quiet_NaN();
        return scale_error(unpack_diagonal(params, d, mean_frozen));
    };
    const LossFn loss_fn = [&target, d, mean_frozen, alpha0,
                            n = c.loss_eval_run_samples](std::span<const double> params, RngStream r) {
        const DiagonalGaussian q = unpack_diagonal(params, d, mean_frozen);
        const AlphaElboEstimate est = alpha_elbo_estimate(target, q, alpha0, n, r);
        return std::make_pair(est.value, est.std_error);
    };

    double step_size = c.path_step_size;
    if (step_size <= 0.0) {
        SweepConfig sweep_cfg;
        sweep_cfg.step_size_grid = c.step_size_grid;
        sweep_cfg.replications = std::min(c.replications, 5);
        sweep_cfg.seed_base = c.seed_base ^ 0x9A75ull;
        sweep_cfg.selection = selection;
        sweep_cfg.run.steps = c.steps;
        sweep_cfg.run.n_samples = 10;
        sweep_cfg.run.optimizer = c.optimizer_kind();
        if (is_logreg) sweep_cfg.run.loss_every = std::max(c.loss_eval_every, 100);
        const auto make_run = [&](double lr, int, RngStream rng) {
            RunConfig rc = sweep_cfg.run;
            rc.step_size = lr;
            return run(objective, init, project, is_logreg ? ErrorFn(nullptr) : error_fn,
                       is_logreg ? loss_fn : LossFn(nullptr), rc, rng);
        };
        step_size = sweep(make_run, sweep_cfg).chosen_step_size;
    }

    RunConfig rc;
    rc.steps = c.steps;
    rc.step_size = step_size;
    rc.n_samples = 10;
    rc.optimizer = c.optimizer_kind();
    rc.checkpoint_every = c.path_checkpoint_every;
    const RunTrace trace = run(objective, init, project, is_logreg ? ErrorFn(nullptr) : error_fn,
                               nullptr, rc, RngStream(c.seed_base, 0xBA7Cull));

    std::vector<std::pair<int, DiagonalGaussian>> path;
    for (const auto& [step, params] : trace.checkpoints)
        path.emplace_back(step, unpack_diagonal(params, d, mean_frozen));

    std::vector<AlphaParam> alphas;
    for (double a : c.alphas) alphas.push_back(AlphaParam::from_value(a));

    SnrPathResult result;
    result.table = snr_along_path(path, target, alphas, c.mc_samples, RngStream(c.seed_base, 0x5A7Bull));
    result.csv_path = c.output_dir + "/snr_path.csv";

    CsvFile csv(result.csv_path, cfg_json, c.mc_samples);
    csv.columns({"step", "alpha", "status", "snr", "nonfinite_count"});
    for (const auto& cell : result.table.cells)
        csv.row({std::to_string(cell.step), fmt_double(cell.alpha), to_string(cell.status),
                 fmt_double(cell.snr), std::to_string(cell.nonfinite_count)});
    return result;
}

// ---- var-check --------------------------------------------------------------------

VarCheckResult cmd_var_check(const ExperimentConfig& c) {
    namespace fs = std::filesystem;
    fs::create_directories(c.output_dir);
    const json cfg_json = config_to_json(c);

    VarCheckResult result;
    result.csv_path = c.output_dir + "/var_check.csv";
    CsvFile csv(result.csv_path, cfg_json, c.mc_samples);
    csv.columns({"d", "alpha", "lambda_spec", "mc_variance_component_j", "bound", "bound_holds"});

    std::uint64_t cell_id = 0;
    for (int d : c.dims) {
        const TargetContract target = make_standard_gaussian_target(d);
        for (double alpha : c.alphas) {
            if (alpha == 0.0) continue;
            std::vector<double> lambdas = c.lambda_grid;
            lambdas.push_back(1.0);  // the sigma_p = sigma_q row
            for (double lambda : lambdas) {
                const std::vector<double> sp(static_cast<std::size_t>(d), 1.0);
                const std::vector<double> sq(static_cast<std::size_t>(d), std::sqrt(lambda));
                const VarianceBound vb = variance_bound_factorized(sp, sq, alpha, 0);

                VarCheckRow row;
                row.d = d;
                row.alpha = alpha;
                row.lambda_spec = "iso:lambda=" + fmt_short(lambda) + ":j=0";
                row.bound = vb.bound;
                row.undefined = !vb.defined();

                if (!row.undefined) {
                    const DiagonalGaussian q = DiagonalGaussian::mean_zero(sq);
                    const auto sampler = component_sampler(
                        make_sampler(EstimatorKind::Drep, target, q, AlphaParam::from_value(alpha)), 0);
                    try {
                        const McVarianceEstimate mv =
                            mc_variance(sampler, c.mc_samples, RngStream(c.seed_base, cell_id));
                        row.mc_variance_j = mv.per_component.at(0);
                    } catch (const DegenerateAllZero&) {
                        row.mc_variance_j = 0.0;
                    }
                    row.bound_holds = row.mc_variance_j <= row.bound;
                    if (!row.bound_holds) result.all_hold = false;
                }
                csv.row({std::to_string(d), fmt_double(alpha), row.lambda_spec,
                         fmt_double(row.mc_variance_j), fmt_double(row.bound),
                         row.undefined ? "undefined" : (row.bound_holds ? "1" : "0")});
                result.rows.push_back(std::move(row));
                ++cell_id;
            }
        }
    }
    return result;
}

}  // namespace avi
