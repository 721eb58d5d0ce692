#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "avi/distributions.hpp"
#include "avi/estimators.hpp"
#include "avi/rng.hpp"

namespace avi {

/// Positivity is maintained by projection (scales clipped to >= 1e-6), not by
/// a log parameterization, so gradients stay in the sigma coordinates the
/// closed-form SNR results are stated in.
constexpr double kScaleFloor = 1e-6;

/// Clips the scale block of a flattened diagonal-Gaussian parameter vector.
void project_diagonal(std::vector<double>& params, int d, bool mean_frozen);

/// Clips the diagonal of the scale factor in a flattened full-rank vector
/// (lower-triangle layout).
void project_fullrank(std::vector<double>& params, int d, bool mean_frozen);

std::vector<double> pack_params(const DiagonalGaussian& q);
DiagonalGaussian unpack_diagonal(std::span<const double> params, int d, bool mean_frozen);

using ProjectFn = std::function<void(std::vector<double>&)>;

void sgd_step(std::vector<double>& params, const GradEstimate& grad, double step_size,
              const ProjectFn& project);

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t t = 0;

    static AdamState zeros(int n);
    std::vector<double> serialize() const;
    static AdamState deserialize(std::span<const double> data);
};

struct AdamSettings {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

void adam_step(std::vector<double>& params, const GradEstimate& grad, AdamState& state,
               double step_size, const ProjectFn& project, const AdamSettings& settings = {});

enum class OptimizerKind { Sgd, Adam };

struct StepRecord {
    int step = 0;
    double error = 0.0;
    std::optional<double> loss_estimate;
    double loss_se = 0.0;
};

struct RunMetadata {
    double alpha = 0.0;
    int n_samples = 1;
    double step_size = 0.0;
    std::uint64_t seed = 0;
    OptimizerKind optimizer_kind = OptimizerKind::Sgd;
    int d = 0;
    bool aborted = false;
    int abort_step = -1;
};

struct RunTrace {
    std::vector<StepRecord> records;
    RunMetadata metadata;
    std::vector<double> final_params;
    std::vector<std::pair<int, std::vector<double>>> checkpoints;

    double final_error() const;
    std::optional<double> final_loss() const;
};

/// Single-sample gradient of the objective at the given parameters. run()
/// averages n_samples of these per step. The returned gradient is descended.
using GradObjective = std::function<GradEstimate(std::span<const double>, RngStream)>;
using ErrorFn = std::function<double(std::span<const double>)>;
/// Loss estimate with its standard error (reported, not optimized on).
using LossFn = std::function<std::pair<double, double>(std::span<const double>, RngStream)>;

struct RunConfig {
    int steps = 1000;
    double step_size = 0.01;
    int n_samples = 1;
    OptimizerKind optimizer = OptimizerKind::Sgd;
    AdamSettings adam;
    int loss_every = 0;       // 0: never; otherwise also at step 0 and the last step
    int checkpoint_every = 0; // 0: never; otherwise parameters kept at step 0, multiples, and the end
};

RunTrace run(const GradObjective& objective_grad, std::vector<double> init_params,
             const ProjectFn& project, const ErrorFn& error_fn, const LossFn& loss_fn,
             const RunConfig& config, const RngStream& rng);

enum class SelectionMode { MinFinalError, MaxFinalLoss };

struct SweepConfig {
    std::vector<double> step_size_grid;
    int replications = 15;
    std::uint64_t seed_base = 0;
    SelectionMode selection = SelectionMode::MinFinalError;
    RunConfig run;
};

struct SweepCell {
    double step_size = 0.0;
    bool failed = false;  // every replication aborted
    std::vector<RunTrace> traces;
    std::vector<double> mean_error_curve;
    std::vector<double> se_error_curve;
    double mean_final_error = 0.0;
    double mean_final_loss = 0.0;
    double se_final_loss = 0.0;
};

struct SweepResult {
    std::vector<SweepCell> cells;
    int chosen_index = -1;
    double chosen_step_size = 0.0;

    const SweepCell& chosen() const;
};

/// Builds one run for (step size, replication). The factory receives the
/// derived per-run stream; runs execute concurrently and are aggregated in
/// deterministic grid order.
using RunFactory = std::function<RunTrace(double step_size, int replication, RngStream rng)>;

SweepResult sweep(const RunFactory& make_run, const SweepConfig& config);

/// (1/d) sum_i (sigma_qi - 1)^2 against the standard-Gaussian target.
double scale_error(const DiagonalGaussian& q);

const char* to_string(OptimizerKind k);

}  // namespace avi
