#include "avi/optimizers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace avi {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

void project_diagonal(std::vector<double>& params, int d, bool mean_frozen) {
    const std::size_t offset = mean_frozen ? 0 : static_cast<std::size_t>(d);
    for (int i = 0; i < d; ++i) {
        double& s = params[offset + static_cast<std::size_t>(i)];
        if (s < kScaleFloor) s = kScaleFloor;
    }
}

void project_fullrank(std::vector<double>& params, int d, bool mean_frozen) {
    std::size_t idx = mean_frozen ? 0 : static_cast<std::size_t>(d);
    for (int i = 0; i < d; ++i) {
        idx += static_cast<std::size_t>(i);  // skip the strictly-lower entries of row i
        double& s = params[idx];
        if (s < kScaleFloor) s = kScaleFloor;
        ++idx;
    }
}

std::vector<double> pack_params(const DiagonalGaussian& q) {
    std::vector<double> p;
    p.reserve(static_cast<std::size_t>(q.active_params()));
    if (!q.mean_frozen) p.insert(p.end(), q.mean.begin(), q.mean.end());
    p.insert(p.end(), q.scales.begin(), q.scales.end());
    return p;
}

DiagonalGaussian unpack_diagonal(std::span<const double> params, int d, bool mean_frozen) {
    const std::size_t want = static_cast<std::size_t>(mean_frozen ? d : 2 * d);
    if (params.size() != want) throw DimensionMismatch("unpack_diagonal: parameter count mismatch");
    std::vector<double> mu(static_cast<std::size_t>(d), 0.0);
    std::size_t offset = 0;
    if (!mean_frozen) {
        for (int i = 0; i < d; ++i) mu[static_cast<std::size_t>(i)] = params[static_cast<std::size_t>(i)];
        offset = static_cast<std::size_t>(d);
    }
    std::vector<double> sigma(params.begin() + static_cast<std::ptrdiff_t>(offset), params.end());
    return DiagonalGaussian(std::move(mu), std::move(sigma), mean_frozen);
}

void sgd_step(std::vector<double>& params, const GradEstimate& grad, double step_size,
              const ProjectFn& project) {
    if (!(step_size > 0.0)) throw std::invalid_argument("sgd_step: step size must be positive");
    if (grad.values.size() != params.size()) throw DimensionMismatch("sgd_step: gradient size mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= step_size * grad.values[i];
    if (project) project(params);
}

AdamState AdamState::zeros(int n) {
    AdamState s;
    s.m.assign(static_cast<std::size_t>(n), 0.0);
    s.v.assign(static_cast<std::size_t>(n), 0.0);
    return s;
}

std::vector<double> AdamState::serialize() const {
    std::vector<double> out;
    out.reserve(m.size() + v.size() + 1);
    out.push_back(static_cast<double>(t));
    out.insert(out.end(), m.begin(), m.end());
    out.insert(out.end(), v.begin(), v.end());
    return out;
}

AdamState AdamState::deserialize(std::span<const double> data) {
    if (data.empty() || (data.size() - 1) % 2 != 0)
        throw DimensionMismatch("AdamState::deserialize: bad payload size");
    AdamState s;
    s.t = static_cast<std::int64_t>(data[0]);
    const std::size_t n = (data.size() - 1) / 2;
    s.m.assign(data.begin() + 1, data.begin() + 1 + static_cast<std::ptrdiff_t>(n));
    s.v.assign(data.begin() + 1 + static_cast<std::ptrdiff_t>(n), data.end());
    return s;
}

void adam_step(std::vector<double>& params, const GradEstimate& grad, AdamState& state,
               double step_size, const ProjectFn& project, const AdamSettings& settings) {
    if (!(step_size > 0.0)) throw std::invalid_argument("adam_step: step size must be positive");
    if (grad.values.size() != params.size()) throw DimensionMismatch("adam_step: gradient size mismatch");
    if (state.m.size() != params.size()) throw DimensionMismatch("adam_step: state size mismatch");

    ++state.t;
    const double b1 = settings.beta1, b2 = settings.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grad.values[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= step_size * mhat / (std::sqrt(vhat) + settings.epsilon);
    }
    if (project) project(params);
}

double RunTrace::final_error() const {
    return records.empty() ? kInf : records.back().error;
}

std::optional<double> RunTrace::final_loss() const {
    for (auto it = records.rbegin(); it != records.rend(); ++it)
        if (it->loss_estimate) return it->loss_estimate;
    return std::nullopt;
}

RunTrace run(const GradObjective& objective_grad, std::vector<double> init_params,
             const ProjectFn& project, const ErrorFn& error_fn, const LossFn& loss_fn,
             const RunConfig& config, const RngStream& rng) {
    if (config.steps < 1) throw std::invalid_argument("run: steps must be >= 1");
    RunTrace trace;
    trace.metadata.n_samples = config.n_samples;
    trace.metadata.step_size = config.step_size;
    trace.metadata.optimizer_kind = config.optimizer;
    trace.metadata.seed = rng.seed();

    std::vector<double> params = std::move(init_params);
    AdamState adam = AdamState::zeros(static_cast<int>(params.size()));

    const auto record = [&](int step, bool want_loss) {
        StepRecord rec;
        rec.step = step;
        rec.error = error_fn ? error_fn(params) : std::numeric_limits<double>::quiet_NaN();
        if (want_loss && loss_fn) {
            const auto [loss, se] = loss_fn(params, rng.split(0x10000000ull + static_cast<std::uint64_t>(step)));
            rec.loss_estimate = loss;
            rec.loss_se = se;
        }
        trace.records.push_back(std::move(rec));
    };

    const auto want_loss_at = [&](int step) {
        if (!loss_fn || config.loss_every <= 0) return false;
        return step == 0 || step == config.steps || step % config.loss_every == 0;
    };
    const auto checkpoint_at = [&](int step) {
        if (config.checkpoint_every <= 0) return;
        if (step == 0 || step == config.steps || step % config.checkpoint_every == 0)
            trace.checkpoints.emplace_back(step, params);
    };

    record(0, want_loss_at(0));
    checkpoint_at(0);
    for (int t = 1; t <= config.steps; ++t) {
        GradEstimate grad;
        try {
            const GradSampler at_params = [&](RngStream r) { return objective_grad(params, r); };
            grad = averaged(at_params, config.n_samples, rng.split(static_cast<std::uint64_t>(t)));
        } catch (const NonFiniteError&) {
            trace.metadata.aborted = true;
            trace.metadata.abort_step = t;
            break;
        }
        if (config.optimizer == OptimizerKind::Sgd)
            sgd_step(params, grad, config.step_size, project);
        else
            adam_step(params, grad, adam, config.step_size, project, config.adam);
        record(t, want_loss_at(t));
        checkpoint_at(t);
    }
    trace.final_params = params;
    return trace;
}

SweepResult sweep(const RunFactory& make_run, const SweepConfig& config) {
    if (config.step_size_grid.empty()) throw std::invalid_argument("sweep: empty step-size grid");
    if (config.replications < 1) throw std::invalid_argument("sweep: replications must be >= 1");

    const int ng = static_cast<int>(config.step_size_grid.size());
    const int nr = config.replications;
    std::vector<RunTrace> all(static_cast<std::size_t>(ng) * nr);

#pragma omp parallel for schedule(dynamic) collapse(2)
    for (int gi = 0; gi < ng; ++gi) {
        for (int ri = 0; ri < nr; ++ri) {
            const std::uint64_t seed = config.seed_base ^ hash_combine(static_cast<std::uint64_t>(gi),
                                                                       static_cast<std::uint64_t>(ri));
            all[static_cast<std::size_t>(gi) * nr + ri] =
                make_run(config.step_size_grid[static_cast<std::size_t>(gi)], ri, RngStream(seed, 0));
        }
    }

    SweepResult result;
    result.cells.resize(static_cast<std::size_t>(ng));
    for (int gi = 0; gi < ng; ++gi) {
        SweepCell& cell = result.cells[static_cast<std::size_t>(gi)];
        cell.step_size = config.step_size_grid[static_cast<std::size_t>(gi)];
        cell.traces.assign(all.begin() + static_cast<std::ptrdiff_t>(gi) * nr,
                           all.begin() + static_cast<std::ptrdiff_t>(gi + 1) * nr);

        cell.failed = std::all_of(cell.traces.begin(), cell.traces.end(),
                                  [](const RunTrace& t) { return t.metadata.aborted; });

        // Mean error curve over replications; aborted runs count as +inf from
        // their abort step onward.
        std::size_t len = 0;
        for (const auto& t : cell.traces) len = std::max(len, t.records.size());
        cell.mean_error_curve.assign(len, 0.0);
        cell.se_error_curve.assign(len, 0.0);
        for (std::size_t s = 0; s < len; ++s) {
            double sum = 0.0, sum2 = 0.0;
            for (const auto& t : cell.traces) {
                const double e = s < t.records.size() ? t.records[s].error : kInf;
                sum += e;
                sum2 += e * e;
            }
            const double mean = sum / nr;
            cell.mean_error_curve[s] = mean;
            cell.se_error_curve[s] =
                nr > 1 ? std::sqrt(std::max(0.0, (sum2 - sum * sum / nr) / (nr - 1) / nr)) : 0.0;
        }

        double err_sum = 0.0;
        double loss_sum = 0.0, loss_sum2 = 0.0, loss_se2 = 0.0;
        int loss_count = 0;
        for (const auto& t : cell.traces) {
            err_sum += t.metadata.aborted ? kInf : t.final_error();
            if (!t.metadata.aborted) {
                if (const auto l = t.final_loss()) {
                    loss_sum += *l;
                    loss_sum2 += *l * *l;
                    for (auto it = t.records.rbegin(); it != t.records.rend(); ++it)
                        if (it->loss_estimate) {
                            loss_se2 += it->loss_se * it->loss_se;
                            break;
                        }
                    ++loss_count;
                }
            }
        }
        cell.mean_final_error = err_sum / nr;
        if (loss_count > 0) {
            cell.mean_final_loss = loss_sum / loss_count;
            const double var_rep =
                loss_count > 1
                    ? std::max(0.0, (loss_sum2 - loss_sum * loss_sum / loss_count) / (loss_count - 1))
                    : 0.0;
            cell.se_final_loss =
                std::sqrt(var_rep / loss_count + loss_se2 / (static_cast<double>(loss_count) * loss_count));
        } else {
            cell.mean_final_loss = -kInf;
        }
    }

    // Best final performance; ties break toward the smaller step size, which
    // is the iteration order.
    double best = config.selection == SelectionMode::MinFinalError ? kInf : -kInf;
    for (int gi = 0; gi < ng; ++gi) {
        const SweepCell& cell = result.cells[static_cast<std::size_t>(gi)];
        if (cell.failed) continue;
        const bool better = config.selection == SelectionMode::MinFinalError
                                ? cell.mean_final_error < best
                                : cell.mean_final_loss > best;
        if (better) {
            best = config.selection == SelectionMode::MinFinalError ? cell.mean_final_error
                                                                    : cell.mean_final_loss;
            result.chosen_index = gi;
        }
    }
    if (result.chosen_index < 0) {
        // Every cell failed outright; fall back to the smallest step size so
        // callers still get a well-formed result to report.
        for (int gi = 0; gi < ng; ++gi)
            if (!result.cells[static_cast<std::size_t>(gi)].failed) { result.chosen_index = gi; break; }
        if (result.chosen_index < 0) result.chosen_index = 0;
    }
    result.chosen_step_size = result.cells[static_cast<std::size_t>(result.chosen_index)].step_size;
    return result;
}

const SweepCell& SweepResult::chosen() const {
    if (chosen_index < 0 || chosen_index >= static_cast<int>(cells.size()))
        throw std::out_of_range("SweepResult: no chosen cell");
    return cells[static_cast<std::size_t>(chosen_index)];
}

double scale_error(const DiagonalGaussian& q) {
    double s = 0.0;
    for (double sigma : q.scales) s += (sigma - 1.0) * (sigma - 1.0);
    return s / q.dim();
}

const char* to_string(OptimizerKind k) {
    return k == OptimizerKind::Sgd ? "sgd" : "adam";
}

}  // namespace avi
