#pragma once

#include <cmath>
#include <cstdint>
#include <exception>
#include <string>
#include <vector>

#include "avi/errors.hpp"
#include "avi/estimators.hpp"
#include "avi/grad.hpp"
#include "avi/rng.hpp"

namespace avi {

/// Monte Carlo estimate of SNR[X] = ||E X||^2 / E ||X||^2. Matrix-valued
/// estimators enter as flattened entry vectors, which makes the norm the
/// Frobenius norm. Non-finite samples are excluded from the moments and
/// counted instead.
struct McSnrEstimate {
    double snr = 0.0;
    double mean_norm_sq = 0.0;
    double mean_sq_norm = 0.0;
    std::int64_t n_samples = 0;
    double se_mean_norm_sq = 0.0;
    double se_mean_sq_norm = 0.0;
    std::int64_t nonfinite_count = 0;
    std::vector<double> mean;

    /// Delta-method standard error of the SNR ratio (covariance between the
    /// two moment estimates neglected).
    double se_snr() const {
        if (mean_sq_norm <= 0.0 || snr <= 0.0) return 0.0;
        const double a = se_mean_norm_sq / mean_norm_sq;
        const double b = se_mean_sq_norm / mean_sq_norm;
        return snr * std::sqrt(a * a + b * b);
    }
};

struct McVarianceEstimate {
    std::vector<double> per_component;
    double total = 0.0;
    std::int64_t n_samples = 0;
    std::int64_t nonfinite_count = 0;
};

namespace detail {

/// Streaming moments of a vector-valued sample set: Welford means and M2ated
/// per component, plus the scalar squared-norm moments. Merging two
/// accumulators is exact (Chan's pairwise formulas), so a fixed block
/// structure gives results independent of the executing thread count.
struct MomentAccumulator {
    std::int64_t count = 0;
    std::vector<double> mean;
    std::vector<double> m2;
    double normsq_mean = 0.0;
    double normsq_m2 = 0.0;
    double max_abs = 0.0;

    void add(const std::vector<double>& x) {
        if (count == 0) {
            mean.assign(x.size(), 0.0);
            m2.assign(x.size(), 0.0);
        } else if (x.size() != mean.size()) {
            throw DimensionMismatch("MomentAccumulator: sample size changed");
        }
        ++count;
        double nsq = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double v = x[i];
            nsq += v * v;
            const double d = v - mean[i];
            mean[i] += d / static_cast<double>(count);
            m2[i] += d * (v - mean[i]);
            const double av = std::abs(v);
            if (av > max_abs) max_abs = av;
        }
        const double dn = nsq - normsq_mean;
        normsq_mean += dn / static_cast<double>(count);
        normsq_m2 += dn * (nsq - normsq_mean);
    }

    void merge(const MomentAccumulator& o) {
        if (o.count == 0) return;
        if (count == 0) {
            *this = o;
            return;
        }
        if (o.mean.size() != mean.size()) throw DimensionMismatch("MomentAccumulator: merge size mismatch");
        const double na = static_cast<double>(count), nb = static_cast<double>(o.count);
        const double nt = na + nb;
        for (std::size_t i = 0; i < mean.size(); ++i) {
            const double d = o.mean[i] - mean[i];
            mean[i] += d * nb / nt;
            m2[i] += o.m2[i] + d * d * na * nb / nt;
        }
        const double dn = o.normsq_mean - normsq_mean;
        normsq_mean += dn * nb / nt;
        normsq_m2 += o.normsq_m2 + dn * dn * na * nb / nt;
        if (o.max_abs > max_abs) max_abs = o.max_abs;
        count += o.count;
    }
};

struct BlockResult {
    MomentAccumulator acc;
    std::int64_t nonfinite = 0;
    std::exception_ptr error;
};

inline std::int64_t block_size_for(std::int64_t n) {
    const std::int64_t b = n / 16;
    return std::max<std::int64_t>(1, std::min<std::int64_t>(8192, b));
}

/// Runs `sampler` for sample indices [0, n) over a block structure fixed by n
/// alone. Used by both the SNR and the variance kernels.
template <class Sampler>
std::vector<BlockResult> run_blocks(const Sampler& sampler, std::int64_t n, const RngStream& rng) {
    const std::int64_t bsize = block_size_for(n);
    const std::int64_t nblocks = (n + bsize - 1) / bsize;
    std::vector<BlockResult> blocks(static_cast<std::size_t>(nblocks));

#pragma omp parallel for schedule(dynamic)
    for (std::int64_t b = 0; b < nblocks; ++b) {
        BlockResult& r = blocks[static_cast<std::size_t>(b)];
        try {
            const std::int64_t lo = b * bsize;
            const std::int64_t hi = std::min(n, lo + bsize);
            for (std::int64_t i = lo; i < hi; ++i) {
                try {
                    const GradEstimate g = sampler(rng.split(static_cast<std::uint64_t>(i)));
                    r.acc.add(g.values);
                } catch (const NonFiniteError&) {
                    ++r.nonfinite;
                }
            }
        } catch (...) {
            r.error = std::current_exception();
        }
    }
    for (const auto& b : blocks)
        if (b.error) std::rethrow_exception(b.error);
    return blocks;
}

}  // namespace detail

/// Parallel Monte Carlo SNR with deterministic sharding: identical inputs
/// give bitwise-identical results for any OpenMP thread count.
template <class Sampler>
McSnrEstimate mc_snr(const Sampler& sampler, std::int64_t n, const RngStream& rng) {
    if (n < 2) throw std::invalid_argument("mc_snr: n must be >= 2");
    const auto blocks = detail::run_blocks(sampler, n, rng);

    detail::MomentAccumulator total;
    std::int64_t nonfinite = 0;
    for (const auto& b : blocks) {
        total.merge(b.acc);
        nonfinite += b.nonfinite;
    }
    if (total.count == 0) throw NonFiniteError("mc_snr: every sample was non-finite");
    if (total.max_abs == 0.0)
        throw DegenerateAllZero("mc_snr: every sample was the zero vector");

    McSnrEstimate est;
    est.n_samples = total.count;
    est.nonfinite_count = nonfinite;
    est.mean = total.mean;
    for (double v : total.mean) est.mean_norm_sq += v * v;
    est.mean_sq_norm = total.normsq_mean;
    est.snr = est.mean_sq_norm > 0.0 ? est.mean_norm_sq / est.mean_sq_norm : 0.0;
    est.se_mean_sq_norm =
        std::sqrt(total.normsq_m2 / static_cast<double>(total.count - 1) / static_cast<double>(total.count));

    // Delta-method standard error of ||mean||^2 from the spread of the
    // per-block mean projections onto the overall mean.
    const std::int64_t bsize = detail::block_size_for(n);
    double s = 0.0, s2 = 0.0;
    std::int64_t k = 0;
    for (const auto& b : blocks) {
        if (b.acc.count < bsize) continue;  // ragged or sample-depleted block
        double proj = 0.0;
        for (std::size_t i = 0; i < total.mean.size(); ++i) proj += total.mean[i] * b.acc.mean[i];
        s += proj;
        s2 += proj * proj;
        ++k;
    }
    if (k >= 2) {
        const double var_proj = std::max(0.0, (s2 - s * s / k) / (k - 1));
        est.se_mean_norm_sq = 2.0 * std::sqrt(var_proj / k);
    }
    return est;
}

/// Serial reference for mc_snr: plain single-pass accumulation with the
/// exact delta-method standard error (full covariance quadratic form).
template <class Sampler>
McSnrEstimate mc_snr_serial(const Sampler& sampler, std::int64_t n, const RngStream& rng) {
    if (n < 2) throw std::invalid_argument("mc_snr_serial: n must be >= 2");
    std::vector<double> sum, sum_sq_outer;
    double sum_normsq = 0.0, sum_normsq2 = 0.0, max_abs = 0.0;
    std::int64_t count = 0, nonfinite = 0;
    std::size_t p = 0;

    for (std::int64_t i = 0; i < n; ++i) {
        GradEstimate g;
        try {
            g = sampler(rng.split(static_cast<std::uint64_t>(i)));
        } catch (const NonFiniteError&) {
            ++nonfinite;
            continue;
        }
        if (count == 0) {
            p = g.values.size();
            sum.assign(p, 0.0);
            sum_sq_outer.assign(p * p, 0.0);
        }
        ++count;
        double nsq = 0.0;
        for (std::size_t a = 0; a < p; ++a) {
            const double va = g.values[a];
            sum[a] += va;
            nsq += va * va;
            max_abs = std::max(max_abs, std::abs(va));
            for (std::size_t b = 0; b < p; ++b) sum_sq_outer[a * p + b] += va * g.values[b];
        }
        sum_normsq += nsq;
        sum_normsq2 += nsq * nsq;
    }
    if (count == 0) throw NonFiniteError("mc_snr_serial: every sample was non-finite");
    if (max_abs == 0.0) throw DegenerateAllZero("mc_snr_serial: every sample was the zero vector");

    McSnrEstimate est;
    est.n_samples = count;
    est.nonfinite_count = nonfinite;
    est.mean.resize(p);
    for (std::size_t a = 0; a < p; ++a) est.mean[a] = sum[a] / static_cast<double>(count);
    for (double v : est.mean) est.mean_norm_sq += v * v;
    est.mean_sq_norm = sum_normsq / static_cast<double>(count);
    est.snr = est.mean_sq_norm > 0.0 ? est.mean_norm_sq / est.mean_sq_norm : 0.0;
    est.se_mean_sq_norm = std::sqrt(
        std::max(0.0, (sum_normsq2 / count - est.mean_sq_norm * est.mean_sq_norm) / (count - 1)));

    // Var(||m||^2) ~= (4/n) m^T Cov m
    double quad = 0.0;
    for (std::size_t a = 0; a < p; ++a)
        for (std::size_t b = 0; b < p; ++b) {
            const double cov =
                sum_sq_outer[a * p + b] / static_cast<double>(count) - est.mean[a] * est.mean[b];
            quad += est.mean[a] * cov * est.mean[b];
        }
    est.se_mean_norm_sq = 2.0 * std::sqrt(std::max(0.0, quad / static_cast<double>(count)));
    return est;
}

template <class Sampler>
McVarianceEstimate mc_variance(const Sampler& sampler, std::int64_t n, const RngStream& rng) {
    if (n < 2) throw std::invalid_argument("mc_variance: n must be >= 2");
    const auto blocks = detail::run_blocks(sampler, n, rng);

    detail::MomentAccumulator total;
    std::int64_t nonfinite = 0;
    for (const auto& b : blocks) {
        total.merge(b.acc);
        nonfinite += b.nonfinite;
    }
    if (total.count == 0) throw NonFiniteError("mc_variance: every sample was non-finite");
    if (total.count < 2) throw std::invalid_argument("mc_variance: fewer than 2 finite samples");

    McVarianceEstimate est;
    est.n_samples = total.count;
    est.nonfinite_count = nonfinite;
    est.per_component.resize(total.m2.size());
    for (std::size_t i = 0; i < total.m2.size(); ++i) {
        est.per_component[i] = total.m2[i] / static_cast<double>(total.count - 1);
        est.total += est.per_component[i];
    }
    return est;
}

template <class Sampler>
McVarianceEstimate mc_variance_serial(const Sampler& sampler, std::int64_t n, const RngStream& rng) {
    if (n < 2) throw std::invalid_argument("mc_variance_serial: n must be >= 2");
    detail::MomentAccumulator acc;
    std::int64_t nonfinite = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        try {
            acc.add(sampler(rng.split(static_cast<std::uint64_t>(i))).values);
        } catch (const NonFiniteError&) {
            ++nonfinite;
        }
    }
    if (acc.count < 2) throw NonFiniteError("mc_variance_serial: fewer than 2 finite samples");
    McVarianceEstimate est;
    est.n_samples = acc.count;
    est.nonfinite_count = nonfinite;
    est.per_component.resize(acc.m2.size());
    for (std::size_t i = 0; i < acc.m2.size(); ++i) {
        est.per_component[i] = acc.m2[i] / static_cast<double>(acc.count - 1);
        est.total += est.per_component[i];
    }
    return est;
}

// ---- SNR along an optimization path ---------------------------------------------

enum class PathCellStatus { Ok, DegenerateZero, AllNonFinite };

struct PathSnrCell {
    int step = 0;
    double alpha = 0.0;
    PathCellStatus status = PathCellStatus::Ok;
    double snr = 0.0;
    std::int64_t nonfinite_count = 0;
};

struct PathSnrTable {
    std::vector<PathSnrCell> cells;
};

/// Evaluates the doubly-reparameterized estimator's MC SNR at each recorded
/// parameter point of one shared optimization path, for every alpha.
PathSnrTable snr_along_path(const std::vector<std::pair<int, DiagonalGaussian>>& path,
                            const TargetContract& target, const std::vector<AlphaParam>& alphas,
                            std::int64_t n, const RngStream& rng);

const char* to_string(PathCellStatus s);

}  // namespace avi
