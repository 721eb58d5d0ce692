#include "avi/estimators.hpp"

#include <cmath>
#include <utility>

namespace avi {

namespace {

constexpr double kExpOverflow = 700.0;

double pow_ratio_alpha(double alpha, double lr) {
    const double e = alpha * lr;
    if (e > kExpOverflow)
        throw NonFiniteError("density ratio overflow: alpha * log_ratio = " + std::to_string(e));
    return std::exp(e);
}

void check_finite(const GradEstimate& g) {
    for (double v : g.values)
        if (!std::isfinite(v)) throw NonFiniteError("gradient sample is not finite");
}

template <class Q>
double log_ratio_impl(const TargetContract& target, const Q& q, std::span<const double> eps) {
    if (target.dim != q.dim()) throw DimensionMismatch("log_ratio: target/family dimension mismatch");
    const auto z = reparam(q, eps);
    return target.log_density(z) - log_density(q, z);
}

template <class Q>
double divergence_estimate_impl(const TargetContract& target, const Q& q, AlphaParam alpha,
                                std::span<const double> eps) {
    const double lr = log_ratio_impl(target, q, eps);
    switch (alpha.regime) {
        case AlphaRegime::ZeroLimit:
            return -lr;
        case AlphaRegime::One:
            throw RegimeUnsupported("divergence_estimate: no single-sample value form at alpha -> 1");
        case AlphaRegime::General: {
            const double a = alpha.value;
            return (pow_ratio_alpha(a, lr) - 1.0) / (a * (a - 1.0));
        }
    }
    throw RegimeUnsupported("divergence_estimate: unknown regime");
}

// Shared geometry of both estimators: z = T_w(eps), the z-space cotangent
// (grad log p - grad log q)(z) pulled back through T_w, and the stopped
// density term.
template <class Q>
GradEstimate g_rep_impl(const TargetContract& target, const Q& q, AlphaParam alpha,
                        std::span<const double> eps) {
    if (alpha.regime == AlphaRegime::One)
        throw RegimeUnsupported("g_rep: not defined for alpha -> 1");
    if (target.dim != q.dim()) throw DimensionMismatch("g_rep: target/family dimension mismatch");

    const auto z = reparam(q, eps);
    auto cot = target.grad_log_density(z);
    const auto gq = grad_log_density_z(q, z);
    for (std::size_t i = 0; i < cot.size(); ++i) cot[i] -= gq[i];

    GradEstimate pull = param_jacobian_apply(q, eps, cot);
    const GradEstimate ent = entropy_param_grad(q, z);

    double coef;
    if (alpha.regime == AlphaRegime::ZeroLimit) {
        coef = -1.0;
    } else {
        const double lr = target.log_density(z) - log_density(q, z);
        coef = pow_ratio_alpha(alpha.value, lr) / (alpha.value - 1.0);
    }
    for (std::size_t i = 0; i < pull.values.size(); ++i)
        pull.values[i] = coef * (pull.values[i] - ent.values[i]);
    check_finite(pull);
    return pull;
}

template <class Q>
GradEstimate g_drep_impl(const TargetContract& target, const Q& q, AlphaParam alpha,
                         std::span<const double> eps) {
    if (target.dim != q.dim()) throw DimensionMismatch("g_drep: target/family dimension mismatch");

    const auto z = reparam(q, eps);
    auto cot = target.grad_log_density(z);
    const auto gq = grad_log_density_z(q, z);
    for (std::size_t i = 0; i < cot.size(); ++i) cot[i] -= gq[i];

    GradEstimate pull = param_jacobian_apply(q, eps, cot);

    double coef = -1.0;
    if (alpha.regime != AlphaRegime::ZeroLimit) {
        const double lr = target.log_density(z) - log_density(q, z);
        coef = -pow_ratio_alpha(alpha.value, lr);
    }
    for (auto& v : pull.values) v *= coef;
    check_finite(pull);
    return pull;
}

template <class Q>
GradSampler make_sampler_impl(EstimatorKind kind, TargetContract target, Q q, AlphaParam alpha) {
    const int d = q.dim();
    return [kind, target = std::move(target), q = std::move(q), alpha, d](RngStream rng) {
        std::vector<double> eps(static_cast<std::size_t>(d));
        for (auto& e : eps) e = rng.normal();
        return kind == EstimatorKind::Rep ? g_rep(target, q, alpha, eps)
                                          : g_drep(target, q, alpha, eps);
    };
}

}  // namespace

AlphaParam AlphaParam::general(double v) {
    if (v == 0.0)
        throw RegimeUnsupported("AlphaParam::general: use zero_limit() for alpha -> 0");
    if (v == 1.0)
        throw RegimeUnsupported("AlphaParam::general: use one() for alpha -> 1");
    return {v, AlphaRegime::General};
}

AlphaParam AlphaParam::from_value(double v) {
    if (v == 0.0) return zero_limit();
    if (v == 1.0) return one();
    return general(v);
}

double log_ratio(const TargetContract& target, const DiagonalGaussian& q, std::span<const double> eps) {
    return log_ratio_impl(target, q, eps);
}
double log_ratio(const TargetContract& target, const FullRankGaussian& q, std::span<const double> eps) {
    return log_ratio_impl(target, q, eps);
}

double divergence_estimate(const TargetContract& target, const DiagonalGaussian& q, AlphaParam alpha,
                           std::span<const double> eps) {
    return divergence_estimate_impl(target, q, alpha, eps);
}
double divergence_estimate(const TargetContract& target, const FullRankGaussian& q, AlphaParam alpha,
                           std::span<const double> eps) {
    return divergence_estimate_impl(target, q, alpha, eps);
}

GradEstimate g_rep(const TargetContract& target, const DiagonalGaussian& q, AlphaParam alpha,
                   std::span<const double> eps) {
    return g_rep_impl(target, q, alpha, eps);
}
GradEstimate g_rep(const TargetContract& target, const FullRankGaussian& q, AlphaParam alpha,
                   std::span<const double> eps) {
    return g_rep_impl(target, q, alpha, eps);
}

GradEstimate g_drep(const TargetContract& target, const DiagonalGaussian& q, AlphaParam alpha,
                    std::span<const double> eps) {
    return g_drep_impl(target, q, alpha, eps);
}
GradEstimate g_drep(const TargetContract& target, const FullRankGaussian& q, AlphaParam alpha,
                    std::span<const double> eps) {
    return g_drep_impl(target, q, alpha, eps);
}

GradSampler make_sampler(EstimatorKind kind, TargetContract target, DiagonalGaussian q, AlphaParam alpha) {
    return make_sampler_impl(kind, std::move(target), std::move(q), alpha);
}
GradSampler make_sampler(EstimatorKind kind, TargetContract target, FullRankGaussian q, AlphaParam alpha) {
    return make_sampler_impl(kind, std::move(target), std::move(q), alpha);
}

GradEstimate averaged(const GradSampler& sampler, int n, const RngStream& rng) {
    if (n < 1) throw std::invalid_argument("averaged: n must be >= 1");
    GradEstimate acc = sampler(rng.split(0));
    for (int i = 1; i < n; ++i) {
        const GradEstimate g = sampler(rng.split(static_cast<std::uint64_t>(i)));
        if (g.values.size() != acc.values.size())
            throw DimensionMismatch("averaged: inconsistent sample sizes");
        for (std::size_t k = 0; k < acc.values.size(); ++k) acc.values[k] += g.values[k];
    }
    const double inv = 1.0 / n;
    for (auto& v : acc.values) v *= inv;
    acc.n_samples_averaged = n;
    return acc;
}

}  // namespace avi
