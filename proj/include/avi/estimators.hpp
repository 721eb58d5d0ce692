#pragma once

#include <functional>
#include <span>

#include "avi/distributions.hpp"
#include "avi/grad.hpp"
#include "avi/rng.hpp"

namespace avi {

enum class AlphaRegime { ZeroLimit, One, General };

/// The divergence index. alpha = 0 and alpha = 1 are limit cases with their
/// own estimator forms, so the regime is tagged explicitly rather than
/// inferred from a float compare at call sites.
struct AlphaParam {
    double value;
    AlphaRegime regime;

    static AlphaParam zero_limit() { return {0.0, AlphaRegime::ZeroLimit}; }
    static AlphaParam one() { return {1.0, AlphaRegime::One}; }
    static AlphaParam general(double v);

    /// Maps 0 to the alpha->0 limit and 1 to the alpha->1 limit.
    static AlphaParam from_value(double v);

    bool is_zero_limit() const { return regime == AlphaRegime::ZeroLimit; }
};

/// log p(T_w(eps)) - log q_w(T_w(eps)).
double log_ratio(const TargetContract& target, const DiagonalGaussian& q, std::span<const double> eps);
double log_ratio(const TargetContract& target, const FullRankGaussian& q, std::span<const double> eps);

/// Single-sample unbiased estimate of the alpha-divergence (the KL(q||p)
/// estimate in the alpha->0 limit). Not available for alpha -> 1.
double divergence_estimate(const TargetContract& target, const DiagonalGaussian& q, AlphaParam alpha,
                           std::span<const double> eps);
double divergence_estimate(const TargetContract& target, const FullRankGaussian& q, AlphaParam alpha,
                           std::span<const double> eps);

/// Reparameterization estimator of the divergence gradient: the total
/// w-derivative, density term included. Not defined for alpha -> 1.
GradEstimate g_rep(const TargetContract& target, const DiagonalGaussian& q, AlphaParam alpha,
                   std::span<const double> eps);
GradEstimate g_rep(const TargetContract& target, const FullRankGaussian& q, AlphaParam alpha,
                   std::span<const double> eps);

/// Doubly-reparameterized estimator: the density parameters are stopped, so
/// only the pathwise pullback remains. Recovers the sticking-the-landing
/// estimator as alpha -> 0 and is deterministically zero when p = q_w.
GradEstimate g_drep(const TargetContract& target, const DiagonalGaussian& q, AlphaParam alpha,
                    std::span<const double> eps);
GradEstimate g_drep(const TargetContract& target, const FullRankGaussian& q, AlphaParam alpha,
                    std::span<const double> eps);

/// A closure producing one gradient sample from a private stream.
using GradSampler = std::function<GradEstimate(RngStream)>;

enum class EstimatorKind { Rep, Drep };

GradSampler make_sampler(EstimatorKind kind, TargetContract target, DiagonalGaussian q, AlphaParam alpha);
GradSampler make_sampler(EstimatorKind kind, TargetContract target, FullRankGaussian q, AlphaParam alpha);

/// Arithmetic mean of n independent single-sample estimates. Samples are
/// drawn from split streams and accumulated in index order, so the result is
/// bit-reproducible.
GradEstimate averaged(const GradSampler& sampler, int n, const RngStream& rng);

}  // namespace avi
