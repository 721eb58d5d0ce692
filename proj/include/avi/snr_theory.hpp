#pragma once

#include <optional>
#include <span>
#include <vector>

#include "avi/matrix.hpp"

namespace avi {

enum class SnrStatus { Defined, UndefinedInfiniteVariance, UndefinedZeroEstimator };

/// Outcome of a closed-form SNR computation. `existence_margin` is
/// min_i (1 + 2 alpha (lambda_i - 1)); the second moment of the estimator
/// exists iff it is positive. `log_value` always accompanies `value` because
/// SNRs decay geometrically in the dimension and can leave the double range.
struct SnrReport {
    SnrStatus status = SnrStatus::Defined;
    std::optional<double> value;
    std::optional<double> log_value;
    std::optional<double> upper_bound;
    std::optional<double> log_upper_bound;
    double existence_margin = 1.0;

    bool defined() const { return status == SnrStatus::Defined; }
};

/// Eigenvalues of Sigma_p^{-1} Sigma_q (the per-coordinate variance ratios
/// sigma_q^2 / sigma_p^2 in the factorized case). All strictly positive.
struct SpectralSummary {
    std::vector<double> lambdas;

    double min() const;
    double max() const;
};

/// Spectrum of Sigma_p^{-1} Sigma_q computed through the similar symmetric
/// matrix S^T Sigma_p^{-1} S.
SpectralSummary spectrum_of(const Matrix& sigma_p, const Matrix& scale_q);

double existence_margin(std::span<const double> lambdas, double alpha);

/// Per-dimension SNR attenuation factor
/// f(lambda, alpha) = 1 / sqrt(1 + alpha^2 (lambda-1)^2 / (1 + 2 alpha (lambda-1))).
/// Requires 1 + 2 alpha (lambda - 1) > 0.
double f_ratio(double lambda, double alpha);
double log_f_ratio(double lambda, double alpha);

/// SNR of the single-sample divergence transform (p/q)^alpha for 1-d
/// mean-zero Gaussians; identical to f_ratio and kept as the named quantity
/// that enters the factorized composition.
double ratio_power_snr(double lambda, double alpha);

/// Composition rule for fully-factorized targets: the j-th component's SNR
/// is its own 1-d SNR times the product of the other coordinates' ratio-power
/// SNRs. The 1-d factors may come from any source (closed form or MC).
double snr_factorized_general(double snr_gj, std::span<const double> ratio_power_snrs_others);

/// Closed-form SNR of the j-th scale component of the doubly-reparameterized
/// estimator for mean-zero factorized Gaussians. alpha = 0 means the
/// alpha -> 0 limit (value 1/3). j is a 0-based component index.
SnrReport snr_factorized_gaussian(std::span<const double> sigmas_p, std::span<const double> sigmas_q,
                                  double alpha, int j);

/// Full-rank mean-zero Gaussians, alpha -> 0 limit: SNR = 1 / (d + 2)
/// whenever Sigma_p != Sigma_q.
SnrReport snr_fullrank_zero_limit(int d);

/// Exact SNR of the d x d scale-matrix gradient for mean-zero full-rank
/// Gaussians, alpha != 0.
SnrReport snr_fullrank_exact(const Matrix& sigma_p, const Matrix& scale_q, double alpha);

/// Upper bound for the same quantity (exact 1/(d+2) at alpha = 0).
SnrReport snr_fullrank_bound(const Matrix& sigma_p, const Matrix& scale_q, double alpha);

struct VarianceBound {
    SnrStatus status = SnrStatus::Defined;
    double bound = 0.0;
    double existence_margin = 1.0;

    bool defined() const { return status == SnrStatus::Defined; }
};

/// Upper bound on the variance of the j-th scale component of the
/// doubly-reparameterized estimator for mean-zero factorized Gaussians;
/// exactly zero when sigma_pj = sigma_qj. Requires alpha != 0.
VarianceBound variance_bound_factorized(std::span<const double> sigmas_p,
                                        std::span<const double> sigmas_q, double alpha, int j);

inline SnrReport snr_factorized_gaussian(std::initializer_list<double> sigmas_p,
                                         std::initializer_list<double> sigmas_q, double alpha,
                                         int j) {
    return snr_factorized_gaussian(std::span<const double>(sigmas_p.begin(), sigmas_p.size()),
                                   std::span<const double>(sigmas_q.begin(), sigmas_q.size()),
                                   alpha, j);
}

inline VarianceBound variance_bound_factorized(std::initializer_list<double> sigmas_p,
                                               std::initializer_list<double> sigmas_q, double alpha,
                                               int j) {
    return variance_bound_factorized(std::span<const double>(sigmas_p.begin(), sigmas_p.size()),
                                     std::span<const double>(sigmas_q.begin(), sigmas_q.size()),
                                     alpha, j);
}

}  // namespace avi
