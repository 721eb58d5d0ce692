#pragma once

#include <functional>
#include <span>
#include <vector>

#include "avi/grad.hpp"
#include "avi/matrix.hpp"

namespace avi {

/// Mean-field Gaussian with scales parameterized directly as sigma (not
/// log-sigma); positivity is the optimizer's job. When `mean_frozen` is set
/// the mu block is masked out of every flattened parameter vector.
struct DiagonalGaussian {
    std::vector<double> mean;
    std::vector<double> scales;
    bool mean_frozen = false;

    DiagonalGaussian(std::vector<double> mu, std::vector<double> sigma, bool freeze_mean = false);

    static DiagonalGaussian standard(int d);
    static DiagonalGaussian mean_zero(std::vector<double> sigma);

    int dim() const { return static_cast<int>(mean.size()); }
    int active_params() const { return mean_frozen ? dim() : 2 * dim(); }
};

/// Which entries of the scale factor S count as parameters. The optimizer
/// works on the lower triangle (Cholesky parameterization); the SNR analysis
/// treats S as an unconstrained d x d factor, so its gradient samples are
/// full matrices.
enum class ScaleParam { LowerTriangle, FullMatrix };

struct FullRankGaussian {
    std::vector<double> mean;
    Matrix scale;  // lower triangular, positive diagonal; Sigma = S S^T
    bool mean_frozen = false;
    ScaleParam scale_param = ScaleParam::LowerTriangle;

    FullRankGaussian(std::vector<double> mu, Matrix s, bool freeze_mean = false,
                     ScaleParam sp = ScaleParam::LowerTriangle);

    static FullRankGaussian mean_zero(Matrix s, ScaleParam sp = ScaleParam::LowerTriangle);

    int dim() const { return static_cast<int>(mean.size()); }
    int scale_entries() const {
        const int d = dim();
        return scale_param == ScaleParam::FullMatrix ? d * d : d * (d + 1) / 2;
    }
    int active_params() const { return (mean_frozen ? 0 : dim()) + scale_entries(); }
    Matrix covariance() const;
};

/// A target density up to an additive log constant, with its z-gradient.
/// `normalized` marks densities whose constant is exact; the closed-form SNR
/// paths require it.
struct TargetContract {
    int dim = 0;
    std::function<double(std::span<const double>)> log_density;
    std::function<std::vector<double>(std::span<const double>)> grad_log_density;
    bool normalized = false;
};

// ---- reparameterization maps -------------------------------------------------

std::vector<double> reparam(const DiagonalGaussian& q, std::span<const double> eps);
std::vector<double> reparam(const FullRankGaussian& q, std::span<const double> eps);

// ---- densities ----------------------------------------------------------------

double log_density(const DiagonalGaussian& q, std::span<const double> z);
double log_density(const FullRankGaussian& q, std::span<const double> z);

/// Gradient of log q(z) with respect to z: -Sigma^{-1}(z - mu).
std::vector<double> grad_log_density_z(const DiagonalGaussian& q, std::span<const double> z);
std::vector<double> grad_log_density_z(const FullRankGaussian& q, std::span<const double> z);

// ---- parameter-space gradients --------------------------------------------------

/// Pullback of a z-space cotangent through the reparameterization map: the
/// gradient of <cotangent, T_w(eps)> with respect to the flattened parameters.
GradEstimate param_jacobian_apply(const DiagonalGaussian& q, std::span<const double> eps,
                                  std::span<const double> cotangent);
GradEstimate param_jacobian_apply(const FullRankGaussian& q, std::span<const double> eps,
                                  std::span<const double> cotangent);

/// Gradient of log q_w(z) with respect to the parameters, holding z fixed.
GradEstimate entropy_param_grad(const DiagonalGaussian& q, std::span<const double> z);
GradEstimate entropy_param_grad(const FullRankGaussian& q, std::span<const double> z);

// ---- analytic targets ----------------------------------------------------------

TargetContract make_factorized_gaussian_target(std::vector<double> mean, std::vector<double> scales);
TargetContract make_fullrank_gaussian_target(std::vector<double> mean, Matrix scale);
TargetContract make_standard_gaussian_target(int d);

}  // namespace avi
