#include "avi/distributions.hpp"

#include <cmath>

namespace avi {

namespace {
constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

void check_dim(int want, std::size_t got, const char* what) {
    if (static_cast<std::size_t>(want) != got) throw DimensionMismatch(what);
}
}  // namespace

DiagonalGaussian::DiagonalGaussian(std::vector<double> mu, std::vector<double> sigma, bool freeze_mean)
    : mean(std::move(mu)), scales(std::move(sigma)), mean_frozen(freeze_mean) {
    if (mean.size() != scales.size()) throw DimensionMismatch("DiagonalGaussian: mean/scales size mismatch");
    if (mean.empty()) throw DimensionMismatch("DiagonalGaussian: dimension must be positive");
    for (double s : scales)
        if (!(s > 0.0)) throw std::invalid_argument("DiagonalGaussian: scales must be strictly positive");
}

DiagonalGaussian DiagonalGaussian::standard(int d) {
    return DiagonalGaussian(std::vector<double>(static_cast<std::size_t>(d), 0.0),
                            std::vector<double>(static_cast<std::size_t>(d), 1.0));
}

DiagonalGaussian DiagonalGaussian::mean_zero(std::vector<double> sigma) {
    std::vector<double> mu(sigma.size(), 0.0);
    return DiagonalGaussian(std::move(mu), std::move(sigma), true);
}

FullRankGaussian::FullRankGaussian(std::vector<double> mu, Matrix s, bool freeze_mean, ScaleParam sp)
    : mean(std::move(mu)), scale(std::move(s)), mean_frozen(freeze_mean), scale_param(sp) {
    if (!scale.is_square() || scale.rows != static_cast<int>(mean.size()))
        throw DimensionMismatch("FullRankGaussian: scale must be d x d");
    for (int i = 0; i < scale.rows; ++i) {
        if (!(scale(i, i) > 0.0))
            throw std::invalid_argument("FullRankGaussian: scale diagonal must be strictly positive");
        for (int j = i + 1; j < scale.cols; ++j)
            if (scale(i, j) != 0.0)
                throw std::invalid_argument("FullRankGaussian: scale must be lower triangular");
    }
}

FullRankGaussian FullRankGaussian::mean_zero(Matrix s, ScaleParam sp) {
    std::vector<double> mu(static_cast<std::size_t>(s.rows), 0.0);
    return FullRankGaussian(std::move(mu), std::move(s), true, sp);
}

Matrix FullRankGaussian::covariance() const {
    return scale * scale.transpose();
}

std::vector<double> reparam(const DiagonalGaussian& q, std::span<const double> eps) {
    check_dim(q.dim(), eps.size(), "reparam: eps dimension mismatch");
    std::vector<double> z(eps.size());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = q.mean[i] + q.scales[i] * eps[i];
    return z;
}

std::vector<double> reparam(const FullRankGaussian& q, std::span<const double> eps) {
    check_dim(q.dim(), eps.size(), "reparam: eps dimension mismatch");
    const int d = q.dim();
    std::vector<double> z(q.mean);
    for (int i = 0; i < d; ++i) {
        double s = 0.0;
        for (int j = 0; j <= i; ++j) s += q.scale(i, j) * eps[static_cast<std::size_t>(j)];
        z[static_cast<std::size_t>(i)] += s;
    }
    return z;
}

double log_density(const DiagonalGaussian& q, std::span<const double> z) {
    check_dim(q.dim(), z.size(), "log_density: z dimension mismatch");
    double lp = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double r = (z[i] - q.mean[i]) / q.scales[i];
        lp += -0.5 * kLogTwoPi - std::log(q.scales[i]) - 0.5 * r * r;
    }
    return lp;
}

double log_density(const FullRankGaussian& q, std::span<const double> z) {
    check_dim(q.dim(), z.size(), "log_density: z dimension mismatch");
    const int d = q.dim();
    std::vector<double> r(z.begin(), z.end());
    for (int i = 0; i < d; ++i) r[static_cast<std::size_t>(i)] -= q.mean[static_cast<std::size_t>(i)];
    const auto w = solve_lower_tri(q.scale, r);
    double quad = 0.0, logdet = 0.0;
    for (int i = 0; i < d; ++i) {
        quad += w[static_cast<std::size_t>(i)] * w[static_cast<std::size_t>(i)];
        logdet += std::log(q.scale(i, i));
    }
    return -0.5 * d * kLogTwoPi - logdet - 0.5 * quad;
}

std::vector<double> grad_log_density_z(const DiagonalGaussian& q, std::span<const double> z) {
    check_dim(q.dim(), z.size(), "grad_log_density_z: z dimension mismatch");
    std::vector<double> g(z.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        g[i] = -(z[i] - q.mean[i]) / (q.scales[i] * q.scales[i]);
    return g;
}

std::vector<double> grad_log_density_z(const FullRankGaussian& q, std::span<const double> z) {
    check_dim(q.dim(), z.size(), "grad_log_density_z: z dimension mismatch");
    const int d = q.dim();
    std::vector<double> r(z.begin(), z.end());
    for (int i = 0; i < d; ++i) r[static_cast<std::size_t>(i)] -= q.mean[static_cast<std::size_t>(i)];
    auto u = solve_lower_tri(q.scale, r);
    u = solve_lower_tri_transposed(q.scale, u);
    for (auto& v : u) v = -v;
    return u;
}

GradEstimate param_jacobian_apply(const DiagonalGaussian& q, std::span<const double> eps,
                                  std::span<const double> cotangent) {
    check_dim(q.dim(), eps.size(), "param_jacobian_apply: eps dimension mismatch");
    check_dim(q.dim(), cotangent.size(), "param_jacobian_apply: cotangent dimension mismatch");
    GradEstimate g;
    g.values.reserve(static_cast<std::size_t>(q.active_params()));
    if (!q.mean_frozen)
        for (std::size_t i = 0; i < eps.size(); ++i) g.values.push_back(cotangent[i]);
    for (std::size_t i = 0; i < eps.size(); ++i) g.values.push_back(cotangent[i] * eps[i]);
    return g;
}

GradEstimate param_jacobian_apply(const FullRankGaussian& q, std::span<const double> eps,
                                  std::span<const double> cotangent) {
    check_dim(q.dim(), eps.size(), "param_jacobian_apply: eps dimension mismatch");
    check_dim(q.dim(), cotangent.size(), "param_jacobian_apply: cotangent dimension mismatch");
    const int d = q.dim();
    GradEstimate g;
    g.values.reserve(static_cast<std::size_t>(q.active_params()));
    if (!q.mean_frozen)
        for (int i = 0; i < d; ++i) g.values.push_back(cotangent[static_cast<std::size_t>(i)]);
    // d<c, S eps>/dS = c eps^T
    for (int i = 0; i < d; ++i) {
        const int jmax = q.scale_param == ScaleParam::FullMatrix ? d - 1 : i;
        for (int j = 0; j <= jmax; ++j)
            g.values.push_back(cotangent[static_cast<std::size_t>(i)] * eps[static_cast<std::size_t>(j)]);
    }
    return g;
}

GradEstimate entropy_param_grad(const DiagonalGaussian& q, std::span<const double> z) {
    check_dim(q.dim(), z.size(), "entropy_param_grad: z dimension mismatch");
    GradEstimate g;
    g.values.reserve(static_cast<std::size_t>(q.active_params()));
    if (!q.mean_frozen)
        for (std::size_t i = 0; i < z.size(); ++i)
            g.values.push_back((z[i] - q.mean[i]) / (q.scales[i] * q.scales[i]));
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double r = z[i] - q.mean[i];
        const double s = q.scales[i];
        g.values.push_back((r * r - s * s) / (s * s * s));
    }
    return g;
}

GradEstimate entropy_param_grad(const FullRankGaussian& q, std::span<const double> z) {
    check_dim(q.dim(), z.size(), "entropy_param_grad: z dimension mismatch");
    const int d = q.dim();
    std::vector<double> r(z.begin(), z.end());
    for (int i = 0; i < d; ++i) r[static_cast<std::size_t>(i)] -= q.mean[static_cast<std::size_t>(i)];
    auto u = solve_lower_tri(q.scale, r);
    u = solve_lower_tri_transposed(q.scale, u);  // u = Sigma^{-1} (z - mu)

    // d log q / dS = -S^{-T} + u (S^T u)^T
    std::vector<double> v(static_cast<std::size_t>(d), 0.0);  // v = S^T u
    for (int j = 0; j < d; ++j) {
        double s = 0.0;
        for (int i = j; i < d; ++i) s += q.scale(i, j) * u[static_cast<std::size_t>(i)];
        v[static_cast<std::size_t>(j)] = s;
    }
    // S^{-1} (lower triangular), column by column.
    Matrix sinv(d, d);
    {
        std::vector<double> e(static_cast<std::size_t>(d), 0.0);
        for (int j = 0; j < d; ++j) {
            e[static_cast<std::size_t>(j)] = 1.0;
            const auto col = solve_lower_tri(q.scale, e);
            for (int i = 0; i < d; ++i) sinv(i, j) = col[static_cast<std::size_t>(i)];
            e[static_cast<std::size_t>(j)] = 0.0;
        }
    }

    GradEstimate g;
    g.values.reserve(static_cast<std::size_t>(q.active_params()));
    if (!q.mean_frozen)
        for (int i = 0; i < d; ++i) g.values.push_back(u[static_cast<std::size_t>(i)]);
    for (int i = 0; i < d; ++i) {
        const int jmax = q.scale_param == ScaleParam::FullMatrix ? d - 1 : i;
        for (int j = 0; j <= jmax; ++j) {
            const double sinv_t = sinv(j, i);  // (S^{-T})_{ij}
            g.values.push_back(-sinv_t +
                               u[static_cast<std::size_t>(i)] * v[static_cast<std::size_t>(j)]);
        }
    }
    return g;
}

TargetContract make_factorized_gaussian_target(std::vector<double> mean, std::vector<double> scales) {
    DiagonalGaussian g(std::move(mean), std::move(scales));
    TargetContract t;
    t.dim = g.dim();
    t.normalized = true;
    t.log_density = [g](std::span<const double> z) { return log_density(g, z); };
    t.grad_log_density = [g](std::span<const double> z) { return grad_log_density_z(g, z); };
    return t;
}

TargetContract make_fullrank_gaussian_target(std::vector<double> mean, Matrix scale) {
    FullRankGaussian g(std::move(mean), std::move(scale));
    TargetContract t;
    t.dim = g.dim();
    t.normalized = true;
    t.log_density = [g](std::span<const double> z) { return log_density(g, z); };
    t.grad_log_density = [g](std::span<const double> z) { return grad_log_density_z(g, z); };
    return t;
}

TargetContract make_standard_gaussian_target(int d) {
    return make_factorized_gaussian_target(std::vector<double>(static_cast<std::size_t>(d), 0.0),
                                           std::vector<double>(static_cast<std::size_t>(d), 1.0));
}

}  // namespace avi
