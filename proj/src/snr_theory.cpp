#include "avi/snr_theory.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace avi {

namespace {

std::vector<double> lambda_ratios(std::span<const double> sigmas_p, std::span<const double> sigmas_q) {
    if (sigmas_p.size() != sigmas_q.size() || sigmas_p.empty())
        throw DimensionMismatch("sigma vectors must be nonempty and of equal length");
    std::vector<double> l(sigmas_p.size());
    for (std::size_t i = 0; i < l.size(); ++i) {
        if (!(sigmas_p[i] > 0.0) || !(sigmas_q[i] > 0.0))
            throw std::invalid_argument("sigmas must be strictly positive");
        const double r = sigmas_q[i] / sigmas_p[i];
        l[i] = r * r;
    }
    return l;
}

// S^{-T} for lower-triangular S.
Matrix inv_transpose_lower(const Matrix& s) {
    const int d = s.rows;
    Matrix out(d, d);
    std::vector<double> e(static_cast<std::size_t>(d), 0.0);
    for (int j = 0; j < d; ++j) {
        e[static_cast<std::size_t>(j)] = 1.0;
        const auto col = solve_lower_tri(s, e);  // column j of S^{-1}
        for (int i = 0; i < d; ++i) out(j, i) = col[static_cast<std::size_t>(i)];
        e[static_cast<std::size_t>(j)] = 0.0;
    }
    return out;
}

}  // namespace

double SpectralSummary::min() const { return *std::min_element(lambdas.begin(), lambdas.end()); }
double SpectralSummary::max() const { return *std::max_element(lambdas.begin(), lambdas.end()); }

SpectralSummary spectrum_of(const Matrix& sigma_p, const Matrix& scale_q) {
    if (!sigma_p.is_square() || sigma_p.rows != scale_q.rows || !scale_q.is_square())
        throw DimensionMismatch("spectrum_of: shape mismatch");
    const Matrix m = solve_spd(sigma_p, scale_q);       // Sigma_p^{-1} S
    Matrix a = scale_q.transpose() * m;                 // S^T Sigma_p^{-1} S
    for (int i = 0; i < a.rows; ++i)                    // symmetrize roundoff
        for (int j = i + 1; j < a.cols; ++j) {
            const double v = 0.5 * (a(i, j) + a(j, i));
            a(i, j) = a(j, i) = v;
        }
    SpectralSummary s;
    s.lambdas = sym_eigenvalues(a);
    return s;
}

double existence_margin(std::span<const double> lambdas, double alpha) {
    double m = std::numeric_limits<double>::infinity();
    for (double l : lambdas) m = std::min(m, 1.0 + 2.0 * alpha * (l - 1.0));
    return m;
}

double f_ratio(double lambda, double alpha) {
    if (!(lambda > 0.0)) throw std::invalid_argument("f_ratio: lambda must be positive");
    const double m = 1.0 + 2.0 * alpha * (lambda - 1.0);
    if (m <= 0.0)
        throw ExistenceViolated("f_ratio: 1 + 2 alpha (lambda - 1) = " + std::to_string(m));
    const double dl = lambda - 1.0;
    return 1.0 / std::sqrt(1.0 + alpha * alpha * dl * dl / m);
}

double log_f_ratio(double lambda, double alpha) {
    if (!(lambda > 0.0)) throw std::invalid_argument("log_f_ratio: lambda must be positive");
    const double m = 1.0 + 2.0 * alpha * (lambda - 1.0);
    if (m <= 0.0)
        throw ExistenceViolated("log_f_ratio: 1 + 2 alpha (lambda - 1) = " + std::to_string(m));
    const double dl = lambda - 1.0;
    return -0.5 * std::log1p(alpha * alpha * dl * dl / m);
}

double ratio_power_snr(double lambda, double alpha) { return f_ratio(lambda, alpha); }

double snr_factorized_general(double snr_gj, std::span<const double> ratio_power_snrs_others) {
    double lg = std::log(snr_gj);
    for (double s : ratio_power_snrs_others) lg += std::log(s);
    return std::exp(lg);
}

SnrReport snr_factorized_gaussian(std::span<const double> sigmas_p, std::span<const double> sigmas_q,
                                  double alpha, int j) {
    const auto lambdas = lambda_ratios(sigmas_p, sigmas_q);
    if (j < 0 || j >= static_cast<int>(lambdas.size()))
        throw std::invalid_argument("snr_factorized_gaussian: component index out of range");

    SnrReport r;
    r.existence_margin = existence_margin(lambdas, alpha);

    if (sigmas_p[static_cast<std::size_t>(j)] == sigmas_q[static_cast<std::size_t>(j)]) {
        r.status = SnrStatus::UndefinedZeroEstimator;
        return r;
    }
    if (alpha != 0.0 && r.existence_margin <= 0.0) {
        r.status = SnrStatus::UndefinedInfiniteVariance;
        return r;
    }

    if (alpha == 0.0) {
        r.value = 1.0 / 3.0;
        r.log_value = std::log(1.0 / 3.0);
        return r;
    }

    const double lj = lambdas[static_cast<std::size_t>(j)];
    const double mj = 1.0 + 2.0 * alpha * (lj - 1.0);
    double lg = std::log(mj / 3.0) + 3.0 * log_f_ratio(lj, alpha);
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        if (static_cast<int>(i) == j) continue;
        lg += log_f_ratio(lambdas[i], alpha);
    }
    r.log_value = lg;
    r.value = std::exp(lg);
    return r;
}

SnrReport snr_fullrank_zero_limit(int d) {
    if (d < 1) throw std::invalid_argument("snr_fullrank_zero_limit: d must be >= 1");
    SnrReport r;
    r.value = 1.0 / (d + 2);
    r.log_value = -std::log(static_cast<double>(d + 2));
    return r;
}

SnrReport snr_fullrank_exact(const Matrix& sigma_p, const Matrix& scale_q, double alpha) {
    if (alpha == 0.0)
        throw std::invalid_argument("snr_fullrank_exact: alpha must be nonzero (see the zero-limit form)");
    const int d = sigma_p.rows;
    const SpectralSummary spec = spectrum_of(sigma_p, scale_q);

    SnrReport r;
    r.existence_margin = existence_margin(spec.lambdas, alpha);

    const Matrix sigma_q = scale_q * scale_q.transpose();
    const double diff = frobenius_norm_sq(sigma_p - sigma_q);
    if (diff <= 1e-24 * frobenius_norm_sq(sigma_p)) {
        r.status = SnrStatus::UndefinedZeroEstimator;
        return r;
    }
    if (r.existence_margin <= 0.0) {
        r.status = SnrStatus::UndefinedInfiniteVariance;
        return r;
    }

    // B = (Sigma_p^{-1} - Sigma_q^{-1}) S = Sigma_p^{-1} S - S^{-T}
    const Matrix b = solve_spd(sigma_p, scale_q) - inv_transpose_lower(scale_q);
    const Matrix a = scale_q.transpose() * solve_spd(sigma_p, scale_q);
    Matrix u(d, d), v(d, d);
    for (int i = 0; i < d; ++i)
        for (int k = 0; k < d; ++k) {
            const double aik = 0.5 * (a(i, k) + a(k, i));
            u(i, k) = alpha * aik + (i == k ? 1.0 - alpha : 0.0);
            v(i, k) = 2.0 * alpha * aik + (i == k ? 1.0 - 2.0 * alpha : 0.0);
        }

    const Matrix bu = b * inverse_spd(u);
    const Matrix vinv = inverse_spd(v);
    const Matrix bv = b * vinv;

    double log_fprod = 0.0;
    for (double l : spec.lambdas) log_fprod += log_f_ratio(l, alpha);

    const double num = frobenius_norm_sq(bu);
    const double den = trace(vinv) * trace(bv * b.transpose()) + 2.0 * frobenius_norm_sq(bv);
    const double lg = std::log(num) + log_fprod - std::log(den);
    r.log_value = lg;
    r.value = std::exp(lg);
    return r;
}

SnrReport snr_fullrank_bound(const Matrix& sigma_p, const Matrix& scale_q, double alpha) {
    if (alpha == 0.0) {
        SnrReport r = snr_fullrank_zero_limit(sigma_p.rows);
        r.upper_bound = r.value;
        r.log_upper_bound = r.log_value;
        return r;
    }
    const SpectralSummary spec = spectrum_of(sigma_p, scale_q);

    SnrReport r;
    r.existence_margin = existence_margin(spec.lambdas, alpha);

    const Matrix sigma_q = scale_q * scale_q.transpose();
    if (frobenius_norm_sq(sigma_p - sigma_q) <= 1e-24 * frobenius_norm_sq(sigma_p)) {
        r.status = SnrStatus::UndefinedZeroEstimator;
        return r;
    }
    if (r.existence_margin <= 0.0) {
        r.status = SnrStatus::UndefinedInfiniteVariance;
        return r;
    }

    // Prefactor (lambda_max(V) / lambda_min(U))^2: the smallest eigenvalue of
    // U = (1-a)I + aA bounds the numerator, the largest eigenvalue of
    // V = (1-2a)I + 2aA bounds the denominator.
    const double lo = alpha > 0.0 ? spec.min() : spec.max();
    const double hi = alpha > 0.0 ? spec.max() : spec.min();
    double lg = 2.0 * (std::log(1.0 + 2.0 * alpha * (hi - 1.0)) - std::log(1.0 + alpha * (lo - 1.0)));
    for (double l : spec.lambdas) lg += log_f_ratio(l, alpha);
    r.log_upper_bound = lg;
    r.upper_bound = std::exp(lg);
    return r;
}

VarianceBound variance_bound_factorized(std::span<const double> sigmas_p,
                                        std::span<const double> sigmas_q, double alpha, int j) {
    if (alpha == 0.0) throw std::invalid_argument("variance_bound_factorized: alpha must be nonzero");
    const auto lambdas = lambda_ratios(sigmas_p, sigmas_q);
    if (j < 0 || j >= static_cast<int>(lambdas.size()))
        throw std::invalid_argument("variance_bound_factorized: component index out of range");

    VarianceBound r;
    r.existence_margin = existence_margin(lambdas, alpha);
    if (sigmas_p[static_cast<std::size_t>(j)] == sigmas_q[static_cast<std::size_t>(j)]) {
        r.bound = 0.0;
        return r;
    }
    if (r.existence_margin <= 0.0) {
        r.status = SnrStatus::UndefinedInfiniteVariance;
        r.bound = std::numeric_limits<double>::infinity();
        return r;
    }

    const double sq = sigmas_q[static_cast<std::size_t>(j)];
    const double sp = sigmas_p[static_cast<std::size_t>(j)];
    const double mj = 1.0 + 2.0 * alpha * (lambdas[static_cast<std::size_t>(j)] - 1.0);
    const double prec_diff = 1.0 / (sp * sp) - 1.0 / (sq * sq);
    const double a_factor = 3.0 * sq * sq * prec_diff * prec_diff / (mj * mj);

    double lg = std::log(a_factor);
    for (double l : lambdas)
        lg += alpha * std::log(l) - 0.5 * std::log(1.0 + 2.0 * alpha * (l - 1.0));
    r.bound = std::exp(lg);
    return r;
}

}  // namespace avi
