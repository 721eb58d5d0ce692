#include <doctest.h>

#include <cmath>

#include "avi/distributions.hpp"
#include "avi/rng.hpp"
#include "test_helpers.hpp"

using avi::DiagonalGaussian;
using avi::FullRankGaussian;
using avi::Matrix;

namespace {

// Log density of N(mu, S S^T) for a general (not necessarily triangular)
// factor S, via the covariance. Independent route used to finite-difference
// the scale-parameter gradients.
double log_density_from_factor(const std::vector<double>& mu, const Matrix& s,
                               const std::vector<double>& z) {
    const int d = s.rows;
    const Matrix sigma = s * s.transpose();
    const Matrix l = avi::cholesky(sigma);
    std::vector<double> r(z);
    for (int i = 0; i < d; ++i) r[static_cast<std::size_t>(i)] -= mu[static_cast<std::size_t>(i)];
    const auto w = avi::solve_lower_tri(l, r);
    double quad = 0.0, logdet = 0.0;
    for (int i = 0; i < d; ++i) {
        quad += w[static_cast<std::size_t>(i)] * w[static_cast<std::size_t>(i)];
        logdet += std::log(l(i, i));
    }
    return -0.5 * d * 1.8378770664093454836 - logdet - 0.5 * quad;
}

}  // namespace

TEST_SUITE_BEGIN("distributions");

TEST_CASE("reparam maps hand-checked points") {
    const DiagonalGaussian q({0.0, 0.0}, {2.0, 2.0});
    const std::vector<double> eps = {1.0, -1.0};
    const auto z = avi::reparam(q, eps);
    CHECK(z[0] == doctest::Approx(2.0));
    CHECK(z[1] == doctest::Approx(-2.0));

    const FullRankGaussian f({1.0, 0.0}, Matrix(2, 2, {2, 0, 1, 1}));
    const auto zf = avi::reparam(f, std::vector<double>{1.0, 1.0});
    CHECK(zf[0] == doctest::Approx(3.0));
    CHECK(zf[1] == doctest::Approx(2.0));

    CHECK_THROWS_AS(avi::reparam(q, std::vector<double>{1.0}), avi::DimensionMismatch);
}

TEST_CASE("reparameterized sample moments match the family") {
    avi::RngStream rng(1, 0);
    const Matrix s(3, 3, {1.0, 0, 0, 0.5, 0.8, 0, -0.3, 0.2, 1.4});
    const FullRankGaussian q({0.5, -1.0, 2.0}, s);
    const Matrix sigma = q.covariance();

    const int n = 1000000;
    std::vector<double> mean(3, 0.0);
    Matrix cov(3, 3);
    std::vector<double> eps(3);
    for (int it = 0; it < n; ++it) {
        for (auto& e : eps) e = rng.normal();
        const auto z = avi::reparam(q, eps);
        for (int i = 0; i < 3; ++i) mean[static_cast<std::size_t>(i)] += z[static_cast<std::size_t>(i)];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                cov(i, j) += (z[static_cast<std::size_t>(i)] - q.mean[static_cast<std::size_t>(i)]) *
                             (z[static_cast<std::size_t>(j)] - q.mean[static_cast<std::size_t>(j)]);
    }
    for (int i = 0; i < 3; ++i) {
        mean[static_cast<std::size_t>(i)] /= n;
        // 3 standard errors of the mean
        const double se = std::sqrt(sigma(i, i) / n);
        CHECK(std::abs(mean[static_cast<std::size_t>(i)] - q.mean[static_cast<std::size_t>(i)]) <= 3.5 * se);
    }
    for (auto& v : cov.a) v /= n;
    const double rel =
        std::sqrt(avi::frobenius_norm_sq(cov - sigma) / avi::frobenius_norm_sq(sigma));
    CHECK(rel < 0.01);
}

TEST_CASE("log density constants") {
    const DiagonalGaussian std1({0.0}, {1.0});
    CHECK(avi::log_density(std1, std::vector<double>{0.0}) == doctest::Approx(-0.9189385332046727));

    const DiagonalGaussian q({0.0}, {2.0});
    CHECK(avi::log_density(q, std::vector<double>{2.0}) ==
          doctest::Approx(-0.9189385332046727 - std::log(2.0) - 0.5));

    // full-rank agrees with diagonal when S is diagonal
    const FullRankGaussian f({0.0, 0.0}, Matrix(2, 2, {1, 0, 0, 2}));
    const DiagonalGaussian fd({0.0, 0.0}, {1.0, 2.0});
    const std::vector<double> z = {0.3, -1.2};
    CHECK(avi::log_density(f, z) == doctest::Approx(avi::log_density(fd, z)));
}

TEST_CASE("grad_log_density_z vanishes at the mean and matches finite differences") {
    const DiagonalGaussian q({0.7, -0.2}, {0.5, 3.0});
    const auto g0 = avi::grad_log_density_z(q, q.mean);
    CHECK(g0[0] == doctest::Approx(0.0));
    CHECK(g0[1] == doctest::Approx(0.0));

    avi::RngStream rng(2, 0);
    const Matrix s(2, 2, {1.3, 0, -0.4, 0.9});
    const FullRankGaussian f({0.1, 0.2}, s);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> z = {rng.normal() * 2, rng.normal() * 2};
        const auto gd = avi::grad_log_density_z(q, z);
        const auto gf = avi::grad_log_density_z(f, z);
        for (int k = 0; k < 2; ++k) {
            const auto fd_diag = helpers::central_diff(
                [&](double x) {
                    auto zz = z;
                    zz[static_cast<std::size_t>(k)] = x;
                    return avi::log_density(q, zz);
                },
                z[static_cast<std::size_t>(k)]);
            CHECK(gd[static_cast<std::size_t>(k)] ==
                  doctest::Approx(fd_diag).epsilon(1e-5).scale(std::abs(fd_diag) + 1.0));
            const auto fd_full = helpers::central_diff(
                [&](double x) {
                    auto zz = z;
                    zz[static_cast<std::size_t>(k)] = x;
                    return avi::log_density(f, zz);
                },
                z[static_cast<std::size_t>(k)]);
            CHECK(gf[static_cast<std::size_t>(k)] ==
                  doctest::Approx(fd_full).epsilon(1e-5).scale(std::abs(fd_full) + 1.0));
        }
    }
}

TEST_CASE("param_jacobian_apply hand cases and finite differences") {
    // zero cotangent -> zero gradient
    const DiagonalGaussian q({0.0, 0.0}, {1.0, 2.0});
    const auto gz = avi::param_jacobian_apply(q, std::vector<double>{0.3, -0.7},
                                              std::vector<double>{0.0, 0.0});
    for (double v : gz.values) CHECK(v == 0.0);

    // d=1: eps=3, cotangent=2 -> (d mu, d sigma) = (2, 6)
    const DiagonalGaussian q1({0.0}, {1.5});
    const auto g1 = avi::param_jacobian_apply(q1, std::vector<double>{3.0}, std::vector<double>{2.0});
    CHECK(g1.values[0] == doctest::Approx(2.0));
    CHECK(g1.values[1] == doctest::Approx(6.0));

    // FD of <c, T_w(eps)> over the flattened parameters
    avi::RngStream rng(3, 0);
    const std::vector<double> eps = {0.4, -1.1};
    const std::vector<double> cot = {1.3, 0.7};
    const DiagonalGaussian qd({0.2, -0.5}, {0.8, 1.7});
    const auto jd = avi::param_jacobian_apply(qd, eps, cot);
    int idx = 0;
    for (int block = 0; block < 2; ++block)
        for (int k = 0; k < 2; ++k, ++idx) {
            const auto fd = helpers::central_diff(
                [&](double x) {
                    auto mu = qd.mean;
                    auto sc = qd.scales;
                    (block == 0 ? mu[static_cast<std::size_t>(k)] : sc[static_cast<std::size_t>(k)]) = x;
                    const DiagonalGaussian qq(mu, sc);
                    const auto z = avi::reparam(qq, eps);
                    return cot[0] * z[0] + cot[1] * z[1];
                },
                block == 0 ? qd.mean[static_cast<std::size_t>(k)] : qd.scales[static_cast<std::size_t>(k)]);
            CHECK(jd.values[static_cast<std::size_t>(idx)] == doctest::Approx(fd).epsilon(1e-6));
        }

    // full-rank, both layouts
    const Matrix s(2, 2, {1.2, 0, 0.4, 0.9});
    for (const auto layout : {avi::ScaleParam::LowerTriangle, avi::ScaleParam::FullMatrix}) {
        const FullRankGaussian qf({0.3, -0.6}, s, false, layout);
        const auto jf = avi::param_jacobian_apply(qf, eps, cot);
        // mu block
        CHECK(jf.values[0] == doctest::Approx(cot[0]));
        CHECK(jf.values[1] == doctest::Approx(cot[1]));
        // S block: d<c, mu + S eps>/dS_ij = c_i eps_j
        std::size_t pos = 2;
        for (int i = 0; i < 2; ++i) {
            const int jmax = layout == avi::ScaleParam::FullMatrix ? 1 : i;
            for (int j = 0; j <= jmax; ++j, ++pos)
                CHECK(jf.values[pos] ==
                      doctest::Approx(cot[static_cast<std::size_t>(i)] * eps[static_cast<std::size_t>(j)]));
        }
    }
}

TEST_CASE("param_jacobian_apply is linear in the cotangent") {
    avi::RngStream rng(4, 0);
    const DiagonalGaussian q({0.1, 0.9, -2.0}, {1.0, 0.4, 2.5});
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> eps(3), c1(3), c2(3);
        for (int i = 0; i < 3; ++i) {
            eps[static_cast<std::size_t>(i)] = rng.normal();
            c1[static_cast<std::size_t>(i)] = rng.normal();
            c2[static_cast<std::size_t>(i)] = rng.normal();
        }
        const double a = rng.normal(), b = rng.normal();
        std::vector<double> combo(3);
        for (int i = 0; i < 3; ++i)
            combo[static_cast<std::size_t>(i)] =
                a * c1[static_cast<std::size_t>(i)] + b * c2[static_cast<std::size_t>(i)];
        const auto g1 = avi::param_jacobian_apply(q, eps, c1);
        const auto g2 = avi::param_jacobian_apply(q, eps, c2);
        const auto gc = avi::param_jacobian_apply(q, eps, combo);
        for (std::size_t i = 0; i < gc.values.size(); ++i)
            CHECK(gc.values[i] == doctest::Approx(a * g1.values[i] + b * g2.values[i]).epsilon(1e-12));
    }
}

TEST_CASE("entropy_param_grad hand values and finite differences") {
    // z = mu, sigma = 1: d mu = 0, d sigma = -1
    const DiagonalGaussian q({0.3, -0.4}, {1.0, 1.0});
    const auto g = avi::entropy_param_grad(q, q.mean);
    CHECK(g.values[0] == doctest::Approx(0.0));
    CHECK(g.values[1] == doctest::Approx(0.0));
    CHECK(g.values[2] == doctest::Approx(-1.0));
    CHECK(g.values[3] == doctest::Approx(-1.0));

    // FD over (mu, sigma) at fixed z
    avi::RngStream rng(5, 0);
    const DiagonalGaussian qd({0.2, -0.5}, {0.8, 1.7});
    const std::vector<double> z = {1.1, -0.3};
    const auto gd = avi::entropy_param_grad(qd, z);
    int idx = 0;
    for (int block = 0; block < 2; ++block)
        for (int k = 0; k < 2; ++k, ++idx) {
            const auto fd = helpers::central_diff(
                [&](double x) {
                    auto mu = qd.mean;
                    auto sc = qd.scales;
                    (block == 0 ? mu[static_cast<std::size_t>(k)] : sc[static_cast<std::size_t>(k)]) = x;
                    return avi::log_density(DiagonalGaussian(mu, sc), z);
                },
                block == 0 ? qd.mean[static_cast<std::size_t>(k)] : qd.scales[static_cast<std::size_t>(k)]);
            CHECK(gd.values[static_cast<std::size_t>(idx)] == doctest::Approx(fd).epsilon(1e-6));
        }

    // affine identity: for fixed standardized residual r = (z - mu)/sigma,
    // d mu log q = r / sigma, so (d mu) * sigma depends only on r
    const double r = 0.85;
    for (double sigma : {0.5, 1.0, 2.0, 7.0}) {
        const DiagonalGaussian q1({0.4}, {sigma});
        const std::vector<double> zz = {0.4 + sigma * r};
        const auto gg = avi::entropy_param_grad(q1, zz);
        CHECK(gg.values[0] * sigma == doctest::Approx(r));
    }
}

TEST_CASE("full-rank entropy_param_grad matches finite differences in both layouts") {
    const Matrix s(3, 3, {1.1, 0, 0, -0.3, 0.9, 0, 0.2, 0.5, 1.6});
    const std::vector<double> mu = {0.2, -0.1, 0.6};
    const std::vector<double> z = {1.0, 0.3, -0.8};

    for (const auto layout : {avi::ScaleParam::LowerTriangle, avi::ScaleParam::FullMatrix}) {
        const FullRankGaussian q(mu, s, false, layout);
        const auto g = avi::entropy_param_grad(q, z);

        std::size_t pos = 0;
        for (int k = 0; k < 3; ++k, ++pos) {
            const auto fd = helpers::central_diff(
                [&](double x) {
                    auto m2 = mu;
                    m2[static_cast<std::size_t>(k)] = x;
                    return log_density_from_factor(m2, s, z);
                },
                mu[static_cast<std::size_t>(k)]);
            CHECK(g.values[pos] == doctest::Approx(fd).epsilon(1e-6));
        }
        for (int i = 0; i < 3; ++i) {
            const int jmax = layout == avi::ScaleParam::FullMatrix ? 2 : i;
            for (int j = 0; j <= jmax; ++j, ++pos) {
                const auto fd = helpers::central_diff(
                    [&](double x) {
                        Matrix s2 = s;
                        s2(i, j) = x;
                        return log_density_from_factor(mu, s2, z);
                    },
                    s(i, j));
                CHECK(g.values[pos] == doctest::Approx(fd).epsilon(1e-6));
            }
        }
        CHECK(pos == g.values.size());
    }
}

TEST_CASE("mean-frozen families drop the mu block") {
    const DiagonalGaussian q = DiagonalGaussian::mean_zero({1.0, 2.0});
    CHECK(q.active_params() == 2);
    const auto g = avi::entropy_param_grad(q, std::vector<double>{0.5, 0.5});
    CHECK(g.values.size() == 2);

    const FullRankGaussian f = FullRankGaussian::mean_zero(Matrix(2, 2, {1, 0, 0.5, 2}));
    CHECK(f.active_params() == 3);
    const FullRankGaussian ffull =
        FullRankGaussian::mean_zero(Matrix(2, 2, {1, 0, 0.5, 2}), avi::ScaleParam::FullMatrix);
    CHECK(ffull.active_params() == 4);
}

TEST_CASE("analytic targets normalize: MC density ratio averages to one") {
    // d <= 3 integral check of exp(log_density) against a wider proposal
    const auto target = avi::make_factorized_gaussian_target({0.0, 0.0}, {1.0, 0.7});
    const DiagonalGaussian proposal({0.0, 0.0}, {2.5, 2.5});
    avi::RngStream rng(6, 0);
    const int n = 400000;
    double acc = 0.0;
    std::vector<double> eps(2);
    for (int i = 0; i < n; ++i) {
        for (auto& e : eps) e = rng.normal();
        const auto z = avi::reparam(proposal, eps);
        acc += std::exp(target.log_density(z) - avi::log_density(proposal, z));
    }
    CHECK(acc / n == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("constructor invariants") {
    CHECK_THROWS(DiagonalGaussian({0.0}, {0.0}));
    CHECK_THROWS(DiagonalGaussian({0.0}, {-1.0}));
    CHECK_THROWS(FullRankGaussian({0.0, 0.0}, Matrix(2, 2, {1, 0.5, 0, 1})));  // upper entry
    CHECK_THROWS(FullRankGaussian({0.0, 0.0}, Matrix(2, 2, {1, 0, 0, -2})));   // negative diag
}

TEST_SUITE_END();
