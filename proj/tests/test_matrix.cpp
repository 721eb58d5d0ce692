#include <doctest.h>

#include <cmath>

#include "avi/matrix.hpp"
#include "avi/rng.hpp"
#include "test_helpers.hpp"

using avi::Matrix;

TEST_SUITE_BEGIN("matrix");

TEST_CASE("frobenius and trace") {
    const Matrix z(3, 3);
    CHECK(avi::frobenius_norm_sq(z) == 0.0);

    const Matrix m(2, 2, {1, 2, 3, 4});
    CHECK(avi::frobenius_norm_sq(m) == doctest::Approx(30.0));
    CHECK(avi::trace(m) == doctest::Approx(5.0));

    const Matrix rect(2, 3, {1, 2, 3, 4, 5, 6});
    CHECK_THROWS_AS(avi::trace(rect), avi::NotSquare);
}

TEST_CASE("cholesky on hand-checked matrices") {
    const Matrix id3 = Matrix::identity(3);
    const Matrix l_id = avi::cholesky(id3);
    CHECK(avi::frobenius_norm_sq(l_id - id3) == doctest::Approx(0.0));

    const Matrix a(2, 2, {4, 2, 2, 5});
    const Matrix l = avi::cholesky(a);
    CHECK(l(0, 0) == doctest::Approx(2.0));
    CHECK(l(1, 0) == doctest::Approx(1.0));
    CHECK(l(1, 1) == doctest::Approx(2.0));
    CHECK(l(0, 1) == 0.0);
    const Matrix rec = l * l.transpose();
    CHECK(std::sqrt(avi::frobenius_norm_sq(rec - a)) <=
          1e-10 * std::sqrt(avi::frobenius_norm_sq(a)));

    const Matrix indefinite(2, 2, {1, 2, 2, 1});  // eigenvalues 3, -1
    CHECK_THROWS_AS(avi::cholesky(indefinite), avi::NotPositiveDefinite);
}

TEST_CASE("cholesky round-trip on 100 random SPD matrices up to d=32") {
    avi::RngStream rng(100, 0);
    for (int trial = 0; trial < 100; ++trial) {
        const int d = 1 + static_cast<int>(rng.next_u64() % 32);
        const Matrix a = helpers::random_spd(d, rng);
        const Matrix l = avi::cholesky(a);
        for (int i = 0; i < d; ++i) {
            CHECK(l(i, i) > 0.0);
            for (int j = i + 1; j < d; ++j) CHECK(l(i, j) == 0.0);
        }
        const double rel = std::sqrt(avi::frobenius_norm_sq(l * l.transpose() - a) /
                                     avi::frobenius_norm_sq(a));
        CHECK(rel <= 1e-10);
    }
}

TEST_CASE("sym_eigenvalues on hand-checked matrices") {
    const auto e_id = avi::sym_eigenvalues(Matrix::identity(4));
    for (double v : e_id) CHECK(v == doctest::Approx(1.0));

    const auto e_diag = avi::sym_eigenvalues(Matrix::diag({5, 2}));
    CHECK(e_diag[0] == doctest::Approx(2.0));
    CHECK(e_diag[1] == doctest::Approx(5.0));

    // char. polynomial of [[2,1],[1,2]]: (2-x)^2 - 1 -> x in {1, 3}
    const auto e = avi::sym_eigenvalues(Matrix(2, 2, {2, 1, 1, 2}));
    CHECK(e[0] == doctest::Approx(1.0));
    CHECK(e[1] == doctest::Approx(3.0));

    CHECK_THROWS_AS(avi::sym_eigenvalues(Matrix(2, 2, {1, 2, 3, 4})), avi::NotSymmetric);
}

TEST_CASE("eigenvalues of S^T Sigma_p^{-1} S match det and trace of Sigma_p^{-1} Sigma_q") {
    avi::RngStream rng(200, 0);
    for (int trial = 0; trial < 25; ++trial) {
        const int d = 2 + static_cast<int>(rng.next_u64() % 5);
        const Matrix sigma_p = helpers::random_spd(d, rng);
        const Matrix s = helpers::random_lower_tri(d, rng);
        const Matrix m = avi::solve_spd(sigma_p, s);
        Matrix a = s.transpose() * m;
        for (int i = 0; i < d; ++i)
            for (int j = i + 1; j < d; ++j) {
                const double v = 0.5 * (a(i, j) + a(j, i));
                a(i, j) = a(j, i) = v;
            }
        const auto lambdas = avi::sym_eigenvalues(a);

        // trace(Sigma_p^{-1} Sigma_q) and det via the Cholesky factors
        const Matrix sigma_q = s * s.transpose();
        const Matrix prod = avi::solve_spd(sigma_p, sigma_q);
        double tr_direct = avi::trace(prod);
        double log_det_direct = 0.0;
        {
            const Matrix lp = avi::cholesky(sigma_p);
            const Matrix lq = avi::cholesky(sigma_q);
            for (int i = 0; i < d; ++i)
                log_det_direct += 2.0 * (std::log(lq(i, i)) - std::log(lp(i, i)));
        }
        double tr_eig = 0.0, log_det_eig = 0.0;
        for (double l : lambdas) {
            CHECK(l > 0.0);
            tr_eig += l;
            log_det_eig += std::log(l);
        }
        CHECK(tr_eig == doctest::Approx(tr_direct).epsilon(1e-8));
        CHECK(log_det_eig == doctest::Approx(log_det_direct).epsilon(1e-8));
    }
}

TEST_CASE("solve_spd") {
    const Matrix id = Matrix::identity(3);
    const Matrix b(3, 2, {1, 2, 3, 4, 5, 6});
    const Matrix x_id = avi::solve_spd(id, b);
    CHECK(avi::frobenius_norm_sq(x_id - b) == doctest::Approx(0.0));

    const std::vector<double> rhs = {1.0, 1.0};
    const auto x = avi::solve_spd(Matrix::diag({2, 4}), rhs);
    CHECK(x[0] == doctest::Approx(0.5));
    CHECK(x[1] == doctest::Approx(0.25));

    avi::RngStream rng(300, 0);
    const Matrix a = helpers::random_spd(5, rng);
    Matrix b5(5, 1);
    for (int i = 0; i < 5; ++i) b5(i, 0) = rng.normal();
    const Matrix sol = avi::solve_spd(a, b5);
    const double resid = std::sqrt(avi::frobenius_norm_sq(a * sol - b5));
    CHECK(resid <= 1e-8 * std::sqrt(avi::frobenius_norm_sq(b5)));

    CHECK_THROWS_AS(avi::solve_spd(Matrix(2, 2, {1, 2, 2, 1}), rhs), avi::NotPositiveDefinite);
}

TEST_CASE("eigen reconstruction residual against similarity invariants") {
    // residual check via trace of powers: sum lambda_i^k equals trace(A^k)
    avi::RngStream rng(400, 0);
    const Matrix a = helpers::random_spd(6, rng);
    const auto lambdas = avi::sym_eigenvalues(a);
    double tr1 = 0.0, tr2 = 0.0;
    for (double l : lambdas) {
        tr1 += l;
        tr2 += l * l;
    }
    CHECK(tr1 == doctest::Approx(avi::trace(a)).epsilon(1e-10));
    CHECK(tr2 == doctest::Approx(avi::trace(a * a)).epsilon(1e-10));
    const double scale = std::sqrt(avi::frobenius_norm_sq(a));
    CHECK(std::abs(tr1 - avi::trace(a)) <= 1e-8 * scale);
}

TEST_SUITE_END();
