#pragma once

#include <vector>

#include "avi/errors.hpp"

namespace avi {

/// Small dense row-major matrix of doubles. Sized for variational problems
/// (d up to a few hundred); everything is O(d^3) textbook code.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {
        if (r <= 0 || c <= 0) throw DimensionMismatch("Matrix: dimensions must be positive");
    }
    Matrix(int r, int c, std::vector<double> entries);

    double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

    static Matrix identity(int n);
    static Matrix diag(const std::vector<double>& d);

    Matrix transpose() const;
    bool is_square() const { return rows == cols; }
};

Matrix operator*(const Matrix& x, const Matrix& y);
Matrix operator+(const Matrix& x, const Matrix& y);
Matrix operator-(const Matrix& x, const Matrix& y);
Matrix operator*(double s, const Matrix& x);

std::vector<double> matvec(const Matrix& m, const std::vector<double>& v);

double frobenius_norm_sq(const Matrix& m);
double trace(const Matrix& m);

bool is_symmetric(const Matrix& m, double tol = 1e-10);

/// Lower-triangular L with L L^T = a. Pivots at or below 1e-12 are treated as
/// loss of positive definiteness.
Matrix cholesky(const Matrix& a);

/// Solve a x = b for symmetric positive definite a (b may have many columns).
Matrix solve_spd(const Matrix& a, const Matrix& b);
std::vector<double> solve_spd(const Matrix& a, const std::vector<double>& b);

/// Inverse of an SPD matrix via its Cholesky factor.
Matrix inverse_spd(const Matrix& a);

/// Solve L x = b (lower triangular) or L^T x = b.
std::vector<double> solve_lower_tri(const Matrix& l, const std::vector<double>& b);
std::vector<double> solve_lower_tri_transposed(const Matrix& l, const std::vector<double>& b);

/// Eigenvalues of a symmetric matrix, ascending (cyclic Jacobi).
std::vector<double> sym_eigenvalues(const Matrix& a);

}  // namespace avi
