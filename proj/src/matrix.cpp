#include "avi/matrix.hpp"

#include <algorithm>
#include <cmath>

namespace avi {

namespace {
constexpr double kPivotFloor = 1e-12;
}

Matrix::Matrix(int r, int c, std::vector<double> entries) : rows(r), cols(c), a(std::move(entries)) {
    if (r <= 0 || c <= 0) throw DimensionMismatch("Matrix: dimensions must be positive");
    if (a.size() != static_cast<std::size_t>(r) * c)
        throw DimensionMismatch("Matrix: entry count does not match rows*cols");
}

Matrix Matrix::identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::diag(const std::vector<double>& d) {
    Matrix m(static_cast<int>(d.size()), static_cast<int>(d.size()));
    for (int i = 0; i < m.rows; ++i) m(i, i) = d[static_cast<std::size_t>(i)];
    return m;
}

Matrix Matrix::transpose() const {
    Matrix t(cols, rows);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) t(j, i) = (*this)(i, j);
    return t;
}

Matrix operator*(const Matrix& x, const Matrix& y) {
    if (x.cols != y.rows) throw DimensionMismatch("matmul: inner dimensions differ");
    Matrix z(x.rows, y.cols);
    for (int i = 0; i < x.rows; ++i) {
        for (int k = 0; k < x.cols; ++k) {
            const double xik = x(i, k);
            if (xik == 0.0) continue;
            for (int j = 0; j < y.cols; ++j) z(i, j) += xik * y(k, j);
        }
    }
    return z;
}

Matrix operator+(const Matrix& x, const Matrix& y) {
    if (x.rows != y.rows || x.cols != y.cols) throw DimensionMismatch("add: shapes differ");
    Matrix z = x;
    for (std::size_t i = 0; i < z.a.size(); ++i) z.a[i] += y.a[i];
    return z;
}

Matrix operator-(const Matrix& x, const Matrix& y) {
    if (x.rows != y.rows || x.cols != y.cols) throw DimensionMismatch("sub: shapes differ");
    Matrix z = x;
    for (std::size_t i = 0; i < z.a.size(); ++i) z.a[i] -= y.a[i];
    return z;
}

Matrix operator*(double s, const Matrix& x) {
    Matrix z = x;
    for (auto& v : z.a) v *= s;
    return z;
}

std::vector<double> matvec(const Matrix& m, const std::vector<double>& v) {
    if (m.cols != static_cast<int>(v.size())) throw DimensionMismatch("matvec: size mismatch");
    std::vector<double> out(static_cast<std::size_t>(m.rows), 0.0);
    for (int i = 0; i < m.rows; ++i) {
        double s = 0.0;
        for (int j = 0; j < m.cols; ++j) s += m(i, j) * v[static_cast<std::size_t>(j)];
        out[static_cast<std::size_t>(i)] = s;
    }
    return out;
}

double frobenius_norm_sq(const Matrix& m) {
    double s = 0.0;
    for (double v : m.a) s += v * v;
    return s;
}

double trace(const Matrix& m) {
    if (!m.is_square()) throw NotSquare("trace: matrix not square");
    double s = 0.0;
    for (int i = 0; i < m.rows; ++i) s += m(i, i);
    return s;
}

bool is_symmetric(const Matrix& m, double tol) {
    if (!m.is_square()) return false;
    double scale = std::sqrt(frobenius_norm_sq(m));
    if (scale == 0.0) scale = 1.0;
    for (int i = 0; i < m.rows; ++i)
        for (int j = i + 1; j < m.cols; ++j)
            if (std::abs(m(i, j) - m(j, i)) > tol * scale) return false;
    return true;
}

Matrix cholesky(const Matrix& a) {
    if (!a.is_square()) throw NotSquare("cholesky: matrix not square");
    if (!is_symmetric(a)) throw NotSymmetric("cholesky: matrix not symmetric");
    const int n = a.rows;
    Matrix l(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = a(i, j);
            for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            if (i == j) {
                if (s <= kPivotFloor)
                    throw NotPositiveDefinite("cholesky: pivot " + std::to_string(s) +
                                              " at index " + std::to_string(i));
                l(i, i) = std::sqrt(s);
            } else {
                l(i, j) = s / l(j, j);
            }
        }
    }
    return l;
}

std::vector<double> solve_lower_tri(const Matrix& l, const std::vector<double>& b) {
    const int n = l.rows;
    if (static_cast<int>(b.size()) != n) throw DimensionMismatch("solve_lower_tri: size mismatch");
    std::vector<double> x(b);
    for (int i = 0; i < n; ++i) {
        double s = x[static_cast<std::size_t>(i)];
        for (int k = 0; k < i; ++k) s -= l(i, k) * x[static_cast<std::size_t>(k)];
        x[static_cast<std::size_t>(i)] = s / l(i, i);
    }
    return x;
}

std::vector<double> solve_lower_tri_transposed(const Matrix& l, const std::vector<double>& b) {
    const int n = l.rows;
    if (static_cast<int>(b.size()) != n) throw DimensionMismatch("solve_lower_tri_transposed: size mismatch");
    std::vector<double> x(b);
    for (int i = n - 1; i >= 0; --i) {
        double s = x[static_cast<std::size_t>(i)];
        for (int k = i + 1; k < n; ++k) s -= l(k, i) * x[static_cast<std::size_t>(k)];
        x[static_cast<std::size_t>(i)] = s / l(i, i);
    }
    return x;
}

Matrix solve_spd(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows) throw DimensionMismatch("solve_spd: rhs row count mismatch");
    const Matrix l = cholesky(a);
    Matrix x(b.rows, b.cols);
    std::vector<double> col(static_cast<std::size_t>(b.rows));
    for (int j = 0; j < b.cols; ++j) {
        for (int i = 0; i < b.rows; ++i) col[static_cast<std::size_t>(i)] = b(i, j);
        auto y = solve_lower_tri(l, col);
        y = solve_lower_tri_transposed(l, y);
        for (int i = 0; i < b.rows; ++i) x(i, j) = y[static_cast<std::size_t>(i)];
    }
    return x;
}

std::vector<double> solve_spd(const Matrix& a, const std::vector<double>& b) {
    const Matrix l = cholesky(a);
    return solve_lower_tri_transposed(l, solve_lower_tri(l, b));
}

Matrix inverse_spd(const Matrix& a) {
    return solve_spd(a, Matrix::identity(a.rows));
}

std::vector<double> sym_eigenvalues(const Matrix& a) {
    if (!a.is_square()) throw NotSquare("sym_eigenvalues: matrix not square");
    if (!is_symmetric(a)) throw NotSymmetric("sym_eigenvalues: matrix not symmetric");
    const int n = a.rows;
    Matrix m = a;

    // Cyclic Jacobi. Off-diagonal mass shrinks quadratically; 64 sweeps is
    // far beyond what d <= few hundred needs.
    const double total = std::sqrt(frobenius_norm_sq(m));
    const double stop = (total == 0.0 ? 1.0 : total) * 1e-15;
    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) off += m(i, j) * m(i, j);
        if (std::sqrt(2.0 * off) <= stop) break;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = m(p, q);
                if (std::abs(apq) <= stop / (n * n + 1.0)) continue;
                const double theta = (m(q, q) - m(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double mkp = m(k, p), mkq = m(k, q);
                    m(k, p) = c * mkp - s * mkq;
                    m(k, q) = s * mkp + c * mkq;
                }
                for (int k = 0; k < n; ++k) {
                    const double mpk = m(p, k), mqk = m(q, k);
                    m(p, k) = c * mpk - s * mqk;
                    m(q, k) = s * mpk + c * mqk;
                }
            }
        }
    }
    std::vector<double> eig(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) eig[static_cast<std::size_t>(i)] = m(i, i);
    std::sort(eig.begin(), eig.end());
    return eig;
}

}  // namespace avi
