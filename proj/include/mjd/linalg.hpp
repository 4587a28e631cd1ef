#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace mjd {

inline double ipow(double base, int e) {
    double r = 1.0;
    double b = base;
    for (int k = e; k > 0; k >>= 1) {
        if (k & 1) r *= b;
        b *= b;
    }
    return r;
}

// |det| of a square matrix after scaling each row by its max-abs entry.
// Gaussian elimination with partial pivoting; a zero row scales to det 0.
inline double scaled_abs_det(const std::vector<std::vector<double>>& m) {
    const std::size_t n = m.size();
    std::vector<std::vector<double>> a(n);
    for (std::size_t i = 0; i < n; ++i) {
        double rowmax = 0.0;
        for (double v : m[i]) rowmax = std::max(rowmax, std::abs(v));
        if (rowmax == 0.0) return 0.0;
        a[i].resize(n);
        for (std::size_t j = 0; j < n; ++j) a[i][j] = m[i][j] / rowmax;
    }
    double det = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a[i][k]) > std::abs(a[piv][k])) piv = i;
        if (a[piv][k] == 0.0) return 0.0;
        if (piv != k) std::swap(a[piv], a[k]);
        det *= a[k][k];
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = a[i][k] / a[k][k];
            for (std::size_t j = k; j < n; ++j) a[i][j] -= f * a[k][j];
        }
    }
    return std::abs(det);
}

// In-place Cholesky solve of the SPD system A x = b (A row-major p x p).
// Returns false when A is not numerically positive definite.
inline bool cholesky_solve(std::vector<double> a, std::vector<double> b, std::size_t p,
                           std::vector<double>& x) {
    std::vector<double> l(p * p, 0.0);
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a[i * p + j];
            for (std::size_t k = 0; k < j; ++k) s -= l[i * p + k] * l[j * p + k];
            if (i == j) {
                if (s <= 0.0 || !std::isfinite(s)) return false;
                l[i * p + i] = std::sqrt(s);
            } else {
                l[i * p + j] = s / l[j * p + j];
            }
        }
    }
    // forward then backward substitution
    for (std::size_t i = 0; i < p; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= l[i * p + k] * b[k];
        b[i] = s / l[i * p + i];
    }
    x.assign(p, 0.0);
    for (std::size_t ii = p; ii-- > 0;) {
        double s = b[ii];
        for (std::size_t k = ii + 1; k < p; ++k) s -= l[k * p + ii] * x[k];
        x[ii] = s / l[ii * p + ii];
    }
    return true;
}

} // namespace mjd
