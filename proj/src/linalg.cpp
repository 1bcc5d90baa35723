#include "crt/linalg.hpp"

#include <cmath>

#include "crt/error.hpp"

namespace crt::linalg {

namespace {

// returns false when a pivot is not positive
bool cholesky(std::vector<double>& a, std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) {
        double d = a[j * n + j];
        for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
        if (!(d > 0.0) || !std::isfinite(d)) return false;
        const double ljj = std::sqrt(d);
        a[j * n + j] = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
            a[i * n + j] = s / ljj;
        }
    }
    return true;
}

}  // namespace

std::vector<double> solve_spd(std::vector<double> a, std::vector<double> b,
                              std::size_t n) {
    if (a.size() != n * n || b.size() != n)
        throw Error("solve_spd: shape mismatch");

    double trace = 0.0;
    for (std::size_t i = 0; i < n; ++i) trace += a[i * n + i];
    const double base_jitter = (trace / static_cast<double>(n)) * 1e-14 + 1e-300;

    std::vector<double> l;
    double jitter = 0.0;
    for (int attempt = 0; attempt < 8; ++attempt) {
        l = a;
        if (jitter > 0.0)
            for (std::size_t i = 0; i < n; ++i) l[i * n + i] += jitter;
        if (cholesky(l, n)) break;
        jitter = (jitter == 0.0) ? base_jitter : jitter * 100.0;
        if (attempt == 7) throw Error("solve_spd: matrix is not positive definite");
    }

    // forward substitution L z = b
    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= l[i * n + k] * z[k];
        z[i] = s / l[i * n + i];
    }
    // back substitution L^T x = z
    std::vector<double> x(n);
    for (std::size_t ii = n; ii-- > 0;) {
        double s = z[ii];
        for (std::size_t k = ii + 1; k < n; ++k) s -= l[k * n + ii] * x[k];
        x[ii] = s / l[ii * n + ii];
    }
    return x;
}

std::vector<double> matvec(const std::vector<double>& a, std::size_t rows,
                           std::size_t cols, const std::vector<double>& x) {
    if (a.size() != rows * cols || x.size() != cols) throw Error("matvec: shape mismatch");
    std::vector<double> y(rows, 0.0);
    for (std::size_t i = 0; i < rows; ++i) y[i] = dot(a.data() + i * cols, x.data(), cols);
    return y;
}

std::vector<double> matvec_t(const std::vector<double>& a, std::size_t rows,
                             std::size_t cols, const std::vector<double>& x) {
    if (a.size() != rows * cols || x.size() != rows)
        throw Error("matvec_t: shape mismatch");
    std::vector<double> y(cols, 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
        const double xi = x[i];
        const double* row = a.data() + i * cols;
        for (std::size_t j = 0; j < cols; ++j) y[j] += row[j] * xi;
    }
    return y;
}

double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

}  // namespace crt::linalg
