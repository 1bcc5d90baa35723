#pragma once

#include <cstddef>
#include <vector>

namespace crt::linalg {

// Solves A x = b for symmetric positive definite A (n x n, row-major) via
// in-place Cholesky. Retries with growing diagonal jitter when the
// factorization meets a non-positive pivot (near-singular Gram matrices).
std::vector<double> solve_spd(std::vector<double> a, std::vector<double> b,
                              std::size_t n);

// y = A x for row-major A (rows x cols)
std::vector<double> matvec(const std::vector<double>& a, std::size_t rows,
                           std::size_t cols, const std::vector<double>& x);

// y = A^T x
std::vector<double> matvec_t(const std::vector<double>& a, std::size_t rows,
                             std::size_t cols, const std::vector<double>& x);

double dot(const double* a, const double* b, std::size_t n);

}  // namespace crt::linalg
