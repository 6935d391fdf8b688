#pragma once

// Independent singular-value oracle for the tests: cyclic Jacobi eigenvalue
// iteration on the Gram matrix A^T A. No code shared with the library's
// power-iteration path.

#include <algorithm>
#include <cmath>
#include <vector>

#include "wdlab/linalg.hpp"

namespace oracle {

inline std::vector<double> singular_values_jacobi(const wdlab::linalg::Matrix& a) {
    using wdlab::linalg::Matrix;
    const std::size_t n = a.cols;
    // G = A^T A
    std::vector<std::vector<double>> g(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = 0; q < n; ++q) g[p][q] += a(i, p) * a(i, q);

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += g[p][q] * g[p][q];
        if (off < 1e-26) break;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                if (g[p][q] == 0.0) continue;
                double theta = (g[q][q] - g[p][p]) / (2.0 * g[p][q]);
                double t = (theta >= 0.0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    double gkp = g[k][p], gkq = g[k][q];
                    g[k][p] = c * gkp - s * gkq;
                    g[k][q] = s * gkp + c * gkq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double gpk = g[p][k], gqk = g[q][k];
                    g[p][k] = c * gpk - s * gqk;
                    g[q][k] = s * gpk + c * gqk;
                }
            }
    }
    std::vector<double> sv;
    for (std::size_t i = 0; i < n; ++i) sv.push_back(std::sqrt(std::max(g[i][i], 0.0)));
    std::sort(sv.rbegin(), sv.rend());
    return sv;
}

}  // namespace oracle
