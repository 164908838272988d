#pragma once

#include <cmath>
#include <vector>

#include "srgt/common.hpp"

namespace srgt {

// Legendre polynomial P_p(x) and P_{p-1}(x) by the three-term recurrence.
inline std::pair<double, double> legendre_pair(int p, double x) {
    double pm1 = 1.0;  // P_0
    double pc = x;     // P_1
    for (int n = 1; n < p; ++n) {
        const double pn = ((2.0 * n + 1.0) * x * pc - n * pm1) / (n + 1.0);
        pm1 = pc;
        pc = pn;
    }
    return {pc, pm1};  // (P_p, P_{p-1})
}

// Gauss-Lobatto-Legendre nodes on [-1, 1]: the p+1 roots of (1-x^2) P'_p(x),
// ascending. Interior roots by Newton iteration from Chebyshev-Gauss-Lobatto
// starting guesses; the iterate update uses
//   (1-x^2) P'_p(x) = p (P_{p-1}(x) - x P_p(x))
//   d/dx [(1-x^2) P'_p(x)] = -p (p+1) P_p(x)
// The result is symmetrized so node[i] == -node[p-i] holds exactly.
inline std::vector<double> gll_nodes(int p) {
    if (p < 1) throw config_error("gll_nodes: polynomial order must be >= 1");
    std::vector<double> x(static_cast<size_t>(p) + 1);
    x.front() = -1.0;
    x.back() = 1.0;
    constexpr double tol = 1e-14;
    for (int i = 1; i < p; ++i) {
        double xi = -std::cos(M_PI * i / p);
        for (int it = 0; it < 100; ++it) {
            const auto [pp, pm1] = legendre_pair(p, xi);
            const double f = p * (pm1 - xi * pp);
            const double df = -static_cast<double>(p) * (p + 1) * pp;
            const double dx = f / df;
            xi -= dx;
            if (std::abs(dx) < tol) break;
        }
        x[static_cast<size_t>(i)] = xi;
    }
    for (int i = 1; i < p; ++i) {
        const int j = p - i;
        if (i < j) {
            const double s = 0.5 * (x[static_cast<size_t>(j)] - x[static_cast<size_t>(i)]);
            x[static_cast<size_t>(i)] = -s;
            x[static_cast<size_t>(j)] = s;
        } else if (i == j) {
            x[static_cast<size_t>(i)] = 0.0;
        }
    }
    return x;
}

}  // namespace srgt
