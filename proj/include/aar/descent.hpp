#pragma once

// Scalar tests of the function-value globalization.

#include <algorithm>
#include <cmath>

#include "aar/run_types.hpp"

namespace aar {

/// Acceptance threshold f(x^k) - gamma ||grad f(x^k)||^2
///   + min(c1 ||grad f(anchor)||^nu, c2 ||grad f(anchor)||^2, c3).
inline double descent_threshold(double f_k, double grad_k_normsq, double grad_anchor_norm,
                                const GlobalizationParams& p) {
    const double slack = std::min({p.c1 * std::pow(grad_anchor_norm, p.nu),
                                   p.c2 * grad_anchor_norm * grad_anchor_norm, p.c3});
    return f_k - p.gamma * grad_k_normsq + slack;
}

inline bool descent_test(double f_aa, double f_k, double grad_k_normsq, double grad_anchor_norm,
                         const GlobalizationParams& p) {
    return f_aa <= descent_threshold(f_k, grad_k_normsq, grad_anchor_norm, p);
}

/// max(f_aa - f_g, 0) / ||grad f(anchor)||^3, guarded against a zero denominator.
inline double rho_k(double f_aa, double f_g, double grad_anchor_norm, double eps_guard = 1e-300) {
    const double excess = std::max(f_aa - f_g, 0.0);
    if (excess == 0.0) return 0.0;
    const double cube = grad_anchor_norm * grad_anchor_norm * grad_anchor_norm;
    return excess / std::max(cube, eps_guard);
}

}  // namespace aar
