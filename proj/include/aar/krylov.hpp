#pragma once

// GMRES, CR and CG on explicit dense systems A (x - x0) = b, with full iterate
// traces. Every solver starts from x0, so the initial residual is b itself.

#include <cmath>
#include <string>
#include <vector>

#include "aar/errors.hpp"
#include "aar/linalg.hpp"
#include "aar/objectives.hpp"

namespace aar {

struct LinearSystem {
    DenseMatrix A;
    Vector b;
    Vector x0;

    Eigen::Index dim() const { return A.rows(); }

    /// b - A (x - x0); the negative of the model gradient at x.
    Vector residual(const Vector& x) const { return b - A * (x - x0); }
};

/// Internal sequences of the CG recurrence, indexed as in the algorithm:
/// r[i], p[i], a[i], beta[i] = ||r[i+1]||^2 / ||r[i]||^2.
struct CGInternals {
    std::vector<Vector> r;
    std::vector<Vector> p;
    std::vector<double> a;
    std::vector<double> beta;
};

struct KrylovTrace {
    std::vector<Vector> iterates;        // x^0 ... x^T
    std::vector<double> residual_norms;  // ||A (x^k - x0) - b||
    CGInternals cg;                      // filled by cg() only
    /// Krylov space stopped growing while the residual was still nonzero.
    bool breakdown = false;

    std::size_t steps() const { return iterates.empty() ? 0 : iterates.size() - 1; }
};

namespace detail {

inline void require_system(const LinearSystem& sys, const char* who) {
    const Eigen::Index n = sys.A.rows();
    if (n == 0 || sys.A.cols() != n) throw InputError(std::string(who) + ": A must be square and nonempty");
    if (sys.b.size() != n || sys.x0.size() != n) throw InputError(std::string(who) + ": dimension mismatch");
    if (!sys.A.allFinite() || !sys.b.allFinite() || !sys.x0.allFinite()) {
        throw InputError(std::string(who) + ": non-finite input");
    }
}

inline void require_symmetric(const LinearSystem& sys, const char* who) {
    if (!is_symmetric(sys.A, 1e-12)) throw InputError(std::string(who) + ": A must be symmetric");
}

inline int krylov_cap(const LinearSystem& sys, int max_iters) {
    if (max_iters < 0) throw InputError("krylov: max_iters must be nonnegative");
    return std::min<int>(max_iters, static_cast<int>(sys.dim()));
}

inline void record(KrylovTrace& t, const LinearSystem& sys, const Vector& x) {
    t.iterates.push_back(x);
    t.residual_norms.push_back(sys.residual(x).norm());
}

}  // namespace detail

/// Full-memory GMRES: Arnoldi with modified Gram-Schmidt, Givens rotations for
/// the small least-squares problem.
inline KrylovTrace gmres(const LinearSystem& sys, int max_iters) {
    detail::require_system(sys, "gmres");
    const int cap = detail::krylov_cap(sys, max_iters);
    const Eigen::Index n = sys.dim();

    KrylovTrace trace;
    detail::record(trace, sys, sys.x0);
    const double beta = sys.b.norm();
    if (beta == 0.0 || cap == 0) return trace;

    DenseMatrix V(n, cap + 1);
    DenseMatrix R = DenseMatrix::Zero(cap + 1, cap);  // rotated Hessenberg
    Vector cs = Vector::Zero(cap), sn = Vector::Zero(cap);
    Vector rhs = Vector::Zero(cap + 1);
    rhs(0) = beta;
    V.col(0) = sys.b / beta;

    for (int k = 0; k < cap; ++k) {
        Vector w = sys.A * V.col(k);
        const double w_scale = std::max(1.0, w.norm());
        for (int i = 0; i <= k; ++i) {
            R(i, k) = V.col(i).dot(w);
            w -= R(i, k) * V.col(i);
        }
        const double h_next = w.norm();
        for (int i = 0; i < k; ++i) {
            const double t = cs(i) * R(i, k) + sn(i) * R(i + 1, k);
            R(i + 1, k) = -sn(i) * R(i, k) + cs(i) * R(i + 1, k);
            R(i, k) = t;
        }
        const double denom = std::hypot(R(k, k), h_next);
        if (denom == 0.0) {
            trace.breakdown = true;
            break;
        }
        cs(k) = R(k, k) / denom;
        sn(k) = h_next / denom;
        R(k, k) = denom;
        R(k + 1, k) = 0.0;
        rhs(k + 1) = -sn(k) * rhs(k);
        rhs(k) = cs(k) * rhs(k);

        const Vector y = R.topLeftCorner(k + 1, k + 1).triangularView<Eigen::Upper>().solve(rhs.head(k + 1));
        detail::record(trace, sys, sys.x0 + V.leftCols(k + 1) * y);

        const bool converged = std::abs(rhs(k + 1)) < 1e-14 * beta;
        if (converged) break;
        if (h_next < 1e-14 * w_scale) {
            trace.breakdown = true;
            break;
        }
        V.col(k + 1) = w / h_next;
    }
    return trace;
}

/// Conjugate residual method for symmetric positive definite A.
inline KrylovTrace cr(const LinearSystem& sys, int max_iters) {
    detail::require_system(sys, "cr");
    detail::require_symmetric(sys, "cr");
    const int cap = detail::krylov_cap(sys, max_iters);

    KrylovTrace trace;
    detail::record(trace, sys, sys.x0);
    const double b_norm = sys.b.norm();
    if (b_norm == 0.0) return trace;

    Vector x = sys.x0;
    Vector r = sys.b;
    Vector p = r;
    Vector Ar = sys.A * r;
    Vector Ap = Ar;
    double rAr = r.dot(Ar);
    for (int k = 0; k < cap; ++k) {
        if (!(p.dot(Ap) > 0.0) || !(rAr > 0.0)) throw NumericalError("cr: matrix is not positive definite");
        const double alpha = rAr / Ap.squaredNorm();
        x += alpha * p;
        r -= alpha * Ap;
        detail::record(trace, sys, x);
        if (r.norm() < 1e-14 * b_norm) break;
        Ar = sys.A * r;
        const double rAr_next = r.dot(Ar);
        const double beta = rAr_next / rAr;
        rAr = rAr_next;
        p = r + beta * p;
        Ap = Ar + beta * Ap;
    }
    return trace;
}

/// Conjugate gradients in the textbook two-term form. The system is
/// A (y - y0) = b, so with b = A (y* - y0) the first residual is -A (y0 - y*).
inline KrylovTrace cg(const LinearSystem& sys, int max_iters) {
    detail::require_system(sys, "cg");
    detail::require_symmetric(sys, "cg");
    const int cap = detail::krylov_cap(sys, max_iters);

    KrylovTrace trace;
    detail::record(trace, sys, sys.x0);
    Vector y = sys.x0;
    Vector r = sys.b;
    Vector p = r;
    const double r0_norm = r.norm();
    trace.cg.r.push_back(r);
    if (r0_norm == 0.0) return trace;

    for (int i = 0; i < cap; ++i) {
        const Vector Bp = sys.A * p;
        const double pBp = p.dot(Bp);
        if (!(pBp > 0.0)) throw NumericalError("cg: matrix is not positive definite");
        const double rr = r.squaredNorm();
        const double a = rr / pBp;
        trace.cg.p.push_back(p);
        trace.cg.a.push_back(a);

        y += a * p;
        r -= a * Bp;
        trace.cg.r.push_back(r);
        detail::record(trace, sys, y);

        const double b = r.squaredNorm() / rr;
        trace.cg.beta.push_back(b);
        if (r.norm() <= 1e-15 * r0_norm) break;
        p = r + b * p;
    }
    return trace;
}

/// x <- x - (1/L)(A (x - x0) - b), applied once (x-bar) or twice (x-tilde).
inline Vector gradient_post_steps(const LinearSystem& sys, const Vector& x, int steps, double lipschitz) {
    if (steps != 1 && steps != 2) throw InputError("gradient_post_steps: steps must be 1 or 2");
    if (!(lipschitz > 0.0)) throw InputError("gradient_post_steps: L must be positive");
    if (x.size() != sys.dim()) throw InputError("gradient_post_steps: dimension mismatch");
    Vector out = x;
    for (int s = 0; s < steps; ++s) out += sys.residual(out) / lipschitz;
    return out;
}

/// Central finite-difference Hessian, symmetrized.
inline DenseMatrix finite_difference_hessian(const Objective& obj, const Vector& x, double step = 1e-5) {
    const Eigen::Index n = x.size();
    DenseMatrix H(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        Vector xp = x, xm = x;
        xp(j) += step;
        xm(j) -= step;
        H.col(j) = (obj.gradient(xp) - obj.gradient(xm)) / (2.0 * step);
    }
    return 0.5 * (H + H.transpose());
}

/// Linear model of the gradient along one AA cycle:
/// A = hess f(x^0) + E with E = B_m X^+ interpolating the gradient differences.
struct PerturbedModel {
    DenseMatrix A;
    DenseMatrix hessian;
    DenseMatrix E;
    /// X had dependent columns; E was formed with the minimum-norm pseudo-inverse.
    bool rank_deficient = false;
};

inline PerturbedModel build_perturbed_A(const Objective& obj, const std::vector<Vector>& cycle) {
    if (cycle.size() < 2) throw InputError("build_perturbed_A: need x^0 and at least one more iterate");
    const Vector& x0 = cycle.front();
    const Eigen::Index n = x0.size();
    if (n != obj.dim) throw InputError("build_perturbed_A: dimension mismatch");
    const Eigen::Index m = static_cast<Eigen::Index>(cycle.size()) - 1;

    PerturbedModel out;
    out.hessian = obj.has_hessian() ? obj.hessian(x0) : finite_difference_hessian(obj, x0);
    const Vector grad0 = obj.gradient(x0);

    DenseMatrix X(n, m), Bm(n, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const Vector& xi = cycle[static_cast<std::size_t>(i) + 1];
        if (xi.size() != n) throw InputError("build_perturbed_A: dimension mismatch");
        X.col(i) = xi - x0;
        Bm.col(i) = obj.gradient(xi) - grad0 - out.hessian * X.col(i);
    }
    Eigen::CompleteOrthogonalDecomposition<DenseMatrix> cod(X);
    cod.setThreshold(kRankTolerance);
    out.rank_deficient = cod.rank() < m;
    out.E = Bm * cod.pseudoInverse();
    out.A = out.hessian + out.E;
    return out;
}

}  // namespace aar
