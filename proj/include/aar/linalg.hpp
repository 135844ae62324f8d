#pragma once

// Dense kernels shared by the solvers: least squares (Householder QR or LSQR),
// condition numbers, and spectral norms. Storage is Eigen's default
// column-major layout.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "aar/errors.hpp"

namespace aar {

using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;

/// Singular values below this fraction of the largest one count as zero.
inline constexpr double kRankTolerance = 1e-15;

enum class LeastSquaresMethod { qr, lsqr };

struct LeastSquaresSolution {
    Vector solution;
    double residual_norm = 0.0;
    bool rank_deficient = false;
};

inline bool all_finite(const DenseMatrix& a) { return a.allFinite(); }
inline bool all_finite(const Vector& v) { return v.allFinite(); }

namespace detail {

inline void require_ls_shapes(const DenseMatrix& a, const Vector& b) {
    if (a.rows() < 1 || a.cols() < 1) {
        throw InputError("least squares: matrix must have at least one row and one column");
    }
    if (b.size() != a.rows()) {
        throw InputError("least squares: rhs length " + std::to_string(b.size()) +
                         " does not match row count " + std::to_string(a.rows()));
    }
}

// Orthogonalize v against the columns stored so far (two passes of classical
// Gram-Schmidt, which is enough to keep the basis orthonormal to working precision).
inline void reorthogonalize(Vector& v, const std::vector<Vector>& basis) {
    for (int pass = 0; pass < 2; ++pass) {
        for (const Vector& q : basis) v -= q.dot(v) * q;
    }
}

// Paige-Saunders LSQR from a zero start, with full reorthogonalization of both
// Golub-Kahan bases. Stops when the recurrence estimate of ||A^T r|| drops below
// tol or after max_iters bidiagonalization steps.
inline Vector lsqr(const DenseMatrix& a, const Vector& b, double tol, int max_iters) {
    const Eigen::Index n = a.cols();
    Vector x = Vector::Zero(n);

    const double scale = std::max(a.norm(), std::numeric_limits<double>::min());
    const double breakdown = 1e-14 * scale;

    Vector u = b;
    double beta = u.norm();
    if (beta == 0.0) return x;
    u /= beta;

    Vector v = a.transpose() * u;
    double alpha = v.norm();
    if (alpha <= breakdown) return x;
    v /= alpha;

    std::vector<Vector> u_basis{u};
    std::vector<Vector> v_basis{v};

    Vector w = v;
    double phi_bar = beta;
    double rho_bar = alpha;

    for (int iter = 0; iter < max_iters; ++iter) {
        u = a * v - alpha * u;
        reorthogonalize(u, u_basis);
        beta = u.norm();
        if (beta > breakdown) {
            u /= beta;
            u_basis.push_back(u);
        } else {
            beta = 0.0;
        }

        double alpha_next = 0.0;
        if (beta > 0.0) {
            v = a.transpose() * u - beta * v;
            reorthogonalize(v, v_basis);
            alpha_next = v.norm();
            if (alpha_next > breakdown) {
                v /= alpha_next;
                v_basis.push_back(v);
            } else {
                alpha_next = 0.0;
            }
        }

        const double rho = std::hypot(rho_bar, beta);
        const double c = rho_bar / rho;
        const double s = beta / rho;
        const double theta = s * alpha_next;
        rho_bar = -c * alpha_next;
        const double phi = c * phi_bar;
        phi_bar = s * phi_bar;

        x += (phi / rho) * w;
        w = v - (theta / rho) * w;
        alpha = alpha_next;

        const double normal_residual = std::abs(phi_bar * alpha * c);
        if (normal_residual < tol || alpha_next == 0.0 || beta == 0.0) break;
    }
    return x;
}

}  // namespace detail

/// Column-pivoted QR rank with the library-wide relative threshold.
inline Eigen::Index numerical_rank(const DenseMatrix& a) {
    Eigen::ColPivHouseholderQR<DenseMatrix> qr(a);
    qr.setThreshold(kRankTolerance);
    return qr.rank();
}

/// Minimizer of ||A x - b||. Rank-deficient problems get the minimum-norm
/// solution; an all-zero matrix yields the zero vector.
inline LeastSquaresSolution solve_least_squares(const DenseMatrix& a, const Vector& b,
                                                LeastSquaresMethod method = LeastSquaresMethod::qr,
                                                double lsqr_tol = 1e-16) {
    detail::require_ls_shapes(a, b);
    if (lsqr_tol < 0.0) throw InputError("least squares: lsqr_tol must be nonnegative");

    LeastSquaresSolution out;
    if (a.isZero(0.0)) {
        out.solution = Vector::Zero(a.cols());
        out.residual_norm = b.norm();
        out.rank_deficient = true;
        return out;
    }

    Eigen::ColPivHouseholderQR<DenseMatrix> qr(a);
    qr.setThreshold(kRankTolerance);
    out.rank_deficient = qr.rank() < a.cols();

    if (method == LeastSquaresMethod::lsqr) {
        out.solution = detail::lsqr(a, b, lsqr_tol, 10 * static_cast<int>(a.cols()));
    } else if (!out.rank_deficient) {
        out.solution = qr.solve(b);
    } else {
        Eigen::CompleteOrthogonalDecomposition<DenseMatrix> cod(a);
        cod.setThreshold(kRankTolerance);
        out.solution = cod.solve(b);
    }
    out.residual_norm = (a * out.solution - b).norm();
    return out;
}

/// kappa(A^T A) = (sigma_max / sigma_min)^2, or +inf once sigma_min falls below
/// the rank threshold.
inline double condition_number_sq(const DenseMatrix& a) {
    if (a.size() == 0 || a.isZero(0.0)) {
        throw InputError("condition_number_sq: matrix is zero");
    }
    const Vector sv = Eigen::JacobiSVD<DenseMatrix>(a).singularValues();
    const double smax = sv(0);
    const double smin = sv(sv.size() - 1);
    if (a.rows() < a.cols() || smin < kRankTolerance * smax) {
        return std::numeric_limits<double>::infinity();
    }
    const double ratio = smax / smin;
    return ratio * ratio;
}

/// Largest singular value by power iteration on A^T A.
inline double spectral_norm(const DenseMatrix& a, double tol = 1e-10) {
    if (a.size() == 0 || a.isZero(0.0)) {
        throw InputError("spectral_norm: matrix is zero");
    }
    // Fixed, non-symmetric start so no singular direction is missed by accident.
    Vector v(a.cols());
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = 1.0 + 0.1 * std::sin(1.0 + static_cast<double>(i));
    v.normalize();

    double sigma_sq = (a * v).squaredNorm();
    for (int iter = 0; iter < 100000; ++iter) {
        Vector next = a.transpose() * (a * v);
        const double nrm = next.norm();
        if (nrm == 0.0) {
            // Start vector in the null space; restart from a coordinate direction.
            v.setZero();
            v(iter % v.size()) = 1.0;
            continue;
        }
        v = next / nrm;
        const double updated = (a * v).squaredNorm();
        const bool done = std::abs(updated - sigma_sq) <= tol * updated;
        sigma_sq = updated;
        if (done) break;
    }
    return std::sqrt(sigma_sq);
}

/// Largest eigenvalue of a symmetric matrix.
inline double max_eigenvalue(const DenseMatrix& sym) {
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(sym, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

inline double min_eigenvalue(const DenseMatrix& sym) {
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(sym, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

inline bool is_symmetric(const DenseMatrix& a, double tol = 1e-12) {
    if (a.rows() != a.cols()) return false;
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    return (a - a.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

/// Symmetric positive definite square root via eigendecomposition.
inline DenseMatrix spd_sqrt(const DenseMatrix& sym) {
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(sym);
    if (es.eigenvalues().minCoeff() <= 0.0) throw InputError("spd_sqrt: matrix is not positive definite");
    return es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace aar
