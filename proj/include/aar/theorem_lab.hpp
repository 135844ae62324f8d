#pragma once

// Executable checks of the structural results behind AA-R: the equivalence
// with GMRES on the perturbed linear model, the GMRES/CR gap, the CG
// identities and descent inequalities, q-linear residual decrease, the
// cubic-order descent property and the kappa(H) vs kappa(X) equivalence.
//
// Every check returns a TheoremReport whose max_violation is a signed margin:
// values <= tolerance pass.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "aar/anderson.hpp"
#include "aar/fixedpoint.hpp"
#include "aar/krylov.hpp"
#include "aar/linalg.hpp"
#include "aar/objectives.hpp"

namespace aar {

struct TheoremReport {
    std::string name;
    std::size_t instances_checked = 0;
    double max_violation = 0.0;
    double tolerance = 0.0;
    bool pass = true;
    /// Per-instance margins (same sign convention as max_violation).
    std::vector<double> margins;
    /// Skipped instances and other remarks.
    std::vector<std::string> notes;

    void add(double violation) {
        if (margins.empty() || violation > max_violation) max_violation = violation;
        margins.push_back(violation);
        ++instances_checked;
        pass = max_violation <= tolerance;
    }

    void skip(std::string why) { notes.push_back(std::move(why)); }
};

inline TheoremReport make_report(std::string name, double tolerance) {
    TheoremReport r;
    r.name = std::move(name);
    r.tolerance = tolerance;
    return r;
}

/// Folds several reports of the same check into one.
inline TheoremReport merge_reports(std::string name, const std::vector<TheoremReport>& parts, double tolerance) {
    TheoremReport out = make_report(std::move(name), tolerance);
    for (const TheoremReport& p : parts) {
        for (double v : p.margins) out.add(v);
        out.notes.insert(out.notes.end(), p.notes.begin(), p.notes.end());
    }
    return out;
}

namespace detail {

inline SolverConfig lab_config(int m) {
    SolverConfig cfg;
    cfg.m = m;
    cfg.ls_method = LeastSquaresMethod::qr;
    cfg.keep_iterates = true;
    cfg.divergence_bound = std::numeric_limits<double>::infinity();
    return cfg;
}

}  // namespace detail

/// One AA-R cycle from x0 against GMRES on the perturbed model
/// A (x - x0) = -grad f(x0): checks g_bar(x_G^k) = x^{k+1} for k = 0..m.
inline TheoremReport check_aa_gmres_equivalence(const Objective& obj, const Vector& x0, int m,
                                                double tolerance = 1e-8) {
    TheoremReport rep = make_report("aa_gmres_equivalence", tolerance);
    const FixedPointMap map(obj);
    SolverConfig cfg = detail::lab_config(m);
    cfg.grad_tol = std::numeric_limits<double>::min();
    cfg.oracle_budget = static_cast<std::uint64_t>(m) + 2;
    OracleMeter meter;
    const SolverRun run = run_aa_r(map, x0, cfg, meter);
    const std::vector<Vector>& xs = run.iterates;
    if (xs.size() < 2) {
        rep.skip("cycle degenerate at x0");
        return rep;
    }
    if (xs.size() < static_cast<std::size_t>(m) + 2) rep.skip("cycle truncated at index " + std::to_string(xs.size()));

    // x^0 .. x^mc define the model; x^{mc+1} is the last AA step.
    const std::size_t mc = std::min<std::size_t>(static_cast<std::size_t>(m), xs.size() - 1);
    const std::vector<Vector> cycle(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mc) + 1);
    const PerturbedModel model = build_perturbed_A(obj, cycle);
    if (model.rank_deficient) rep.skip("X rank deficient; pseudo-inverse used");

    const LinearSystem sys{model.A, -obj.gradient(x0), x0};
    const KrylovTrace trace = gmres(sys, static_cast<int>(mc));
    for (std::size_t k = 0; k < trace.iterates.size() && k + 1 < xs.size(); ++k) {
        const Vector gbar = gradient_post_steps(sys, trace.iterates[k], 1, obj.lipschitz);
        const Vector& target = xs[k + 1];
        rep.add((gbar - target).norm() / std::max(1.0, target.norm()));
    }
    return rep;
}

/// Pads a trace sequence with its last entry up to length n.
inline std::vector<Vector> padded(std::vector<Vector> seq, std::size_t n) {
    while (!seq.empty() && seq.size() < n) seq.push_back(seq.back());
    return seq;
}

/// Gap between GMRES on A = B + ||b|| E and CR on B as b = t b_dir shrinks.
/// Records g(t) = max_k ||x_G^k - x_R^k|| / ||b||^2 (also for one and two
/// post gradient steps) and requires the two smallest scales to stay within
/// twice the two largest. Gaps below `floor` (times ||b||^2) count as zero.
inline TheoremReport check_gmres_cr_gap(const DenseMatrix& B, const DenseMatrix& E_direction,
                                        const std::vector<double>& scales, const Vector& b_direction,
                                        double floor = 1e-10) {
    TheoremReport rep = make_report("gmres_cr_gap", 0.0);
    const Eigen::Index n = B.rows();
    if (E_direction.rows() != n || E_direction.cols() != n || b_direction.size() != n) {
        throw InputError("check_gmres_cr_gap: dimension mismatch");
    }
    for (std::size_t i = 1; i < scales.size(); ++i) {
        if (!(scales[i] < scales[i - 1])) throw InputError("check_gmres_cr_gap: scales must be decreasing");
    }
    const double lipschitz_b = max_eigenvalue(B);

    std::vector<double> gaps;
    for (double t : scales) {
        if (!(t > 0.0)) throw InputError("check_gmres_cr_gap: scales must be positive");
        const Vector b = t * b_direction;
        const double bn = b.norm();
        const DenseMatrix A = B + bn * E_direction;
        if (!std::isfinite(condition_number_sq(A))) {
            rep.skip("A singular at scale " + std::to_string(t));
            continue;
        }
        const double L = std::max(lipschitz_b, spectral_norm(A));
        const LinearSystem sa{A, b, Vector::Zero(n)};
        const LinearSystem sb{B, b, Vector::Zero(n)};
        const KrylovTrace tg = gmres(sa, static_cast<int>(n));
        const KrylovTrace tr = cr(sb, static_cast<int>(n));
        const std::size_t len = std::max(tg.iterates.size(), tr.iterates.size());
        const std::vector<Vector> xg = padded(tg.iterates, len);
        const std::vector<Vector> xr = padded(tr.iterates, len);
        double worst = 0.0;
        for (std::size_t k = 0; k < len; ++k) {
            worst = std::max(worst, (xg[k] - xr[k]).norm());
            for (int steps = 1; steps <= 2; ++steps) {
                const Vector pg = gradient_post_steps(sa, xg[k], steps, L);
                const Vector pr = gradient_post_steps(sb, xr[k], steps, L);
                worst = std::max(worst, (pg - pr).norm());
            }
        }
        gaps.push_back(worst / (bn * bn));
    }
    if (gaps.size() < 2) {
        rep.skip("fewer than two usable scales; ratio rule vacuous");
        for (double g : gaps) rep.margins.push_back(g);
        rep.instances_checked = gaps.size();
        return rep;
    }
    const std::size_t q = std::min<std::size_t>(2, gaps.size() / 2);
    const double large = *std::max_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(q));
    const double small = *std::max_element(gaps.end() - static_cast<std::ptrdiff_t>(q), gaps.end());
    rep.add(small - std::max(2.0 * large, floor));
    rep.margins = gaps;
    rep.instances_checked = gaps.size();
    return rep;
}

/// One report per CG identity, with index filtering: only residuals above
/// `active_floor * ||r^0||` take part, since orthogonality is meaningless once
/// the residual is at rounding level.
inline std::vector<TheoremReport> check_cg_identities(const DenseMatrix& B, const Vector& ystar, const Vector& y0,
                                                      double tolerance = 1e-8, double active_floor = 1e-8) {
    const LinearSystem sys{B, B * (ystar - y0), y0};
    const KrylovTrace t = cg(sys, static_cast<int>(B.rows()));
    const auto& r = t.cg.r;
    const auto& p = t.cg.p;
    const auto& a = t.cg.a;

    std::vector<TheoremReport> reps;
    for (const char* id : {"residual_orthogonality", "direction_residual", "direction_norm", "residual_curvature",
                           "direction_inner", "conjugacy", "residual_conjugacy", "step_bounds",
                           "three_term_recurrence"}) {
        reps.push_back(make_report(std::string("cg_") + id, tolerance));
    }
    if (r.empty() || r[0].norm() == 0.0) return reps;

    // Indices i with p^i defined and r^i above the floor.
    std::size_t active = 0;
    while (active < p.size() && r[active].norm() > active_floor * r[0].norm()) ++active;
    auto rel = [](double diff, double scale) { return std::abs(diff) / std::max(scale, 1e-300); };

    std::vector<Vector> Bp(active), Br(active);
    for (std::size_t i = 0; i < active; ++i) {
        Bp[i] = B * p[i];
        Br[i] = B * r[i];
    }
    for (std::size_t i = 0; i < active; ++i) {
        const double ri2 = r[i].squaredNorm();
        for (std::size_t j = 0; j < active; ++j) {
            if (i != j) reps[0].add(rel(r[i].dot(r[j]), r[i].norm() * r[j].norm()));
            const double prj = p[i].dot(r[j]);
            if (i < j) {
                reps[1].add(rel(prj, p[i].norm() * r[j].norm()));
            } else {
                reps[1].add(rel(prj - ri2, std::max(ri2, p[i].norm() * r[j].norm())));
            }
            if (i <= j) {
                const double expect = r[j].squaredNorm() * p[i].squaredNorm() / ri2;
                reps[4].add(rel(p[i].dot(p[j]) - expect, p[i].norm() * p[j].norm()));
            }
            if (i != j) reps[5].add(rel(p[i].dot(Bp[j]), p[i].norm() * Bp[j].norm()));
            if (i != j && i != j + 1) reps[6].add(rel(r[i].dot(Bp[j]), r[i].norm() * Bp[j].norm()));
        }
        double inv_sum = 0.0;
        for (std::size_t j = 0; j <= i; ++j) inv_sum += 1.0 / r[j].squaredNorm();
        reps[2].add(rel(p[i].squaredNorm() - ri2 * ri2 * inv_sum, p[i].squaredNorm()));

        if (i + 1 < active) {
            const double expect = -r[i + 1].squaredNorm() / a[i];
            reps[3].add(rel(r[i + 1].dot(Br[i]) - expect, r[i + 1].norm() * Br[i].norm()));
            reps[3].add(rel(r[i + 1].dot(Bp[i]) - expect, r[i + 1].norm() * Bp[i].norm()));
        }

        const double lower = ri2 / r[i].dot(Br[i]);
        if (i == 0) {
            reps[7].add(rel(a[0] - lower, a[0]));
        } else {
            const double upper = p[i].squaredNorm() / p[i].dot(Bp[i]);
            reps[7].add((lower - a[i]) / a[i]);
            reps[7].add((a[i] - upper) / a[i]);
        }

        if (i >= 1 && i + 1 < r.size()) {
            const double bprime = a[i] / a[i - 1] * ri2 / r[i - 1].squaredNorm();
            const Vector rhs = (1.0 + bprime) * r[i] - a[i] * Br[i] - bprime * r[i - 1];
            const double scale = (1.0 + bprime) * r[i].norm() + a[i] * Br[i].norm() + bprime * r[i - 1].norm();
            reps[8].add((r[i + 1] - rhs).norm() / scale);
        }
    }
    return reps;
}

/// Signed slacks of the two CG distance inequalities, with nu = L / ||B|| >= 1:
///   ||ybar^k - y*||^2 + (2nu + 1/nu^2 - 3)||r^k||^2/L^2 + (nu + 1/nu - 2)^2 ||r^{k-1}||^2/L^2
///       <= ||ytilde^{k-1} - y*||^2           (k >= 1)
///   ||y^{k+1} - y*|| <= ||ybar^k - y*||      (k >= 0)
inline TheoremReport check_cg_descent(const DenseMatrix& B, const Vector& ystar, const Vector& y0, double lipschitz,
                                      double tolerance = 1e-10) {
    TheoremReport rep = make_report("cg_descent", tolerance);
    const double bnorm = max_eigenvalue(B);
    if (lipschitz < bnorm * (1.0 - 1e-12)) throw InputError("check_cg_descent: L must be >= ||B||");
    const double nu = std::max(1.0, lipschitz / bnorm);
    const double c_now = 2.0 * nu + 1.0 / (nu * nu) - 3.0;
    const double c_prev = std::pow(nu + 1.0 / nu - 2.0, 2);
    const double L2 = lipschitz * lipschitz;

    const LinearSystem sys{B, B * (ystar - y0), y0};
    const KrylovTrace t = cg(sys, static_cast<int>(B.rows()));
    const auto& ys = t.iterates;
    const auto& r = t.cg.r;
    for (std::size_t k = 0; k < ys.size(); ++k) {
        const Vector ybar = gradient_post_steps(sys, ys[k], 1, lipschitz);
        const double dbar = (ybar - ystar).squaredNorm();
        if (k >= 1) {
            const Vector ytilde_prev = gradient_post_steps(sys, ys[k - 1], 2, lipschitz);
            const double lhs = dbar + c_now * r[k].squaredNorm() / L2 + c_prev * r[k - 1].squaredNorm() / L2;
            rep.add(lhs - (ytilde_prev - ystar).squaredNorm());
        }
        if (k + 1 < ys.size()) rep.add((ys[k + 1] - ystar).norm() - std::sqrt(dbar));
    }
    return rep;
}

/// phi(x) = 1/2 (x - x0)^T B (x - x0) - b^T (x - x0) along the CR iterates:
/// phi(xbar^k) <= phi(xtilde^{k-1}) and phi(x^k) <= phi(xbar^{k-1}).
inline TheoremReport check_cr_descent(const DenseMatrix& B, const Vector& b, const Vector& x0, double lipschitz,
                                      double tolerance = 1e-12) {
    TheoremReport rep = make_report("cr_descent", tolerance);
    const LinearSystem sys{B, b, x0};
    auto phi = [&](const Vector& x) {
        const Vector d = x - x0;
        return 0.5 * d.dot(B * d) - b.dot(d);
    };
    const KrylovTrace t = cr(sys, static_cast<int>(B.rows()));
    const auto& xs = t.iterates;
    for (std::size_t k = 1; k < xs.size(); ++k) {
        const double bar_k = phi(gradient_post_steps(sys, xs[k], 1, lipschitz));
        const double bar_prev = phi(gradient_post_steps(sys, xs[k - 1], 1, lipschitz));
        const double tilde_prev = phi(gradient_post_steps(sys, xs[k - 1], 2, lipschitz));
        rep.add(bar_k - tilde_prev);
        rep.add(phi(xs[k]) - bar_prev);
    }
    return rep;
}

/// Runs AA-R until ||grad f|| <= rel_tol ||grad f(x0)|| and checks
/// ||h^{k+1}|| / ||h^k|| <= 1 - 1/(2 kappa_r) for every k >= 1.
inline TheoremReport check_q_linear(const Objective& obj, const Vector& x0, int m, double kappa_r,
                                    double rel_tol = 1e-8, double tolerance = 1e-10,
                                    std::uint64_t budget = 100000) {
    if (!(kappa_r >= 1.0)) throw InputError("check_q_linear: kappa_r must be >= 1");
    TheoremReport rep = make_report("q_linear", tolerance);
    const FixedPointMap map(obj);
    const double g0 = obj.gradient(x0).norm();
    if (g0 == 0.0) return rep;
    SolverConfig cfg = detail::lab_config(m);
    cfg.keep_iterates = false;
    cfg.grad_tol = rel_tol * g0;
    cfg.oracle_budget = budget;
    OracleMeter meter;
    const SolverRun run = run_aa_r(map, x0, cfg, meter);
    const double bound = 1.0 - 1.0 / (2.0 * kappa_r);
    // ||h|| = ||grad f|| / L, so the ratio of logged gradient norms is the residual ratio.
    for (std::size_t k = 1; k + 1 < run.records.size(); ++k) {
        rep.add(run.records[k + 1].grad_norm / run.records[k].grad_norm - bound);
    }
    return rep;
}

/// rho_k along an instrumented AA-R run. Passes when the late-half maximum
/// does not exceed the early-half maximum by more than rho_slack and at most
/// `late_nonzero_fraction` of final-quarter AA steps have rho_k > 0.
inline TheoremReport check_descent_theorem(const Objective& obj, const Vector& x0, int m, double grad_tol,
                                           double late_nonzero_fraction = 0.05, double rho_slack = 0.0,
                                           std::uint64_t budget = 100000) {
    TheoremReport rep = make_report("descent_theorem", 0.0);
    const FixedPointMap map(obj);
    SolverConfig cfg = detail::lab_config(m);
    cfg.keep_iterates = false;
    cfg.instrument_rho = true;
    cfg.grad_tol = grad_tol;
    cfg.oracle_budget = budget;
    OracleMeter meter;
    const SolverRun run = run_aa_r(map, x0, cfg, meter);

    const std::size_t n = run.records.size();
    std::vector<double> early, late, final_quarter;
    for (std::size_t k = 0; k < n; ++k) {
        const auto& rec = run.records[k];
        if (!rec.rho) continue;
        (2 * k < n ? early : late).push_back(*rec.rho);
        if (4 * k >= 3 * n) final_quarter.push_back(*rec.rho);
    }
    if (early.empty() && late.empty()) return rep;

    auto max_of = [](const std::vector<double>& v) { return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end()); };
    const double bounded = max_of(late) - max_of(early) - rho_slack;
    double fraction = 0.0;
    if (!final_quarter.empty()) {
        const auto nonzero = std::count_if(final_quarter.begin(), final_quarter.end(), [](double v) { return v > 0.0; });
        fraction = static_cast<double>(nonzero) / static_cast<double>(final_quarter.size());
    }
    rep.instances_checked = early.size() + late.size();
    rep.margins = {bounded, fraction - late_nonzero_fraction};
    rep.max_violation = std::max(bounded, fraction - late_nonzero_fraction);
    rep.pass = rep.max_violation <= rep.tolerance;
    rep.notes.push_back("final-quarter nonzero fraction " + std::to_string(fraction));
    return rep;
}

/// kappa(H^T H) <= 4 kappa_r^2 kappa(X^T X) and the converse, for the
/// anchored differences of the given iterates (anchor = first entry).
inline TheoremReport check_cond_number_equivalence(const Objective& obj, const std::vector<Vector>& cycle,
                                                   double kappa_r, double tolerance = 1e-12) {
    TheoremReport rep = make_report("cond_number_equivalence", tolerance);
    if (cycle.size() < 2) throw InputError("check_cond_number_equivalence: need at least two iterates");
    const FixedPointMap map(obj);
    OracleMeter meter;
    const Eigen::Index n = map.dim();
    const Eigen::Index cols = static_cast<Eigen::Index>(cycle.size()) - 1;
    const MapEval anchor = map.g_and_h(cycle[0], meter);
    DenseMatrix X(n, cols), H(n, cols);
    for (Eigen::Index i = 0; i < cols; ++i) {
        const Vector& xi = cycle[static_cast<std::size_t>(i) + 1];
        X.col(i) = xi - cycle[0];
        H.col(i) = map.g_and_h(xi, meter).h - anchor.h;
    }
    if (X.isZero(0.0) || H.isZero(0.0)) {
        rep.skip("zero difference matrix");
        return rep;
    }
    const double kx = condition_number_sq(X);
    const double kh = condition_number_sq(H);
    if (!std::isfinite(kx) || !std::isfinite(kh)) {
        rep.skip("rank-deficient X or H");
        return rep;
    }
    const double factor = 4.0 * kappa_r * kappa_r;
    rep.add(kh / (factor * kx) - 1.0);
    rep.add(kx / (factor * kh) - 1.0);
    return rep;
}

}  // namespace aar
