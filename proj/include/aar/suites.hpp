#pragma once

// Randomized batteries over the theorem checks. Each entry of the returned
// vector is one merged report; the CLI prints them as JSON and the
// acceptance binary turns them into PASS/FAIL lines.

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "aar/harness.hpp"
#include "aar/theorem_lab.hpp"

namespace aar {

namespace detail {

inline Vector gradient_walk(const Objective& obj, Vector x, int steps) {
    for (int i = 0; i < steps; ++i) x -= obj.gradient(x) / obj.lipschitz;
    return x;
}

// Final point of an AA-R run stopped at ||grad f|| <= tol.
inline Vector warm_start(const Objective& obj, const Vector& x0, double tol) {
    SolverConfig cfg = lab_config(5);
    cfg.keep_iterates = false;
    cfg.grad_tol = tol;
    cfg.oracle_budget = 100000;
    OracleMeter meter;
    return run_aa_r(FixedPointMap(obj), x0, cfg, meter).x_final;
}

}  // namespace detail

inline TheoremReport suite_equivalence_quadratic(std::uint64_t seed) {
    std::vector<TheoremReport> parts;
    for (std::uint64_t i = 0; i < 10; ++i) {
        NormalSampler rng(seed * 1000 + i);
        const Objective obj = make_quadratic(make_spd(8, 20.0, seed * 1000 + i), rng.vector(8), rng.vector(8));
        parts.push_back(check_aa_gmres_equivalence(obj, rng.vector(8), 8, 1e-8));
    }
    return merge_reports("aa_gmres_equivalence_quadratic", parts, 1e-8);
}

inline TheoremReport suite_equivalence_student_t(std::uint64_t seed) {
    std::vector<TheoremReport> parts;
    for (std::uint64_t i = 0; i < 5; ++i) {
        const Objective obj = make_student_t(synth_dataset(50, 10, seed * 1000 + i));
        NormalSampler rng(seed * 1000 + i + 500);
        const Vector x0 = detail::gradient_walk(obj, 0.1 * rng.vector(10), 100);
        parts.push_back(check_aa_gmres_equivalence(obj, x0, 5, 1e-6));
    }
    return merge_reports("aa_gmres_equivalence_student_t", parts, 1e-6);
}

/// Iterate-by-iterate agreement of GMRES and CR on SPD systems.
inline TheoremReport suite_gmres_cr_equality(std::uint64_t seed) {
    TheoremReport rep = make_report("gmres_cr_equality", 1e-9);
    for (std::uint64_t i = 0; i < 20; ++i) {
        NormalSampler rng(seed * 1000 + i);
        const LinearSystem sys{make_spd(6, 10.0, seed * 1000 + i), rng.vector(6), rng.vector(6)};
        const KrylovTrace g = gmres(sys, 6);
        const KrylovTrace c = cr(sys, 6);
        const std::size_t len = std::max(g.iterates.size(), c.iterates.size());
        const auto xg = padded(g.iterates, len);
        const auto xc = padded(c.iterates, len);
        double worst = 0.0;
        for (std::size_t k = 0; k < len; ++k) worst = std::max(worst, (xg[k] - xc[k]).norm());
        rep.add(worst);
    }
    return rep;
}

inline TheoremReport suite_gmres_cr_gap(std::uint64_t seed) {
    std::vector<TheoremReport> parts;
    for (std::uint64_t i = 0; i < 10; ++i) {
        NormalSampler rng(seed * 1000 + i);
        const DenseMatrix B = make_spd(6, 10.0, seed * 1000 + i);
        DenseMatrix E = rng.matrix(6, 6);
        E /= spectral_norm(E);
        parts.push_back(check_gmres_cr_gap(B, E, {1e-1, 1e-2, 1e-3, 1e-4}, rng.vector(6)));
    }
    TheoremReport out = make_report("gmres_cr_gap", 0.0);
    for (const TheoremReport& p : parts) {
        if (p.instances_checked >= 2 && !p.margins.empty()) out.add(p.max_violation);
        out.notes.insert(out.notes.end(), p.notes.begin(), p.notes.end());
    }
    return out;
}

inline std::vector<TheoremReport> suite_cg_identities(std::uint64_t seed) {
    std::vector<std::vector<TheoremReport>> per_id(9);
    for (std::uint64_t i = 0; i < 20; ++i) {
        NormalSampler rng(seed * 1000 + i);
        const DenseMatrix B = make_spd(8, 50.0, seed * 1000 + i);
        const Vector ystar = rng.vector(8);
        const Vector y0 = rng.vector(8);
        const auto reps = check_cg_identities(B, ystar, y0, 1e-8);
        for (std::size_t j = 0; j < reps.size(); ++j) per_id[j].push_back(reps[j]);
    }
    std::vector<TheoremReport> out;
    for (auto& parts : per_id) out.push_back(merge_reports(parts.front().name, parts, 1e-8));
    return out;
}

inline TheoremReport suite_cg_descent(std::uint64_t seed) {
    std::vector<TheoremReport> parts;
    for (std::uint64_t i = 0; i < 20; ++i) {
        NormalSampler rng(seed * 1000 + i);
        const DenseMatrix B = make_spd(8, 20.0, seed * 1000 + i);
        const Vector ystar = rng.vector(8);
        const Vector y0 = rng.vector(8);
        const double nb = max_eigenvalue(B);
        for (double ratio : {1.0, 1.5, 3.0}) parts.push_back(check_cg_descent(B, ystar, y0, ratio * nb, 1e-10));
    }
    return merge_reports("cg_descent", parts, 1e-10);
}

inline TheoremReport suite_cr_descent(std::uint64_t seed) {
    std::vector<TheoremReport> parts;
    for (std::uint64_t i = 0; i < 20; ++i) {
        NormalSampler rng(seed * 1000 + i);
        const DenseMatrix B = make_spd(8, 20.0, seed * 1000 + i);
        const Vector b = rng.vector(8);
        const Vector x0 = rng.vector(8);
        parts.push_back(check_cr_descent(B, b, x0, max_eigenvalue(B), 1e-12));
    }
    return merge_reports("cr_descent", parts, 1e-12);
}

/// Diagonal SPD quadratics with spectrum spread over [1, kappa].
inline TheoremReport suite_q_linear(std::uint64_t seed) {
    std::vector<TheoremReport> parts;
    for (double kappa : {5.0, 50.0}) {
        for (std::uint64_t i = 0; i < 5; ++i) {
            NormalSampler rng(seed * 1000 + i);
            Vector diag = Vector::LinSpaced(20, 1.0, kappa);
            std::shuffle(diag.begin(), diag.end(), std::mt19937_64(seed * 1000 + i));
            const Objective obj = make_quadratic(diag.asDiagonal(), rng.vector(20), Vector::Zero(20));
            parts.push_back(check_q_linear(obj, rng.vector(20), 5, kappa));
        }
    }
    return merge_reports("q_linear", parts, 1e-10);
}

/// Every rho_k of AA-R runs on quadratics, each as its own margin.
inline TheoremReport suite_descent_quadratic(std::uint64_t seed) {
    TheoremReport rep = make_report("descent_theorem_quadratic", 0.0);
    for (std::uint64_t i = 0; i < 5; ++i) {
        NormalSampler rng(seed * 1000 + i);
        const Objective obj = make_quadratic(make_spd(20, 50.0, seed * 1000 + i), Vector::Zero(20), rng.vector(20));
        SolverConfig cfg = detail::lab_config(5);
        cfg.keep_iterates = false;
        cfg.instrument_rho = true;
        cfg.grad_tol = 1e-6;
        cfg.oracle_budget = 100000;
        OracleMeter meter;
        const SolverRun run = run_aa_r(FixedPointMap(obj), rng.vector(20), cfg, meter);
        for (const IterateRecord& r : run.records) {
            if (r.rho) rep.add(*r.rho);
        }
    }
    return rep;
}

/// At most 5% of final-quarter AA steps may have rho_k > 0 on ST/NLS runs
/// started near a minimizer.
inline TheoremReport suite_descent_nonlinear(std::uint64_t seed) {
    std::vector<TheoremReport> parts;
    for (int m : {5, 10}) {
        for (std::uint64_t i = 0; i < 2; ++i) {
            const Dataset data = synth_dataset(100, 20, seed * 1000 + i);
            for (const Objective& obj : {make_student_t(data), make_nls(data)}) {
                const Vector x0 = detail::warm_start(obj, Vector::Zero(20), 1e-3);
                parts.push_back(check_descent_theorem(obj, x0, m, 1e-9));
            }
        }
    }
    return merge_reports("descent_theorem_nonlinear", parts, 0.0);
}

inline std::vector<TheoremReport> run_theorem_suite(std::uint64_t seed = 0) {
    std::vector<TheoremReport> out{suite_equivalence_quadratic(seed), suite_equivalence_student_t(seed),
                                   suite_gmres_cr_equality(seed), suite_gmres_cr_gap(seed)};
    for (TheoremReport& r : suite_cg_identities(seed)) out.push_back(std::move(r));
    out.push_back(suite_cg_descent(seed));
    out.push_back(suite_cr_descent(seed));
    out.push_back(suite_q_linear(seed));
    out.push_back(suite_descent_quadratic(seed));
    out.push_back(suite_descent_nonlinear(seed));
    return out;
}

}  // namespace aar
