#pragma once

// Globalized AA-R. The function-value variant accepts the AA candidate only
// under a sufficient-decrease test and otherwise takes the gradient step; the
// residual variant compares ||h|| against a window of recent residuals.

#include <algorithm>
#include <deque>
#include <optional>

#include "aar/anderson.hpp"
#include "aar/descent.hpp"
#include "aar/run_types.hpp"

namespace aar {

/// Function-value globalized AA with restarting.
///
/// Oracle accounting per iteration: one gradient at x^k; on AA iterations one f
/// call for the candidate plus one for f(x^k) unless x^k is an accepted candidate
/// whose value is already known. Rejected candidates never enter the history.
inline SolverRun run_globalized_aa_r(const FixedPointMap& map, const Vector& x0, const SolverConfig& cfg,
                                     OracleMeter& meter) {
    cfg.validate();
    if (x0.size() != map.dim()) throw InputError("solver: x0 has the wrong dimension");
    if (!x0.allFinite()) throw InputError("solver: x0 must be finite");

    const GlobalizationParams& params = cfg.globalization;
    SolverRun run;
    AAState state;
    int pos = 0;
    Vector x = x0;
    std::optional<double> f_known;  // f(x^k), already charged

    for (std::uint64_t k = 0;; ++k) {
        if (detail::out_of_bounds(x, cfg)) {
            run.status = RunStatus::diverged;
            break;
        }
        MapEval ev;
        try {
            ev = map.g_and_h(x, meter);
        } catch (const NumericalError&) {
            run.status = RunStatus::diverged;
            break;
        }
        if (cfg.keep_iterates) run.iterates.push_back(x);
        IterateRecord rec = detail::open_record(k, meter, ev);

        const auto stop = detail::stop_reason(rec, cfg, meter);
        Vector x_next;
        std::optional<double> f_next;
        if (stop) {
            rec.step_kind = pos == 0 ? StepKind::picard_restart : StepKind::aa;
        } else {
            AAStepOutcome step = aa_r_step(state, x, ev, pos, cfg);
            pos = step.next_pos;
            if (step.kind != StepKind::aa) {
                rec.step_kind = step.kind;
                x_next = std::move(step.x_next);
            } else {
                if (!f_known) f_known = map.f(x, meter);
                const Vector& x_aa = step.x_next;
                const double f_aa = x_aa.allFinite() ? map.f(x_aa, meter) : std::numeric_limits<double>::infinity();
                const bool accept =
                    std::isfinite(f_aa) &&
                    descent_test(f_aa, *f_known, ev.grad.squaredNorm(), state.anchor_grad_norm(), params);
                if (cfg.instrument_rho) {
                    rec.rho = rho_k(f_aa, map.f(ev.g, run.diagnostics), state.anchor_grad_norm());
                }
                rec.accepted = accept;
                if (accept) {
                    rec.step_kind = StepKind::aa;
                    x_next = x_aa;
                    f_next = f_aa;
                } else {
                    rec.step_kind = StepKind::picard_fallback;
                    x_next = ev.g;
                }
            }
        }
        rec.f = f_known ? *f_known : map.f(x, run.diagnostics);
        run.records.push_back(rec);
        if (stop) {
            run.status = *stop;
            break;
        }
        x = std::move(x_next);
        f_known = f_next;
    }
    run.x_final = x;
    return run;
}

/// Residual-decrease globalized AA: accept x_aa iff ||h(x_aa)|| <= eta * max of
/// the last `window` realized residual norms. The gradient paid for at an
/// accepted candidate is reused at the next iterate.
inline SolverRun run_residual_globalized_aa(const FixedPointMap& map, const Vector& x0, const SolverConfig& cfg,
                                            OracleMeter& meter) {
    cfg.validate();
    if (x0.size() != map.dim()) throw InputError("solver: x0 has the wrong dimension");
    if (!x0.allFinite()) throw InputError("solver: x0 must be finite");

    const ResidualParams& rp = cfg.residual;
    const std::size_t window_len = static_cast<std::size_t>(rp.window > 0 ? rp.window : cfg.m);

    struct Entry {
        Vector x;
        MapEval ev;
    };
    SolverRun run;
    AAState state;
    int pos = 0;
    std::deque<Entry> history;      // sliding window (no-restart mode)
    std::deque<double> recent_h;    // realized ||h||
    Vector x = x0;
    std::optional<MapEval> cached;  // evaluation of an accepted candidate

    for (std::uint64_t k = 0;; ++k) {
        if (detail::out_of_bounds(x, cfg)) {
            run.status = RunStatus::diverged;
            break;
        }
        MapEval ev;
        if (cached) {
            ev = std::move(*cached);
            cached.reset();
        } else {
            try {
                ev = map.g_and_h(x, meter);
            } catch (const NumericalError&) {
                run.status = RunStatus::diverged;
                break;
            }
        }
        if (cfg.keep_iterates) run.iterates.push_back(x);
        IterateRecord rec = detail::open_record(k, meter, ev);
        rec.f = map.f(x, run.diagnostics);
        recent_h.push_back(ev.h.norm());
        while (recent_h.size() > window_len) recent_h.pop_front();

        const auto stop = detail::stop_reason(rec, cfg, meter);

        // Candidate construction, shared by both modes.
        std::optional<Vector> candidate;
        double anchor_norm = 0.0;
        if (rp.restart) {
            if (stop) {
                rec.step_kind = pos == 0 ? StepKind::picard_restart : StepKind::aa;
            } else {
                AAStepOutcome step = aa_r_step(state, x, ev, pos, cfg);
                pos = step.next_pos;
                rec.step_kind = step.kind;
                if (step.kind == StepKind::aa) {
                    candidate = std::move(step.x_next);
                    anchor_norm = state.anchor_grad_norm();
                }
            }
        } else {
            history.push_back({x, ev});
            while (history.size() > static_cast<std::size_t>(cfg.m) + 1) history.pop_front();
            rec.step_kind = history.size() == 1 ? StepKind::picard_restart : StepKind::aa;
            if (!stop && history.size() > 1) {
                AAState window_state = AAState::anchored_at(history.front().x, history.front().ev, cfg.m);
                for (std::size_t i = 1; i < history.size(); ++i) window_state.push(history[i].x, history[i].ev.g);
                AAStepResult sol = solve_alpha(window_state, cfg.ls_method, cfg.lsqr_tol);
                if (cfg.safeguard_cond_bound && !(sol.cond_HtH <= *cfg.safeguard_cond_bound)) {
                    history.erase(history.begin(), history.end() - 1);
                    rec.step_kind = StepKind::picard_restart;
                } else {
                    candidate = std::move(sol.x_aa);
                    anchor_norm = window_state.anchor_grad_norm();
                }
            }
        }

        Vector x_next = ev.g;
        if (candidate) {
            bool accept = false;
            if (candidate->allFinite()) {
                try {
                    MapEval cand_ev = map.g_and_h(*candidate, meter);
                    const double threshold = rp.eta * *std::max_element(recent_h.begin(), recent_h.end());
                    accept = cand_ev.h.norm() <= threshold;
                    if (accept) cached = std::move(cand_ev);
                } catch (const NumericalError&) {
                    accept = false;
                }
            }
            if (cfg.instrument_rho) {
                rec.rho = rho_k(map.f(*candidate, run.diagnostics), map.f(ev.g, run.diagnostics), anchor_norm);
            }
            rec.accepted = accept;
            if (accept) {
                x_next = std::move(*candidate);
            } else {
                rec.step_kind = StepKind::picard_fallback;
            }
        }
        run.records.push_back(rec);
        if (stop) {
            run.status = *stop;
            break;
        }
        x = std::move(x_next);
    }
    run.x_final = x;
    return run;
}

}  // namespace aar
