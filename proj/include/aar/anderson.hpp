#pragma once

// Anderson mixing for the gradient map: anchored difference history, the
// coefficient least-squares problem, restarted AA (AA-R), sliding-window AA,
// and the plain gradient-descent baseline.

#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <utility>

#include "aar/descent.hpp"
#include "aar/errors.hpp"
#include "aar/fixedpoint.hpp"
#include "aar/linalg.hpp"
#include "aar/run_types.hpp"

namespace aar {

/// History of one AA cycle, stored as differences against the anchor iterate:
/// X = [x^i - x^a], H = [h^i - h^a], G = [g^i - g^a] for the mhat most recent pushes.
class AAState {
public:
    AAState() = default;

    AAState(Vector anchor_x, Vector anchor_g, int capacity)
        : anchor_x_(std::move(anchor_x)), anchor_g_(std::move(anchor_g)), capacity_(capacity) {
        if (capacity < 1) throw InputError("AA state: memory must be >= 1");
        if (anchor_x_.size() != anchor_g_.size()) throw InputError("AA state: anchor dimension mismatch");
        anchor_h_ = anchor_g_ - anchor_x_;
        const Eigen::Index n = anchor_x_.size();
        x_.resize(n, capacity);
        h_.resize(n, capacity);
        g_.resize(n, capacity);
    }

    static AAState anchored_at(const Vector& x, const MapEval& ev, int capacity) {
        AAState s(x, ev.g, capacity);
        s.anchor_grad_norm_ = ev.grad.norm();
        return s;
    }

    void push(const Vector& x_new, const Vector& g_new) {
        if (mhat_ >= capacity_) throw InputError("AA state: memory full, restart before pushing");
        if (x_new.size() != anchor_x_.size() || g_new.size() != anchor_x_.size()) {
            throw InputError("AA state: dimension mismatch on push");
        }
        x_.col(mhat_) = x_new - anchor_x_;
        h_.col(mhat_) = (g_new - x_new) - anchor_h_;
        g_.col(mhat_) = g_new - anchor_g_;
        ++mhat_;
    }

    int mhat() const { return mhat_; }
    int capacity() const { return capacity_; }
    bool full() const { return mhat_ == capacity_; }
    Eigen::Index dim() const { return anchor_x_.size(); }

    const Vector& anchor_x() const { return anchor_x_; }
    const Vector& anchor_g() const { return anchor_g_; }
    const Vector& anchor_h() const { return anchor_h_; }
    /// ||grad f(anchor)||; NaN when the state was built without a gradient.
    double anchor_grad_norm() const { return anchor_grad_norm_; }

    auto X() const { return x_.leftCols(mhat_); }
    auto H() const { return h_.leftCols(mhat_); }
    auto G() const { return g_.leftCols(mhat_); }

private:
    Vector anchor_x_, anchor_g_, anchor_h_;
    DenseMatrix x_, h_, g_;
    int mhat_ = 0;
    int capacity_ = 0;
    double anchor_grad_norm_ = std::numeric_limits<double>::quiet_NaN();
};

inline AAState push_history(AAState state, const Vector& x_new, const Vector& g_new) {
    state.push(x_new, g_new);
    return state;
}

struct AAStepResult {
    Vector alpha;
    Vector x_aa;
    double linearized_residual_norm = 0.0;
    double cond_HtH = 0.0;
    /// H was numerically zero; alpha = 0 and x_aa is the anchor's Picard point.
    bool degenerate = false;
};

/// alpha = argmin ||h^a + H alpha||, x_aa = g^a + G alpha.
inline AAStepResult solve_alpha(const AAState& state, LeastSquaresMethod method = LeastSquaresMethod::qr,
                                double lsqr_tol = 1e-16) {
    if (state.mhat() < 1) throw InputError("solve_alpha: empty history");
    AAStepResult out;
    const DenseMatrix H = state.H();
    const double hnorm = H.norm();
    if (hnorm == 0.0 || hnorm <= kRankTolerance * state.anchor_h().norm()) {
        out.alpha = Vector::Zero(state.mhat());
        out.x_aa = state.anchor_g();
        out.linearized_residual_norm = state.anchor_h().norm();
        out.cond_HtH = std::numeric_limits<double>::infinity();
        out.degenerate = true;
        return out;
    }
    const LeastSquaresSolution ls = solve_least_squares(H, -state.anchor_h(), method, lsqr_tol);
    out.alpha = ls.solution;
    out.x_aa = state.anchor_g() + state.G() * out.alpha;
    out.linearized_residual_norm = ls.residual_norm;
    out.cond_HtH = condition_number_sq(H);
    return out;
}

/// One AA-R iteration from x^k given its (already paid for) map evaluation.
/// `cycle_pos` is mhat = mod(k, m+1) unless a safeguard restart shifted the cycle.
struct AAStepOutcome {
    Vector x_next;
    StepKind kind = StepKind::picard_restart;
    std::optional<AAStepResult> solve;
    /// Cycle position for the next iteration.
    int next_pos = 1;
};

inline AAStepOutcome aa_r_step(AAState& state, const Vector& x_k, const MapEval& ev, int cycle_pos,
                               const SolverConfig& cfg) {
    AAStepOutcome out;
    if (cycle_pos == 0) {
        state = AAState::anchored_at(x_k, ev, cfg.m);
        out.x_next = ev.g;
        out.kind = StepKind::picard_restart;
        out.next_pos = 1;
        return out;
    }
    state.push(x_k, ev.g);
    AAStepResult sol = solve_alpha(state, cfg.ls_method, cfg.lsqr_tol);
    if (cfg.safeguard_cond_bound && !(sol.cond_HtH <= *cfg.safeguard_cond_bound)) {
        // Ill-conditioned history: restart the cycle at x^k.
        state = AAState::anchored_at(x_k, ev, cfg.m);
        out.x_next = ev.g;
        out.kind = StepKind::picard_restart;
        out.next_pos = 1;
        return out;
    }
    out.x_next = sol.x_aa;
    out.kind = StepKind::aa;
    out.solve = std::move(sol);
    out.next_pos = (cycle_pos + 1) % (cfg.m + 1);
    return out;
}

namespace detail {

/// Shared bookkeeping for solvers whose every iterate costs exactly one gradient.
template <class StepFn>
SolverRun run_one_gradient_per_iterate(const FixedPointMap& map, const Vector& x0, const SolverConfig& cfg,
                                       OracleMeter& meter, StepFn&& step) {
    cfg.validate();
    if (x0.size() != map.dim()) throw InputError("solver: x0 has the wrong dimension");
    if (!x0.allFinite()) throw InputError("solver: x0 must be finite");

    SolverRun run;
    Vector x = x0;
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
        rec.f = map.f(x, run.diagnostics);

        const auto stop = detail::stop_reason(rec, cfg, meter);
        Vector x_next = step(k, x, ev, rec, stop.has_value(), run);
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

inline void instrument_rho(const FixedPointMap& map, const Vector& x_aa, const Vector& g_k, double anchor_grad_norm,
                           IterateRecord& rec, SolverRun& run) {
    const double f_aa = map.f(x_aa, run.diagnostics);
    const double f_g = map.f(g_k, run.diagnostics);
    rec.rho = rho_k(f_aa, f_g, anchor_grad_norm);
}

}  // namespace detail

/// Gradient descent with step 1/L (the Picard iteration of g).
inline SolverRun run_gd(const FixedPointMap& map, const Vector& x0, const SolverConfig& cfg, OracleMeter& meter) {
    return detail::run_one_gradient_per_iterate(
        map, x0, cfg, meter, [](std::uint64_t, const Vector&, const MapEval& ev, IterateRecord& rec, bool, SolverRun&) {
            rec.step_kind = StepKind::picard_restart;
            return ev.g;
        });
}

/// AA with restarting: Picard step at mhat = 0, AA step otherwise, history
/// cleared every m+1 iterations.
inline SolverRun run_aa_r(const FixedPointMap& map, const Vector& x0, const SolverConfig& cfg, OracleMeter& meter) {
    AAState state;
    int pos = 0;
    return detail::run_one_gradient_per_iterate(
        map, x0, cfg, meter,
        [&](std::uint64_t, const Vector& x, const MapEval& ev, IterateRecord& rec, bool stopping, SolverRun& run) {
            if (stopping) {
                rec.step_kind = pos == 0 ? StepKind::picard_restart : StepKind::aa;
                return Vector(ev.g);
            }
            AAStepOutcome step = aa_r_step(state, x, ev, pos, cfg);
            rec.step_kind = step.kind;
            if (step.kind == StepKind::aa && cfg.instrument_rho) {
                detail::instrument_rho(map, step.x_next, ev.g, state.anchor_grad_norm(), rec, run);
            }
            pos = step.next_pos;
            return std::move(step.x_next);
        });
}

/// AA without restarting: every step mixes the last min(k, m) differences.
inline SolverRun run_pure_aa(const FixedPointMap& map, const Vector& x0, const SolverConfig& cfg, OracleMeter& meter) {
    struct Entry {
        Vector x;
        MapEval ev;
    };
    std::deque<Entry> window;
    return detail::run_one_gradient_per_iterate(
        map, x0, cfg, meter,
        [&](std::uint64_t, const Vector& x, const MapEval& ev, IterateRecord& rec, bool stopping, SolverRun& run) {
            window.push_back({x, ev});
            while (window.size() > static_cast<std::size_t>(cfg.m) + 1) window.pop_front();
            if (window.size() == 1) {
                rec.step_kind = StepKind::picard_restart;
                return Vector(ev.g);
            }
            if (stopping) {
                rec.step_kind = StepKind::aa;
                return Vector(ev.g);
            }
            AAState state = AAState::anchored_at(window.front().x, window.front().ev, cfg.m);
            for (std::size_t i = 1; i < window.size(); ++i) state.push(window[i].x, window[i].ev.g);
            AAStepResult sol = solve_alpha(state, cfg.ls_method, cfg.lsqr_tol);
            if (cfg.safeguard_cond_bound && !(sol.cond_HtH <= *cfg.safeguard_cond_bound)) {
                window.erase(window.begin(), window.end() - 1);
                rec.step_kind = StepKind::picard_restart;
                return Vector(ev.g);
            }
            rec.step_kind = StepKind::aa;
            if (cfg.instrument_rho) detail::instrument_rho(map, sol.x_aa, ev.g, state.anchor_grad_norm(), rec, run);
            return std::move(sol.x_aa);
        });
}

}  // namespace aar
