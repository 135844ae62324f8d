#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aar/errors.hpp"
#include "aar/fixedpoint.hpp"
#include "aar/linalg.hpp"

namespace aar {

/// What the iteration did from the logged iterate.
enum class StepKind { picard_restart, picard_fallback, aa };

inline std::string_view to_string(StepKind kind) {
    switch (kind) {
        case StepKind::picard_restart: return "picard_restart";
        case StepKind::picard_fallback: return "picard_fallback";
        case StepKind::aa: return "aa";
    }
    return "?";
}

inline StepKind parse_step_kind(std::string_view s) {
    if (s == "picard_restart") return StepKind::picard_restart;
    if (s == "picard_fallback") return StepKind::picard_fallback;
    if (s == "aa") return StepKind::aa;
    throw InputError("unknown step kind '" + std::string(s) + "'");
}

enum class RunStatus { converged, budget_exhausted, diverged };

inline std::string_view to_string(RunStatus status) {
    switch (status) {
        case RunStatus::converged: return "converged";
        case RunStatus::budget_exhausted: return "budget_exhausted";
        case RunStatus::diverged: return "diverged";
    }
    return "?";
}

/// One row per iterate x^k. `oracle_calls` is the meter total right after the
/// gradient at x^k was paid for. The step fields describe the move x^k -> x^{k+1};
/// on the terminal row they hold the step that was scheduled but not taken.
struct IterateRecord {
    std::uint64_t k = 0;
    std::uint64_t oracle_calls = 0;
    std::uint64_t grad_calls = 0;
    std::uint64_t f_calls = 0;
    double f = 0.0;
    double grad_norm = 0.0;
    StepKind step_kind = StepKind::picard_restart;
    bool accepted = true;
    std::optional<double> rho;
};

/// Sufficient-decrease test parameters of the globalized scheme.
struct GlobalizationParams {
    double gamma = 0.0;
    double nu = 2.1;
    double c1 = 1.0;
    double c2 = 0.0;
    double c3 = 1.0;

    /// gamma = 0.01/(2L), c1 = c3 = 1, c2 = 0.99/(2 m L), nu = 2.1.
    static GlobalizationParams defaults(double lipschitz, int m) {
        GlobalizationParams p;
        p.gamma = 0.01 / (2.0 * lipschitz);
        p.c1 = 1.0;
        p.c3 = 1.0;
        p.c2 = 0.99 / (2.0 * m * lipschitz);
        p.nu = 2.1;
        return p;
    }

    /// Strict acceptance: gamma = 1/(2L), c1 = c2 = c3 = 0.
    static GlobalizationParams strict_extreme(double lipschitz) {
        GlobalizationParams p;
        p.gamma = 1.0 / (2.0 * lipschitz);
        p.c1 = p.c2 = p.c3 = 0.0;
        return p;
    }

    /// Loose acceptance: gamma = 0, c1 = c3 = 1e10, c2 = 1/(2 m L).
    static GlobalizationParams loose_extreme(double lipschitz, int m) {
        GlobalizationParams p;
        p.gamma = 0.0;
        p.c1 = p.c3 = 1e10;
        p.c2 = 1.0 / (2.0 * m * lipschitz);
        return p;
    }

    /// Whether the parameters lie in the range that guarantees global convergence.
    bool convergence_guaranteed(double lipschitz, int m) const {
        return gamma > 0.0 && gamma < 1.0 / (2.0 * lipschitz) && c1 > 0.0 && c3 > 0.0 && c2 >= 0.0 &&
               c2 < 1.0 / (2.0 * m * lipschitz) && nu > 2.0 && nu < 3.0;
    }
};

/// Residual-decrease acceptance test.
struct ResidualParams {
    double eta = 1.0 - 1e-6;
    /// Window of recent accepted residual norms; 0 means "use m".
    int window = 0;
    bool restart = true;
};

struct SolverConfig {
    int m = 5;
    double grad_tol = 1e-7;
    std::uint64_t oracle_budget = 3000;
    LeastSquaresMethod ls_method = LeastSquaresMethod::lsqr;
    double lsqr_tol = 1e-16;
    /// Restart the AA-R cycle when kappa(H^T H) exceeds this bound.
    std::optional<double> safeguard_cond_bound;
    /// Evaluate rho_k on AA steps; the extra f calls go to the diagnostic meter.
    bool instrument_rho = false;
    double divergence_bound = 1e12;
    bool keep_iterates = false;
    GlobalizationParams globalization;
    ResidualParams residual;

    void validate() const {
        if (m < 1) throw InputError("solver config: m must be >= 1");
        if (!(grad_tol > 0.0)) throw InputError("solver config: grad_tol must be positive");
        if (safeguard_cond_bound && !(*safeguard_cond_bound >= 1.0)) {
            throw InputError("solver config: safeguard bound must be >= 1");
        }
    }
};

struct SolverRun {
    std::vector<IterateRecord> records;
    RunStatus status = RunStatus::budget_exhausted;
    Vector x_final;
    /// Realized iterates x^0, x^1, ... when SolverConfig::keep_iterates is set.
    std::vector<Vector> iterates;
    /// Evaluations made only for logging and rho_k; not part of the protocol count.
    OracleMeter diagnostics;
};

namespace detail {

inline bool out_of_bounds(const Vector& x, const SolverConfig& cfg) {
    return !x.allFinite() || x.norm() > cfg.divergence_bound;
}

inline IterateRecord open_record(std::uint64_t k, const OracleMeter& meter, const MapEval& ev) {
    IterateRecord rec;
    rec.k = k;
    rec.oracle_calls = meter.total();
    rec.grad_calls = meter.grad_calls();
    rec.f_calls = meter.f_calls();
    rec.grad_norm = ev.grad.norm();
    return rec;
}

/// Applies the stopping rule to a freshly opened record.
inline std::optional<RunStatus> stop_reason(const IterateRecord& rec, const SolverConfig& cfg,
                                            const OracleMeter& meter) {
    if (rec.grad_norm <= cfg.grad_tol) return RunStatus::converged;
    if (meter.total() >= cfg.oracle_budget) return RunStatus::budget_exhausted;
    return std::nullopt;
}

}  // namespace detail

}  // namespace aar
