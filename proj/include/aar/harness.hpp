#pragma once

// Experiment runner: builds the objective from a RunConfig, draws the shared
// starting point, dispatches to a solver and collects the log. run_grid
// executes many configs on worker threads and keeps the input order.

#include <algorithm>
#include <atomic>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "aar/anderson.hpp"
#include "aar/errors.hpp"
#include "aar/fixedpoint.hpp"
#include "aar/globalized.hpp"
#include "aar/objectives.hpp"
#include "aar/run_types.hpp"

namespace aar {

enum class Problem { quadratic, st, nls };
enum class SolverKind { gd, pure_aa, aa_r, residual_aa, residual_aa_r, globalized_aa_r };

inline std::string_view to_string(Problem p) {
    switch (p) {
        case Problem::quadratic: return "quadratic";
        case Problem::st: return "st";
        case Problem::nls: return "nls";
    }
    return "?";
}

inline Problem parse_problem(std::string_view s) {
    if (s == "quadratic") return Problem::quadratic;
    if (s == "st") return Problem::st;
    if (s == "nls") return Problem::nls;
    throw InputError("unknown problem '" + std::string(s) + "' (expected quadratic, st or nls)");
}

inline std::string_view to_string(SolverKind s) {
    switch (s) {
        case SolverKind::gd: return "gd";
        case SolverKind::pure_aa: return "pure_aa";
        case SolverKind::aa_r: return "aa_r";
        case SolverKind::residual_aa: return "residual_aa";
        case SolverKind::residual_aa_r: return "residual_aa_r";
        case SolverKind::globalized_aa_r: return "globalized_aa_r";
    }
    return "?";
}

inline SolverKind parse_solver(std::string_view s) {
    for (SolverKind k : {SolverKind::gd, SolverKind::pure_aa, SolverKind::aa_r, SolverKind::residual_aa,
                         SolverKind::residual_aa_r, SolverKind::globalized_aa_r}) {
        if (s == to_string(k)) return k;
    }
    throw InputError("unknown solver '" + std::string(s) +
                     "' (expected gd, pure_aa, aa_r, residual_aa, residual_aa_r or globalized_aa_r)");
}

/// Synthetic data (or, for the quadratic, the Hessian) is drawn from
/// `seed`; a CSV path replaces the synthetic set for st/nls.
struct DatasetSpec {
    std::optional<std::string> csv_path;
    Eigen::Index n_samples = 200;
    Eigen::Index dim = 50;
    std::uint64_t seed = 1;
};

/// Unset fields take the defaults computed once L is known.
struct ParamOverrides {
    std::optional<double> gamma, nu, c1, c2, c3;
};

struct RunConfig {
    Problem problem = Problem::nls;
    DatasetSpec dataset;
    SolverKind solver = SolverKind::globalized_aa_r;
    int m = 10;
    ParamOverrides params;
    double grad_tol = 1e-7;
    std::uint64_t oracle_budget = 3000;
    /// Seed of the starting point x0 ~ N(0, I).
    std::uint64_t seed = 0;
    std::optional<double> safeguard_cond_bound;
    double lambda = 1e-2;
    double mu_st = 20.0;
    /// Condition number of the synthetic quadratic's Hessian.
    double kappa = 100.0;
    bool instrument_rho = true;
    LeastSquaresMethod ls_method = LeastSquaresMethod::lsqr;

    void validate() const {
        if (m < 1) throw InputError("config: m must be >= 1");
        if (!(grad_tol > 0.0)) throw InputError("config: grad_tol must be positive");
        if (oracle_budget < 1) throw InputError("config: budget must be >= 1");
        if (dataset.n_samples < 1 || dataset.dim < 1) throw InputError("config: n_samples and dim must be >= 1");
        if (!(lambda >= 0.0)) throw InputError("config: lambda must be nonnegative");
        if (!(mu_st > 0.0)) throw InputError("config: mu_st must be positive");
        if (!(kappa >= 1.0)) throw InputError("config: kappa must be >= 1");
        if (problem == Problem::quadratic && dataset.csv_path) {
            throw InputError("config: the quadratic problem does not read a dataset");
        }
    }
};

struct RunLog {
    RunConfig config;
    std::vector<IterateRecord> rows;
    RunStatus final_status = RunStatus::budget_exhausted;
    /// Smallest f seen in the comparison group (the run itself for run_experiment).
    double f_star_estimate = std::numeric_limits<double>::infinity();
    double lipschitz = 0.0;
    GlobalizationParams params;
    bool params_guaranteed = true;
    /// Set when the run failed before producing a log (grid isolation).
    std::optional<std::string> error;

    double final_grad_norm() const {
        return rows.empty() ? std::numeric_limits<double>::quiet_NaN() : rows.back().grad_norm;
    }
    std::uint64_t total_oracle_calls() const { return rows.empty() ? 0 : rows.back().oracle_calls; }
};

/// B = Q diag(linspace(1, kappa)) Q^T with Q from a seeded Householder QR;
/// kappa = 1 gives the identity exactly.
inline DenseMatrix make_spd(Eigen::Index n, double kappa, std::uint64_t seed) {
    if (n < 1) throw InputError("make_spd: n must be >= 1");
    if (!(kappa >= 1.0)) throw InputError("make_spd: kappa must be >= 1");
    if (kappa == 1.0) return DenseMatrix::Identity(n, n);
    NormalSampler rng(seed);
    const DenseMatrix q = Eigen::HouseholderQR<DenseMatrix>(rng.matrix(n, n)).householderQ();
    const Vector eig = n == 1 ? Vector::Constant(1, 1.0) : Vector(Vector::LinSpaced(n, 1.0, kappa));
    const DenseMatrix b = q * eig.asDiagonal() * q.transpose();
    return 0.5 * (b + b.transpose());
}

/// Objective of a config. The quadratic is 1/2 (x - s)^T B (x - s) with
/// s ~ N(0, I), so f* = 0.
inline Objective build_objective(const RunConfig& cfg) {
    switch (cfg.problem) {
        case Problem::quadratic: {
            const DenseMatrix B = make_spd(cfg.dataset.dim, cfg.kappa, cfg.dataset.seed);
            NormalSampler rng(cfg.dataset.seed + 0x9e3779b97f4a7c15ULL);
            const Vector shift = rng.vector(cfg.dataset.dim);
            return make_quadratic(B, Vector::Zero(cfg.dataset.dim), shift);
        }
        case Problem::st:
        case Problem::nls: {
            const Dataset data = cfg.dataset.csv_path
                                     ? load_csv(*cfg.dataset.csv_path)
                                     : synth_dataset(cfg.dataset.n_samples, cfg.dataset.dim, cfg.dataset.seed);
            return cfg.problem == Problem::st ? make_student_t(data, cfg.mu_st, cfg.lambda) : make_nls(data, cfg.lambda);
        }
    }
    throw InputError("unknown problem");
}

inline GlobalizationParams resolve_params(const RunConfig& cfg, double lipschitz) {
    GlobalizationParams p = GlobalizationParams::defaults(lipschitz, cfg.m);
    if (cfg.params.gamma) p.gamma = *cfg.params.gamma;
    if (cfg.params.nu) p.nu = *cfg.params.nu;
    if (cfg.params.c1) p.c1 = *cfg.params.c1;
    if (cfg.params.c2) p.c2 = *cfg.params.c2;
    if (cfg.params.c3) p.c3 = *cfg.params.c3;
    if (!(p.gamma >= 0.0) || !(p.c1 >= 0.0) || !(p.c2 >= 0.0) || !(p.c3 >= 0.0) || !std::isfinite(p.nu)) {
        throw InputError("config: gamma, c1, c2, c3 must be nonnegative and nu finite");
    }
    return p;
}

inline SolverRun dispatch(SolverKind kind, const FixedPointMap& map, const Vector& x0, const SolverConfig& sc,
                          OracleMeter& meter) {
    switch (kind) {
        case SolverKind::gd: return run_gd(map, x0, sc, meter);
        case SolverKind::pure_aa: return run_pure_aa(map, x0, sc, meter);
        case SolverKind::aa_r: return run_aa_r(map, x0, sc, meter);
        case SolverKind::residual_aa:
        case SolverKind::residual_aa_r: {
            SolverConfig rc = sc;
            rc.residual.restart = kind == SolverKind::residual_aa_r;
            return run_residual_globalized_aa(map, x0, rc, meter);
        }
        case SolverKind::globalized_aa_r: return run_globalized_aa_r(map, x0, sc, meter);
    }
    throw InputError("unknown solver");
}

/// Runs one configuration. Identical configs give identical logs.
inline RunLog run_experiment(const RunConfig& cfg) {
    cfg.validate();
    const Objective obj = build_objective(cfg);
    const FixedPointMap map(obj);

    RunLog log;
    log.config = cfg;
    log.lipschitz = obj.lipschitz;
    log.params = resolve_params(cfg, obj.lipschitz);
    log.params_guaranteed = log.params.convergence_guaranteed(obj.lipschitz, cfg.m);

    SolverConfig sc;
    sc.m = cfg.m;
    sc.grad_tol = cfg.grad_tol;
    sc.oracle_budget = cfg.oracle_budget;
    sc.ls_method = cfg.ls_method;
    sc.safeguard_cond_bound = cfg.safeguard_cond_bound;
    sc.instrument_rho = cfg.instrument_rho;
    sc.globalization = log.params;

    NormalSampler rng(cfg.seed);
    const Vector x0 = rng.vector(obj.dim);
    OracleMeter meter;
    SolverRun run = dispatch(cfg.solver, map, x0, sc, meter);
    log.rows = std::move(run.records);
    log.final_status = run.status;
    for (const auto& r : log.rows) log.f_star_estimate = std::min(log.f_star_estimate, r.f);
    return log;
}

namespace detail {

// Runs that share problem, data and starting point form one comparison group.
inline auto group_key(const RunConfig& c) {
    return std::make_tuple(static_cast<int>(c.problem), c.dataset.csv_path.value_or(""), c.dataset.n_samples,
                           c.dataset.dim, c.dataset.seed, c.seed, c.lambda, c.mu_st, c.kappa);
}

}  // namespace detail

/// Executes the configs on up to `parallelism` threads. Output order matches
/// input order; a failing run is reported in its own slot. f_star_estimate is
/// the minimum f over each comparison group.
inline std::vector<RunLog> run_grid(const std::vector<RunConfig>& configs, unsigned parallelism = 1) {
    if (configs.empty()) throw InputError("run_grid: empty grid");
    if (parallelism == 0) throw InputError("run_grid: parallelism must be >= 1");

    std::vector<RunLog> logs(configs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < configs.size(); i = next++) {
            try {
                logs[i] = run_experiment(configs[i]);
            } catch (const std::exception& e) {
                logs[i] = RunLog{};
                logs[i].config = configs[i];
                logs[i].error = e.what();
            }
        }
    };
    const unsigned threads = std::min<unsigned>(parallelism, static_cast<unsigned>(configs.size()));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    std::map<decltype(detail::group_key(configs[0])), double> best;
    for (const RunLog& log : logs) {
        if (log.error) continue;
        auto [it, inserted] = best.try_emplace(detail::group_key(log.config), log.f_star_estimate);
        if (!inserted) it->second = std::min(it->second, log.f_star_estimate);
    }
    for (RunLog& log : logs) {
        if (!log.error) log.f_star_estimate = best.at(detail::group_key(log.config));
    }
    return logs;
}

}  // namespace aar
