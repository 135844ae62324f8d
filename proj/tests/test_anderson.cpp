#include <deque>

#include <gtest/gtest.h>

#include "aar/anderson.hpp"
#include "oracles.hpp"

using aar::AAState;
using aar::DenseMatrix;
using aar::FixedPointMap;
using aar::MapEval;
using aar::OracleMeter;
using aar::SolverConfig;
using aar::StepKind;
using aar::Vector;

namespace {

MapEval eval_from(const Vector& x, const Vector& g) {
    MapEval ev;
    ev.g = g;
    ev.h = g - x;
    ev.grad = -ev.h;
    return ev;
}

aar::Objective scalar_objective(std::function<double(double)> f, std::function<double(double)> df, double L) {
    aar::Objective obj;
    obj.dim = 1;
    obj.lipschitz = L;
    obj.value = [f](const Vector& x) { return f(x(0)); };
    obj.gradient = [df](const Vector& x) { return Vector::Constant(1, df(x(0))); };
    return obj;
}

SolverConfig config(int m, double tol = 1e-10, std::uint64_t budget = 10000) {
    SolverConfig c;
    c.m = m;
    c.grad_tol = tol;
    c.oracle_budget = budget;
    c.keep_iterates = true;
    return c;
}

// Straightforward AA over raw iterates: anchor = oldest of the last w+1 points,
// alpha from the normal equations.
std::vector<Vector> naive_aa(const aar::Objective& obj, const Vector& x0, int m, int steps, bool restart) {
    const double step = 1.0 / obj.lipschitz;
    std::vector<Vector> xs{x0}, gs;
    std::deque<std::size_t> window;
    for (int k = 0; k < steps; ++k) {
        const Vector& x = xs.back();
        gs.push_back(x - step * obj.gradient(x));
        const int mhat = restart ? k % (m + 1) : std::min(k, m);
        if (restart && mhat == 0) window.clear();
        window.push_back(static_cast<std::size_t>(k));
        while (static_cast<int>(window.size()) > mhat + 1) window.pop_front();
        if (mhat == 0) {
            xs.push_back(gs.back());
            continue;
        }
        const std::size_t a = window.front();
        const Vector ha = gs[a] - xs[a];
        DenseMatrix H(x0.size(), mhat), G(x0.size(), mhat);
        for (int i = 0; i < mhat; ++i) {
            const std::size_t j = window[static_cast<std::size_t>(i) + 1];
            H.col(i) = (gs[j] - xs[j]) - ha;
            G.col(i) = gs[j] - gs[a];
        }
        const Vector alpha = -(H.transpose() * H).partialPivLu().solve(H.transpose() * ha);
        xs.push_back(gs[a] + G * alpha);
    }
    return xs;
}

}  // namespace

TEST(AAState, PushBuildsAnchoredDifferences) {
    const Vector x0 = Eigen::Vector3d(1, 2, 3), g0 = Eigen::Vector3d(0, 1, 1);
    AAState s(x0, g0, 3);
    EXPECT_EQ(s.mhat(), 0);
    const Vector x1 = Eigen::Vector3d(2, 2, 2), g1 = Eigen::Vector3d(1, 0, 5);
    const Vector x2 = Eigen::Vector3d(-1, 0, 4), g2 = Eigen::Vector3d(3, 3, 3);
    s = aar::push_history(s, x1, g1);
    EXPECT_EQ(s.mhat(), 1);
    EXPECT_EQ(DenseMatrix(s.X()), DenseMatrix(x1 - x0));
    s.push(x2, g2);
    EXPECT_EQ(s.mhat(), 2);
    EXPECT_EQ(Vector(s.X().col(1)), x2 - x0);
    EXPECT_EQ(Vector(s.G().col(0)), g1 - g0);
    EXPECT_EQ(Vector(s.H().col(1)), (g2 - x2) - (g0 - x0));
}

TEST(AAState, DifferenceIdentityAfterEveryPush) {
    oracle::Rng rng(3);
    AAState s(rng.vec(5), rng.vec(5), 4);
    for (int i = 0; i < 4; ++i) {
        s.push(rng.vec(5), rng.vec(5));
        EXPECT_LE((DenseMatrix(s.G()) - DenseMatrix(s.X()) - DenseMatrix(s.H())).cwiseAbs().maxCoeff(), 1e-14);
    }
    EXPECT_TRUE(s.full());
    EXPECT_THROW(s.push(rng.vec(5), rng.vec(5)), aar::InputError);
    EXPECT_THROW(AAState(rng.vec(5), rng.vec(5), 0), aar::InputError);
}

TEST(SolveAlpha, ExactZeroResidual) {
    const Vector x0 = Vector::Zero(2);
    AAState s = AAState::anchored_at(x0, eval_from(x0, Eigen::Vector2d(1, 0)), 2);
    const Vector x1 = Eigen::Vector2d(0.5, 0.0);
    s.push(x1, x1);  // h^1 = 0, so H = (-1, 0)
    const auto r = aar::solve_alpha(s);
    EXPECT_NEAR(r.alpha(0), 1.0, 1e-15);
    EXPECT_NEAR(r.linearized_residual_norm, 0.0, 1e-15);
}

TEST(SolveAlpha, ZeroAnchorResidual) {
    const Vector x0 = Eigen::Vector2d(1, 1);
    AAState s = AAState::anchored_at(x0, eval_from(x0, x0), 2);
    s.push(Eigen::Vector2d(2, 0), Eigen::Vector2d(1, 1));
    for (auto method : {aar::LeastSquaresMethod::qr, aar::LeastSquaresMethod::lsqr}) {
        const auto r = aar::solve_alpha(s, method);
        EXPECT_EQ(r.alpha, Vector::Zero(1));
        EXPECT_EQ(r.x_aa, x0);
    }
}

TEST(SolveAlpha, DegenerateHistory) {
    const Vector x0 = Eigen::Vector2d(1, 1), g0 = Eigen::Vector2d(0, 1);
    AAState s = AAState::anchored_at(x0, eval_from(x0, g0), 2);
    s.push(Eigen::Vector2d(3, 1), Eigen::Vector2d(2, 1));  // same residual as the anchor
    const auto r = aar::solve_alpha(s);
    EXPECT_TRUE(r.degenerate);
    EXPECT_EQ(r.x_aa, g0);
    EXPECT_THROW(aar::solve_alpha(AAState::anchored_at(x0, eval_from(x0, g0), 2)), aar::InputError);
}

TEST(SolveAlpha, MatchesNormalEquationsOracle) {
    oracle::Rng rng(41);
    for (int trial = 0; trial < 10; ++trial) {
        const Vector x0 = rng.vec(3);
        AAState s = AAState::anchored_at(x0, eval_from(x0, rng.vec(3)), 2);
        s.push(rng.vec(3), rng.vec(3));
        s.push(rng.vec(3), rng.vec(3));
        const DenseMatrix H = s.H();
        const Vector expect = -(H.transpose() * H).inverse() * H.transpose() * s.anchor_h();
        for (auto method : {aar::LeastSquaresMethod::qr, aar::LeastSquaresMethod::lsqr}) {
            const auto r = aar::solve_alpha(s, method);
            EXPECT_LE((r.alpha - expect).norm(), 1e-8 * std::max(1.0, expect.norm()));
            EXPECT_EQ(r.x_aa, s.anchor_g() + DenseMatrix(s.G()) * r.alpha);
            EXPECT_LE(r.linearized_residual_norm, s.anchor_h().norm());
        }
    }
}

TEST(SolveAlpha, ResidualNonincreasingInMemoryAndOptimal) {
    oracle::Rng rng(42);
    const int m = 6;
    const Vector x0 = rng.vec(10);
    AAState s = AAState::anchored_at(x0, eval_from(x0, rng.vec(10)), m);
    double previous = s.anchor_h().norm();
    for (int i = 0; i < m; ++i) {
        s.push(rng.vec(10), rng.vec(10));
        const auto r = aar::solve_alpha(s, aar::LeastSquaresMethod::lsqr);
        EXPECT_LE(r.linearized_residual_norm, previous * (1.0 + 1e-12));
        previous = r.linearized_residual_norm;
        const DenseMatrix H = s.H();
        const double opt = (H.transpose() * (s.anchor_h() + H * r.alpha)).norm();
        EXPECT_LE(opt, std::max(1e-16, 1e-10 * (H.transpose() * s.anchor_h()).norm()));
    }
}

TEST(AARStep, RestartsAtCycleBoundaries) {
    oracle::Rng rng(6);
    const FixedPointMap map(aar::make_quadratic(rng.spd(4, 1, 5), Vector::Zero(4), Vector::Zero(4)));
    const SolverConfig cfg = config(2);
    OracleMeter meter;
    AAState state;
    int pos = 0;
    Vector x = rng.vec(4);
    std::vector<StepKind> kinds;
    for (int k = 0; k < 7; ++k) {
        const auto ev = map.g_and_h(x, meter);
        auto out = aar::aa_r_step(state, x, ev, pos, cfg);
        kinds.push_back(out.kind);
        if (out.kind == StepKind::picard_restart) {
            EXPECT_EQ(out.x_next, ev.g);
            EXPECT_EQ(state.anchor_x(), x);
        }
        pos = out.next_pos;
        x = out.x_next;
    }
    const std::vector<StepKind> expect{StepKind::picard_restart, StepKind::aa, StepKind::aa, StepKind::picard_restart,
                                       StepKind::aa, StepKind::aa, StepKind::picard_restart};
    EXPECT_EQ(kinds, expect);
}

TEST(AARStep, SafeguardBoundsEveryUsedSolve) {
    oracle::Rng rng(19);
    const FixedPointMap map(aar::make_quadratic(rng.spd(12, 1, 1e4), Vector::Zero(12), Vector::Zero(12)));
    SolverConfig cfg = config(8);
    cfg.safeguard_cond_bound = 1e3;
    OracleMeter meter;
    AAState state;
    int pos = 0, restarts_mid_cycle = 0;
    Vector x = rng.vec(12);
    for (int k = 0; k < 60; ++k) {
        const auto ev = map.g_and_h(x, meter);
        auto out = aar::aa_r_step(state, x, ev, pos, cfg);
        if (out.kind == StepKind::aa) {
            ASSERT_TRUE(out.solve.has_value());
            EXPECT_LE(out.solve->cond_HtH, 1e3);
        } else if (pos != 0) {
            ++restarts_mid_cycle;
        }
        pos = out.next_pos;
        x = out.x_next;
    }
    EXPECT_GT(restarts_mid_cycle, 0);
}

TEST(RunAAR, IdentityHessianConvergesInOneStep) {
    const FixedPointMap map(aar::make_quadratic(DenseMatrix::Identity(3, 3), Vector::Zero(3), Vector::Ones(3)));
    OracleMeter meter;
    const auto run = aar::run_aa_r(map, Vector::Zero(3), config(3), meter);
    ASSERT_EQ(run.records.size(), 2u);
    EXPECT_EQ(run.status, aar::RunStatus::converged);
    EXPECT_EQ(run.records[1].oracle_calls, 2u);
}

TEST(RunAAR, BudgetZeroLogsOnlyInitialRow) {
    const FixedPointMap map(aar::make_quadratic(Eigen::Vector2d(1, 3).asDiagonal().toDenseMatrix(), Vector::Zero(2),
                                                Vector::Zero(2)));
    OracleMeter meter;
    const auto run = aar::run_aa_r(map, Vector::Ones(2), config(2, 1e-10, 0), meter);
    ASSERT_EQ(run.records.size(), 1u);
    EXPECT_EQ(run.status, aar::RunStatus::budget_exhausted);
}

TEST(RunAAR, OneGradientPerIterate) {
    oracle::Rng rng(8);
    const FixedPointMap map(aar::make_nls(oracle::dataset(rng, 40, 8)));
    OracleMeter meter;
    const auto run = aar::run_aa_r(map, rng.vec(8), config(4, 1e-8), meter);
    for (std::size_t k = 0; k < run.records.size(); ++k) {
        EXPECT_EQ(run.records[k].k, k);
        EXPECT_EQ(run.records[k].oracle_calls, k + 1);
        EXPECT_EQ(run.records[k].f_calls, 0u);
    }
    EXPECT_EQ(run.status, aar::RunStatus::converged);
}

TEST(RunAAR, QLinearResidualDecreaseOnQuadratic) {
    oracle::Rng rng(10);
    const DenseMatrix B = rng.spd(6, 1.0, 10.0);
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(B);
    const double kappa = es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff();
    const Vector xstar = rng.vec(6);
    const FixedPointMap map(aar::make_quadratic(B, Vector::Zero(6), xstar));
    OracleMeter meter;
    const auto run = aar::run_aa_r(map, xstar + 0.1 * rng.vec(6), config(6, 1e-9), meter);
    for (std::size_t k = 0; k + 1 < run.records.size(); ++k) {
        EXPECT_LE(run.records[k + 1].grad_norm, (1.0 - 1.0 / (2.0 * kappa)) * run.records[k].grad_norm + 1e-14);
    }
}

TEST(RunAAR, MatchesNaiveImplementation) {
    oracle::Rng rng(12);
    const auto obj = aar::make_student_t(oracle::dataset(rng, 40, 6));
    const FixedPointMap map(obj);
    const Vector x0 = rng.vec(6);
    SolverConfig cfg = config(3, 1e-300, 20);
    cfg.ls_method = aar::LeastSquaresMethod::qr;
    OracleMeter meter;
    const auto run = aar::run_aa_r(map, x0, cfg, meter);
    const auto expect = naive_aa(obj, x0, 3, 19, true);
    ASSERT_EQ(run.iterates.size(), expect.size());
    for (std::size_t k = 0; k < expect.size(); ++k) {
        EXPECT_LE((run.iterates[k] - expect[k]).norm(), 1e-8 * std::max(1.0, expect[k].norm())) << k;
    }
}

TEST(RunPureAA, MatchesNaiveSlidingWindow) {
    oracle::Rng rng(13);
    const auto obj = aar::make_nls(oracle::dataset(rng, 40, 6));
    const FixedPointMap map(obj);
    const Vector x0 = rng.vec(6);
    SolverConfig cfg = config(3, 1e-300, 20);
    cfg.ls_method = aar::LeastSquaresMethod::qr;
    OracleMeter meter;
    const auto run = aar::run_pure_aa(map, x0, cfg, meter);
    const auto expect = naive_aa(obj, x0, 3, 19, false);
    ASSERT_EQ(run.iterates.size(), expect.size());
    for (std::size_t k = 0; k < expect.size(); ++k) {
        EXPECT_LE((run.iterates[k] - expect[k]).norm(), 1e-8 * std::max(1.0, expect[k].norm())) << k;
    }
}

TEST(RunPureAA, ScalarSecantRecursion) {
    // f(x) = x^4/4 + x^2/2; with m = 1 each step mixes the last two points.
    const auto obj = scalar_objective([](double x) { return x * x * x * x / 4 + x * x / 2; },
                                      [](double x) { return x * x * x + x; }, 10.0);
    const FixedPointMap map(obj);
    SolverConfig cfg = config(1, 1e-300, 6);
    cfg.ls_method = aar::LeastSquaresMethod::qr;
    OracleMeter meter;
    const auto run = aar::run_pure_aa(map, Vector::Constant(1, 0.8), cfg, meter);

    auto g = [](double x) { return x - (x * x * x + x) / 10.0; };
    std::vector<double> xs{0.8, g(0.8)};
    while (xs.size() < run.iterates.size()) {
        const double xa = xs[xs.size() - 2], xb = xs.back();
        const double ha = g(xa) - xa, hb = g(xb) - xb;
        const double alpha = -ha / (hb - ha);
        xs.push_back(g(xa) + alpha * (g(xb) - g(xa)));
    }
    for (std::size_t k = 0; k < xs.size(); ++k) EXPECT_NEAR(run.iterates[k](0), xs[k], 1e-14) << k;
}

TEST(RunPureAA, AgreesWithAARInFirstCycle) {
    oracle::Rng rng(14);
    const FixedPointMap map(aar::make_student_t(oracle::dataset(rng, 30, 5)));
    const Vector x0 = rng.vec(5);
    const SolverConfig cfg = config(4, 1e-300, 5);
    OracleMeter m1, m2;
    const auto a = aar::run_aa_r(map, x0, cfg, m1);
    const auto p = aar::run_pure_aa(map, x0, cfg, m2);
    ASSERT_EQ(a.iterates.size(), 5u);
    for (std::size_t k = 0; k < a.iterates.size(); ++k) EXPECT_EQ(a.iterates[k], p.iterates[k]);
}

TEST(RunGD, MatchesPicardIteration) {
    const FixedPointMap map(aar::make_quadratic(Eigen::Vector2d(1, 4).asDiagonal().toDenseMatrix(), Vector::Zero(2),
                                                Vector::Zero(2)));
    OracleMeter meter;
    const auto run = aar::run_gd(map, Vector::Ones(2), config(1, 1e-300, 4), meter);
    ASSERT_EQ(run.iterates.size(), 4u);
    for (std::size_t k = 0; k < 4; ++k) {
        EXPECT_DOUBLE_EQ(run.iterates[k](0), std::pow(0.75, static_cast<double>(k)));
        EXPECT_EQ(run.records[k].step_kind, StepKind::picard_restart);
    }
}

TEST(Solvers, DivergenceIsReportedNotThrown) {
    // L deliberately far too small: the map x -> -99 x blows up.
    const auto obj = scalar_objective([](double x) { return 5 * x * x; }, [](double x) { return 10 * x; }, 0.1);
    const FixedPointMap map(obj);
    OracleMeter meter;
    const auto run = aar::run_gd(map, Vector::Ones(1), config(1, 1e-8, 100000), meter);
    EXPECT_EQ(run.status, aar::RunStatus::diverged);
}

TEST(Solvers, RejectBadInput) {
    const FixedPointMap map(aar::make_quadratic(DenseMatrix::Identity(2, 2), Vector::Zero(2), Vector::Zero(2)));
    OracleMeter meter;
    EXPECT_THROW(aar::run_aa_r(map, Vector::Zero(3), config(2), meter), aar::InputError);
    EXPECT_THROW(aar::run_aa_r(map, Vector::Zero(2), config(0), meter), aar::InputError);
    Vector bad = Vector::Zero(2);
    bad(0) = std::numeric_limits<double>::infinity();
    EXPECT_THROW(aar::run_pure_aa(map, bad, config(2), meter), aar::InputError);
}
