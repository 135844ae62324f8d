#pragma once

#include <cstdint>

#include "aar/errors.hpp"
#include "aar/objectives.hpp"

namespace aar {

/// Counts objective and gradient evaluations. One evaluation of either kind
/// is one oracle call.
class OracleMeter {
public:
    void charge_f(std::uint64_t n = 1) { f_calls_ += n; }
    void charge_grad(std::uint64_t n = 1) { grad_calls_ += n; }

    std::uint64_t f_calls() const { return f_calls_; }
    std::uint64_t grad_calls() const { return grad_calls_; }
    std::uint64_t total() const { return f_calls_ + grad_calls_; }

private:
    std::uint64_t f_calls_ = 0;
    std::uint64_t grad_calls_ = 0;
};

/// Everything derived from one gradient evaluation at x.
struct MapEval {
    Vector grad;
    Vector g;  // x - grad / L
    Vector h;  // g - x, formed from g so the identity holds bit-for-bit
};

/// Gradient step map g(x) = x - (1/L) grad f(x) and residual h(x) = g(x) - x.
class FixedPointMap {
public:
    explicit FixedPointMap(Objective objective) : objective_(std::move(objective)) {
        if (!(objective_.lipschitz > 0.0)) throw InputError("fixed-point map: Lipschitz constant must be positive");
        step_ = 1.0 / objective_.lipschitz;
    }

    const Objective& objective() const { return objective_; }
    double step() const { return step_; }
    double lipschitz() const { return objective_.lipschitz; }
    Eigen::Index dim() const { return objective_.dim; }

    /// g and h together for the price of one gradient call.
    MapEval g_and_h(const Vector& x, OracleMeter& meter) const {
        if (x.size() != objective_.dim) throw InputError("fixed-point map: dimension mismatch");
        MapEval out;
        out.grad = objective_.gradient(x);
        meter.charge_grad();
        if (!out.grad.allFinite()) throw NumericalError("fixed-point map: non-finite gradient");
        out.g = x - step_ * out.grad;
        out.h = out.g - x;
        return out;
    }

    Vector g(const Vector& x, OracleMeter& meter) const { return g_and_h(x, meter).g; }
    Vector h(const Vector& x, OracleMeter& meter) const { return g_and_h(x, meter).h; }

    double f(const Vector& x, OracleMeter& meter) const {
        if (x.size() != objective_.dim) throw InputError("fixed-point map: dimension mismatch");
        meter.charge_f();
        return objective_.value(x);
    }

private:
    Objective objective_;
    double step_ = 0.0;
};

}  // namespace aar
