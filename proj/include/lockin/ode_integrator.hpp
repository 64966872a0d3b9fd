#pragma once

// Dormand–Prince 5(4) embedded pair with PI step-size control.

#include "lockin/types.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace lockin {

struct OdeOptions {
    double rtol = 1e-9;
    double atol = 1e-9;
    double initial_step = 0.0; // 0 selects automatically
    double max_step = 0.0;     // 0 means unbounded
    std::size_t max_steps = 50'000'000;

    static OdeOptions with_tol(double tol)
    {
        OdeOptions o;
        o.rtol = tol;
        o.atol = tol;
        return o;
    }
};

struct OdeStats {
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t rhs_evals = 0;
};

using OdeRhs = std::function<void(double t, const Vec& y, Vec& dy)>;

class DormandPrince {
public:
    DormandPrince(OdeRhs rhs, OdeOptions options);

    /// Advances y from t0 to t1 (t1 >= t0). The step size carries over
    /// between calls so a sequence of short segments costs about as much as
    /// one long integration.
    void integrate(double t0, Vec& y, double t1);

    /// Integrates through sorted output times, writing y at each of them.
    std::vector<Vec> integrate_to(double t0, Vec y, std::span<const double> outputs);

    const OdeStats& stats() const { return stats_; }

private:
    double initial_step(double t0, const Vec& y, const Vec& f0) const;

    OdeRhs rhs_;
    OdeOptions opt_;
    OdeStats stats_;
    double h_ = 0.0;
    double err_prev_ = 1e-4;
};

} // namespace lockin
