#include "lockin/ode_integrator.hpp"

#include <algorithm>
#include <cmath>

namespace lockin {

namespace {

// Dormand–Prince coefficients (Hairer, Nørsett & Wanner, table 5.2).
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

constexpr double kSafety = 0.9;
constexpr double kMinFactor = 0.2;
constexpr double kMaxFactor = 10.0;
constexpr double kBeta = 0.04;
constexpr double kAlpha = 0.2 - 0.75 * kBeta;

} // namespace

DormandPrince::DormandPrince(OdeRhs rhs, OdeOptions options) : rhs_(std::move(rhs)), opt_(options)
{
    if (!(opt_.rtol > 0.0) || !(opt_.atol >= 0.0)) {
        throw InvalidArgument("ODE tolerances must be positive");
    }
}

double DormandPrince::initial_step(double t0, const Vec& y, const Vec& f0) const
{
    const Vec sc = (opt_.atol + opt_.rtol * y.array().abs()).matrix();
    const double d0 = (y.array() / sc.array()).abs().maxCoeff();
    const double d1 = (f0.array() / sc.array()).abs().maxCoeff();
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    Vec y1 = y + h0 * f0;
    Vec f1(y.size());
    rhs_(t0 + h0, y1, f1);
    const double d2 = ((f1 - f0).array() / sc.array()).abs().maxCoeff() / h0;
    const double m = std::max(d1, d2);
    const double h1 = m <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / m, 1.0 / 5.0);
    // components that start at zero under a tiny atol would otherwise ask
    // for steps far below the underflow guard
    return std::max(std::min(100.0 * h0, h1), 1e-10 * std::max(1.0, std::abs(t0)));
}

void DormandPrince::integrate(double t0, Vec& y, double t1)
{
    if (t1 < t0) {
        throw InvalidArgument("ODE integration requires t1 >= t0");
    }
    if (t1 == t0) {
        return;
    }
    const Eigen::Index n = y.size();
    Vec k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n), err(n);

    rhs_(t0, y, k1);
    ++stats_.rhs_evals;
    if (h_ <= 0.0) {
        h_ = opt_.initial_step > 0.0 ? opt_.initial_step : initial_step(t0, y, k1);
        stats_.rhs_evals += 1;
    }

    double t = t0;
    std::size_t steps = 0;
    while (t < t1) {
        if (++steps > opt_.max_steps) {
            throw NumericalError("ODE integration exceeded the step budget");
        }
        double h = h_;
        if (opt_.max_step > 0.0) {
            h = std::min(h, opt_.max_step);
        }
        bool last = false;
        if (t + h >= t1 || t + 1.01 * h >= t1) {
            h = t1 - t;
            last = true;
        }
        if (h < 1e-14 * std::max(1.0, std::abs(t))) {
            throw NumericalError("ODE step size underflow at t = " + std::to_string(t));
        }

        ytmp = y + h * a21 * k1;
        rhs_(t + c2 * h, ytmp, k2);
        ytmp = y + h * (a31 * k1 + a32 * k2);
        rhs_(t + c3 * h, ytmp, k3);
        ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
        rhs_(t + c4 * h, ytmp, k4);
        ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        rhs_(t + c5 * h, ytmp, k5);
        ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        rhs_(t + h, ytmp, k6);
        ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        rhs_(t + h, ynew, k7);
        stats_.rhs_evals += 6;

        err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        const Vec sc =
            (opt_.atol + opt_.rtol * y.array().abs().max(ynew.array().abs())).matrix();
        double err_norm = (err.array() / sc.array()).abs().maxCoeff();
        if (!std::isfinite(err_norm)) {
            err_norm = 1e10;
        }

        if (err_norm <= 1.0) {
            double fac = err_norm == 0.0
                             ? kMaxFactor
                             : kSafety * std::pow(err_norm, -kAlpha) * std::pow(err_prev_, kBeta);
            fac = std::clamp(fac, kMinFactor, kMaxFactor);
            err_prev_ = std::max(err_norm, 1e-4);
            t = last ? t1 : t + h;
            y = ynew;
            k1 = k7;
            ++stats_.accepted;
            // keep the unclipped step for the next segment
            if (!last || h >= h_) {
                h_ = h * fac;
            }
        } else {
            const double fac = std::max(kMinFactor, kSafety * std::pow(err_norm, -kAlpha));
            h_ = h * fac;
            ++stats_.rejected;
        }
        if (!y.allFinite()) {
            throw NumericalError("ODE solution became non-finite");
        }
    }
}

std::vector<Vec> DormandPrince::integrate_to(double t0, Vec y, std::span<const double> outputs)
{
    std::vector<Vec> out;
    out.reserve(outputs.size());
    double t = t0;
    for (double to : outputs) {
        integrate(t, y, to);
        t = to;
        out.push_back(y);
    }
    return out;
}

} // namespace lockin
