#include "lockin/montecarlo_lab.hpp"

#include "lockin/csv.hpp"
#include "lockin/martingale_conc.hpp"
#include "lockin/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>

namespace lockin {

std::size_t pick_n1(const StepSchedule& schedule, std::size_t n0, double T, std::size_t max_index)
{
    if (!(T >= 0.0)) {
        throw InvalidArgument("pick_n1 requires T >= 0");
    }
    const auto len = schedule.length();
    const double t0 = time_of(schedule, n0);
    double t = t0;
    for (std::size_t n1 = n0; n1 < max_index; ++n1) {
        if (len && n1 >= *len) {
            break;
        }
        t += schedule.step(n1);
        if (t - t0 >= T) {
            // the previous partial sum was below T and a_n <= 1
            return n1;
        }
    }
    throw NumericalError("pick_n1: step horizon exhausted before the window reached T");
}

EventRecord track_events(const Trajectory& traj, const DriftFunction& drift,
                         const RegionGeometry& geometry, const SpectralData& spectral, double eps,
                         std::size_t n0, double T, std::size_t samples_per_interval,
                         double ode_tol)
{
    if (!(eps > 0.0)) {
        throw InvalidArgument("eps must be positive");
    }
    if (n0 < traj.n_start() || n0 >= traj.n_end()) {
        throw InvalidArgument("track_events: n0 outside the trajectory");
    }
    EventRecord rec;
    rec.n0 = n0;
    rec.n1 = pick_n1(traj.schedule(), n0, T);
    if (rec.n1 + 1 > traj.n_end()) {
        throw InvalidArgument("track_events: trajectory ends before t_{n1+1}");
    }
    rec.lockin_start_t = traj.time(n0) + T + 1.0;
    rec.horizon_t = traj.time(traj.n_end());
    if (rec.lockin_start_t > rec.horizon_t) {
        throw InvalidArgument("track_events: trajectory ends before t_{n0} + T + 1");
    }
    const Vec& x_star = spectral.x_star;
    const Vec x0 = traj.state(n0);
    rec.started_in_B = geometry.in_B(x0);

    const std::size_t pieces = samples_per_interval + 1;
    DormandPrince dp([&drift](double, const Vec& x, Vec& dx) { drift.eval_into(x, dx); },
                     OdeOptions::with_tol(ode_tol));
    Vec ode_state = x0;
    double ode_t = traj.time(n0);

    bool inside = geometry.in_Vr(x0);
    rec.G_flags.push_back(inside);
    if (!inside) {
        rec.first_exit_index = n0;
    }
    for (std::size_t n = n0; n < traj.n_end(); ++n) {
        const Vec xa = traj.state(n);
        const Vec xb = traj.state(n + 1);
        const double tn = traj.time(n);
        const double an = traj.step(n);
        double rho = 0.0;
        double rho_star = 0.0;
        bool interval_inside = true;
        for (std::size_t j = 0; j <= pieces; ++j) {
            const double frac = static_cast<double>(j) / static_cast<double>(pieces);
            const Vec xs = j == pieces ? xb : Vec(xa + frac * (xb - xa));
            rho_star = std::max(rho_star, (xs - x_star).norm());
            interval_inside = interval_inside && geometry.in_Vr(xs);
            if (n <= rec.n1) {
                const double s = j == pieces ? traj.time(n + 1) : tn + frac * an;
                dp.integrate(ode_t, ode_state, s);
                ode_t = s;
                rho = std::max(rho, (xs - ode_state).norm());
            }
        }
        if (n <= rec.n1) {
            rec.rho.push_back(rho);
        }
        rec.rho_star.push_back(rho_star);
        inside = inside && interval_inside;
        rec.G_flags.push_back(inside);
        if (!inside && !rec.first_exit_index) {
            rec.first_exit_index = n + 1;
        }
    }

    // distance to x* is convex along each segment, so the window start point
    // and later grid points decide the sup
    bool locked = (interpolate(traj, rec.lockin_start_t) - x_star).norm() <= eps;
    for (std::size_t n = interval_index(traj, rec.lockin_start_t) + 1; locked && n <= traj.n_end();
         ++n) {
        locked = (traj.state(n) - x_star).norm() <= eps;
    }
    rec.locked_in = locked;
    return rec;
}

void write_events_csv(std::ostream& os, const EventRecord& rec)
{
    CsvWriter w(os);
    w.header({"n", "G_n", "rho_next", "rho_star_next"});
    for (std::size_t i = 0; i < rec.G_flags.size(); ++i) {
        w.field(rec.n0 + i).field(static_cast<bool>(rec.G_flags[i]));
        if (i < rec.rho.size()) {
            w.field(rec.rho[i]);
        } else {
            w.empty_field();
        }
        if (i < rec.rho_star.size()) {
            w.field(rec.rho_star[i]);
        } else {
            w.empty_field();
        }
        w.end_row();
    }
}

std::string InitSampler::label() const
{
    if (kind == InitSamplerKind::UniformInB) {
        return "uniform-in-B";
    }
    return "box-rejection(w=" + format_double(box_half_width) + ")";
}

HorizonChoice default_horizon(const StepSchedule& schedule, std::size_t n0, double T,
                              double lambda, std::size_t cap)
{
    if (!(lambda > 0.0) || !(T >= 0.0)) {
        throw InvalidArgument("default_horizon needs lambda > 0 and T >= 0");
    }
    const double t0 = time_of(schedule, n0);
    const double start = t0 + T + 1.0;
    const double target = start + 30.0 / lambda;
    const auto len = schedule.length();
    HorizonChoice h;
    double t = t0;
    std::size_t n = n0;
    bool have_start = false;
    for (;;) {
        if (!have_start && t >= start) {
            h.window_start_index = n;
            have_start = true;
        }
        if (t >= target) {
            break;
        }
        if (n >= cap || (len && n >= *len)) {
            h.capped = true;
            break;
        }
        t += schedule.step(n);
        ++n;
    }
    if (!have_start) {
        throw NumericalError("horizon cap reached before the lock-in window starts");
    }
    h.n = n;
    return h;
}

namespace {

enum TrialFlag : std::uint8_t {
    kConditioned = 1,
    kLocked = 2,
    kDiverged = 4,
    kWithinEps = 8,
    kWithinHalfEps = 16,
};

} // namespace

LockinEstimate estimate_lockin(const ScenarioBundle& sc, const LockinOptions& o)
{
    if (o.trials < 100) {
        throw InvalidArgument("estimate_lockin needs at least 100 trials");
    }
    if (!(o.eps > 0.0) || !(o.T >= 0.0)) {
        throw InvalidArgument("estimate_lockin needs eps > 0 and T >= 0");
    }
    if (!(o.horizon_n > o.n0)) {
        throw InvalidArgument("horizon_n must exceed n0");
    }
    if (sc.noise.dim() != sc.drift.dim() ||
        static_cast<std::size_t>(sc.spectral.x_star.size()) != sc.drift.dim()) {
        throw InvalidArgument("scenario dimensions disagree");
    }
    const Timeline tl(sc.schedule, o.horizon_n);
    const auto& steps = tl.steps();
    const auto& times = tl.times();
    const double t_start = times[o.n0] + o.T + 1.0;
    if (t_start > times[o.horizon_n]) {
        throw InvalidArgument("horizon ends before t_{n0} + T + 1");
    }
    // index whose step crosses the window start
    std::size_t cross = o.n0;
    while (times[cross + 1] < t_start) {
        ++cross;
    }
    const Vec& x_star = sc.spectral.x_star;
    const auto d = static_cast<Eigen::Index>(sc.drift.dim());
    const double eps2 = o.eps * o.eps;
    const double half2 = 0.25 * eps2;
    const double diverge2 = kDivergenceNorm * kDivergenceNorm;

    std::vector<std::uint8_t> flags(o.trials, 0);
    parallel_for(o.trials, o.workers, [&](std::size_t, std::size_t i) {
        RngStream rng(o.seed, i);
        Vec x(d);
        if (o.init.kind == InitSamplerKind::UniformInB) {
            x = sample_in_sublevel(sc.geometry, sc.geometry.B_radius_V, rng);
        } else {
            for (Eigen::Index j = 0; j < d; ++j) {
                x[j] = x_star[j] + rng.uniform(-o.init.box_half_width, o.init.box_half_width);
            }
        }
        if (!sc.geometry.in_B(x)) {
            return;
        }
        std::uint8_t f = kConditioned;
        Vec h(d), m(d), prev(d);
        bool locked = true;
        bool diverged = false;
        for (std::size_t n = o.n0; n < o.horizon_n; ++n) {
            sc.drift.eval_into(x, h);
            sc.noise.sample_into(x, rng, m);
            if (n == cross) {
                prev = x;
            }
            x += steps[n] * (h + m);
            const double sq = x.squaredNorm();
            if (!std::isfinite(sq) || sq > diverge2) {
                diverged = true;
                break;
            }
            if (n >= cross) {
                if (n == cross) {
                    const double frac = (t_start - times[n]) / steps[n];
                    locked = locked && (prev + frac * (x - prev) - x_star).squaredNorm() <= eps2;
                }
                locked = locked && (x - x_star).squaredNorm() <= eps2;
            }
        }
        if (diverged) {
            f |= kDiverged;
        } else {
            const double dist2 = (x - x_star).squaredNorm();
            if (locked) {
                f |= kLocked;
            }
            if (dist2 <= eps2) {
                f |= kWithinEps;
            }
            if (dist2 <= half2) {
                f |= kWithinHalfEps;
            }
        }
        flags[i] = f;
    });

    LockinEstimate e;
    e.eps = o.eps;
    e.n0 = o.n0;
    e.T = o.T;
    e.trials_total = o.trials;
    for (auto f : flags) {
        e.trials_conditioned += (f & kConditioned) ? 1 : 0;
        e.trials_locked += (f & kLocked) ? 1 : 0;
        e.trials_diverged += (f & kDiverged) ? 1 : 0;
        e.within_eps_at_horizon += (f & kWithinEps) ? 1 : 0;
        e.within_half_eps_at_horizon += ((f & kLocked) && (f & kWithinHalfEps)) ? 1 : 0;
    }
    if (e.trials_conditioned == 0) {
        throw NumericalError("no trial started in B");
    }
    const double nc = static_cast<double>(e.trials_conditioned);
    e.p_hat = static_cast<double>(e.trials_locked) / nc;
    const auto ci = wilson_interval(e.trials_locked, e.trials_conditioned);
    e.wilson_lo = ci.lo;
    e.wilson_hi = ci.hi;
    e.at_horizon_fraction = static_cast<double>(e.within_eps_at_horizon) / nc;
    e.horizon_n = o.horizon_n;
    e.horizon_t = times[o.horizon_n];
    e.lockin_start_t = t_start;
    e.init_sampler = o.init.label();
    return e;
}

Verdict compare_bound(const LockinEstimate& est, const BoundReport& report)
{
    if (est.eps != report.epsilon || est.n0 != report.n0) {
        throw InvalidArgument("compare_bound: eps or n0 differ between estimate and report");
    }
    if (report.K && est.T != report.T) {
        throw InvalidArgument("compare_bound: waiting time differs between estimate and report");
    }
    Verdict v;
    v.vacuous = report.lower_bound <= 0.0;
    v.margin = est.wilson_lo - report.lower_bound;
    // no observed failure cannot contradict any lower bound
    const bool no_failures = est.trials_locked == est.trials_conditioned;
    v.pass = v.vacuous || no_failures || est.wilson_lo >= report.lower_bound;
    return v;
}

HorizonSensitivity horizon_sensitivity(const ScenarioBundle& scenario,
                                       const LockinOptions& options)
{
    HorizonSensitivity hs;
    hs.base = estimate_lockin(scenario, options);
    LockinOptions doubled = options;
    doubled.horizon_n = 2 * options.horizon_n;
    hs.doubled = estimate_lockin(scenario, doubled);
    hs.change = std::abs(hs.doubled.p_hat - hs.base.p_hat);
    hs.half_width = 0.5 * (hs.base.wilson_hi - hs.base.wilson_lo);
    hs.margin_condition = hs.base.within_half_eps_at_horizon == hs.base.trials_locked;
    hs.flagged = hs.margin_condition && hs.change >= hs.half_width && hs.change > 0.0;
    return hs;
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows)
{
    CsvWriter w(os);
    w.header({"scenario", "mu", "eps", "n0", "T", "trials", "p_hat", "wilson_lo", "wilson_hi",
              "theoretical_lower", "verdict"});
    for (const auto& r : rows) {
        w.field(r.scenario)
            .field(r.mu)
            .field(r.est.eps)
            .field(r.est.n0)
            .field(r.est.T)
            .field(r.est.trials_conditioned)
            .field(r.est.p_hat)
            .field(r.est.wilson_lo)
            .field(r.est.wilson_hi);
        if (r.est.theoretical_lower) {
            w.field(*r.est.theoretical_lower);
        } else {
            w.empty_field();
        }
        if (r.verdict) {
            w.field(r.verdict->pass ? (r.verdict->vacuous ? "PASS(vacuous)" : "PASS") : "FAIL");
        } else {
            w.empty_field();
        }
        w.end_row();
    }
}

} // namespace lockin
