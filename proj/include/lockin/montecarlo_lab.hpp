#pragma once

// Monte Carlo estimate of the conditional lock-in probability
//   Pr{ ||x̄(t) - x*|| <= eps for all t >= t_{n0} + T + 1 | x̄(t_{n0}) in B },
// the per-trajectory event bookkeeping behind the bound, and the one-sided
// comparison against a theoretical lower bound.

#include "lockin/bound_calculator.hpp"
#include "lockin/ode_toolkit.hpp"
#include "lockin/sa_engine.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace lockin {

/// Smallest n1 >= n0 with T <= t_{n1+1} - t_{n0} <= T + 1.
std::size_t pick_n1(const StepSchedule& schedule, std::size_t n0, double T,
                    std::size_t max_index = 1'000'000'000);

struct EventRecord {
    std::size_t n0 = 0;
    std::size_t n1 = 0;
    bool started_in_B = false;
    std::vector<double> rho;      // rho_{n+1}, n in [n0, n1]: distance to the ODE path
    std::vector<double> rho_star; // rho*_{n+1}, n in [n0, n_end): distance to x*
    std::vector<bool> G_flags;    // G_n, n in [n0, n_end]: path stayed in V^r
    std::optional<std::size_t> first_exit_index;
    bool locked_in = false;
    double lockin_start_t = 0.0; // t_{n0} + T + 1
    double horizon_t = 0.0;
};

/// Interval sups use `samples_per_interval` interior points plus endpoints.
EventRecord track_events(const Trajectory& traj, const DriftFunction& drift,
                         const RegionGeometry& geometry, const SpectralData& spectral, double eps,
                         std::size_t n0, double T, std::size_t samples_per_interval = 8,
                         double ode_tol = 1e-9);

void write_events_csv(std::ostream& os, const EventRecord& rec);

enum class InitSamplerKind { UniformInB, BoxRejection };

struct InitSampler {
    InitSamplerKind kind = InitSamplerKind::UniformInB;
    double box_half_width = 1.0; // BoxRejection: uniform in x* + [-w, w]^d

    std::string label() const;
};

struct ScenarioBundle {
    const DriftFunction& drift;
    const StepSchedule& schedule;
    const NoiseModel& noise;
    const RegionGeometry& geometry;
    const SpectralData& spectral;
};

struct HorizonChoice {
    std::size_t n = 0;
    std::size_t window_start_index = 0; // first n with t_n >= t_{n0} + T + 1
    bool capped = false;                // default t_{n0}+T+1+30/lambda not reached
};

/// Smallest n with t_n >= t_{n0} + T + 1 + 30/lambda, capped at `cap`.
HorizonChoice default_horizon(const StepSchedule& schedule, std::size_t n0, double T,
                              double lambda, std::size_t cap);

struct LockinOptions {
    double eps = 0.1;
    std::size_t n0 = 0;
    double T = 0.0;
    std::size_t trials = 1000;
    std::size_t horizon_n = 0;
    InitSampler init;
    std::uint64_t seed = 1;
    std::size_t workers = 1;
};

struct LockinEstimate {
    double eps = 0.0;
    std::size_t n0 = 0;
    double T = 0.0;
    std::size_t trials_total = 0;
    std::size_t trials_conditioned = 0;
    std::size_t trials_locked = 0;
    std::size_t trials_diverged = 0;
    std::size_t within_eps_at_horizon = 0;
    std::size_t within_half_eps_at_horizon = 0;
    double p_hat = 0.0;
    double wilson_lo = 0.0;
    double wilson_hi = 1.0;
    double at_horizon_fraction = 0.0;
    std::size_t horizon_n = 0;
    double horizon_t = 0.0;
    double lockin_start_t = 0.0;
    std::string init_sampler;
    std::optional<double> theoretical_lower;
};

/// Trial i draws from RngStream(seed, i); tallies do not depend on workers.
LockinEstimate estimate_lockin(const ScenarioBundle& scenario, const LockinOptions& options);

struct Verdict {
    bool pass = false;
    bool vacuous = false;
    double margin = 0.0; // wilson_lo - theoretical_lower
};

Verdict compare_bound(const LockinEstimate& est, const BoundReport& report);

struct HorizonSensitivity {
    LockinEstimate base;
    LockinEstimate doubled;
    double change = 0.0;
    double half_width = 0.0;
    bool margin_condition = false; // all locked runs end within eps/2
    bool flagged = false;          // change >= half_width while margin_condition holds
};

HorizonSensitivity horizon_sensitivity(const ScenarioBundle& scenario,
                                       const LockinOptions& options);

struct SweepRow {
    std::string scenario;
    double mu = 1.0;
    LockinEstimate est;
    std::optional<Verdict> verdict;
};

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);

} // namespace lockin
