#pragma once

// Stochastic approximation iterates x_{n+1} = x_n + a_n (h(x_n) + M_{n+1})
// and their piecewise-linear interpolation on the timeline t_n.

#include "lockin/core_model.hpp"

#include <iosfwd>
#include <optional>

namespace lockin {

/// States above this norm abort a run; the trajectory is truncated and flagged.
inline constexpr double kDivergenceNorm = 1e12;

class Trajectory {
public:
    Trajectory(StepSchedule schedule, std::size_t n_start, std::vector<double> steps,
               std::vector<double> times, Mat states, Mat noises,
               std::optional<std::size_t> diverged_at);

    const StepSchedule& schedule() const { return schedule_; }
    std::size_t dim() const { return static_cast<std::size_t>(states_.rows()); }
    std::size_t n_start() const { return n_start_; }
    std::size_t n_end() const { return n_start_ + static_cast<std::size_t>(states_.cols()) - 1; }

    /// x_n for n in [n_start, n_end].
    Vec state(std::size_t n) const;
    /// M_{n+1}, the noise applied on the step from x_n, for n in [n_start, n_end).
    Vec noise(std::size_t n) const;
    double step(std::size_t n) const;
    double time(std::size_t n) const;

    const Mat& states() const { return states_; }
    const Mat& noises() const { return noises_; }
    bool has_noises() const { return noises_.cols() + 1 == states_.cols(); }

    bool diverged() const { return diverged_at_.has_value(); }
    /// Index of the first non-finite or oversized state (not stored).
    std::optional<std::size_t> diverged_at() const { return diverged_at_; }

    /// Copy without stored noises (used to exercise the missing-noise path).
    Trajectory without_noises() const;

private:
    std::size_t offset(std::size_t n) const;

    StepSchedule schedule_;
    std::size_t n_start_;
    std::vector<double> steps_; // a_n, n in [n_start, n_end]
    std::vector<double> times_; // t_n, n in [n_start, n_end]
    Mat states_;                // d x (len)
    Mat noises_;                // d x (len-1)
    std::optional<std::size_t> diverged_at_;
};

/// Runs n_steps iterations from x_{n_start} = x0. t_{n_start} is taken from
/// the schedule.
Trajectory run_sa(const DriftFunction& drift, const StepSchedule& schedule,
                  const NoiseModel& noise, const Vec& x0, std::size_t n_steps, RngStream& rng,
                  std::size_t n_start = 0);

/// x̄(t) by linear interpolation between grid points; exact at grid times.
Vec interpolate(const Trajectory& traj, double t);

/// Index n with t in [t_n, t_{n+1}] (the last interval is closed on the right).
std::size_t interval_index(const Trajectory& traj, double t);

/// Checks x_{n+1} == x_n + a_n (h(x_n) + M_{n+1}) bitwise on every stored step.
bool replay_matches(const Trajectory& traj, const DriftFunction& drift);

/// Columns n, t_n, a_n, x_1..x_d, M_1..M_d; the final row leaves M empty.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

} // namespace lockin
