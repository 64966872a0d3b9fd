#include "lockin/sa_engine.hpp"

#include "lockin/csv.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace lockin {

Trajectory::Trajectory(StepSchedule schedule, std::size_t n_start, std::vector<double> steps,
                       std::vector<double> times, Mat states, Mat noises,
                       std::optional<std::size_t> diverged_at)
    : schedule_(std::move(schedule)), n_start_(n_start), steps_(std::move(steps)),
      times_(std::move(times)), states_(std::move(states)), noises_(std::move(noises)),
      diverged_at_(diverged_at)
{
    if (states_.cols() == 0) {
        throw InvalidArgument("trajectory must hold at least one state");
    }
    if (steps_.size() != static_cast<std::size_t>(states_.cols()) ||
        times_.size() != steps_.size()) {
        throw InvalidArgument("trajectory timeline length does not match states");
    }
}

std::size_t Trajectory::offset(std::size_t n) const
{
    if (n < n_start_ || n > n_end()) {
        throw InvalidArgument("index " + std::to_string(n) + " outside trajectory range [" +
                              std::to_string(n_start_) + ", " + std::to_string(n_end()) + "]");
    }
    return n - n_start_;
}

Vec Trajectory::state(std::size_t n) const
{
    return states_.col(static_cast<Eigen::Index>(offset(n)));
}

Vec Trajectory::noise(std::size_t n) const
{
    const std::size_t k = offset(n);
    if (!has_noises()) {
        throw InvalidArgument("trajectory does not store noises");
    }
    if (k >= static_cast<std::size_t>(noises_.cols())) {
        throw InvalidArgument("no noise stored after the final state");
    }
    return noises_.col(static_cast<Eigen::Index>(k));
}

double Trajectory::step(std::size_t n) const { return steps_[offset(n)]; }
double Trajectory::time(std::size_t n) const { return times_[offset(n)]; }

Trajectory Trajectory::without_noises() const
{
    return Trajectory(schedule_, n_start_, steps_, times_, states_, Mat(dim(), 0), diverged_at_);
}

Trajectory run_sa(const DriftFunction& drift, const StepSchedule& schedule,
                  const NoiseModel& noise, const Vec& x0, std::size_t n_steps, RngStream& rng,
                  std::size_t n_start)
{
    const auto d = static_cast<Eigen::Index>(drift.dim());
    if (x0.size() != d || static_cast<Eigen::Index>(noise.dim()) != d) {
        throw InvalidArgument("run_sa: dimension mismatch between x0, drift and noise");
    }
    if (!x0.allFinite()) {
        throw InvalidArgument("run_sa: initial state is not finite");
    }
    if (n_steps == 0) {
        throw InvalidArgument("run_sa: n_steps must be at least 1");
    }

    Mat states(d, static_cast<Eigen::Index>(n_steps + 1));
    Mat noises(d, static_cast<Eigen::Index>(n_steps));
    std::vector<double> steps;
    std::vector<double> times;
    steps.reserve(n_steps + 1);
    times.reserve(n_steps + 1);

    double t = time_of(schedule, n_start);
    Vec x = x0;
    Vec h(d);
    Vec m(d);
    states.col(0) = x;
    std::optional<std::size_t> diverged_at;
    std::size_t stored = 1;

    for (std::size_t k = 0; k < n_steps; ++k) {
        const std::size_t n = n_start + k;
        const double a = schedule.step(n);
        steps.push_back(a);
        times.push_back(t);
        drift.eval_into(x, h);
        noise.sample_into(x, rng, m);
        x = x + a * (h + m);
        t = t + a;
        if (!x.allFinite() || x.norm() > kDivergenceNorm) {
            diverged_at = n + 1;
            break;
        }
        noises.col(static_cast<Eigen::Index>(k)) = m;
        states.col(static_cast<Eigen::Index>(k + 1)) = x;
        ++stored;
    }
    const std::size_t last = n_start + stored - 1;
    const auto defined = schedule.length();
    steps.resize(stored - 1);
    times.resize(stored - 1);
    steps.push_back(!defined || last < *defined ? schedule.step(last) : 0.0);
    times.push_back(stored == 1 ? time_of(schedule, n_start) : times.back() + steps[stored - 2]);

    return Trajectory(schedule, n_start, std::move(steps), std::move(times),
                      states.leftCols(static_cast<Eigen::Index>(stored)),
                      noises.leftCols(static_cast<Eigen::Index>(stored - 1)), diverged_at);
}

std::size_t interval_index(const Trajectory& traj, double t)
{
    const double t0 = traj.time(traj.n_start());
    const double t1 = traj.time(traj.n_end());
    if (!(t >= t0 && t <= t1)) {
        throw InvalidArgument("interpolation time outside stored range");
    }
    // largest n with t_n <= t
    std::size_t lo = traj.n_start();
    std::size_t hi = traj.n_end();
    while (lo < hi) {
        const std::size_t mid = lo + (hi - lo + 1) / 2;
        if (traj.time(mid) <= t) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    return lo == traj.n_end() && lo > traj.n_start() ? lo - 1 : lo;
}

Vec interpolate(const Trajectory& traj, double t)
{
    const std::size_t n = interval_index(traj, t);
    const double tn = traj.time(n);
    if (t == tn || n == traj.n_end()) {
        return traj.state(n);
    }
    const double tn1 = traj.time(n + 1);
    if (t == tn1) {
        return traj.state(n + 1);
    }
    const double w = (t - tn) / (tn1 - tn);
    return traj.state(n) + w * (traj.state(n + 1) - traj.state(n));
}

bool replay_matches(const Trajectory& traj, const DriftFunction& drift)
{
    if (!traj.has_noises()) {
        return false;
    }
    Vec h;
    for (std::size_t n = traj.n_start(); n < traj.n_end(); ++n) {
        const Vec x = traj.state(n);
        drift.eval_into(x, h);
        const Vec next = x + traj.step(n) * (h + traj.noise(n));
        if (!(next.array() == traj.state(n + 1).array()).all()) {
            return false;
        }
    }
    return true;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj)
{
    const std::size_t d = traj.dim();
    CsvWriter csv(os);
    std::vector<std::string> header{"n", "t_n", "a_n"};
    for (std::size_t i = 1; i <= d; ++i) {
        header.push_back("x_" + std::to_string(i));
    }
    for (std::size_t i = 1; i <= d; ++i) {
        header.push_back("M_" + std::to_string(i));
    }
    csv.header(header);
    for (std::size_t n = traj.n_start(); n <= traj.n_end(); ++n) {
        csv.field(n).field(traj.time(n)).field(traj.step(n));
        const Vec x = traj.state(n);
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            csv.field(x[i]);
        }
        if (n < traj.n_end() && traj.has_noises()) {
            const Vec m = traj.noise(n);
            for (Eigen::Index i = 0; i < m.size(); ++i) {
                csv.field(m[i]);
            }
        } else {
            for (std::size_t i = 0; i < d; ++i) {
                csv.empty_field();
            }
        }
        csv.end_row();
    }
}

} // namespace lockin
