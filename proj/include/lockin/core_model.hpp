#pragma once

// Problem definition shared by every module: the drift h and its Jacobian,
// the stepsize sequence {a_n} with its timeline {t_n}, and the
// martingale-difference noise {M_n}.

#include "lockin/rng.hpp"
#include "lockin/types.hpp"

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lockin {

// ---------------------------------------------------------------------------
// Drift
// ---------------------------------------------------------------------------

/// Declarative description of a drift. `params` holds named scalars
/// (e.g. "a", "sigma", "omega"); `coeffs` holds polynomial coefficients in
/// increasing degree; `matrix`/`offset` describe an affine user table.
struct ScenarioSpec {
    std::string name;
    std::map<std::string, double> params;
    std::vector<double> coeffs;
    std::vector<std::vector<double>> matrix;
    std::vector<double> offset;
};

class DriftFunction {
public:
    using EvalFn = std::function<void(const Vec& x, Vec& out)>;
    using JacobianFn = std::function<void(const Vec& x, Mat& out)>;

    DriftFunction(std::size_t dim, std::string label, EvalFn eval,
                  std::optional<JacobianFn> jacobian = std::nullopt);

    std::size_t dim() const { return dim_; }
    const std::string& label() const { return label_; }
    bool has_analytic_jacobian() const { return jacobian_.has_value(); }

    void eval_into(const Vec& x, Vec& out) const;
    Vec eval(const Vec& x) const;

    void jacobian_into(const Vec& x, Mat& out) const;
    Mat jacobian(const Vec& x) const;

    /// Central differences, step max(1e-6, 1e-6 |x_i|) per coordinate.
    Mat finite_difference_jacobian(const Vec& x) const;

private:
    std::size_t dim_;
    std::string label_;
    EvalFn eval_;
    std::optional<JacobianFn> jacobian_;
};

/// Built-ins: linear-1d (a), double-well-1d, spiral-2d (sigma, omega),
/// polynomial (coeffs, 1-D), affine (matrix, offset).
DriftFunction make_drift(const ScenarioSpec& scenario);

// ---------------------------------------------------------------------------
// Step schedule
// ---------------------------------------------------------------------------

enum class ScheduleKind { Power, ConstantThenPower, ExplicitList };

/// a_n = 1/(n+1)^mu (power), min(c, 1/(n+1)^mu) (constant-then-power), or a
/// finite explicit list. Values are validated to lie in (0, 1].
class StepSchedule {
public:
    static StepSchedule power(double mu);
    static StepSchedule constant_then_power(double constant, double mu);
    static StepSchedule explicit_list(std::vector<double> values);

    ScheduleKind kind() const { return kind_; }
    double mu() const { return mu_; }
    double constant() const { return constant_; }
    const std::vector<double>& values() const { return values_; }
    std::string label() const;

    /// Number of defined steps; nullopt for infinite schedules.
    std::optional<std::size_t> length() const;
    /// True if a_n is eventually of the form 1/(n+1)^mu.
    bool has_power_tail() const { return kind_ != ScheduleKind::ExplicitList; }

    double step(std::size_t n) const;

private:
    ScheduleKind kind_ = ScheduleKind::Power;
    double mu_ = 1.0;
    double constant_ = 1.0;
    std::vector<double> values_;
};

double step_at(const StepSchedule& s, std::size_t n);
/// t_n = sum_{k<n} a_k accumulated left to right, so that
/// time_of(s, n+1) == time_of(s, n) + step_at(s, n) bitwise.
double time_of(const StepSchedule& s, std::size_t n);

/// Materialized prefix of a schedule: a_n and t_n for n in [0, n_max].
class Timeline {
public:
    Timeline(const StepSchedule& schedule, std::size_t n_max);

    const StepSchedule& schedule() const { return schedule_; }
    std::size_t n_max() const { return steps_.size() - 1; }
    double step(std::size_t n) const { return steps_.at(n); }
    double time(std::size_t n) const { return times_.at(n); }
    const std::vector<double>& steps() const { return steps_; }
    const std::vector<double>& times() const { return times_; }

    /// Smallest n with t_n >= t, or nullopt if t exceeds t_{n_max}.
    std::optional<std::size_t> first_index_at_or_after(double t) const;

private:
    StepSchedule schedule_;
    std::vector<double> steps_;
    std::vector<double> times_;
};

// ---------------------------------------------------------------------------
// Noise
// ---------------------------------------------------------------------------

enum class NoiseKind { Laplace, BoundedUniform, TruncatedGaussian, Zero };

/// Martingale-difference generator with sub-exponential conditional tails
/// Pr{|M| > u} <= c1 exp(-c2 u) for u >= tail_threshold. Built-ins draw
/// independent coordinates, independent of the state.
class NoiseModel {
public:
    static NoiseModel laplace(std::size_t dim, double scale);
    static NoiseModel bounded_uniform(std::size_t dim, double half_width);
    static NoiseModel truncated_gaussian(std::size_t dim, double sigma, double cutoff);
    static NoiseModel zero(std::size_t dim);

    NoiseKind kind() const { return kind_; }
    std::size_t dim() const { return dim_; }
    double scale() const { return scale_; }
    double cutoff() const { return cutoff_; }
    std::string label() const;

    double tail_threshold() const { return tail_threshold_; }
    double tail_c1(const Vec& state) const;
    double tail_c2(const Vec& state) const;
    /// Smallest c2 over all states (constant for built-ins).
    double min_c2() const { return c2_; }
    double max_c1() const { return c1_; }
    /// Bounded kinds have ||M|| <= bound(); nullopt when unbounded.
    std::optional<double> norm_bound() const;

    void sample_into(const Vec& state, RngStream& rng, Vec& out) const;

private:
    NoiseModel(NoiseKind kind, std::size_t dim, double scale, double cutoff);

    NoiseKind kind_;
    std::size_t dim_;
    double scale_;
    double cutoff_;
    double tail_threshold_ = 1.0;
    double c1_ = 1.0;
    double c2_ = 1.0;
};

Vec sample_noise(const NoiseModel& m, const Vec& state, RngStream& rng);

} // namespace lockin
