#pragma once

// Concentration of S_n = sum_k alpha_{k,n} X_k for martingale differences with
// a conditional exponential moment E[exp(delta |X_k|) | past] <= C, and a
// Monte Carlo harness that checks the analytic bound against sampled tails.

#include "lockin/core_model.hpp"

#include <vector>

namespace lockin {

struct ConcentrationParams {
    double delta = 1.0;
    double C = 1.0;      // exponential-moment bound, >= 1
    double gamma1 = 1.0; // bound on sum_k ||alpha_{k,n}||
    double gamma2 = 1.0; // bound on max_k ||alpha_{k,n}|| / beta_n
    double beta = 1.0;
    std::size_t dim = 1;

    void validate() const;
};

/// Final branch constants after the optimal-omega algebra.
struct BranchConstants {
    double prefactor = 2.0;   // 2 d^2
    double threshold = 0.0;   // C gamma1 d sqrt(d) / delta
    double c_quadratic = 0.0; // delta^2 / (C gamma1 gamma2 (1+sqrt2)^2)
    double c_linear = 0.0;    // delta / (gamma2 (1+sqrt2)^2)
    double quadratic_divisor = 1.0; // d^3
    double linear_divisor = 1.0;    // d sqrt(d)
};

BranchConstants branch_constants(const ConcentrationParams& p);

/// Upper bound on Pr{||S_n|| > xi}, clamped to [0, 1].
double concentration_bound(double xi, const ConcentrationParams& p);

/// Same bound with the branch point moved to xi = 1:
///   c1 exp(-c2 xi^2 / beta) for xi <= 1, c1 exp(-c2 xi / beta) for xi > 1.
/// The constants are chosen so this form dominates concentration_bound.
struct RenormalizedConstants {
    double c1 = 0.0;
    double c2 = 0.0;
};

RenormalizedConstants renormalized_constants(const ConcentrationParams& p);
double renormalized_bound(double xi, const ConcentrationParams& p);

// ---------------------------------------------------------------------------
// Monte Carlo harness
// ---------------------------------------------------------------------------

/// Weights alpha_{k,n}, each d x d (1 x 1 for scalar weights).
using WeightProfile = std::vector<Mat>;

WeightProfile scalar_weights(const std::vector<double>& w);

/// alpha_k = exp(-lambda (t_n - t_{k+1})) a_k for k in [n0, n).
std::vector<double> geometric_weights(const StepSchedule& schedule, double lambda, std::size_t n0,
                                      std::size_t n);

/// One draw of S_n = sum_k alpha_k X_k with X_k from `noise` at the origin.
Vec weighted_sum_sampler(const WeightProfile& weights, const NoiseModel& noise, RngStream& rng);

struct WilsonInterval {
    double lo = 0.0;
    double hi = 1.0;
};

inline constexpr double kZ99 = 2.5758293035489004; // two-sided 99% normal quantile

WilsonInterval wilson_interval(std::size_t successes, std::size_t trials, double z = kZ99);

struct TailEstimate {
    double xi = 0.0;
    std::size_t exceed = 0;
    std::size_t trials = 0;
    double p_hat = 0.0;
    WilsonInterval ci;
};

/// Fraction of trials with ||S_n|| > xi (trials >= 1000).
TailEstimate empirical_tail(const WeightProfile& weights, const NoiseModel& noise, double xi,
                            std::size_t trials, RngStream& rng);

/// Grid version: trial i draws from RngStream(seed, i), so the tallies do
/// not depend on `workers`.
std::vector<TailEstimate> empirical_tail_grid(const WeightProfile& weights,
                                              const NoiseModel& noise,
                                              const std::vector<double>& xis, std::size_t trials,
                                              std::uint64_t seed, std::size_t workers = 1);

/// `points` xi values, evenly spaced from where the bound first drops below
/// one up to where it reaches `lowest_bound`.
std::vector<double> xi_grid_below_one(const ConcentrationParams& p, std::size_t points,
                                      double lowest_bound);

struct MomentEstimate {
    double mean = 1.0;
    double lo = 1.0;
    double hi = 1.0;
    std::size_t trials = 0;
};

/// Estimates E exp(delta ||X||). Requires delta < min c2 of the model.
MomentEstimate verify_moment_condition(const NoiseModel& noise, double delta, std::size_t trials,
                                       RngStream& rng);

/// Closed-form E exp(delta |X|) for 1-D built-ins; throws for other cases.
double exact_exponential_moment(const NoiseModel& noise, double delta);

struct DominationRow {
    double xi = 0.0;
    double bound = 1.0;
    TailEstimate tail;
    bool dominated = true; // vacuous (bound >= 1) rows count as dominated
};

std::vector<DominationRow> domination_table(const ConcentrationParams& p,
                                            const std::vector<TailEstimate>& tails);

} // namespace lockin
