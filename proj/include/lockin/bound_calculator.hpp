#pragma once

// Lock-in lower bound
//   1 - sum_n C1 exp(-C2 sqrt(eps)/sqrt(a_n)) - sum_n C1 exp(-C2 eps^p / beta_n)
// with the waiting time, the stepsize threshold, the beta_n sequence and the
// order envelopes for power-law steps.

#include "lockin/core_model.hpp"
#include "lockin/martingale_conc.hpp"
#include "lockin/ode_toolkit.hpp"

#include <optional>
#include <string>
#include <vector>

namespace lockin {

/// beta_n for n in (n0, n_max]; element i holds beta_{n0+1+i}. Uses the
/// running recurrence beta_{n+1} = max(a_n, beta_n exp(-lambda a_n)).
std::vector<double> beta_sequence(const StepSchedule& schedule, double lambda, std::size_t n0,
                                  std::size_t n_max);

/// An n0 such that beta_n == a_{n-1} bitwise for every n in (n', n_check]
/// and every start n' >= n0: the last violation seen from the n0 = 0 run.
/// nullopt if the run violates the identity at n_check itself.
std::optional<std::size_t> beta_closed_form_start(const StepSchedule& schedule, double lambda,
                                                  std::size_t n_check);

/// max(0, log(4K/eps)/lambda).
double waiting_time(double epsilon, double K, double lambda);

struct StepThreshold {
    std::size_t N = 0;
    bool monotone_tail_assumed = false; // explicit lists: verified on the list only
};

/// Smallest N with a_n <= eps/(4K) for all n >= N.
StepThreshold stepsize_threshold(double epsilon, double K, const StepSchedule& schedule);

/// Partial sum over [n0, truncation_index] plus a bound on the rest, kept in
/// the log domain so extreme decay does not underflow.
struct TailSum {
    double value = 0.0;
    double log_value = -std::numeric_limits<double>::infinity();
    double remainder = 0.0;
    double log_remainder = -std::numeric_limits<double>::infinity();
    std::size_t truncation_index = 0;
    std::size_t terms = 0;

    double total() const { return value + remainder; }
    double log_total() const;
};

/// sum_{n >= n0} exp(-C / sqrt(a_n)).
TailSum tail_sum_sqrt(const StepSchedule& schedule, double C, std::size_t n0, std::size_t horizon);

/// sum_{n >= n0} exp(-C / beta_n), with beta_{n0} taken as a_{n0-1} (a_0 when
/// n0 = 0). The horizon is extended, if needed, until the closed-form tail
/// regime is reached.
TailSum tail_sum_beta(const StepSchedule& schedule, double lambda, double C, std::size_t n0,
                      std::size_t horizon);

/// n0^{1-mu/2} exp(-C n0^{mu/2}).
double order_envelope(double mu, double C, std::size_t n0);

/// Envelope for the beta tail: exp(-C n0) for mu = 1, lambda > 1;
/// exp(-(C/2) n0) for mu = 1, lambda <= 1; n0^{1-mu} exp(-C (n0-1)^mu) for mu < 1.
double beta_order_envelope(double mu, double lambda, double C, std::size_t n0);

struct OrderStudyRow {
    std::size_t n0 = 0;
    double tail = 0.0; // truncated sum plus remainder bound
    double envelope = 0.0;
    double ratio = 0.0;
    std::size_t horizon = 0;
};

/// Tail of sum exp(-C / sqrt(a_n)) for power(mu) against order_envelope. The
/// horizon doubles until the remainder is below rel_remainder of the sum.
OrderStudyRow order_study_sqrt(double mu, double C, std::size_t n0, double rel_remainder = 1e-9);
/// Tail of sum exp(-C / beta_n) for power(mu) against beta_order_envelope.
OrderStudyRow order_study_beta(double mu, double lambda, double C, std::size_t n0,
                               double rel_remainder = 1e-9);

struct BoundInputs {
    double epsilon = 0.1;
    double C1 = 1.0;
    double C2 = 1.0;
    double lambda = 1.0;
    std::size_t n0 = 0;
    std::size_t horizon = 1'000'000;
    std::optional<double> K;               // fills T and N when present
    std::string constants_source = "user"; // "user" or "fitted"
};

struct BoundReport {
    double epsilon = 0.0;
    std::size_t n0 = 0;
    double T = 0.0;
    std::size_t N = 0; // SIZE_MAX when a_n <= eps/(4K) lies beyond 64-bit indices
    std::optional<double> K;
    bool n0_below_threshold = false;
    double C1 = 0.0;
    double C2 = 0.0;
    double lambda = 0.0;
    double exponent_p = 2.0;
    std::string schedule_label;
    std::string constants_source;
    std::vector<double> beta_head; // first few beta_n, n > n0
    double tail_sqrt = 0.0;        // including the remainder bound
    double tail_beta = 0.0;
    double log_tail_sqrt = 0.0;
    double log_tail_beta = 0.0;
    double lower_bound = 1.0;
    std::size_t truncation_index = 0;
    double truncation_remainder_bound = 0.0;
};

/// Errors when the remainder exceeds one while the truncated tails alone
/// leave the bound non-vacuous.
BoundReport lockin_bound(const BoundInputs& in, const StepSchedule& schedule);

/// Constants assembled from fitted envelopes and the noise tail constants.
struct FittedConstants {
    double K = 1.0;
    double C1 = 0.0;
    double C2 = 0.0;
    double C1_sqrt = 0.0;
    double C2_sqrt = 0.0;
    double C1_beta = 0.0;
    double C2_beta = 0.0;
    ConcentrationParams concentration; // beta left at 1
};

FittedConstants fitted_constants(const EnvelopeFit& fit, const SpectralData& spectral,
                                 const NoiseModel& noise, double epsilon);

} // namespace lockin
