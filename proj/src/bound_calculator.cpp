#include "lockin/bound_calculator.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>

namespace lockin {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::size_t kMaxExtendedHorizon = 2'000'000'000;

double log_add(double a, double b)
{
    if (a == kNegInf) {
        return b;
    }
    if (b == kNegInf) {
        return a;
    }
    const double m = std::max(a, b);
    if (m == std::numeric_limits<double>::infinity()) {
        return m;
    }
    return m + std::log1p(std::exp(-std::abs(a - b)));
}

// Streaming log-sum-exp.
class LogSum {
public:
    void add(double log_term)
    {
        if (log_term == kNegInf) {
            return;
        }
        if (log_term <= max_) {
            scaled_ += std::exp(log_term - max_);
        } else {
            scaled_ = scaled_ * std::exp(max_ - log_term) + 1.0;
            max_ = log_term;
        }
    }
    double log() const { return max_ == kNegInf ? kNegInf : max_ + std::log(scaled_); }

private:
    double max_ = kNegInf;
    double scaled_ = 0.0;
};

// log of an upper bound on Gamma(a, x) = int_x^inf t^{a-1} e^{-t} dt.
double log_upper_gamma_bound(double a, double x)
{
    double best = std::lgamma(a);
    if (x > 0.0 && x > a - 1.0) {
        double v = (a - 1.0) * std::log(x) - x;
        if (a > 1.0) {
            v -= std::log1p(-(a - 1.0) / x);
        }
        best = std::min(best, v);
    }
    return best;
}

// log of int_{y0}^inf exp(-c y^q) dy.
double log_stretched_exp_tail(double c, double q, double y0)
{
    if (!(c > 0.0)) {
        return std::numeric_limits<double>::infinity();
    }
    const double a = 1.0 / q;
    return log_upper_gamma_bound(a, c * std::pow(y0, q)) - std::log(q) - a * std::log(c);
}

void finish(TailSum& s, const LogSum& acc)
{
    s.log_value = acc.log();
    s.value = std::exp(s.log_value);
    s.remainder = std::exp(s.log_remainder);
}

// Smallest n >= 1 with lambda n >= mu (n+1)^mu and lambda >= mu^2 (n+1)^(mu-1).
// From there on a_n >= a_{n-1} exp(-lambda a_n) for power steps.
std::size_t monotone_regime_start(double mu, double lambda)
{
    auto ok = [&](double n) {
        return lambda * n >= mu * std::pow(n + 1.0, mu) &&
               lambda >= mu * mu * std::pow(n + 1.0, mu - 1.0);
    };
    double hi = 1.0;
    while (!ok(hi)) {
        hi *= 2.0;
        if (hi > 1e18) {
            throw NumericalError("beta tail never reaches the closed-form regime");
        }
    }
    double lo = std::floor(hi / 2.0);
    if (ok(lo)) {
        return static_cast<std::size_t>(lo);
    }
    while (hi - lo > 1.0) {
        const double mid = std::floor(0.5 * (lo + hi));
        (ok(mid) ? hi : lo) = mid;
    }
    return static_cast<std::size_t>(hi);
}

// First index from which a_n is the pure power value.
std::size_t power_region_start(const StepSchedule& s)
{
    if (s.kind() != ScheduleKind::ConstantThenPower) {
        return 0;
    }
    // (n+1)^{-mu} <= c  <=>  n + 1 >= c^{-1/mu}
    const double n = std::ceil(std::pow(s.constant(), -1.0 / s.mu())) - 1.0;
    std::size_t k = n > 0.0 ? static_cast<std::size_t>(n) : 0;
    while (k > 0 && std::pow(static_cast<double>(k), -s.mu()) <= s.constant()) {
        --k;
    }
    return k + 1;
}

} // namespace

double TailSum::log_total() const { return log_add(log_value, log_remainder); }

std::vector<double> beta_sequence(const StepSchedule& schedule, double lambda, std::size_t n0,
                                  std::size_t n_max)
{
    if (!(n_max > n0)) {
        throw InvalidArgument("beta_sequence requires n_max > n0");
    }
    if (!(lambda > 0.0)) {
        throw InvalidArgument("lambda must be positive");
    }
    if (auto len = schedule.length(); len && n_max > *len) {
        throw InvalidArgument("beta_sequence runs past the explicit step list");
    }
    std::vector<double> out;
    out.reserve(n_max - n0);
    double beta = schedule.step(n0);
    out.push_back(beta);
    for (std::size_t n = n0 + 1; n < n_max; ++n) {
        const double a = schedule.step(n);
        beta = std::max(a, beta * std::exp(-lambda * a));
        out.push_back(beta);
    }
    return out;
}

std::optional<std::size_t> beta_closed_form_start(const StepSchedule& schedule, double lambda,
                                                  std::size_t n_check)
{
    if (n_check < 2) {
        return std::nullopt;
    }
    // With the start at n0 = 0, beta_n == a_{n-1} on (m, n_check] implies the
    // same for every later start (fewer terms in the max, a_{n-1} always
    // present). Scan backwards for the last violation.
    const auto beta = beta_sequence(schedule, lambda, 0, n_check);
    std::size_t last_bad = 0;
    bool any_bad = false;
    for (std::size_t i = 0; i < beta.size(); ++i) {
        const std::size_t n = i + 1;
        if (beta[i] != schedule.step(n - 1)) {
            last_bad = n;
            any_bad = true;
        }
    }
    if (!any_bad) {
        return 0;
    }
    // From n0 = last_bad on, beta_n for n > n0 is a max over k >= n0 only,
    // which cannot exceed the n0 = 0 value (already equal to a_{n-1}).
    if (last_bad >= n_check) {
        return std::nullopt;
    }
    return last_bad;
}

double waiting_time(double epsilon, double K, double lambda)
{
    if (!(epsilon > 0.0 && K > 0.0 && lambda > 0.0)) {
        throw InvalidArgument("waiting_time needs positive epsilon, K, lambda");
    }
    return std::max(0.0, std::log(4.0 * K / epsilon) / lambda);
}

StepThreshold stepsize_threshold(double epsilon, double K, const StepSchedule& schedule)
{
    if (!(epsilon > 0.0 && K > 0.0)) {
        throw InvalidArgument("stepsize_threshold needs positive epsilon and K");
    }
    const double q = epsilon / (4.0 * K);
    StepThreshold out;
    if (schedule.kind() == ScheduleKind::ExplicitList) {
        out.monotone_tail_assumed = true;
        const auto& v = schedule.values();
        std::size_t N = v.size();
        while (N > 0 && v[N - 1] <= q) {
            --N;
        }
        if (N == v.size()) {
            throw NumericalError("step threshold eps/(4K) never reached within the step list");
        }
        out.N = N;
        return out;
    }
    // a_n is nonincreasing; invert (n+1)^{-mu} <= q and fix rounding locally.
    const double guess = std::ceil(std::pow(q, -1.0 / schedule.mu())) - 1.0;
    if (!(guess < 1e18)) {
        throw NumericalError("step threshold index overflows");
    }
    std::size_t N = guess > 0.0 ? static_cast<std::size_t>(guess) : 0;
    while (N > 0 && schedule.step(N - 1) <= q) {
        --N;
    }
    while (schedule.step(N) > q) {
        ++N;
    }
    out.N = N;
    return out;
}

TailSum tail_sum_sqrt(const StepSchedule& schedule, double C, std::size_t n0, std::size_t horizon)
{
    if (!(C >= 0.0)) {
        throw InvalidArgument("tail constant must be nonnegative");
    }
    TailSum s;
    LogSum acc;
    if (auto len = schedule.length()) {
        // finite list: the whole sum is explicit
        for (std::size_t n = n0; n < *len; ++n) {
            acc.add(-C / std::sqrt(schedule.step(n)));
            ++s.terms;
        }
        s.truncation_index = *len == 0 ? 0 : *len - 1;
        finish(s, acc);
        return s;
    }
    const std::size_t H = std::max(horizon, n0);
    for (std::size_t n = n0; n <= H; ++n) {
        acc.add(-C / std::sqrt(schedule.step(n)));
        ++s.terms;
    }
    s.truncation_index = H;
    // a_n <= (n+1)^{-mu}: the discarded terms are below exp(-C (n+1)^{mu/2}),
    // decreasing in n, so the integral from H dominates them.
    s.log_remainder = log_stretched_exp_tail(C, 0.5 * schedule.mu(), static_cast<double>(H) + 1.0);
    finish(s, acc);
    return s;
}

TailSum tail_sum_beta(const StepSchedule& schedule, double lambda, double C, std::size_t n0,
                      std::size_t horizon)
{
    if (!(C >= 0.0)) {
        throw InvalidArgument("tail constant must be nonnegative");
    }
    if (!(lambda > 0.0)) {
        throw InvalidArgument("lambda must be positive");
    }
    TailSum s;
    LogSum acc;
    double beta = schedule.step(n0 == 0 ? 0 : n0 - 1);

    if (auto len = schedule.length()) {
        if (n0 > *len) {
            throw InvalidArgument("n0 lies beyond the explicit step list");
        }
        for (std::size_t n = n0; n <= *len; ++n) {
            acc.add(-C / beta);
            ++s.terms;
            if (n < *len) {
                const double a = schedule.step(n);
                beta = n == n0 ? a : std::max(a, beta * std::exp(-lambda * a));
            }
        }
        s.truncation_index = *len;
        finish(s, acc);
        return s;
    }

    const double mu = schedule.mu();
    const bool closed_form_tail = mu < 1.0 || lambda > 1.0;
    const std::size_t k_star = closed_form_tail ? monotone_regime_start(mu, lambda) : 0;
    const std::size_t power_start = power_region_start(schedule);
    const std::size_t min_H = std::max({horizon, n0, k_star, power_start + 1});

    std::size_t n = n0;
    for (;; ++n) {
        acc.add(-C / beta);
        ++s.terms;
        if (n >= min_H && (!closed_form_tail || beta == schedule.step(n - 1))) {
            break;
        }
        if (n >= kMaxExtendedHorizon) {
            throw NumericalError("beta tail did not reach its closed-form regime");
        }
        const double a = schedule.step(n);
        beta = n == n0 ? a : std::max(a, beta * std::exp(-lambda * a));
    }
    const std::size_t H = n;
    s.truncation_index = H;
    const double Hd = static_cast<double>(H);
    if (closed_form_tail) {
        // beta_m = a_{m-1} = m^{-mu} for m > H: sum_{j >= H} exp(-C (j+1)^mu)
        s.log_remainder = log_add(-C * std::pow(Hd + 1.0, mu),
                                  log_stretched_exp_tail(C, mu, Hd + 1.0));
    } else {
        // mu = 1, lambda <= 1: beta_m <= B (m+1)^{-lambda} for m > H
        const double B = std::max(beta * std::pow(Hd + 1.0, lambda),
                                  std::pow(Hd + 2.0, lambda) / (Hd + 1.0));
        s.log_remainder = log_stretched_exp_tail(C / B, lambda, Hd + 1.0);
    }
    finish(s, acc);
    return s;
}

double order_envelope(double mu, double C, std::size_t n0)
{
    if (!(mu > 0.0 && mu <= 1.0)) {
        throw InvalidArgument("mu out of (0,1]");
    }
    const double n = static_cast<double>(n0);
    return std::pow(n, 1.0 - 0.5 * mu) * std::exp(-C * std::pow(n, 0.5 * mu));
}

double beta_order_envelope(double mu, double lambda, double C, std::size_t n0)
{
    if (!(mu > 0.0 && mu <= 1.0)) {
        throw InvalidArgument("mu out of (0,1]");
    }
    const double n = static_cast<double>(n0);
    if (mu == 1.0) {
        return lambda > 1.0 ? std::exp(-C * n) : std::exp(-0.5 * C * n);
    }
    return std::pow(n, 1.0 - mu) * std::exp(-C * std::pow(n - 1.0, mu));
}

namespace {

template <class TailFn>
OrderStudyRow order_study(std::size_t n0, double envelope, double rel_remainder, TailFn tail)
{
    OrderStudyRow row;
    row.n0 = n0;
    row.envelope = envelope;
    std::size_t H = 2 * n0 + 16;
    for (;;) {
        const TailSum ts = tail(H);
        row.tail = ts.total();
        row.horizon = ts.truncation_index;
        if (ts.remainder <= rel_remainder * ts.value || H > kMaxExtendedHorizon / 2) {
            break;
        }
        H *= 2;
    }
    row.ratio = row.tail / row.envelope;
    return row;
}

} // namespace

OrderStudyRow order_study_sqrt(double mu, double C, std::size_t n0, double rel_remainder)
{
    const StepSchedule s = StepSchedule::power(mu);
    return order_study(n0, order_envelope(mu, C, n0), rel_remainder,
                       [&](std::size_t H) { return tail_sum_sqrt(s, C, n0, H); });
}

OrderStudyRow order_study_beta(double mu, double lambda, double C, std::size_t n0,
                               double rel_remainder)
{
    const StepSchedule s = StepSchedule::power(mu);
    return order_study(n0, beta_order_envelope(mu, lambda, C, n0), rel_remainder,
                       [&](std::size_t H) { return tail_sum_beta(s, lambda, C, n0, H); });
}

BoundReport lockin_bound(const BoundInputs& in, const StepSchedule& schedule)
{
    if (!(in.epsilon > 0.0)) {
        throw InvalidArgument("epsilon must be positive");
    }
    if (!(in.C1 >= 0.0) || !(in.C2 >= 0.0)) {
        throw InvalidArgument("C1 and C2 must be nonnegative");
    }
    if (!(in.lambda > 0.0)) {
        throw InvalidArgument("lambda must be positive");
    }
    BoundReport r;
    r.epsilon = in.epsilon;
    r.n0 = in.n0;
    r.C1 = in.C1;
    r.C2 = in.C2;
    r.lambda = in.lambda;
    r.exponent_p = in.epsilon <= 1.0 ? 2.0 : 1.0;
    r.schedule_label = schedule.label();
    r.constants_source = in.constants_source;
    r.K = in.K;
    if (in.K) {
        r.T = waiting_time(in.epsilon, *in.K, in.lambda);
        try {
            r.N = stepsize_threshold(in.epsilon, *in.K, schedule).N;
        } catch (const NumericalError&) {
            // informational only: the threshold lies beyond any index we can hold
            r.N = std::numeric_limits<std::size_t>::max();
        }
        r.n0_below_threshold = in.n0 < r.N;
    }
    {
        std::size_t head_end = in.n0 + 20;
        if (auto len = schedule.length()) {
            head_end = std::min(head_end, *len);
        }
        if (head_end > in.n0) {
            r.beta_head = beta_sequence(schedule, in.lambda, in.n0, head_end);
        }
    }
    if (in.C1 == 0.0) {
        r.tail_sqrt = r.tail_beta = 0.0;
        r.log_tail_sqrt = r.log_tail_beta = kNegInf;
        r.lower_bound = 1.0;
        r.truncation_index = std::max(in.horizon, in.n0);
        return r;
    }
    const TailSum sq = tail_sum_sqrt(schedule, in.C2 * std::sqrt(in.epsilon), in.n0, in.horizon);
    const TailSum bt = tail_sum_beta(schedule, in.lambda,
                                     in.C2 * std::pow(in.epsilon, r.exponent_p), in.n0, in.horizon);
    const double logC1 = std::log(in.C1);
    r.log_tail_sqrt = logC1 + sq.log_total();
    r.log_tail_beta = logC1 + bt.log_total();
    r.tail_sqrt = std::exp(r.log_tail_sqrt);
    r.tail_beta = std::exp(r.log_tail_beta);
    r.truncation_index = std::max(sq.truncation_index, bt.truncation_index);
    r.truncation_remainder_bound = in.C1 * (sq.remainder + bt.remainder);
    const double partial = in.C1 * (sq.value + bt.value);
    if (r.truncation_remainder_bound > 1.0 && partial < 1.0) {
        throw NumericalError("horizon too small: tail remainder bound exceeds 1");
    }
    r.lower_bound = std::clamp(1.0 - r.tail_sqrt - r.tail_beta, 0.0, 1.0);
    return r;
}

FittedConstants fitted_constants(const EnvelopeFit& fit, const SpectralData& spectral,
                                 const NoiseModel& noise, double epsilon)
{
    if (!(epsilon > 0.0)) {
        throw InvalidArgument("epsilon must be positive");
    }
    if (!(fit.K3 > 0.0)) {
        throw InvalidArgument("fitted K3 must be positive");
    }
    FittedConstants fc;
    fc.K = std::max({spectral.K_tilde, fit.K1, fit.K3, fit.K4});
    const double d = static_cast<double>(spectral.x_star.size());
    const double u_bar = noise.tail_threshold();
    const double c1 = noise.max_c1();
    const double c2 = noise.min_c2();

    fc.C1_sqrt = c1;
    fc.C2_sqrt = c2 / (2.0 * std::sqrt(fc.K));

    ConcentrationParams& p = fc.concentration;
    if (noise.kind() == NoiseKind::Zero) {
        p.delta = 1.0;
        p.C = 1.0;
    } else {
        // E exp(delta |X|) <= exp(delta u) + c1 exp(-delta u) at delta = c2 / 2
        p.delta = 0.5 * c2;
        p.C = std::exp(p.delta * u_bar) + c1 * std::exp(-p.delta * u_bar);
    }
    p.gamma1 = fit.K3 * std::exp(spectral.lambda) / spectral.lambda;
    p.gamma2 = fit.K3;
    p.beta = 1.0;
    p.dim = static_cast<std::size_t>(d);
    const auto b = branch_constants(p);
    // xi = eps / (4K); either branch is covered by the smaller rate
    fc.C1_beta = b.prefactor;
    fc.C2_beta = std::min(b.c_quadratic / (16.0 * fc.K * fc.K * b.quadratic_divisor),
                          b.c_linear / (4.0 * fc.K * b.linear_divisor));
    fc.C1 = std::max(fc.C1_sqrt, fc.C1_beta);
    fc.C2 = std::min(fc.C2_sqrt, fc.C2_beta);
    return fc;
}

} // namespace lockin
