#include "lockin/martingale_conc.hpp"

#include "lockin/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace lockin {

namespace {

const double kOnePlusSqrt2Sq = (1.0 + std::numbers::sqrt2) * (1.0 + std::numbers::sqrt2);

} // namespace

void ConcentrationParams::validate() const
{
    if (!(delta > 0.0) || !(C >= 1.0) || !(gamma1 > 0.0) || !(gamma2 > 0.0) || !(beta > 0.0) ||
        dim == 0) {
        throw InvalidArgument("concentration parameters must be positive with C >= 1 and d >= 1");
    }
}

BranchConstants branch_constants(const ConcentrationParams& p)
{
    p.validate();
    const double d = static_cast<double>(p.dim);
    BranchConstants b;
    b.prefactor = 2.0 * d * d;
    b.quadratic_divisor = d * d * d;
    b.linear_divisor = d * std::sqrt(d);
    b.threshold = p.C * p.gamma1 * b.linear_divisor / p.delta;
    b.c_quadratic = p.delta * p.delta / (p.C * p.gamma1 * p.gamma2 * kOnePlusSqrt2Sq);
    b.c_linear = p.delta / (p.gamma2 * kOnePlusSqrt2Sq);
    return b;
}

double concentration_bound(double xi, const ConcentrationParams& p)
{
    if (!(xi > 0.0)) {
        return 1.0;
    }
    const auto b = branch_constants(p);
    const double exponent = xi <= b.threshold
                                ? b.c_quadratic * xi * xi / (b.quadratic_divisor * p.beta)
                                : b.c_linear * xi / (b.linear_divisor * p.beta);
    return std::min(1.0, b.prefactor * std::exp(-exponent));
}

RenormalizedConstants renormalized_constants(const ConcentrationParams& p)
{
    const auto b = branch_constants(p);
    // For xi <= 1 the linear branch satisfies xi >= xi^2, and for xi > 1 the
    // quadratic branch satisfies xi^2 >= xi, so the smaller rate covers both.
    RenormalizedConstants r;
    r.c1 = b.prefactor;
    r.c2 = std::min(b.c_quadratic / b.quadratic_divisor, b.c_linear / b.linear_divisor);
    return r;
}

double renormalized_bound(double xi, const ConcentrationParams& p)
{
    if (!(xi > 0.0)) {
        return 1.0;
    }
    const auto r = renormalized_constants(p);
    const double power = xi <= 1.0 ? xi * xi : xi;
    return std::min(1.0, r.c1 * std::exp(-r.c2 * power / p.beta));
}

WeightProfile scalar_weights(const std::vector<double>& w)
{
    WeightProfile out;
    out.reserve(w.size());
    for (double v : w) {
        out.push_back(Mat::Constant(1, 1, v));
    }
    return out;
}

std::vector<double> geometric_weights(const StepSchedule& schedule, double lambda, std::size_t n0,
                                      std::size_t n)
{
    if (!(n > n0)) {
        throw InvalidArgument("geometric_weights requires n > n0");
    }
    const Timeline tl(schedule, n);
    std::vector<double> w;
    w.reserve(n - n0);
    for (std::size_t k = n0; k < n; ++k) {
        w.push_back(std::exp(-lambda * (tl.time(n) - tl.time(k + 1))) * tl.step(k));
    }
    return w;
}

Vec weighted_sum_sampler(const WeightProfile& weights, const NoiseModel& noise, RngStream& rng)
{
    const auto d = static_cast<Eigen::Index>(noise.dim());
    const Vec origin = Vec::Zero(d);
    Vec s = Vec::Zero(d);
    Vec x(d);
    for (const auto& a : weights) {
        if (a.rows() != d || a.cols() != d) {
            throw InvalidArgument("weight dimension does not match noise dimension");
        }
        noise.sample_into(origin, rng, x);
        s.noalias() += a * x;
    }
    return s;
}

WilsonInterval wilson_interval(std::size_t successes, std::size_t trials, double z)
{
    if (trials == 0) {
        return {0.0, 1.0};
    }
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double centre = (p + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    // the score interval reaches the boundary exactly at 0 or n successes
    const double lo = successes == 0 ? 0.0 : std::max(0.0, centre - half);
    const double hi = successes == trials ? 1.0 : std::min(1.0, centre + half);
    return {lo, hi};
}

TailEstimate empirical_tail(const WeightProfile& weights, const NoiseModel& noise, double xi,
                            std::size_t trials, RngStream& rng)
{
    if (trials < 1000) {
        throw InvalidArgument("empirical_tail needs at least 1000 trials");
    }
    TailEstimate t;
    t.xi = xi;
    t.trials = trials;
    for (std::size_t i = 0; i < trials; ++i) {
        if (weighted_sum_sampler(weights, noise, rng).norm() > xi) {
            ++t.exceed;
        }
    }
    t.p_hat = static_cast<double>(t.exceed) / static_cast<double>(trials);
    t.ci = wilson_interval(t.exceed, trials);
    return t;
}

std::vector<TailEstimate> empirical_tail_grid(const WeightProfile& weights,
                                              const NoiseModel& noise,
                                              const std::vector<double>& xis, std::size_t trials,
                                              std::uint64_t seed, std::size_t workers)
{
    if (trials < 1000) {
        throw InvalidArgument("empirical_tail needs at least 1000 trials");
    }
    workers = std::max<std::size_t>(1, std::min(workers, trials));
    std::vector<std::vector<std::size_t>> counts(workers, std::vector<std::size_t>(xis.size(), 0));
    parallel_for(trials, workers, [&](std::size_t w, std::size_t i) {
        RngStream rng(seed, i);
        const double norm = weighted_sum_sampler(weights, noise, rng).norm();
        for (std::size_t j = 0; j < xis.size(); ++j) {
            if (norm > xis[j]) {
                ++counts[w][j];
            }
        }
    });
    std::vector<TailEstimate> out(xis.size());
    for (std::size_t j = 0; j < xis.size(); ++j) {
        out[j].xi = xis[j];
        out[j].trials = trials;
        for (const auto& c : counts) {
            out[j].exceed += c[j];
        }
        out[j].p_hat = static_cast<double>(out[j].exceed) / static_cast<double>(trials);
        out[j].ci = wilson_interval(out[j].exceed, trials);
    }
    return out;
}

std::vector<double> xi_grid_below_one(const ConcentrationParams& p, std::size_t points,
                                      double lowest_bound)
{
    if (points < 2 || !(lowest_bound > 0.0 && lowest_bound < 1.0)) {
        throw InvalidArgument("xi grid needs >= 2 points and a target bound in (0, 1)");
    }
    // the bound is nonincreasing in xi; bracket then bisect both ends
    auto first_below = [&](double target) {
        double hi = 1.0;
        while (concentration_bound(hi, p) >= target) {
            hi *= 2.0;
            if (hi > 1e300) {
                throw NumericalError("concentration bound never drops below target");
            }
        }
        double lo = 0.0;
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (lo + hi);
            (concentration_bound(mid, p) >= target ? lo : hi) = mid;
        }
        return hi;
    };
    const double a = first_below(1.0);
    const double b = std::max(first_below(lowest_bound), a);
    std::vector<double> grid(points);
    for (std::size_t i = 0; i < points; ++i) {
        grid[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(points - 1);
    }
    return grid;
}

MomentEstimate verify_moment_condition(const NoiseModel& noise, double delta, std::size_t trials,
                                       RngStream& rng)
{
    if (!(delta > 0.0)) {
        throw InvalidArgument("delta must be positive");
    }
    if (noise.kind() == NoiseKind::Zero) {
        return {1.0, 1.0, 1.0, trials};
    }
    if (!(delta < noise.min_c2())) {
        throw InvalidArgument("delta >= tail rate c2: exponential moment may diverge");
    }
    if (trials < 2) {
        throw InvalidArgument("moment estimate needs at least two trials");
    }
    const auto d = static_cast<Eigen::Index>(noise.dim());
    const Vec origin = Vec::Zero(d);
    Vec x(d);
    double mean = 0.0;
    double m2 = 0.0;
    for (std::size_t i = 0; i < trials; ++i) {
        noise.sample_into(origin, rng, x);
        const double v = std::exp(delta * x.norm());
        const double dv = v - mean;
        mean += dv / static_cast<double>(i + 1);
        m2 += dv * (v - mean);
    }
    const double se = std::sqrt(m2 / static_cast<double>(trials - 1) / static_cast<double>(trials));
    return {mean, mean - kZ99 * se, mean + kZ99 * se, trials};
}

double exact_exponential_moment(const NoiseModel& noise, double delta)
{
    if (noise.dim() != 1) {
        throw InvalidArgument("closed-form moment is only available in one dimension");
    }
    switch (noise.kind()) {
    case NoiseKind::Zero:
        return 1.0;
    case NoiseKind::Laplace:
        if (!(delta * noise.scale() < 1.0)) {
            throw InvalidArgument("delta >= tail rate c2: exponential moment diverges");
        }
        return 1.0 / (1.0 - delta * noise.scale());
    case NoiseKind::BoundedUniform: {
        const double dw = delta * noise.scale();
        return std::expm1(dw) / dw;
    }
    case NoiseKind::TruncatedGaussian:
        break;
    }
    throw InvalidArgument("no closed-form moment for this noise kind");
}

std::vector<DominationRow> domination_table(const ConcentrationParams& p,
                                            const std::vector<TailEstimate>& tails)
{
    std::vector<DominationRow> rows;
    rows.reserve(tails.size());
    for (const auto& t : tails) {
        DominationRow r;
        r.xi = t.xi;
        r.bound = concentration_bound(t.xi, p);
        r.tail = t;
        r.dominated = r.bound >= 1.0 || t.ci.hi <= r.bound;
        rows.push_back(r);
    }
    return rows;
}

} // namespace lockin
