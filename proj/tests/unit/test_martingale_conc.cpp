#include "lockin/martingale_conc.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace lockin;

namespace {

const double kSilver2 = (1.0 + std::sqrt(2.0)) * (1.0 + std::sqrt(2.0));

ConcentrationParams unit_params()
{
    return ConcentrationParams{};
}

} // namespace

TEST(Bound, ClampsNearZero)
{
    EXPECT_EQ(concentration_bound(1e-9, unit_params()), 1.0);
    EXPECT_EQ(concentration_bound(0.0, unit_params()), 1.0);
}

TEST(Bound, QuadraticBranchValueClampedToOne)
{
    const auto p = unit_params();
    const double raw = 2.0 * std::exp(-1.0 / kSilver2);
    EXPECT_NEAR(raw, 1.6847, 1e-4); // 2 exp(-0.17157)
    EXPECT_EQ(concentration_bound(1.0, p), 1.0);
}

TEST(Bound, LinearBranchValue)
{
    const double expect = 2.0 * std::exp(-20.0 / kSilver2);
    EXPECT_NEAR(expect, 0.06468, 1e-5);
    EXPECT_NEAR(concentration_bound(20.0, unit_params()), expect, 1e-15);
}

TEST(Bound, MultivariateScalings)
{
    ConcentrationParams p;
    p.dim = 2;
    p.delta = 0.5;
    p.C = 1.5;
    p.gamma1 = 2.0;
    p.gamma2 = 0.7;
    p.beta = 0.1;
    const auto b = branch_constants(p);
    const double d = 2.0;
    EXPECT_DOUBLE_EQ(b.prefactor, 2.0 * d * d);
    EXPECT_DOUBLE_EQ(b.threshold, p.C * p.gamma1 * d * std::sqrt(d) / p.delta);
    EXPECT_DOUBLE_EQ(b.quadratic_divisor, d * d * d);
    EXPECT_DOUBLE_EQ(b.linear_divisor, d * std::sqrt(d));
    const double xi_q = 0.5 * b.threshold;
    EXPECT_NEAR(concentration_bound(xi_q, p),
                std::min(1.0, 8.0 * std::exp(-b.c_quadratic * xi_q * xi_q / (8.0 * p.beta))),
                1e-15);
    const double xi_l = 3.0 * b.threshold;
    EXPECT_NEAR(concentration_bound(xi_l, p),
                std::min(1.0, 8.0 * std::exp(-b.c_linear * xi_l / (d * std::sqrt(d) * p.beta))),
                1e-15);
}

TEST(Bound, BranchesAgreeAtThreshold)
{
    for (std::size_t dim : {1u, 2u, 5u}) {
        ConcentrationParams p;
        p.dim = dim;
        p.delta = 0.3;
        p.C = 2.0;
        p.gamma1 = 1.7;
        p.gamma2 = 0.9;
        p.beta = 0.05;
        const auto b = branch_constants(p);
        const double quad = b.c_quadratic * b.threshold * b.threshold / b.quadratic_divisor;
        const double lin = b.c_linear * b.threshold / b.linear_divisor;
        EXPECT_NEAR(quad, lin, 1e-12 * lin);
    }
}

TEST(Bound, MonotoneInXiAndBeta)
{
    ConcentrationParams p;
    p.delta = 0.5;
    p.C = 2.0;
    p.gamma1 = 3.0;
    p.gamma2 = 1.0;
    p.beta = 0.02;
    double prev = 1.0;
    for (int i = 1; i <= 400; ++i) {
        const double v = concentration_bound(0.05 * i, p);
        EXPECT_LE(v, prev);
        prev = v;
    }
    for (double xi : {0.5, 3.0, 20.0}) {
        double last = 0.0;
        for (double beta : {0.001, 0.01, 0.1, 1.0}) {
            p.beta = beta;
            const double v = concentration_bound(xi, p);
            EXPECT_GE(v, last);
            last = v;
        }
    }
}

TEST(Bound, RenormalizedFormDominates)
{
    for (std::size_t dim : {1u, 3u}) {
        ConcentrationParams p;
        p.dim = dim;
        p.delta = 0.4;
        p.C = 1.3;
        p.gamma1 = 0.8;
        p.gamma2 = 1.1;
        p.beta = 0.2;
        const auto rc = renormalized_constants(p);
        EXPECT_GT(rc.c1, 0.0);
        EXPECT_GT(rc.c2, 0.0);
        for (int i = 1; i <= 300; ++i) {
            const double xi = 0.02 * i;
            EXPECT_GE(renormalized_bound(xi, p), concentration_bound(xi, p));
        }
    }
}

TEST(Params, Validation)
{
    ConcentrationParams p;
    p.C = 0.5;
    EXPECT_THROW(p.validate(), InvalidArgument);
    p.C = 1.0;
    p.dim = 0;
    EXPECT_THROW(p.validate(), InvalidArgument);
}

TEST(Sampler, NullWeightsGiveZero)
{
    RngStream rng(1, 0);
    const auto w = scalar_weights({0.0, 0.0, 0.0});
    EXPECT_EQ(weighted_sum_sampler(w, NoiseModel::laplace(1, 1.0), rng)(0), 0.0);
}

TEST(Sampler, SingleIdentityWeightIsOneDraw)
{
    RngStream a(9, 0), b(9, 0);
    const auto s = weighted_sum_sampler(WeightProfile{Mat::Identity(2, 2)},
                                        NoiseModel::laplace(2, 1.0), a);
    const Vec x = sample_noise(NoiseModel::laplace(2, 1.0), Vec::Zero(2), b);
    EXPECT_EQ(s, x);
}

TEST(Sampler, Reproducible)
{
    const auto w = scalar_weights({0.3, 0.5, 1.0});
    RngStream a(4, 2), b(4, 2);
    EXPECT_EQ(weighted_sum_sampler(w, NoiseModel::laplace(1, 1.0), a)(0),
              weighted_sum_sampler(w, NoiseModel::laplace(1, 1.0), b)(0));
    EXPECT_THROW(weighted_sum_sampler(WeightProfile{Mat::Identity(2, 2)},
                                      NoiseModel::laplace(1, 1.0), a),
                 InvalidArgument);
}

TEST(Wilson, ContainsEstimateAndKnownValue)
{
    const auto ci = wilson_interval(20, 1000);
    EXPECT_LT(ci.lo, 0.02);
    EXPECT_GT(ci.hi, 0.02);
    // closed form with z = 2.5758...
    const double z = kZ99, n = 1000, p = 0.02;
    const double centre = (p + z * z / (2 * n)) / (1 + z * z / n);
    const double half = z / (1 + z * z / n) * std::sqrt(p * (1 - p) / n + z * z / (4 * n * n));
    EXPECT_NEAR(ci.lo, centre - half, 1e-15);
    EXPECT_NEAR(ci.hi, centre + half, 1e-15);
    EXPECT_EQ(wilson_interval(0, 100).lo, 0.0);
    EXPECT_EQ(wilson_interval(100, 100).hi, 1.0);
}

TEST(EmpiricalTail, ZeroNoise)
{
    RngStream rng(1, 0);
    const auto t = empirical_tail(scalar_weights({1.0, 0.5}), NoiseModel::zero(1), 1e-6, 1000, rng);
    EXPECT_EQ(t.exceed, 0u);
    EXPECT_THROW(empirical_tail(scalar_weights({1.0}), NoiseModel::zero(1), 1.0, 999, rng),
                 InvalidArgument);
}

TEST(EmpiricalTail, ExactLaplaceTail)
{
    RngStream rng(31, 0);
    const auto t = empirical_tail(scalar_weights({1.0}), NoiseModel::laplace(1, 1.0),
                                  std::log(50.0), 100000, rng);
    EXPECT_GE(t.p_hat, 0.0156);
    EXPECT_LE(t.p_hat, 0.0244);
    EXPECT_LE(t.ci.lo, 0.02);
    EXPECT_GE(t.ci.hi, 0.02);
}

TEST(EmpiricalTail, GridIndependentOfWorkers)
{
    const auto w = scalar_weights({0.5, 0.25, 0.125});
    const std::vector<double> xis = {0.1, 0.5, 1.0};
    const auto a = empirical_tail_grid(w, NoiseModel::laplace(1, 1.0), xis, 5000, 3, 1);
    const auto b = empirical_tail_grid(w, NoiseModel::laplace(1, 1.0), xis, 5000, 3, 4);
    for (std::size_t i = 0; i < xis.size(); ++i) {
        EXPECT_EQ(a[i].exceed, b[i].exceed);
    }
}

TEST(Domination, GeometricWeights)
{
    const auto sched = StepSchedule::power(1.0);
    const double lambda = 0.45;
    const auto w = geometric_weights(sched, lambda, 0, 50);
    ASSERT_EQ(w.size(), 50u);
    const double tn = time_of(sched, 50);
    EXPECT_NEAR(w[10], std::exp(-lambda * (tn - time_of(sched, 11))) * step_at(sched, 10), 1e-15);

    const auto noise = NoiseModel::laplace(1, 1.0);
    ConcentrationParams p;
    p.delta = 0.5;
    p.C = exact_exponential_moment(noise, p.delta);
    p.gamma1 = 0.0;
    p.beta = 0.0;
    for (double x : w) {
        p.gamma1 += x;
        p.beta = std::max(p.beta, x);
    }
    p.gamma2 = 1.0;
    const auto xis = xi_grid_below_one(p, 20, 1e-3);
    ASSERT_EQ(xis.size(), 20u);
    EXPECT_LT(concentration_bound(xis.front(), p), 1.0);
    EXPECT_NEAR(concentration_bound(xis.back(), p), 1e-3, 1e-6);
    const auto tails = empirical_tail_grid(scalar_weights(w), noise, xis, 20000, 5, 2);
    for (const auto& row : domination_table(p, tails)) {
        EXPECT_TRUE(row.dominated) << "xi " << row.xi;
        EXPECT_LE(row.tail.ci.hi, row.bound);
    }
}

TEST(Moment, ZeroNoiseIsOne)
{
    RngStream rng(1, 0);
    const auto m = verify_moment_condition(NoiseModel::zero(1), 0.5, 1000, rng);
    EXPECT_EQ(m.mean, 1.0);
}

TEST(Moment, LaplaceClosedForm)
{
    const auto noise = NoiseModel::laplace(1, 1.0);
    EXPECT_DOUBLE_EQ(exact_exponential_moment(noise, 0.5), 2.0);
    RngStream rng(6, 0);
    const auto m = verify_moment_condition(noise, 0.5, 100000, rng);
    EXPECT_LE(m.lo, 2.0);
    EXPECT_GE(m.hi, 2.0);
}

TEST(Moment, UniformClosedForm)
{
    const auto noise = NoiseModel::bounded_uniform(1, 0.5);
    EXPECT_NEAR(exact_exponential_moment(noise, 0.8), std::expm1(0.4) / 0.4, 1e-15);
}

TEST(Moment, DivergentMomentRejected)
{
    RngStream rng(1, 0);
    EXPECT_THROW(verify_moment_condition(NoiseModel::laplace(1, 1.0), 1.0, 1000, rng),
                 InvalidArgument);
}
