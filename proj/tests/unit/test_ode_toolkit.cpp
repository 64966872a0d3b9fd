#include "lockin/ode_toolkit.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace lockin;

namespace {

DriftFunction named(const std::string& name, std::map<std::string, double> params = {})
{
    ScenarioSpec s;
    s.name = name;
    s.params = std::move(params);
    return make_drift(s);
}

DriftFunction affine(const Mat& A)
{
    ScenarioSpec s;
    s.name = "affine";
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
        s.matrix.emplace_back();
        for (Eigen::Index j = 0; j < A.cols(); ++j) {
            s.matrix.back().push_back(A(i, j));
        }
    }
    return make_drift(s);
}

Vec v1(double x) { return Vec::Constant(1, x); }

double lyap_residual(const Mat& A, const Mat& P)
{
    return (A.transpose() * P + P * A + Mat::Identity(A.rows(), A.cols())).norm();
}

bool positive_definite(const Mat& P)
{
    Eigen::SelfAdjointEigenSolver<Mat> es(P);
    return es.eigenvalues().minCoeff() > 0.0;
}

} // namespace

TEST(SolveOde, LinearDecay)
{
    const auto h = named("linear-1d", {{"a", 1.0}});
    EXPECT_NEAR(solve_ode(h, 0.0, v1(1.0), 1.0)(0), std::exp(-1.0), 1e-8);
}

TEST(SolveOde, ZeroLengthReturnsInput)
{
    const auto h = named("double-well-1d");
    EXPECT_EQ(solve_ode(h, 2.5, v1(0.1234), 2.5)(0), 0.1234);
    EXPECT_THROW(solve_ode(h, 2.5, v1(0.1), 2.0), InvalidArgument);
}

TEST(SolveOde, DoubleWellAgainstFineRk4)
{
    const auto h = named("double-well-1d");
    const double oracle =
        oracle::rk4_scalar([](double x) { return x - x * x * x; }, 0.5, 5.0, 1e-5);
    EXPECT_NEAR(solve_ode(h, 0.0, v1(0.5), 5.0)(0), oracle, 1e-6);
}

TEST(Fundamental, LinearClosedForm)
{
    const auto h = named("linear-1d", {{"a", 1.0}});
    for (double u0 : {-2.0, 0.0, 0.7}) {
        EXPECT_NEAR(fundamental_matrix(h, 1.0, v1(u0), 3.5)(0, 0), std::exp(-2.5), 1e-9);
    }
    EXPECT_EQ(fundamental_matrix(h, 1.0, v1(0.3), 1.0), Mat::Identity(1, 1));
}

TEST(Fundamental, DoubleWellAgainstQuadratureOracle)
{
    const auto h = named("double-well-1d");
    const double oracle = oracle::scalar_fundamental([](double x) { return x - x * x * x; },
                                                     [](double x) { return 1.0 - 3.0 * x * x; },
                                                     0.8, 2.0, 1e-5);
    EXPECT_NEAR(fundamental_matrix(h, 0.0, v1(0.8), 2.0)(0, 0), oracle, 1e-6);
}

TEST(Fundamental, SpiralMatchesMatrixExponential)
{
    Mat A(2, 2);
    A << -1.0, 2.0, -2.0, -1.0;
    const auto h = affine(A);
    Vec u(2);
    u << 0.3, -0.2;
    const Mat phi = fundamental_matrix(h, 0.0, u, 1.7, 1e-11);
    EXPECT_LE((phi - (A * 1.7).exp()).norm(), 1e-9);
}

TEST(Fundamental, SampledSweepMatchesSingleSolves)
{
    const auto h = named("double-well-1d");
    const std::vector<double> times = {0.0, 0.4, 1.0, 3.0};
    const auto opts = OdeOptions::with_tol(1e-11);
    const auto sweep = flow_with_fundamental_at(h, 0.0, v1(1.3), times, opts);
    ASSERT_EQ(sweep.size(), times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
        const auto single = flow_with_fundamental(h, 0.0, v1(1.3), times[i], opts);
        EXPECT_NEAR(sweep[i].state(0), single.state(0), 1e-9);
        EXPECT_NEAR(sweep[i].phi(0, 0), single.phi(0, 0), 1e-9);
    }
}

TEST(Flow, GroupAndCocycleProperties)
{
    const double tol = 1e-10;
    const auto opts = OdeOptions::with_tol(tol);
    const auto h = named("spiral-2d", {{"sigma", 0.5}, {"omega", 3.0}});
    const auto dw = named("double-well-1d");
    for (const auto* drift : {&h, &dw}) {
        Vec u = Vec::Constant(static_cast<Eigen::Index>(drift->dim()), 0.6);
        const double s = 0.0, m = 1.3, t = 4.0;
        const auto direct = flow_with_fundamental(*drift, s, u, t, opts);
        const auto first = flow_with_fundamental(*drift, s, u, m, opts);
        const auto second = flow_with_fundamental(*drift, m, first.state, t, opts);
        EXPECT_LE((direct.state - second.state).norm(), 2.0 * tol);
        EXPECT_LE((direct.phi - second.phi * first.phi).norm(), 5.0 * tol);
    }
}

TEST(Equilibrium, Examples)
{
    EXPECT_NEAR(find_equilibrium(named("linear-1d", {{"a", 1.0}}), v1(0.3))(0), 0.0, 1e-15);
    const auto dw = named("double-well-1d");
    const Vec x = find_equilibrium(dw, v1(0.7));
    EXPECT_NEAR(x(0), 1.0, 1e-14);
    EXPECT_LE(dw.eval(x).norm(), 1e-12 * (1.0 + x.norm()));
    EXPECT_THROW(find_equilibrium(dw, v1(0.01)), NumericalError);
}

TEST(Spectral, ScalarCase)
{
    const auto h = named("linear-1d", {{"a", 1.0}});
    const auto s = spectral_package(h, v1(0.0), 0.5, 0.9);
    EXPECT_DOUBLE_EQ(s.lambda_min, 1.0);
    EXPECT_DOUBLE_EQ(s.lambda_prime, 0.9);
    EXPECT_EQ(s.K_tilde, 1.0);
    EXPECT_DOUBLE_EQ(s.lambda, 0.45);
    EXPECT_LT(s.lambda, s.lambda_prime);
}

TEST(Spectral, Spiral)
{
    const auto h = named("spiral-2d", {{"sigma", 1.0}, {"omega", 2.0}});
    const auto s = spectral_package(h, Vec::Zero(2));
    EXPECT_NEAR(s.lambda_min, 1.0, 1e-12);
    EXPECT_GE(s.K_tilde, 1.0);
}

TEST(Spectral, NonNormalTransientAgainstDenseSampling)
{
    Mat A(2, 2);
    A << -1.0, 4.0, 0.0, -1.0;
    const auto s = spectral_package(affine(A), Vec::Zero(2), 0.5, 0.9);
    const double dense = oracle::dense_transient_sup(A, 0.9, 60.0, 1e-3);
    EXPECT_GT(dense, 1.5); // genuine transient growth
    EXPECT_LE(dense, s.K_tilde * (1.0 + 1e-6));
    EXPECT_LE(s.K_tilde, 1.05 * dense * (1.0 + 1e-6));
    EXPECT_NEAR(s.lambda, 0.5 * 0.9 / (s.K_tilde * s.K_tilde), 1e-15);
}

TEST(Spectral, Errors)
{
    const auto h = named("double-well-1d");
    EXPECT_THROW(spectral_package(h, v1(0.0)), NumericalError);
    EXPECT_THROW(spectral_package(h, v1(1.0), 1.0), InvalidArgument);
    EXPECT_THROW(spectral_package(h, v1(0.5)), InvalidArgument);
}

TEST(Lyapunov, ScalarIsExactlyHalf)
{
    const Mat P = solve_lyapunov(Mat::Constant(1, 1, -1.0));
    EXPECT_EQ(P(0, 0), 0.5);
}

TEST(Lyapunov, DiagonalCase)
{
    const Mat A = -Mat::Identity(3, 3);
    EXPECT_LE((solve_lyapunov(A) - 0.5 * Mat::Identity(3, 3)).norm(), 1e-15);
}

TEST(Lyapunov, AgainstKroneckerAndIntegralOracles)
{
    std::vector<Mat> cases;
    Mat A(2, 2);
    A << -1.0, 2.0, -2.0, -1.0;
    cases.push_back(A);
    Mat B(2, 2);
    B << -1.0, 4.0, 0.0, -1.0;
    cases.push_back(B);
    Mat C(3, 3);
    C << -2.0, 1.0, 0.3, 0.0, -0.5, 2.0, 0.1, -1.0, -1.5;
    cases.push_back(C);
    for (const auto& M : cases) {
        const Mat P = solve_lyapunov(M);
        EXPECT_LE(lyap_residual(M, P), 1e-10);
        EXPECT_TRUE(positive_definite(P));
        EXPECT_LE((P - P.transpose()).norm(), 0.0);
        EXPECT_LE((P - oracle::lyapunov_kronecker(M)).norm(), 1e-10 * (1.0 + P.norm()));
    }
    const Mat Pint = oracle::lyapunov_integral(A, 40.0, 40000);
    EXPECT_LE((solve_lyapunov(A) - Pint).norm(), 1e-8);
    EXPECT_THROW(solve_lyapunov(Mat::Identity(2, 2)), NumericalError);
}

TEST(Geometry, LinearIntervalArithmetic)
{
    const auto h = named("linear-1d", {{"a", 1.0}});
    const auto s = spectral_package(h, v1(0.0));
    const auto g = build_region_geometry(h, s, 0.1);
    EXPECT_EQ(g.P(0, 0), 0.5);
    EXPECT_DOUBLE_EQ(g.r, 0.5);
    EXPECT_DOUBLE_EQ(g.r0, 0.125);
    EXPECT_GE(g.eps0, 0.29);
    EXPECT_LE(g.B_radius_V, g.r0);
    EXPECT_DOUBLE_EQ(g.R, 1.0);
    // interval oracle: V^r = [-1, 1], V^{r0} = [-0.5, 0.5]
    EXPECT_LE(0.5 + g.eps0, 1.0 + 1e-15);
    EXPECT_TRUE(g.in_B(v1(0.1)) && g.in_B(v1(-0.1)));
    EXPECT_TRUE(g.in_Vr(v1(0.999)) && !g.in_Vr(v1(1.001)));
}

TEST(Geometry, TinyEpsKeepsDefaultRadius)
{
    const auto h = named("linear-1d", {{"a", 1.0}});
    const auto g = build_region_geometry(h, spectral_package(h, v1(0.0)), 1e-9);
    EXPECT_DOUBLE_EQ(g.r, 0.5);
    EXPECT_EQ(g.shrink_steps, 0u);
}

TEST(Geometry, DoubleWellExcludesUnstablePoint)
{
    const auto h = named("double-well-1d");
    const auto s = spectral_package(h, v1(1.0));
    const auto g = build_region_geometry(h, s, 0.05);
    EXPECT_FALSE(g.in_Vr(v1(0.0)));
    EXPECT_LT(g.R, 1.0);
    // shell descent on a dense deterministic grid
    for (int i = 0; i <= 400; ++i) {
        const double x = 1.0 - g.R + 2.0 * g.R * i / 400.0;
        if (std::abs(x - 1.0) > 1e-9 && g.in_Vr(v1(x))) {
            EXPECT_LT(lyapunov_derivative(g, h, v1(x)), 0.0) << x;
        }
    }
}

TEST(Geometry, NestingInvariants)
{
    Mat A(2, 2);
    A << -1.0, 4.0, 0.0, -1.0;
    const auto h = affine(A);
    const auto s = spectral_package(h, Vec::Zero(2));
    const auto g = build_region_geometry(h, s, 1e-3);
    EXPECT_LE(lyap_residual(A, g.P), 1e-10);
    EXPECT_LT(g.r0, g.r);
    EXPECT_LE(g.B_radius_V, g.r0);
    // eps-ball inside B: largest semi-axis scaling
    EXPECT_LE(g.eps * g.eps * g.p_eig_max, g.B_radius_V);
    // eps0-fattening of V^{r0} inside V^r
    EXPECT_LE(std::sqrt(g.r0 / g.p_eig_min) + g.eps0, std::sqrt(g.r / g.p_eig_max) + 1e-12);
    EXPECT_NEAR(g.R, std::sqrt(g.r / g.p_eig_min), 1e-15);
    RngStream rng(4, 0);
    for (int i = 0; i < 200; ++i) {
        const Vec x = sample_in_sublevel(g, g.r, rng);
        EXPECT_LE(g.V(x), g.r * (1.0 + 1e-12));
        EXPECT_LE((x - g.x_star).norm(), g.R * (1.0 + 1e-12));
    }
}

TEST(Geometry, TooLargeEpsReportsLimit)
{
    const auto h = named("double-well-1d");
    const auto s = spectral_package(h, v1(1.0));
    try {
        build_region_geometry(h, s, 5.0);
        FAIL() << "expected GeometryError";
    } catch (const GeometryError& e) {
        EXPECT_GT(e.largest_admissible_eps(), 0.0);
        EXPECT_LT(e.largest_admissible_eps(), 5.0);
        EXPECT_NO_THROW(build_region_geometry(h, s, e.largest_admissible_eps()));
    }
}

TEST(Geometry, LyapunovDescentAlongSolutions)
{
    const auto h = named("double-well-1d");
    const auto s = spectral_package(h, v1(1.0));
    const auto g = build_region_geometry(h, s, 0.05);
    RngStream rng(12, 0);
    for (int i = 0; i < 30; ++i) {
        Vec x = sample_in_sublevel(g, g.r, rng);
        double v_prev = g.V(x);
        for (int k = 0; k < 10; ++k) {
            x = solve_ode(h, 0.0, x, 0.2);
            const double v = g.V(x);
            if (v_prev > 1e-20) {
                EXPECT_LT(v, v_prev);
            }
            v_prev = v;
        }
    }
}

TEST(Envelopes, FiniteFitsAndFreshReplay)
{
    for (const auto& name : {"linear-1d", "double-well-1d", "spiral-2d"}) {
        const auto h = std::string(name) == "linear-1d" ? named(name, {{"a", 1.0}})
                       : std::string(name) == "spiral-2d"
                           ? named(name, {{"sigma", 1.0}, {"omega", 2.0}})
                           : named(name);
        const Vec guess = Vec::Constant(static_cast<Eigen::Index>(h.dim()),
                                        std::string(name) == "double-well-1d" ? 0.9 : 0.1);
        const auto s = spectral_package(h, find_equilibrium(h, guess));
        const auto g = build_region_geometry(h, s, 0.01);
        EnvelopeOptions opts;
        opts.pairs = 20;
        const auto fit = fit_envelopes(h, s, g, opts);
        EXPECT_TRUE(std::isfinite(fit.K1) && std::isfinite(fit.K3) && std::isfinite(fit.K4));
        EXPECT_GE(fit.K3, 1.0 - 1e-9); // tau = 0 gives ||I|| = 1
        EnvelopeOptions fresh = opts;
        fresh.seed = 999;
        const auto replay = replay_envelopes(fit, h, s, g, 1.2, fresh);
        EXPECT_GT(replay.checked, 0u);
        EXPECT_EQ(replay.pass_rate(), 1.0) << name;
    }
}

TEST(Envelopes, SamplesRespectFittedConstants)
{
    const auto h = named("double-well-1d");
    const auto s = spectral_package(h, v1(1.0));
    const auto g = build_region_geometry(h, s, 0.05);
    EnvelopeOptions opts;
    opts.pairs = 10;
    opts.boundary_design = false;
    const auto fit = fit_envelopes(h, s, g, opts);
    for (const auto& e : envelope_samples(h, s, g, opts)) {
        EXPECT_LE(e.contraction_ratio, fit.K1);
        EXPECT_LE(e.phi_ratio, fit.K3);
        EXPECT_LE(e.phi_lipschitz_ratio, fit.K4);
    }
}
