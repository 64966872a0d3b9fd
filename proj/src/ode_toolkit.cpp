#include "lockin/ode_toolkit.hpp"

#include "lockin/quadrature.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <complex>

namespace lockin {

namespace {

void require_dim(const DriftFunction& drift, const Vec& x, const char* what)
{
    if (static_cast<std::size_t>(x.size()) != drift.dim()) {
        throw InvalidArgument(std::string(what) + ": state dimension does not match drift");
    }
}

OdeRhs augmented_rhs(const DriftFunction& drift)
{
    const auto d = static_cast<Eigen::Index>(drift.dim());
    return [&drift, d](double, const Vec& y, Vec& dy) {
        thread_local Vec x;
        thread_local Vec hx;
        thread_local Mat J;
        x = y.head(d);
        drift.eval_into(x, hx);
        drift.jacobian_into(x, J);
        dy.resize(y.size());
        dy.head(d) = hx;
        Eigen::Map<const Mat> phi(y.data() + d, d, d);
        Eigen::Map<Mat> dphi(dy.data() + d, d, d);
        dphi.noalias() = J * phi;
    };
}

Vec pack(const Vec& x, const Mat& phi)
{
    const auto d = x.size();
    Vec y(d + d * d);
    y.head(d) = x;
    y.tail(d * d) = Eigen::Map<const Vec>(phi.data(), d * d);
    return y;
}

FlowAndFundamental unpack(const Vec& y, Eigen::Index d)
{
    FlowAndFundamental out;
    out.state = y.head(d);
    out.phi = Eigen::Map<const Mat>(y.data() + d, d, d);
    return out;
}

} // namespace

Vec solve_ode(const DriftFunction& drift, double s, const Vec& u0, double t, double tol)
{
    return solve_ode(drift, s, u0, t, OdeOptions::with_tol(tol));
}

Vec solve_ode(const DriftFunction& drift, double s, const Vec& u0, double t,
              const OdeOptions& options)
{
    require_dim(drift, u0, "solve_ode");
    if (t < s) {
        throw InvalidArgument("solve_ode requires t >= s");
    }
    Vec y = u0;
    if (t == s) {
        return y;
    }
    DormandPrince dp([&drift](double, const Vec& x, Vec& dx) { drift.eval_into(x, dx); },
                     options);
    dp.integrate(s, y, t);
    return y;
}

FlowAndFundamental flow_with_fundamental(const DriftFunction& drift, double s, const Vec& u0,
                                         double t, const OdeOptions& options)
{
    require_dim(drift, u0, "fundamental_matrix");
    if (t < s) {
        throw InvalidArgument("fundamental_matrix requires t >= s");
    }
    const auto d = u0.size();
    Vec y = pack(u0, Mat::Identity(d, d));
    if (t > s) {
        DormandPrince dp(augmented_rhs(drift), options);
        dp.integrate(s, y, t);
    }
    return unpack(y, d);
}

Mat fundamental_matrix(const DriftFunction& drift, double s, const Vec& u0, double t, double tol)
{
    return flow_with_fundamental(drift, s, u0, t, OdeOptions::with_tol(tol)).phi;
}

std::vector<FlowAndFundamental> flow_with_fundamental_at(const DriftFunction& drift, double s,
                                                         const Vec& u0,
                                                         std::span<const double> times,
                                                         const OdeOptions& options)
{
    require_dim(drift, u0, "fundamental_matrix");
    const auto d = u0.size();
    Vec y = pack(u0, Mat::Identity(d, d));
    DormandPrince dp(augmented_rhs(drift), options);
    std::vector<FlowAndFundamental> out;
    out.reserve(times.size());
    double t = s;
    for (double to : times) {
        dp.integrate(t, y, to);
        t = to;
        out.push_back(unpack(y, d));
    }
    return out;
}

bool is_hurwitz(const Mat& A) { return spectral_abscissa_margin(A) > 0.0; }

double spectral_abscissa_margin(const Mat& A)
{
    Eigen::EigenSolver<Mat> es(A, false);
    if (es.info() != Eigen::Success) {
        throw NumericalError("eigenvalue computation failed");
    }
    return -es.eigenvalues().real().maxCoeff();
}

double operator_norm(const Mat& A)
{
    if (A.size() == 1) {
        return std::abs(A(0, 0));
    }
    Eigen::JacobiSVD<Mat> svd(A);
    return svd.singularValues()(0);
}

Vec find_equilibrium(const DriftFunction& drift, const Vec& guess)
{
    require_dim(drift, guess, "find_equilibrium");
    Vec x = guess;
    bool converged = false;
    for (int iter = 0; iter < 50; ++iter) {
        const Vec f = drift.eval(x);
        if (f.norm() <= 1e-12 * (1.0 + x.norm())) {
            converged = true;
            break;
        }
        const Mat J = drift.jacobian(x);
        Eigen::FullPivLU<Mat> lu(J);
        if (!lu.isInvertible()) {
            throw NumericalError("Newton iteration hit a singular Jacobian");
        }
        x -= lu.solve(f);
        if (!x.allFinite()) {
            throw NumericalError("Newton iteration diverged");
        }
    }
    if (!converged) {
        throw NumericalError("Newton iteration did not converge in 50 iterations");
    }
    if (!is_hurwitz(drift.jacobian(x))) {
        throw NumericalError("equilibrium is not Hurwitz-stable (unstable or non-hyperbolic)");
    }
    return x;
}

double transient_envelope_max(const Mat& A, double lambda_prime, double t_max, std::size_t points)
{
    if (points < 2) {
        throw InvalidArgument("transient envelope grid needs at least two points");
    }
    double best = 0.0;
    for (std::size_t i = 0; i < points; ++i) {
        const double t = t_max * static_cast<double>(i) / static_cast<double>(points - 1);
        const Mat E = (A * t).exp();
        best = std::max(best, operator_norm(E) * std::exp(lambda_prime * t));
    }
    return best;
}

SpectralData spectral_package(const DriftFunction& drift, const Vec& x_star, double kappa,
                              double lambda_prime_fraction, const SpectralOptions& options)
{
    require_dim(drift, x_star, "spectral_package");
    if (!(kappa > 0.0 && kappa < 1.0)) {
        throw InvalidArgument("kappa must lie in (0,1)");
    }
    if (!(lambda_prime_fraction > 0.0 && lambda_prime_fraction < 1.0)) {
        throw InvalidArgument("lambda_prime_fraction must lie in (0,1)");
    }
    if (drift.eval(x_star).norm() > 1e-10 * (1.0 + x_star.norm())) {
        throw InvalidArgument("spectral_package: x_star is not an equilibrium");
    }
    SpectralData s;
    s.x_star = x_star;
    s.jacobian_at_star = drift.jacobian(x_star);
    s.lambda_min = spectral_abscissa_margin(s.jacobian_at_star);
    if (!(s.lambda_min > 0.0)) {
        throw NumericalError("spectral_package: Jacobian at x_star is not Hurwitz");
    }
    s.kappa = kappa;
    s.lambda_prime = lambda_prime_fraction * s.lambda_min;
    const double sup = transient_envelope_max(s.jacobian_at_star, s.lambda_prime,
                                              options.horizon_factor / s.lambda_prime,
                                              options.grid_points);
    // sup >= 1 always (t = 0); inflate only when a transient peak was sampled
    s.K_tilde = sup > 1.0 + 1e-12 ? options.safety * sup : 1.0;
    s.lambda = (1.0 - kappa) / (s.K_tilde * s.K_tilde) * s.lambda_prime;
    return s;
}

Mat solve_lyapunov(const Mat& Dh_star)
{
    if (Dh_star.rows() != Dh_star.cols() || Dh_star.rows() == 0) {
        throw InvalidArgument("solve_lyapunov expects a non-empty square matrix");
    }
    if (!is_hurwitz(Dh_star)) {
        throw NumericalError("solve_lyapunov: matrix is not Hurwitz");
    }
    using CMat = Eigen::MatrixXcd;
    using CVec = Eigen::VectorXcd;
    const auto d = Dh_star.rows();
    Eigen::ComplexSchur<Mat> schur(Dh_star);
    const CMat& U = schur.matrixU();
    const CMat& T = schur.matrixT();
    // With X = U^H P U the equation becomes T^H X + X T = -I, solved column by
    // column; each column needs a lower-triangular solve with T^H + T_jj I.
    const CMat TH = T.adjoint();
    CMat X = CMat::Zero(d, d);
    for (Eigen::Index j = 0; j < d; ++j) {
        CVec rhs = CVec::Zero(d);
        rhs(j) = -1.0;
        for (Eigen::Index i = 0; i < j; ++i) {
            rhs -= T(i, j) * X.col(i);
        }
        CMat M = TH;
        M.diagonal().array() += T(j, j);
        X.col(j) = M.triangularView<Eigen::Lower>().solve(rhs);
    }
    const CMat Pc = U * X * U.adjoint();
    Mat P = Pc.real();
    P = 0.5 * (P + P.transpose()).eval();
    return P;
}

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

double RegionGeometry::V(const Vec& x) const
{
    const Vec y = x - x_star;
    return y.dot(P * y);
}

double RegionGeometry::largest_admissible_eps() const
{
    return std::min(eps0, std::sqrt(B_radius_V / p_eig_max));
}

double lyapunov_derivative(const RegionGeometry& g, const DriftFunction& drift, const Vec& x)
{
    return 2.0 * (x - g.x_star).dot(g.P * drift.eval(x));
}

Vec random_unit_vector(std::size_t dim, RngStream& rng)
{
    Vec u(static_cast<Eigen::Index>(dim));
    do {
        for (Eigen::Index i = 0; i < u.size(); ++i) {
            u[i] = rng.normal();
        }
    } while (u.norm() < 1e-12);
    return u / u.norm();
}

Vec point_on_level(const RegionGeometry& g, const Vec& unit_direction, double level)
{
    Eigen::LLT<Mat> llt(g.P);
    // y = sqrt(level) L^{-T} u has y^T P y = level
    const Vec y = llt.matrixU().solve(std::sqrt(level) * unit_direction);
    return g.x_star + y;
}

Vec sample_in_sublevel(const RegionGeometry& g, double level, RngStream& rng)
{
    const std::size_t d = static_cast<std::size_t>(g.x_star.size());
    const Vec u = random_unit_vector(d, rng);
    const double radius_frac = std::pow(rng.uniform_open(), 1.0 / static_cast<double>(d));
    return point_on_level(g, u, level * radius_frac * radius_frac);
}

RegionGeometry build_region_geometry(const DriftFunction& drift, const SpectralData& spec,
                                     double eps, const GeometryOptions& options)
{
    if (!(eps > 0.0)) {
        throw InvalidArgument("build_region_geometry: eps must be positive");
    }
    RegionGeometry g;
    g.x_star = spec.x_star;
    g.P = solve_lyapunov(spec.jacobian_at_star);
    Eigen::SelfAdjointEigenSolver<Mat> es(g.P);
    g.p_eig_min = es.eigenvalues().minCoeff();
    g.p_eig_max = es.eigenvalues().maxCoeff();
    if (!(g.p_eig_min > 0.0)) {
        throw NumericalError("Lyapunov solution is not positive definite");
    }

    RngStream rng(options.seed, 0);
    double r = options.r_cap;
    bool ok = false;
    for (std::size_t step = 0; step <= options.max_shrinks; ++step) {
        g.r = r;
        const double lo = 0.5 * options.r0_fraction * r;
        ok = true;
        for (std::size_t i = 0; i < options.shell_samples; ++i) {
            const Vec u = random_unit_vector(drift.dim(), rng);
            const double level = rng.uniform(lo, r);
            const Vec x = point_on_level(g, u, level);
            const double dv = lyapunov_derivative(g, drift, x);
            if (!(dv < 0.0)) {
                ok = false;
                break;
            }
        }
        if (ok) {
            g.shrink_steps = step;
            break;
        }
        r *= options.shrink;
    }
    if (!ok) {
        throw GeometryError("no Lyapunov sublevel set passed the shell descent check", 0.0);
    }

    g.r0 = options.r0_fraction * g.r;
    g.eps0 = std::sqrt(g.r / g.p_eig_max) - std::sqrt(g.r0 / g.p_eig_min);
    if (!(g.eps0 > 0.0)) {
        // strongly anisotropic P: shrink r0 so the fattened ellipsoid still fits
        g.r0 = options.r0_fraction * g.r * g.p_eig_min / g.p_eig_max;
        g.eps0 = std::sqrt(g.r / g.p_eig_max) - std::sqrt(g.r0 / g.p_eig_min);
    }
    g.B_radius_V = options.B_fraction * g.r0;
    g.R = std::sqrt(g.r / g.p_eig_min);
    g.eps = eps;
    const double largest = g.largest_admissible_eps();
    if (eps > largest) {
        throw GeometryError("eps = " + std::to_string(eps) +
                                " too large for the verified basin; largest admissible eps = " +
                                std::to_string(largest),
                            largest);
    }
    return g;
}

// ---------------------------------------------------------------------------
// Envelopes
// ---------------------------------------------------------------------------

namespace {

struct PairPoint {
    Vec gap; // x(u0) - x(u1)
    Mat phi_a;
    Mat phi_b;
};

struct PairSweep {
    double du = 0.0;
    std::vector<PairPoint> points;
};

// Both flows and fundamental matrices in one system. The separation g obeys
// g' = (int_0^1 Dh(x_b + s g) ds) g, which keeps its relative accuracy while
// both solutions settle on x*; differencing the two states would not.
std::vector<PairPoint> sweep_pair(const DriftFunction& drift, const Vec& u0, const Vec& u1,
                                  std::span<const double> times, const OdeOptions& options)
{
    const auto d = u0.size();
    const auto dd = d * d;
    static const QuadratureRule rule = gauss_legendre(4);
    OdeRhs rhs = [&drift, d, dd](double, const Vec& y, Vec& dy) {
        thread_local Vec xb;
        thread_local Vec hx;
        thread_local Mat J;
        thread_local Mat mean;
        dy.resize(y.size());
        xb = y.head(d);
        const auto gap = y.segment(d, d);
        drift.eval_into(xb, hx);
        dy.head(d) = hx;
        mean.setZero(d, d);
        for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
            drift.jacobian_into(xb + 0.5 * (rule.nodes[q] + 1.0) * gap, J);
            mean += 0.5 * rule.weights[q] * J;
        }
        dy.segment(d, d).noalias() = mean * gap;
        Eigen::Map<const Mat> phi_a(y.data() + 2 * d, d, d);
        Eigen::Map<const Mat> phi_b(y.data() + 2 * d + dd, d, d);
        drift.jacobian_into(xb + gap, J);
        Eigen::Map<Mat>(dy.data() + 2 * d, d, d).noalias() = J * phi_a;
        drift.jacobian_into(xb, J);
        Eigen::Map<Mat>(dy.data() + 2 * d + dd, d, d).noalias() = J * phi_b;
    };
    Vec y(2 * d + 2 * dd);
    y.head(d) = u1;
    y.segment(d, d) = u0 - u1;
    const Mat I = Mat::Identity(d, d);
    y.segment(2 * d, dd) = Eigen::Map<const Vec>(I.data(), dd);
    y.tail(dd) = Eigen::Map<const Vec>(I.data(), dd);
    DormandPrince dp(rhs, options);
    std::vector<PairPoint> out;
    out.reserve(times.size());
    double t = 0.0;
    for (double to : times) {
        dp.integrate(t, y, to);
        t = to;
        PairPoint p;
        p.gap = y.segment(d, d);
        p.phi_a = Eigen::Map<const Mat>(y.data() + 2 * d, d, d);
        p.phi_b = Eigen::Map<const Mat>(y.data() + 2 * d + dd, d, d);
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<double> tau_grid(const SpectralData& spec, const EnvelopeOptions& o)
{
    std::vector<double> g(o.grid_points);
    const double tmax = o.horizon_lambda_multiple / spec.lambda;
    for (std::size_t i = 0; i < o.grid_points; ++i) {
        g[i] = tmax * static_cast<double>(i) / static_cast<double>(o.grid_points - 1);
    }
    return g;
}

std::vector<PairSweep> sweep_pairs(const DriftFunction& drift, const SpectralData& spec,
                                   const RegionGeometry& geometry, const EnvelopeOptions& o)
{
    if (o.grid_points < 2 || o.pairs == 0) {
        throw InvalidArgument("envelope fit needs at least one pair and two grid points");
    }
    const auto grid = tau_grid(spec, o);
    OdeOptions ode;
    ode.rtol = o.rtol;
    ode.atol = o.atol;
    RngStream rng(o.seed, 1);
    std::vector<PairSweep> out;
    out.reserve(o.pairs);
    const std::size_t d = static_cast<std::size_t>(geometry.x_star.size());
    while (out.size() < o.pairs) {
        Vec u0;
        Vec u1;
        const std::size_t kind = o.boundary_design ? out.size() % 3 : 0;
        if (kind == 0) {
            u0 = sample_in_sublevel(geometry, geometry.r, rng);
            u1 = sample_in_sublevel(geometry, geometry.r, rng);
        } else {
            u0 = point_on_level(geometry, random_unit_vector(d, rng), geometry.r);
            u1 = kind == 1 ? sample_in_sublevel(geometry, geometry.r, rng)
                           : Vec(geometry.x_star + 0.99 * (u0 - geometry.x_star));
        }
        const double du = (u0 - u1).norm();
        if (du < 1e-8) {
            continue;
        }
        PairSweep p;
        p.du = du;
        p.points = sweep_pair(drift, u0, u1, grid, ode);
        out.push_back(std::move(p));
    }
    return out;
}

} // namespace

std::vector<EnvelopeSample> envelope_samples(const DriftFunction& drift, const SpectralData& spec,
                                             const RegionGeometry& geometry,
                                             const EnvelopeOptions& options)
{
    const auto grid = tau_grid(spec, options);
    const auto pairs = sweep_pairs(drift, spec, geometry, options);
    std::vector<EnvelopeSample> out;
    out.reserve(pairs.size() * grid.size());
    for (const auto& p : pairs) {
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double decay = std::exp(-spec.lambda * grid[i]);
            EnvelopeSample s;
            s.tau = grid[i];
            const auto& q = p.points[i];
            s.contraction_ratio = q.gap.norm() / (p.du * decay);
            s.phi_ratio = operator_norm(q.phi_a) / decay;
            s.phi_lipschitz_ratio = operator_norm(q.phi_a - q.phi_b) / (p.du * decay);
            out.push_back(s);
        }
    }
    return out;
}

EnvelopeFit fit_envelopes(const DriftFunction& drift, const SpectralData& spec,
                          const RegionGeometry& geometry, const EnvelopeOptions& options)
{
    EnvelopeFit fit;
    fit.lambda = spec.lambda;
    fit.pairs = options.pairs;
    fit.tau_grid = tau_grid(spec, options);
    for (const auto& s : envelope_samples(drift, spec, geometry, options)) {
        fit.K1 = std::max(fit.K1, s.contraction_ratio);
        fit.K3 = std::max(fit.K3, s.phi_ratio);
        fit.K4 = std::max(fit.K4, s.phi_lipschitz_ratio);
    }
    return fit;
}

EnvelopeReplay replay_envelopes(const EnvelopeFit& fit, const DriftFunction& drift,
                                const SpectralData& spec, const RegionGeometry& geometry,
                                double inflation, const EnvelopeOptions& fresh_options)
{
    EnvelopeOptions uniform = fresh_options;
    uniform.boundary_design = false;
    const auto grid = tau_grid(spec, uniform);
    const auto pairs = sweep_pairs(drift, spec, geometry, uniform);
    // integration noise on each computed quantity is a small multiple of rtol
    const double slack = 100.0 * fresh_options.rtol;
    EnvelopeReplay rep;
    for (const auto& p : pairs) {
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double decay = std::exp(-spec.lambda * grid[i]);
            const auto& q = p.points[i];
            const double dx = q.gap.norm();
            const double na = operator_norm(q.phi_a);
            const double nb = operator_norm(q.phi_b);
            const double dphi = operator_norm(q.phi_a - q.phi_b);
            const bool c1 = dx <= inflation * fit.K1 * p.du * decay + slack * dx;
            const bool c3 = na <= inflation * fit.K3 * decay + slack * na;
            const bool c4 = dphi <= inflation * fit.K4 * p.du * decay + slack * (na + nb);
            rep.checked += 3;
            rep.passed += static_cast<std::size_t>(c1) + static_cast<std::size_t>(c3) +
                          static_cast<std::size_t>(c4);
        }
    }
    return rep;
}

} // namespace lockin
