#pragma once

// Limiting ODE x' = h(x), its variational equation, and the spectral /
// Lyapunov ingredients of the lock-in bound near a stable equilibrium.

#include "lockin/core_model.hpp"
#include "lockin/ode_integrator.hpp"

#include <optional>
#include <span>
#include <vector>

namespace lockin {

inline constexpr double kDefaultOdeTol = 1e-9;

/// x(t, s, u0). Autonomous, so only t - s matters.
Vec solve_ode(const DriftFunction& drift, double s, const Vec& u0, double t,
              double tol = kDefaultOdeTol);
Vec solve_ode(const DriftFunction& drift, double s, const Vec& u0, double t,
              const OdeOptions& options);

struct FlowAndFundamental {
    Vec state; // x(t, s, u0)
    Mat phi;   // Phi(t, s, u0)
};

/// Integrates the state jointly with d/dt Phi = Dh(x(t)) Phi, Phi(s) = I.
FlowAndFundamental flow_with_fundamental(const DriftFunction& drift, double s, const Vec& u0,
                                         double t, const OdeOptions& options);
Mat fundamental_matrix(const DriftFunction& drift, double s, const Vec& u0, double t,
                       double tol = kDefaultOdeTol);

/// Same, sampled at sorted times >= s in a single sweep.
std::vector<FlowAndFundamental> flow_with_fundamental_at(const DriftFunction& drift, double s,
                                                         const Vec& u0,
                                                         std::span<const double> times,
                                                         const OdeOptions& options);

/// Newton's method (50 iterations); the result must be Hurwitz-stable.
Vec find_equilibrium(const DriftFunction& drift, const Vec& guess);

bool is_hurwitz(const Mat& A);
/// min_i -Re(eig_i(A)).
double spectral_abscissa_margin(const Mat& A);
/// Largest singular value.
double operator_norm(const Mat& A);

struct SpectralData {
    Vec x_star;
    Mat jacobian_at_star;
    double lambda_min = 0.0;
    double lambda_prime = 0.0;
    double kappa = 0.5;
    double K_tilde = 1.0;
    double lambda = 0.0;
};

struct SpectralOptions {
    std::size_t grid_points = 4000;
    double horizon_factor = 40.0; // grid spans [0, horizon_factor / lambda_prime]
    double safety = 1.05;         // applied only when transient growth is seen
};

SpectralData spectral_package(const DriftFunction& drift, const Vec& x_star, double kappa = 0.5,
                              double lambda_prime_fraction = 0.9,
                              const SpectralOptions& options = {});

/// sup over the grid of ||exp(A t)|| exp(lambda_prime t).
double transient_envelope_max(const Mat& A, double lambda_prime, double t_max,
                              std::size_t points);

/// Solves A^T P + P A = -I by Bartels–Stewart on the complex Schur form.
Mat solve_lyapunov(const Mat& Dh_star);

// ---------------------------------------------------------------------------
// Region geometry for the quadratic Lyapunov function V(x) = (x-x*)^T P (x-x*)
// ---------------------------------------------------------------------------

struct RegionGeometry {
    Vec x_star;
    Mat P;
    double r = 0.0;
    double r0 = 0.0;
    double eps0 = 0.0;
    double B_radius_V = 0.0;
    double R = 0.0;
    double eps = 0.0;
    double p_eig_min = 0.0;
    double p_eig_max = 0.0;
    std::size_t shrink_steps = 0;

    double V(const Vec& x) const;
    bool in_B(const Vec& x) const { return V(x) <= B_radius_V; }
    bool in_Vr(const Vec& x) const { return V(x) <= r; }
    /// Largest eps the geometry admits: min(eps0, sqrt(B_radius_V / lambda_max(P))).
    double largest_admissible_eps() const;
};

struct GeometryOptions {
    double r_cap = 0.5;
    double shrink = 0.7;
    std::size_t max_shrinks = 80;
    double r0_fraction = 0.25;
    double B_fraction = 0.5; // B = V^{B_fraction * r0}
    std::size_t shell_samples = 200;
    std::uint64_t seed = 0x5e11;
};

class GeometryError : public NumericalError {
public:
    GeometryError(const std::string& what, double largest_eps)
        : NumericalError(what), largest_eps_(largest_eps)
    {
    }
    double largest_admissible_eps() const { return largest_eps_; }

private:
    double largest_eps_;
};

/// Shrinks r from the cap until grad V . h < 0 on sampled shell points, then
/// sets r0, B and eps0 by ellipsoid semi-axis arithmetic.
RegionGeometry build_region_geometry(const DriftFunction& drift, const SpectralData& spec,
                                     double eps, const GeometryOptions& options = {});

/// grad V(x) . h(x) at a point.
double lyapunov_derivative(const RegionGeometry& g, const DriftFunction& drift, const Vec& x);

/// Point with V(x) = level along unit direction u.
Vec point_on_level(const RegionGeometry& g, const Vec& unit_direction, double level);
/// Uniform sample from the solid ellipsoid {V <= level}.
Vec sample_in_sublevel(const RegionGeometry& g, double level, RngStream& rng);
Vec random_unit_vector(std::size_t dim, RngStream& rng);

// ---------------------------------------------------------------------------
// Empirical envelope constants for the contraction, fundamental-matrix and
// fundamental-matrix-Lipschitz estimates.
// ---------------------------------------------------------------------------

struct EnvelopeOptions {
    std::size_t pairs = 50;
    double horizon_lambda_multiple = 20.0; // tau in [0, 20 / lambda]
    std::size_t grid_points = 41;
    double rtol = 1e-11;
    double atol = 1e-300;
    std::uint64_t seed = 0xe7e1;
    // Fits place two thirds of the first points on the level set V = r (half
    // of those paired with a near neighbour), since the sups sit at the rim.
    // Replays draw both points uniformly.
    bool boundary_design = true;
};

struct EnvelopeFit {
    double K1 = 0.0;
    double K3 = 0.0;
    double K4 = 0.0;
    double lambda = 0.0;
    std::size_t pairs = 0;
    std::vector<double> tau_grid;
};

struct EnvelopeSample {
    double tau = 0.0;
    double contraction_ratio = 0.0; // ||x(u0)-x(u1)|| / (||u0-u1|| e^{-lambda tau})
    double phi_ratio = 0.0;         // ||Phi(u0)|| / e^{-lambda tau}
    double phi_lipschitz_ratio = 0.0;
};

/// Ratios at every (pair, tau) for pairs drawn uniformly in V^r.
std::vector<EnvelopeSample> envelope_samples(const DriftFunction& drift, const SpectralData& spec,
                                             const RegionGeometry& geometry,
                                             const EnvelopeOptions& options);

EnvelopeFit fit_envelopes(const DriftFunction& drift, const SpectralData& spec,
                          const RegionGeometry& geometry, const EnvelopeOptions& options = {});

struct EnvelopeReplay {
    std::size_t checked = 0;
    std::size_t passed = 0;
    double pass_rate() const { return checked == 0 ? 1.0 : double(passed) / double(checked); }
};

/// Checks the three envelopes on a fresh sample with constants times `inflation`.
EnvelopeReplay replay_envelopes(const EnvelopeFit& fit, const DriftFunction& drift,
                                const SpectralData& spec, const RegionGeometry& geometry,
                                double inflation, const EnvelopeOptions& fresh_options);

} // namespace lockin
