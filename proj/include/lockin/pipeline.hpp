#pragma once

// Chains the modules into the fitted-constant workflow: equilibrium,
// spectral data, region geometry, envelope fits and the assembled C1, C2, K.

#include "lockin/bound_calculator.hpp"
#include "lockin/ode_toolkit.hpp"

namespace lockin {

struct FittedScenario {
    SpectralData spectral;
    RegionGeometry geometry;
    EnvelopeFit fit;
    FittedConstants constants;
};

struct PipelineOptions {
    double kappa = 0.5;
    double lambda_prime_fraction = 0.9;
    SpectralOptions spectral;
    GeometryOptions geometry;
    EnvelopeOptions envelope;
};

FittedScenario fit_scenario(const DriftFunction& drift, const Vec& equilibrium_guess,
                            const NoiseModel& noise, double epsilon,
                            const PipelineOptions& options = {});

} // namespace lockin
