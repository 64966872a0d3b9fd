#include "lockin/pipeline.hpp"

namespace lockin {

FittedScenario fit_scenario(const DriftFunction& drift, const Vec& equilibrium_guess,
                            const NoiseModel& noise, double epsilon,
                            const PipelineOptions& options)
{
    FittedScenario fs;
    const Vec x_star = find_equilibrium(drift, equilibrium_guess);
    fs.spectral = spectral_package(drift, x_star, options.kappa, options.lambda_prime_fraction,
                                   options.spectral);
    fs.geometry = build_region_geometry(drift, fs.spectral, epsilon, options.geometry);
    fs.fit = fit_envelopes(drift, fs.spectral, fs.geometry, options.envelope);
    fs.constants = fitted_constants(fs.fit, fs.spectral, noise, epsilon);
    return fs;
}

} // namespace lockin
