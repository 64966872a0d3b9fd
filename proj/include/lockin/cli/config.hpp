#pragma once

// Experiment configuration loaded from a YAML document. See README for the
// grammar; every field has a default except the scenario name.

#include "lockin/core_model.hpp"
#include "lockin/montecarlo_lab.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lockin::cli {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ScheduleConfig {
    std::string kind = "power";
    double mu = 1.0;
    double constant = 1.0;
    std::vector<double> values;

    StepSchedule build() const;
};

struct NoiseConfig {
    std::string kind = "zero";
    double scale = 1.0;
    double cutoff = 3.0;

    NoiseModel build(std::size_t dim) const;
};

struct BoundConfig {
    double epsilon = 0.1;
    std::size_t n0 = 100;
    std::optional<double> T; // nullopt: waiting time from the fitted K
    double kappa = 0.5;
    double lambda_prime_fraction = 0.9;
    std::string constants = "fitted"; // fitted | user
    double C1 = 1.0;
    double C2 = 1.0;
    std::size_t horizon = 1'000'000;
};

struct McConfig {
    std::size_t trials = 1000;
    std::optional<std::size_t> horizon; // nullopt: default rule with horizon_cap
    std::size_t horizon_cap = 250'000;
    std::uint64_t seed = 1;
    std::size_t workers = 1;
    InitSampler init;
};

struct DecompositionConfig {
    std::size_t n0 = 10;
    std::size_t n = 60;
    std::size_t quad_order = 4;
    double tol = 1e-10;
    double tol_accept = 1e-5;
    std::uint64_t seed = 7;
    std::vector<double> x0; // empty: the equilibrium guess
};

struct ConcConfig {
    std::optional<double> delta; // default: half the noise tail rate
    double lambda = 0.45;
    std::size_t n0 = 0;
    std::size_t n = 50;
    std::size_t xi_points = 20;
    double lowest_bound = 1e-3;
    std::size_t trials = 100'000;
    std::uint64_t seed = 11;
};

struct OrderConfig {
    double mu = 1.0;
    double C = 1.0;
    double lambda = 2.0;
    std::vector<std::size_t> n0 = {100, 1000, 10000};
};

struct ExperimentConfig {
    ScenarioSpec scenario;
    std::vector<double> equilibrium_guess;
    ScheduleConfig schedule;
    NoiseConfig noise;
    BoundConfig bound;
    McConfig mc;
    DecompositionConfig decomposition;
    ConcConfig conc;
    OrderConfig order;
    std::string out_dir = "out";
    bool has_mc = false;

    std::string source_text;
    std::string source_path;
};

/// Parses and validates; errors name the line and field.
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<string>");
ExperimentConfig load_config(const std::string& path);

/// 64-bit FNV-1a of the raw bytes.
std::uint64_t fnv1a64(const std::string& bytes);

} // namespace lockin::cli
