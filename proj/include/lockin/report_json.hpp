#pragma once

// JSON views of the module reports. Non-finite numbers become null.

#include "lockin/alekseev.hpp"
#include "lockin/bound_calculator.hpp"
#include "lockin/montecarlo_lab.hpp"
#include "lockin/ode_toolkit.hpp"

#include <json.hpp>

namespace lockin {

nlohmann::json to_json(const Vec& v);
nlohmann::json to_json(const Mat& m);
nlohmann::json to_json(const SpectralData& s);
nlohmann::json to_json(const RegionGeometry& g);
nlohmann::json to_json(const EnvelopeFit& f);
nlohmann::json to_json(const FittedConstants& c);
nlohmann::json to_json(const BoundReport& r);
nlohmann::json to_json(const DecompositionReport& r);
nlohmann::json to_json(const LockinEstimate& e);
nlohmann::json to_json(const Verdict& v);

} // namespace lockin
