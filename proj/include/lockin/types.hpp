#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace lockin {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Raised for malformed inputs: unknown scenario names, bad dimensions,
// out-of-range parameters.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Raised when a numerical procedure cannot deliver its postcondition
// (Newton non-convergence, step underflow, non-Hurwitz Jacobian, ...).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace lockin
