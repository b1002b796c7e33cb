#pragma once

#include <stdexcept>
#include <string>

namespace nfk {

// Configuration / input validation problems (CLI maps these to exit code 2).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Operands living on different grids.
struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Kernel profile not resolvable on the requested grid.
struct KernelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A hypothesis required by the formula being evaluated fails on the inputs
// (CLI maps these to exit code 1).
struct AssumptionViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numerical breakdown: instability, overflow, non-convergence (exit code 3).
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EstimatorOverflow : NumericalError {
    using NumericalError::NumericalError;
};

struct ConvergenceFailure : NumericalError {
    using NumericalError::NumericalError;
};

}  // namespace nfk
