#pragma once

#include <stdexcept>
#include <string>

namespace mixclust {

// Bad caller input: shapes, ranges, malformed files.  The CLI maps these to exit 2.
struct InputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DimensionMismatch : InputError {
    using InputError::InputError;
};

struct InsufficientData : InputError {
    using InputError::InputError;
};

// Numerical breakdowns.  The CLI maps these to exit 3.
struct ComputationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NotPositiveDefinite : ComputationError {
    using ComputationError::ComputationError;
};

struct NonPositiveDenominator : ComputationError {
    using ComputationError::ComputationError;
};

struct DegenerateRestarts : ComputationError {
    using ComputationError::ComputationError;
};

struct NewtonFailure : ComputationError {
    using ComputationError::ComputationError;
};

// Cluster-boundary geometry other than a single interval (a, b).
struct GeometryNotSupported : ComputationError {
    using ComputationError::ComputationError;
};

// Solution sits on or outside the eigenvalue constraints.
struct ConstraintBoundary : ComputationError {
    using ComputationError::ComputationError;
};

struct IllConditioned : ComputationError {
    using ComputationError::ComputationError;
};

struct QuadratureFailure : ComputationError {
    using ComputationError::ComputationError;
};

}  // namespace mixclust
