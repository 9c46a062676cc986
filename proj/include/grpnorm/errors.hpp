#pragma once

#include <stdexcept>
#include <string>

namespace grpnorm {

/// Base class for all grpnorm errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// -- input / construction errors --------------------------------------------

struct MalformedEdge : Error {
    using Error::Error;
};
struct NegativeCount : Error {
    using Error::Error;
};
struct ShapeMismatch : Error {
    using Error::Error;
};
struct IndexOutOfRange : Error {
    using Error::Error;
};
struct DomainError : Error {
    using Error::Error;
};

// -- numerical errors --------------------------------------------------------

struct NonPositiveDefinite : Error {
    using Error::Error;
};

/// Cell has (numerically) zero probability under the current parameters.
struct EmptyCell : Error {
    using Error::Error;
};

/// A counted cell carries zero model probability: the log-likelihood is -inf.
struct DegenerateCell : Error {
    using Error::Error;
};

/// Gibbs sampler failed its split-half drift diagnostic.
struct MixingFailure : Error {
    using Error::Error;
};

struct SingularInformation : Error {
    using Error::Error;
};

/// QMC integration budget exhausted before the requested tolerance; carries
/// the best estimate and its error bound.
struct ToleranceNotReached : Error {
    ToleranceNotReached(const std::string& msg, double estimate, double error_bound)
        : Error(msg), estimate(estimate), error_bound(error_bound) {}
    double estimate;
    double error_bound;
};

}  // namespace grpnorm
