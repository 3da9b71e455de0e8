#pragma once

#include <stdexcept>
#include <string>

namespace cmc {

// Base class for all library failures. Subclasses distinguish the failure
// modes that callers (in particular the CLI) handle differently.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A conditional law is requested for an event of probability zero, e.g. the
// magnitude distribution given a non-deteriorating move when p_plus = 0.
struct DegenerateTendency : Error {
    using Error::Error;
};

// An exact enumeration was requested beyond the supported instance size.
struct TooLarge : Error {
    using Error::Error;
};

// A rating class has no outgoing observations; the class scheme must be
// coarsened before a transition matrix can be estimated.
struct EmptyRow : Error {
    using Error::Error;
};

struct Infeasible : Error {
    using Error::Error;
};

struct Unbounded : Error {
    using Error::Error;
};

// Fair-spread search: the tranche is wiped out immediately in every
// scenario, so the expected return does not depend on the spread.
struct NoBracket : Error {
    using Error::Error;
};

struct CurveTooShort : Error {
    using Error::Error;
};

struct UnknownFirm : Error {
    using Error::Error;
};

// Malformed input data (CSV, scenario file); message carries line/offset.
struct DataError : Error {
    using Error::Error;
};

struct FormatError : DataError {
    using DataError::DataError;
};

struct ConfigError : Error {
    using Error::Error;
};

} // namespace cmc
