#pragma once

#include <stdexcept>
#include <string>

namespace popbal {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid construction arguments or configuration values.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Courant number above one in an explicit sweep.
class StabilityError : public Error {
public:
    using Error::Error;
};

/// Internal inconsistency, e.g. negative densities beyond round-off.
class SolverError : public Error {
public:
    using Error::Error;
};

/// Physically impossible state such as negative solute concentration.
class InfeasibleError : public Error {
public:
    using Error::Error;
};

/// Misuse of an API contract (wrong output count, foreign tape, ...).
class ContractError : public Error {
public:
    using Error::Error;
};

/// Two result sets cannot be compared (sampling or grid mismatch).
class ComparisonError : public Error {
public:
    using Error::Error;
};

}  // namespace popbal
