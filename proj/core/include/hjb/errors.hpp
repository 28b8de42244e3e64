#pragma once

#include <stdexcept>
#include <string>

namespace hjb {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid parameters or configuration values.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Argument outside the domain of a function (e.g. non-positive wealth).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Return covariance too small to invert.
class SingularSigmaError : public Error {
public:
    using Error::Error;
};

/// |u| fell below the guard used wherever the equation divides by u.
class DivisionHazardError : public Error {
public:
    using Error::Error;
};

/// NaN or infinity appeared in a gradient, loss or solution.
class NonFiniteError : public Error {
public:
    using Error::Error;
};

/// Value-function surface unusable for the portfolio formula.
class DegenerateSurfaceError : public Error {
public:
    using Error::Error;
};

/// Convexity requirement V_xx < 0 violated.
class ConvexityError : public Error {
public:
    using Error::Error;
};

/// DGM training stopped because the iterate became unusable.
class TrainingAborted : public Error {
public:
    using Error::Error;
};

}  // namespace hjb
