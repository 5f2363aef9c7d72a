#pragma once

#include <stdexcept>
#include <string>

namespace timerep {

/// Invalid argument supplied by the caller (bad scheme name, degenerate range).
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A value lies outside the range an operation accepts.
class RangeError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// An object is not in the state an operation requires (e.g. backward before forward).
class StateError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Configuration is inconsistent or incomplete.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shapes of two collaborating objects disagree (checkpoint vs data, matrix operands).
class DimensionError : public ArgumentError {
public:
    using ArgumentError::ArgumentError;
};

/// The requested operation is not defined for this input (polar latitude, prior-scheme checkpoint).
class UnsupportedError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Every observation of a sample is masked out.
class EmptyInputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss or parameter.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input data could not be read or parsed.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace timerep
