#ifndef CALLO_ERROR_HPP
#define CALLO_ERROR_HPP

#include <stdexcept>
#include <string>

namespace callo {

// Error taxonomy, mapped onto CLI exit codes:
//   1 = user / configuration error, 2 = data error, 3 = numeric failure.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
    virtual int exit_code() const { return 1; }
};

// Bad parameter values, malformed run configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Tensor / layer shape mismatches.
class DimensionError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

// Operation called in the wrong order (e.g. backward before forward).
class StateError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

// Unreadable, malformed or contract-violating input data.
class DataError : public Error {
public:
    using Error::Error;
    int exit_code() const override { return 2; }
};

// Input data is structurally valid but unusable (zero variance, singular scatter, ...).
class DegenerateDataError : public DataError {
public:
    using DataError::DataError;
};

// Foreground extraction produced an empty mask; caller may route to a manual path.
class SegmentationError : public DataError {
public:
    using DataError::DataError;
};

// Non-finite values where finite ones are required.
class NumericError : public Error {
public:
    using Error::Error;
    int exit_code() const override { return 3; }
};

} // namespace callo

#endif // CALLO_ERROR_HPP
