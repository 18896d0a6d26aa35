#pragma once

#include <stdexcept>
#include <string>

namespace dropkit {

/// Bad user input: malformed files, inconsistent shapes, invalid configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input whose dimensions do not agree with the model description.
class ShapeError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// Non-finite values or failed numerical procedures at runtime.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace dropkit
