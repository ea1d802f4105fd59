#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace medrag {

/// Base class for all errors raised by the engine.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Caller passed arguments outside an operation's documented domain.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Input data is unusable (unreadable image, dimension mismatch, bad record).
class InputError : public Error {
public:
    using Error::Error;
};

/// Configuration file is missing, malformed, or out of range.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A model endpoint could not be reached after all retries.
class GatewayError : public Error {
public:
    GatewayError(const std::string& msg, std::size_t attempts)
        : Error(msg), attempts_(attempts) {}
    std::size_t attempts() const { return attempts_; }

private:
    std::size_t attempts_ = 0;
};

/// A wire call exceeded the endpoint timeout.
class TimeoutError : public GatewayError {
public:
    using GatewayError::GatewayError;
};

/// A model endpoint answered with a malformed or inconsistent response.
class ProtocolError : public Error {
public:
    using Error::Error;
};

/// A metric was requested over an empty or degenerate input set.
class UndefinedMetricError : public Error {
public:
    using Error::Error;
};

}  // namespace medrag
