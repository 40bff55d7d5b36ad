#pragma once

#include <stdexcept>
#include <string>

namespace eeo {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor/layer dimension disagreement; the message names expected vs actual dims.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Invalid argument value (out-of-grid sigma, bad label, non-positive temperature, ...).
class ValueError : public Error {
public:
    using Error::Error;
};

/// Malformed persisted or wire data.
class FormatError : public Error {
public:
    enum class Code {
        BadMagic,
        VersionMismatch,
        Truncated,
        LengthMismatch,
        Malformed,
    };

    FormatError(Code code, const std::string& msg) : Error(msg), code_(code) {}
    Code code() const { return code_; }

private:
    Code code_;
};

/// Bad experiment/profile configuration or dataset layout.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Edge<->cloud transport failure (connection refused, HTTP error, ...).
class TransportError : public Error {
public:
    using Error::Error;
};

} // namespace eeo
