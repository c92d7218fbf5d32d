#pragma once

#include <stdexcept>
#include <string>

namespace bd {

/// Base class for every error the library throws.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid configuration: bad keys, out-of-range values, unsupported arch.
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error("config error: " + msg) {}
};

/// API contract violated by the caller (bad shapes, out-of-range labels, ...).
struct ContractError : Error {
    explicit ContractError(const std::string& msg) : Error("contract error: " + msg) {}
};

/// A computation produced NaN/Inf or was fed non-finite input.
struct NumericError : Error {
    explicit NumericError(const std::string& msg) : Error("numeric fault: " + msg) {}
};

/// Malformed or missing data files.
struct DataError : Error {
    explicit DataError(const std::string& msg) : Error("data error: " + msg) {}
};

/// Filesystem failures outside of dataset parsing.
struct IoError : Error {
    explicit IoError(const std::string& msg) : Error("io error: " + msg) {}
};

}  // namespace bd
