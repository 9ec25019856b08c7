#pragma once

#include <stdexcept>
#include <string>

namespace civae {

/// Invalid configuration or misuse of an interface (bad dimensions, bad flags).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed or inconsistent data on disk (manifests, CSVs, checkpoints).
struct DataError : std::runtime_error {
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure at runtime (non-finite values, degenerate systems).
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace civae
