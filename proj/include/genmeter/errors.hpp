#pragma once

#include <stdexcept>
#include <string>

namespace genmeter {

// Base for all library errors so callers can catch genmeter failures as one family.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Dimension/shape disagreement between tensors or model/data.
struct ShapeError : Error {
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// A forward pass or derived quantity produced NaN/Inf. Never propagated silently.
struct NonFiniteError : Error {
    explicit NonFiniteError(const std::string& msg) : Error(msg) {}
};

// Bad user-supplied configuration (sweep config file, CLI arguments).
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Run-store violations: duplicate run ids, unreadable records.
struct StoreError : Error {
    explicit StoreError(const std::string& msg) : Error(msg) {}
};

}  // namespace genmeter
