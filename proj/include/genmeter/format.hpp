#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <string>

namespace genmeter {

// Shortest round-trip decimal form of a double. Non-finite values keep the
// sentinel spellings used by the run store.
inline std::string format_double(double x) {
    if (std::isnan(x)) return "NaN";
    if (std::isinf(x)) return x > 0 ? "Infinity" : "-Infinity";
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

inline std::string format_fixed(double x, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", precision, x);
    return std::string(buf);
}

}  // namespace genmeter
