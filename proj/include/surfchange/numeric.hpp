#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <system_error>
#include <vector>

#include "surfchange/error.hpp"

namespace surfchange {

/// Median of `values`; even counts average the two middle order statistics.
/// Takes its argument by value because it reorders it.
inline double median(std::vector<double> values)
{
    SURFCHANGE_REQUIRE(!values.empty(), ErrorCode::InsufficientData, "median of empty set");
    const std::size_t n = values.size();
    const auto mid = values.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(values.begin(), mid, values.end());
    const double upper = *mid;
    if (n % 2 == 1) return upper;
    const double lower = *std::max_element(values.begin(), mid);
    return 0.5 * (lower + upper);
}

/// Round to `digits` significant decimal digits, via the same path printf uses,
/// so that printing the result with %.{digits}g reproduces it exactly.
inline double round_significant(double x, int digits = 6)
{
    if (!std::isfinite(x) || x == 0.0) return x;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, x);
    return std::strtod(buf, nullptr);
}

/// Shortest decimal text that parses back to exactly `x`.
inline std::string format_roundtrip(double x)
{
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
    if (ec != std::errc{}) throw Error(ErrorCode::NumericalFailure, "to_chars failed");
    return std::string(buf, end);
}

inline std::string format_significant(double x, int digits = 6)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, x);
    return buf;
}

} // namespace surfchange
