#pragma once

#include <string>
#include <string_view>

namespace diffconst {

/// A UTC instant as a two-part Julian date (UT1 is taken equal to UTC).
struct UtcInstant {
    double jd_day = 2460310.5;  // 2024-01-01T00:00:00Z
    double jd_fraction = 0.0;

    double julian_date() const { return jd_day + jd_fraction; }
    static UtcInstant from_calendar(int year, int month, int day, int hour = 0, int minute = 0, double second = 0.0);
    /// ISO-8601 "YYYY-MM-DDThh:mm:ss[.fff][Z]".
    static UtcInstant parse(std::string_view iso);
    std::string to_iso() const;
};

inline constexpr double kJ2000 = 2451545.0;

}  // namespace diffconst
