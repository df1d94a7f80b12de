#include "diffconst/time.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace diffconst {

UtcInstant UtcInstant::from_calendar(int year, int month, int day, int hour, int minute, double second) {
    if (month < 1 || month > 12 || day < 1 || day > 31 || hour < 0 || hour > 23 || minute < 0 || minute > 59 ||
        second < 0.0 || second >= 61.0) {
        throw std::invalid_argument("UtcInstant: calendar field out of range");
    }
    // Valid for 1900-2100 (no century leap-year corrections needed).
    const double jd = 367.0 * year - std::floor(7.0 * (year + std::floor((month + 9) / 12.0)) * 0.25) +
                      std::floor(275.0 * month / 9.0) + day + 1721013.5;
    UtcInstant t;
    t.jd_day = jd;
    t.jd_fraction = (second + minute * 60.0 + hour * 3600.0) / 86400.0;
    return t;
}

UtcInstant UtcInstant::parse(std::string_view iso) {
    const std::string s(iso);
    int y = 0, mo = 0, d = 0, h = 0, mi = 0;
    double sec = 0.0;
    const int n = std::sscanf(s.c_str(), "%d-%d-%dT%d:%d:%lf", &y, &mo, &d, &h, &mi, &sec);
    if (n != 3 && n < 5) throw std::invalid_argument("UtcInstant: cannot parse '" + s + "'");
    return from_calendar(y, mo, d, h, mi, sec);
}

std::string UtcInstant::to_iso() const {
    // Inverse of from_calendar; day-of-year arithmetic from the 1900 epoch.
    const double jd = jd_day + jd_fraction;
    const double t1900 = (jd - 2415019.5) / 365.25;
    int year = 1900 + static_cast<int>(std::floor(t1900));
    int leap_days = static_cast<int>(std::floor((year - 1901) * 0.25));
    double days = (jd - 2415019.5) - ((year - 1900) * 365.0 + leap_days);
    if (days < 1.0) {
        --year;
        leap_days = static_cast<int>(std::floor((year - 1901) * 0.25));
        days = (jd - 2415019.5) - ((year - 1900) * 365.0 + leap_days);
    }
    int lmonth[] = {31, (year % 4 == 0) ? 29 : 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    const int day_of_year = static_cast<int>(std::floor(days));
    int month = 1;
    int inttemp = 0;
    while (month < 12 && day_of_year > inttemp + lmonth[month - 1]) {
        inttemp += lmonth[month - 1];
        ++month;
    }
    const int day = day_of_year - inttemp;
    double secs = (days - day_of_year) * 86400.0;
    secs = std::round(secs * 1000.0) / 1000.0;
    const int hour = static_cast<int>(secs / 3600.0);
    const int minute = static_cast<int>((secs - hour * 3600.0) / 60.0);
    const double second = secs - hour * 3600.0 - minute * 60.0;
    char buf[48];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%06.3fZ", year, month, day, hour, minute, second);
    return buf;
}

}  // namespace diffconst
