#include "mx/time.hpp"

#include <charconv>
#include <stdexcept>

#include <fmt/format.h>

namespace mx {
namespace {

// Howard Hinnant's days_from_civil / civil_from_days.
struct Civil {
    std::int64_t y;
    unsigned m;
    unsigned d;
};

constexpr std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

constexpr Civil civil_from_days(std::int64_t z) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const auto doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    return {y + (m <= 2), m, d};
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

template <typename T>
T take_int(std::string_view& s, std::size_t width, std::string_view what) {
    if (s.size() < width) throw std::invalid_argument(fmt::format("timestamp: truncated {}", what));
    T v{};
    auto [p, ec] = std::from_chars(s.data(), s.data() + width, v);
    if (ec != std::errc{} || p != s.data() + width)
        throw std::invalid_argument(fmt::format("timestamp: bad {}", what));
    s.remove_prefix(width);
    return v;
}

void expect(std::string_view& s, char c) {
    if (s.empty() || s.front() != c)
        throw std::invalid_argument(fmt::format("timestamp: expected '{}'", c));
    s.remove_prefix(1);
}

}  // namespace

std::int64_t LocalTime::day() const { return floor_div(local_ns, kNanosPerDay); }

Nanos LocalTime::time_of_day() const { return local_ns - day() * kNanosPerDay; }

std::string LocalTime::iso() const { return format_iso(local_ns, 9); }

LocalTime to_local_time(Nanos utc_ns) { return LocalTime{utc_ns + kLocalOffset}; }

std::string format_iso(Nanos ns, int frac_digits) {
    const std::int64_t days = floor_div(ns, kNanosPerDay);
    const Nanos tod = ns - days * kNanosPerDay;
    const Civil c = civil_from_days(days);
    const std::int64_t secs = tod / kNanosPerSecond;
    const std::int64_t frac = tod % kNanosPerSecond;
    std::string out = fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}", c.y, c.m, c.d, secs / 3600,
                                  (secs / 60) % 60, secs % 60);
    if (frac_digits > 0) {
        std::int64_t scaled = frac;
        for (int i = frac_digits; i < 9; ++i) scaled /= 10;
        out += fmt::format(".{:0{}}", scaled, frac_digits);
    }
    return out;
}

Nanos parse_iso(std::string_view s) {
    const auto y = take_int<std::int64_t>(s, 4, "year");
    expect(s, '-');
    const auto mo = take_int<unsigned>(s, 2, "month");
    expect(s, '-');
    const auto d = take_int<unsigned>(s, 2, "day");
    if (s.empty() || (s.front() != 'T' && s.front() != ' '))
        throw std::invalid_argument("timestamp: expected 'T'");
    s.remove_prefix(1);
    const auto hh = take_int<std::int64_t>(s, 2, "hour");
    expect(s, ':');
    const auto mm = take_int<std::int64_t>(s, 2, "minute");
    expect(s, ':');
    const auto ss = take_int<std::int64_t>(s, 2, "second");
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || hh > 23 || mm > 59 || ss > 60)
        throw std::invalid_argument("timestamp: field out of range");
    Nanos frac = 0;
    if (!s.empty() && s.front() == '.') {
        s.remove_prefix(1);
        int digits = 0;
        while (!s.empty() && s.front() >= '0' && s.front() <= '9') {
            if (digits < 9) {
                frac = frac * 10 + (s.front() - '0');
                ++digits;
            }
            s.remove_prefix(1);
        }
        if (digits == 0) throw std::invalid_argument("timestamp: empty fraction");
        for (; digits < 9; ++digits) frac *= 10;
    }
    if (!s.empty() && s != "Z") throw std::invalid_argument("timestamp: trailing characters");
    return days_from_civil(y, mo, d) * kNanosPerDay + ((hh * 60 + mm) * 60 + ss) * kNanosPerSecond + frac;
}

Nanos parse_hhmm(std::string_view s) {
    const auto hh = take_int<std::int64_t>(s, 2, "hour");
    expect(s, ':');
    const auto mm = take_int<std::int64_t>(s, 2, "minute");
    if (!s.empty() || hh > 24 || mm > 59) throw std::invalid_argument("bad HH:MM");
    return (hh * 60 + mm) * kNanosPerMinute;
}

}  // namespace mx
