#pragma once

#include <string>

#include "mx/types.hpp"

namespace mx {

/// South African time: fixed UTC+2, no daylight saving.
inline constexpr Nanos kLocalOffset = 2 * 3600 * kNanosPerSecond;

/// Wall-clock timestamp with nanosecond precision, already shifted to local time.
struct LocalTime {
    Nanos local_ns = 0;

    std::int64_t day() const;            ///< days since 1970-01-01 (local calendar)
    Nanos time_of_day() const;           ///< ns since local midnight
    std::string iso() const;             ///< YYYY-MM-DDTHH:MM:SS.nnnnnnnnn

    friend auto operator<=>(LocalTime, LocalTime) = default;
};

LocalTime to_local_time(Nanos utc_ns);

/// Local calendar day of a UTC timestamp.
inline std::int64_t local_day(Nanos utc_ns) { return to_local_time(utc_ns).day(); }

/// ISO-8601 with the given number of fractional digits (0..9), no zone suffix.
std::string format_iso(Nanos ns, int frac_digits);

/// Parses "YYYY-MM-DDTHH:MM:SS[.fff...]" (also accepts a space separator) into ns
/// since the epoch of the same clock. Throws std::invalid_argument on malformed input.
Nanos parse_iso(std::string_view text);

/// Parses "HH:MM" into ns since midnight.
Nanos parse_hhmm(std::string_view text);

}  // namespace mx
