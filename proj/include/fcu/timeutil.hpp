#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>

namespace fcu {

/// UTC instant with one-second resolution.
using Timestamp = std::chrono::sys_seconds;

/// Parses `YYYY-MM-DDTHH:MM[:SS][Z|+00:00]` (a space may replace the `T`).
/// Throws std::invalid_argument on malformed input or a non-UTC offset.
Timestamp parse_timestamp(std::string_view text);

/// Formats as `YYYY-MM-DDTHH:MM:SSZ`.
std::string format_timestamp(Timestamp t);

int hour_of_day(Timestamp t);
unsigned month_of(Timestamp t);
/// Zero-based day of the year.
int day_of_year(Timestamp t);

/// Calendar month arithmetic; the day of month is clamped to the target month.
Timestamp add_months(Timestamp t, int months);

inline std::int64_t seconds_since_epoch(Timestamp t) { return t.time_since_epoch().count(); }
inline Timestamp from_epoch_seconds(std::int64_t s) { return Timestamp{std::chrono::seconds{s}}; }
inline std::int64_t hours_to_seconds(int h) { return std::int64_t{h} * 3600; }

} // namespace fcu
