#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace hydat {

/// UTC instant with one-second resolution. Hourly records are stored at
/// whole hours; see is_hour_aligned().
using Timestamp = std::chrono::sys_seconds;
using Hours = std::chrono::hours;

/// Accepts `YYYY-MM-DD`, `YYYY-MM-DDTHH:MM[:SS][Z]` and the same with a
/// space separator. Naive inputs are taken as UTC.
/// Throws ValidationError on malformed text.
Timestamp parse_timestamp(std::string_view text);

/// ISO-8601 UTC, e.g. `2020-01-15T00:00:00Z`. Sorts lexicographically.
std::string format_timestamp(Timestamp t);

bool is_hour_aligned(Timestamp t) noexcept;

Timestamp make_timestamp(int year, unsigned month, unsigned day, unsigned hour = 0);

int year_of(Timestamp t);
unsigned month_of(Timestamp t);

}  // namespace hydat
