#pragma once

#include "hydrotwin/twin.hpp"

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace hydrotwin {

using Date = std::chrono::sys_days;

/// Parses `YYYY-MM-DDTHH:MM:SSZ` (or a `+00:00` offset). Sub-second
/// precision and non-UTC offsets are rejected.
std::optional<Timestamp> parse_rfc3339(std::string_view text);
std::string format_rfc3339(Timestamp ts);

std::optional<Date> parse_date(std::string_view text);
std::string format_date(Date d);

/// 0 = Monday ... 6 = Sunday.
int day_of_week(Timestamp ts);

Date date_of(Timestamp ts);

} // namespace hydrotwin
