#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace emos {

// Calendar day. Arithmetic in whole days via std::chrono::days.
using Date = std::chrono::sys_days;

// Parses strict ISO-8601 `YYYY-MM-DD`; throws DataError otherwise.
Date parse_date(std::string_view text);
std::string format_date(Date d);

} // namespace emos
