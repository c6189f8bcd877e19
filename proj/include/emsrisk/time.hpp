#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace emsrisk {

/// An hour-resolution instant in naive local clock time, stored as whole
/// hours since 1970-01-01T00:00. No timezone or DST handling: a 25-hour
/// day simply has two slots labelled with the same clock hour upstream.
struct HourStamp {
  std::int64_t hours = 0;

  friend auto operator<=>(const HourStamp&, const HourStamp&) = default;
  HourStamp operator+(std::int64_t h) const { return HourStamp{hours + h}; }
  HourStamp operator-(std::int64_t h) const { return HourStamp{hours - h}; }
  std::int64_t operator-(HourStamp o) const { return hours - o.hours; }
};

using Date = std::chrono::year_month_day;

HourStamp make_hour(int year, unsigned month, unsigned day, int hour = 0);
HourStamp make_hour(Date date, int hour = 0);

/// Accepts "YYYY-MM-DD", "YYYY-MM-DDTHH", "YYYY-MM-DDTHH:MM" and
/// "YYYY-MM-DDTHH:MM:SS" (a space may replace the 'T'). Minutes and
/// seconds are truncated. Throws UsageError on malformed text.
HourStamp parse_timestamp(std::string_view text);

/// "YYYY-MM-DDTHH:00".
std::string format_timestamp(HourStamp t);
/// "YYYY-MM-DD".
std::string format_date(Date d);
Date parse_date(std::string_view text);

/// Days since 1970-01-01 (floor).
std::int64_t day_index(HourStamp t);
Date civil_date(HourStamp t);
Date date_from_day_index(std::int64_t day);
std::int64_t day_index(Date d);

/// 0..23, local clock hour.
int hour_of_day(HourStamp t);
/// Monday = 0 ... Sunday = 6.
int day_of_week(HourStamp t);
/// 24 * day_of_week + hour_of_day; Monday 00:00 is slot 0.
int hour_of_week(HourStamp t);
/// 1-based ordinal day of the year (1..366).
int day_of_year(Date d);

inline constexpr int kHoursPerDay = 24;
inline constexpr int kHoursPerWeek = 168;

}  // namespace emsrisk
