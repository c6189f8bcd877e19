#include "emsrisk/time.hpp"

#include <charconv>
#include <cstdio>

#include "emsrisk/error.hpp"

namespace emsrisk {

using namespace std::chrono;

namespace {

int floor_div(std::int64_t a, std::int64_t b, std::int64_t* rem) {
  std::int64_t q = a / b;
  std::int64_t r = a % b;
  if (r < 0) {
    r += b;
    --q;
  }
  if (rem) *rem = r;
  return static_cast<int>(q);
}

bool read_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  auto first = s.data() + pos;
  auto [ptr, ec] = std::from_chars(first, first + len, out);
  return ec == std::errc{} && ptr == first + len;
}

}  // namespace

std::int64_t day_index(Date d) { return sys_days{d}.time_since_epoch().count(); }

Date date_from_day_index(std::int64_t day) {
  return Date{sys_days{days{day}}};
}

HourStamp make_hour(Date date, int hour) {
  if (!date.ok()) throw UsageError("invalid calendar date");
  if (hour < 0 || hour > 23) throw UsageError("hour out of range: " + std::to_string(hour));
  return HourStamp{day_index(date) * 24 + hour};
}

HourStamp make_hour(int y, unsigned m, unsigned d, int hour) {
  return make_hour(Date{year{y}, month{m}, day{d}}, hour);
}

Date parse_date(std::string_view s) {
  int y = 0, m = 0, d = 0;
  if (s.size() < 10 || s[4] != '-' || s[7] != '-' || !read_int(s, 0, 4, y) ||
      !read_int(s, 5, 2, m) || !read_int(s, 8, 2, d))
    throw UsageError("malformed date '" + std::string(s) + "'");
  Date date{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
  if (!date.ok()) throw UsageError("invalid date '" + std::string(s) + "'");
  return date;
}

HourStamp parse_timestamp(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  Date date = parse_date(s);
  if (s.size() == 10) return make_hour(date, 0);
  int h = 0, mi = 0, sec = 0;
  bool ok = (s[10] == 'T' || s[10] == ' ') && read_int(s, 11, 2, h);
  if (ok && s.size() > 13) ok = s[13] == ':' && read_int(s, 14, 2, mi) && mi < 60;
  if (ok && s.size() > 16) ok = s.size() == 19 && s[16] == ':' && read_int(s, 17, 2, sec) && sec < 61;
  if (ok) ok = s.size() == 13 || s.size() == 16 || s.size() == 19;
  if (!ok || h > 23) throw UsageError("malformed timestamp '" + std::string(s) + "'");
  return make_hour(date, h);
}

std::string format_date(Date d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

std::string format_timestamp(HourStamp t) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%sT%02d:00", format_date(civil_date(t)).c_str(),
                hour_of_day(t));
  return buf;
}

std::int64_t day_index(HourStamp t) { return floor_div(t.hours, 24, nullptr); }

Date civil_date(HourStamp t) { return date_from_day_index(day_index(t)); }

int hour_of_day(HourStamp t) {
  std::int64_t r = 0;
  floor_div(t.hours, 24, &r);
  return static_cast<int>(r);
}

int day_of_week(HourStamp t) {
  // 1970-01-01 was a Thursday (Monday-based index 3).
  std::int64_t r = 0;
  floor_div(day_index(t) + 3, 7, &r);
  return static_cast<int>(r);
}

int hour_of_week(HourStamp t) { return 24 * day_of_week(t) + hour_of_day(t); }

int day_of_year(Date d) {
  Date jan1{d.year(), January, day{1}};
  return static_cast<int>(day_index(d) - day_index(jan1)) + 1;
}

}  // namespace emsrisk
