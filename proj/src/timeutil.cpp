#include "fcu/timeutil.hpp"

#include <charconv>
#include <cstdio>
#include <stdexcept>

namespace fcu {

namespace {

int parse_int(std::string_view text, std::size_t pos, std::size_t len) {
  if (pos + len > text.size()) {
    throw std::invalid_argument("truncated timestamp: " + std::string(text));
  }
  int value = 0;
  auto first = text.data() + pos;
  auto [ptr, ec] = std::from_chars(first, first + len, value);
  if (ec != std::errc{} || ptr != first + len) {
    throw std::invalid_argument("malformed timestamp: " + std::string(text));
  }
  return value;
}

void expect(std::string_view text, std::size_t pos, char c) {
  if (pos >= text.size() || text[pos] != c) {
    throw std::invalid_argument("malformed timestamp: " + std::string(text));
  }
}

} // namespace

Timestamp parse_timestamp(std::string_view text) {
  using namespace std::chrono;
  while (!text.empty() && (text.back() == ' ' || text.back() == '\r')) {
    text.remove_suffix(1);
  }
  const int y = parse_int(text, 0, 4);
  expect(text, 4, '-');
  const int mo = parse_int(text, 5, 2);
  expect(text, 7, '-');
  const int d = parse_int(text, 8, 2);
  if (text.size() < 11 || (text[10] != 'T' && text[10] != ' ')) {
    throw std::invalid_argument("malformed timestamp: " + std::string(text));
  }
  const int hh = parse_int(text, 11, 2);
  expect(text, 13, ':');
  const int mm = parse_int(text, 14, 2);
  std::size_t pos = 16;
  int ss = 0;
  if (pos < text.size() && text[pos] == ':') {
    ss = parse_int(text, pos + 1, 2);
    pos += 3;
  }
  const std::string_view zone = text.substr(pos);
  if (!(zone.empty() || zone == "Z" || zone == "+00:00" || zone == "+0000")) {
    throw std::invalid_argument("timestamp is not UTC: " + std::string(text));
  }
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || hh > 23 || mm > 59 || ss > 60) {
    throw std::invalid_argument("invalid calendar time: " + std::string(text));
  }
  return sys_days{ymd} + hours{hh} + minutes{mm} + seconds{ss};
}

std::string format_timestamp(Timestamp t) {
  using namespace std::chrono;
  const auto day = floor<days>(t);
  const year_month_day ymd{day};
  const hh_mm_ss hms{t - day};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

int hour_of_day(Timestamp t) {
  using namespace std::chrono;
  const auto day = floor<days>(t);
  return static_cast<int>(duration_cast<hours>(t - day).count());
}

unsigned month_of(Timestamp t) {
  using namespace std::chrono;
  return static_cast<unsigned>(year_month_day{floor<days>(t)}.month());
}

int day_of_year(Timestamp t) {
  using namespace std::chrono;
  const auto day = floor<days>(t);
  const year_month_day ymd{day};
  return static_cast<int>((day - sys_days{ymd.year() / January / 1}).count());
}

Timestamp add_months(Timestamp t, int months) {
  using namespace std::chrono;
  const auto day = floor<days>(t);
  const auto time_of_day = t - day;
  year_month_day ymd{day};
  auto shifted = ymd.year() / ymd.month() / ymd.day() + std::chrono::months{months};
  if (!shifted.ok()) {
    shifted = shifted.year() / shifted.month() / last;
  }
  return sys_days{shifted} + time_of_day;
}

} // namespace fcu
