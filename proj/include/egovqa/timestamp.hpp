#pragma once

#include <compare>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

#include "egovqa/error.hpp"

namespace egovqa {

/// Millisecond offset from the start of a video's timeline.
struct Timestamp {
  std::int64_t millis = 0;

  constexpr Timestamp() = default;
  constexpr explicit Timestamp(std::int64_t ms) : millis(ms) {}

  friend constexpr auto operator<=>(const Timestamp&, const Timestamp&) = default;
};

/// Parses `H:MM:SS.sss` / `HH:MM:SS.sss`. More than two hour digits are also
/// accepted so that long concatenated timelines round-trip.
inline Timestamp parse_timestamp(std::string_view text) {
  auto fail = [&](const char* why) {
    return Error(Errc::MalformedTimestamp, "'" + std::string(text) + "': " + why);
  };
  auto digits = [](std::string_view s) {
    if (s.empty()) return false;
    for (char c : s)
      if (c < '0' || c > '9') return false;
    return true;
  };
  auto value = [](std::string_view s) {
    std::int64_t v = 0;
    for (char c : s) v = v * 10 + (c - '0');
    return v;
  };

  auto c1 = text.find(':');
  if (c1 == std::string_view::npos) throw fail("missing ':' separators");
  auto c2 = text.find(':', c1 + 1);
  if (c2 == std::string_view::npos) throw fail("expected two ':' separators");
  if (text.find(':', c2 + 1) != std::string_view::npos) throw fail("too many ':' separators");
  auto dot = text.find('.', c2 + 1);
  if (dot == std::string_view::npos || text.find('.', dot + 1) != std::string_view::npos)
    throw fail("expected exactly one '.' before milliseconds");
  if (text.substr(0, c2).find('.') != std::string_view::npos) throw fail("misplaced '.'");

  auto hh = text.substr(0, c1);
  auto mm = text.substr(c1 + 1, c2 - c1 - 1);
  auto ss = text.substr(c2 + 1, dot - c2 - 1);
  auto ms = text.substr(dot + 1);
  if (!digits(hh) || hh.size() > 9) throw fail("hours must be 1+ digits");
  if (!digits(mm) || mm.size() != 2) throw fail("minutes must be two digits");
  if (!digits(ss) || ss.size() != 2) throw fail("seconds must be two digits");
  if (!digits(ms) || ms.size() != 3) throw fail("milliseconds must be three digits");
  auto m = value(mm), s = value(ss);
  if (m >= 60) throw fail("minutes >= 60");
  if (s >= 60) throw fail("seconds >= 60");
  return Timestamp{value(hh) * 3'600'000 + m * 60'000 + s * 1'000 + value(ms)};
}

/// Canonical `HH:MM:SS.sss`; hours grow past two digits instead of wrapping.
inline std::string format_timestamp(Timestamp t) {
  std::int64_t v = t.millis < 0 ? 0 : t.millis;
  char buf[48];
  std::snprintf(buf, sizeof buf, "%02lld:%02lld:%02lld.%03lld", static_cast<long long>(v / 3'600'000),
                static_cast<long long>(v / 60'000 % 60), static_cast<long long>(v / 1'000 % 60),
                static_cast<long long>(v % 1'000));
  return buf;
}

struct TimeSegment {
  std::string video_id;
  Timestamp start;
  Timestamp end;

  TimeSegment() = default;
  TimeSegment(std::string video, Timestamp s, Timestamp e) : video_id(std::move(video)), start(s), end(e) {
    if (video_id.empty()) throw Error(Errc::InvalidSegment, "empty video id");
    if (start.millis < 0 || end < start)
      throw Error(Errc::InvalidSegment, format_timestamp(start) + " - " + format_timestamp(end));
  }

  std::int64_t length_ms() const { return end.millis - start.millis; }

  friend bool operator==(const TimeSegment&, const TimeSegment&) = default;
};

/// Frames per second as an exact fraction.
struct Fps {
  std::int64_t num = 1;
  std::int64_t den = 1;

  // ceil(length_ms * fps / 1000)
  std::int64_t frames_in(std::int64_t length_ms) const {
    const std::int64_t scaled = length_ms * num;
    const std::int64_t div = 1000 * den;
    return (scaled + div - 1) / div;
  }

  friend bool operator==(const Fps&, const Fps&) = default;
};

}  // namespace egovqa
