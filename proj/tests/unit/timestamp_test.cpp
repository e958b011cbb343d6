#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace egovqa;
using testing_support::Gen;

TEST(Timestamp, ParsesCanonicalForms) {
  EXPECT_EQ(parse_timestamp("00:01:30.500").millis, 90500);
  EXPECT_EQ(parse_timestamp("00:00:00.000").millis, 0);
  EXPECT_EQ(parse_timestamp("1:02:03.004").millis, 3723004);
}

TEST(Timestamp, HandComputedOracle) {
  const std::int64_t expected = 1 * 3600000 + 2 * 60000 + 3 * 1000 + 4;
  EXPECT_EQ(expected, 3723004);
  EXPECT_EQ(parse_timestamp("01:02:03.004").millis, expected);
  EXPECT_EQ(format_timestamp(Timestamp{expected}), "01:02:03.004");
}

TEST(Timestamp, Formats) {
  EXPECT_EQ(format_timestamp(Timestamp{0}), "00:00:00.000");
  EXPECT_EQ(format_timestamp(Timestamp{90500}), "00:01:30.500");
  EXPECT_EQ(format_timestamp(Timestamp{100LL * 3600000 + 1}), "100:00:00.001");
}

TEST(Timestamp, RejectsMalformed) {
  for (const char* bad : {"", "00:00:00", "00:00.000", "00:00:00:00.000", "00:60:00.000", "00:00:60.000",
                          "0a:00:00.000", "00:0:00.000", "00:00:00.00", "00:00:00.0000", "00-00-00.000",
                          "00:00:00,000", " 00:00:00.000", "00:00:00.000 ", "00:00.5:00.000", "-1:00:00.000"}) {
    try {
      parse_timestamp(bad);
      ADD_FAILURE() << "accepted '" << bad << "'";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::MalformedTimestamp) << bad;
    }
  }
}

TEST(Timestamp, RoundTripAndOrderProperty) {
  Gen g(7);
  for (int i = 0; i < 10000; ++i) {
    Timestamp a{g.range(0, 200LL * 3600000)};
    Timestamp b{g.coin(0.1) ? a.millis : g.range(0, 200LL * 3600000)};
    ASSERT_EQ(parse_timestamp(format_timestamp(a)), a);
    // Equal-width formatted strings sort like their values.
    auto fa = format_timestamp(a), fb = format_timestamp(b);
    if (fa.size() == fb.size()) ASSERT_EQ(fa < fb, a < b) << fa << " " << fb;
  }
}

TEST(Timestamp, SegmentValidation) {
  EXPECT_EQ(TimeSegment("v", Timestamp{5}, Timestamp{9}).length_ms(), 4);
  EXPECT_THROW(TimeSegment("v", Timestamp{9}, Timestamp{5}), Error);
  EXPECT_THROW(TimeSegment("", Timestamp{0}, Timestamp{5}), Error);
}

TEST(Timestamp, FramesInRoundsUp) {
  EXPECT_EQ((Fps{1, 1}.frames_in(2000)), 2);
  EXPECT_EQ((Fps{1, 1}.frames_in(2001)), 3);
  EXPECT_EQ((Fps{2, 1}.frames_in(1500)), 3);
  EXPECT_EQ((Fps{1, 2}.frames_in(3000)), 2);
  EXPECT_EQ((Fps{30000, 1001}.frames_in(1001)), 30);
}
