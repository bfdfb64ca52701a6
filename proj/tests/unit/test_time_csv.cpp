#include <gtest/gtest.h>

#include <sstream>

#include "hydat/csv.hpp"
#include "hydat/error.hpp"
#include "hydat/random.hpp"
#include "hydat/time.hpp"

namespace hydat {
namespace {

TEST(Time, ParsesAcceptedForms) {
  const auto want = make_timestamp(2020, 1, 15, 6);
  EXPECT_EQ(parse_timestamp("2020-01-15T06:00:00Z"), want);
  EXPECT_EQ(parse_timestamp("2020-01-15T06:00"), want);
  EXPECT_EQ(parse_timestamp("2020-01-15 06:00:00"), want);
  EXPECT_EQ(parse_timestamp("2020-01-15"), make_timestamp(2020, 1, 15));
}

TEST(Time, RejectsMalformed) {
  for (const char* bad : {"", "2020", "2020-13-01", "2020-02-30", "2020-01-15T25:00", "2020-01-15X06:00",
                          "2020-01-15T06:00:00+01:00"}) {
    EXPECT_THROW(parse_timestamp(bad), ValidationError) << bad;
  }
}

TEST(Time, FormatRoundTrip) {
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const auto t = make_timestamp(1990 + static_cast<int>(rng.index(60)), 1 + static_cast<unsigned>(rng.index(12)),
                                  1 + static_cast<unsigned>(rng.index(28)), static_cast<unsigned>(rng.index(24)));
    EXPECT_EQ(parse_timestamp(format_timestamp(t)), t);
    EXPECT_TRUE(is_hour_aligned(t));
  }
  EXPECT_EQ(format_timestamp(make_timestamp(2016, 2, 29, 23)), "2016-02-29T23:00:00Z");
  EXPECT_FALSE(is_hour_aligned(parse_timestamp("2020-01-01T00:30")));
}

TEST(Csv, SplitHandlesQuotes) {
  EXPECT_EQ(csv::split_record("a,b,,c"), (std::vector<std::string>{"a", "b", "", "c"}));
  EXPECT_EQ(csv::split_record("\"x,y\",\"he said \"\"hi\"\"\""),
            (std::vector<std::string>{"x,y", "he said \"hi\""}));
  EXPECT_EQ(csv::split_record("a,b\r"), (std::vector<std::string>{"a", "b"}));
}

TEST(Csv, EscapeJoinRoundTrip) {
  const std::vector<std::string> fields{"Plant A", "A ID1", "x,y", "q\"q", " lead", ""};
  EXPECT_EQ(csv::split_record(csv::join(fields)), fields);
  EXPECT_EQ(csv::escape("plain"), "plain");
}

TEST(Csv, ReaderTracksLineNumbers) {
  std::istringstream in("h1,h2\n\n1,2\n3,4\n");
  csv::Reader r(in);
  std::vector<std::string> f;
  ASSERT_TRUE(r.next(f));
  EXPECT_EQ(r.line_number(), 1u);
  ASSERT_TRUE(r.next(f));
  EXPECT_EQ(r.line_number(), 3u);
  EXPECT_EQ(f, (std::vector<std::string>{"1", "2"}));
  ASSERT_TRUE(r.next(f));
  EXPECT_FALSE(r.next(f));
}

TEST(Csv, NumericParsing) {
  EXPECT_FALSE(csv::parse_optional_double("  ", 3, "flow_cfs"));
  EXPECT_DOUBLE_EQ(*csv::parse_optional_double(" 12.5 ", 3, "flow_cfs"), 12.5);
  try {
    csv::parse_double("abc", 17, "head_ft");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("17"), std::string::npos);
  }
  EXPECT_EQ(csv::parse_integer("40001", 1, "bus"), 40001);
  EXPECT_THROW(csv::parse_integer("4.5", 1, "bus"), ValidationError);
}

TEST(Csv, FixedAndExact) {
  EXPECT_EQ(csv::fixed(79.4800001, 2), "79.48");
  EXPECT_EQ(csv::fixed(-0.001, 2), "0.00");
  EXPECT_EQ(csv::fixed(2.5, 0), "2");
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.gaussian(0.0, 1e6);
    EXPECT_EQ(std::stod(csv::exact(v)), v);
  }
}

}  // namespace
}  // namespace hydat
