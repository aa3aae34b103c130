#include <doctest.h>

#include <cmath>
#include <limits>

#include "fcu/textio.hpp"
#include "fcu/timeutil.hpp"

using namespace fcu;

TEST_SUITE("timeutil") {
  TEST_CASE("timestamps parse in every accepted spelling") {
    const auto ref = parse_timestamp("2016-07-15T12:00:00Z");
    CHECK(parse_timestamp("2016-07-15 12:00:00") == ref);
    CHECK(parse_timestamp("2016-07-15T12:00") == ref);
    CHECK(parse_timestamp("2016-07-15T12:00:00+00:00") == ref);
    CHECK(parse_timestamp("2016-07-15T12:00:00+0000") == ref);
    CHECK(format_timestamp(ref) == "2016-07-15T12:00:00Z");
    CHECK(hour_of_day(ref) == 12);
    CHECK(month_of(ref) == 7u);
  }

  TEST_CASE("malformed timestamps are rejected") {
    CHECK_THROWS_AS(parse_timestamp("2016-13-01T00:00:00Z"), std::invalid_argument);
    CHECK_THROWS_AS(parse_timestamp("2016-02-30T00:00:00Z"), std::invalid_argument);
    CHECK_THROWS_AS(parse_timestamp("2016-01-01T00:00:00+01:00"), std::invalid_argument);
    CHECK_THROWS_AS(parse_timestamp("yesterday"), std::invalid_argument);
  }

  TEST_CASE("day of year and month arithmetic") {
    CHECK(day_of_year(parse_timestamp("2016-01-01T05:00:00Z")) == 0);
    CHECK(day_of_year(parse_timestamp("2016-12-31T00:00:00Z")) == 365);
    CHECK(add_months(parse_timestamp("2016-01-31T00:00:00Z"), 1) == parse_timestamp("2016-02-29T00:00:00Z"));
    CHECK(add_months(parse_timestamp("2016-11-01T00:00:00Z"), 6) == parse_timestamp("2017-05-01T00:00:00Z"));
  }

  TEST_CASE("doubles round-trip through text") {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0}) {
      double back = 0.0;
      REQUIRE(parse_double(format_double(v), back));
      CHECK(back == v);
    }
    double out = 0.0;
    CHECK_FALSE(parse_double("1.5x", out));
    CHECK_FALSE(parse_double("", out));
    CHECK(parse_double(" 2.5 ", out));
    CHECK(out == 2.5);
  }

  TEST_CASE("csv split keeps empty fields") {
    const auto f = split_csv_line("a,,c");
    REQUIRE(f.size() == 3);
    CHECK(f[1].empty());
  }

  TEST_CASE("seed mixing separates salts") {
    CHECK(mix_seed(1, 1) != mix_seed(1, 2));
    CHECK(mix_seed(1, 1) == mix_seed(1, 1));
  }
}
