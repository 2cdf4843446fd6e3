#include <doctest.h>

#include <limits>
#include <sstream>

#include "windloss/csv.hpp"
#include "windloss/rng.hpp"

using namespace windloss;

namespace {

CsvTable parse(const std::string& text) {
  std::istringstream in(text);
  return read_csv(in, "test");
}

}  // namespace

TEST_CASE("read_csv handles quoting, CRLF and a byte-order mark") {
  const auto t = parse("\xEF\xBB\xBF" "a,b,c\r\n1,\"x, y\",\"say \"\"hi\"\"\"\r\n2,,3\n");
  REQUIRE(t.header == std::vector<std::string>{"a", "b", "c"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0][1] == "x, y");
  CHECK(t.rows[0][2] == "say \"hi\"");
  CHECK(t.rows[1] == std::vector<std::string>{"2", "", "3"});
  CHECK(t.find_column("c") == 2u);
  CHECK_FALSE(t.find_column("missing").has_value());
}

TEST_CASE("read_csv rejects a missing or unparseable header") {
  CHECK_THROWS_AS(parse(""), DataError);
  CHECK_THROWS_AS(parse("a,,c\n1,2,3\n"), DataError);
}

TEST_CASE("read_csv_file names the missing path") {
  try {
    read_csv_file("/nonexistent/meteo.csv");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("/nonexistent/meteo.csv") != std::string::npos);
  }
}

TEST_CASE("write_csv_row output parses back to the same fields") {
  const std::vector<std::string> fields{"plain", "with,comma", "with \"quote\"", "", "line\nbreak"};
  std::ostringstream out;
  write_csv_row(out, {"h1", "h2", "h3", "h4", "h5"});
  write_csv_row(out, fields);
  const auto t = parse(out.str());
  REQUIRE(t.rows.size() == 1);
  CHECK(t.rows[0] == fields);
}

TEST_CASE("format_double round-trips random doubles") {
  Rng rng(7);
  for (int i = 0; i < 2000; ++i) {
    const double v = (rng.uniform01() - 0.5) * std::pow(10.0, rng.uniform(-8.0, 12.0));
    const auto text = format_double(v);
    const auto back = parse_double(text);
    REQUIRE(back.has_value());
    CHECK(*back == v);
  }
  CHECK(format_double(0.0) == "0");
  CHECK(format_double(1.5) == "1.5");
  CHECK(format_fixed(851468.125, 2) == "851468.12");
  CHECK(format_fixed(2.0 / 3.0, 4) == "0.6667");
}

TEST_CASE("parse_double and parse_integer are strict") {
  CHECK(parse_double(" 12.5 ") == 12.5);
  CHECK(parse_double("-3e2") == -300.0);
  CHECK_FALSE(parse_double("n/a").has_value());
  CHECK_FALSE(parse_double("").has_value());
  CHECK_FALSE(parse_double("12abc").has_value());
  CHECK_FALSE(parse_double("1e999").has_value());
  CHECK_FALSE(parse_double("nan").has_value());
  CHECK(parse_integer("42") == 42);
  CHECK_FALSE(parse_integer("4.2").has_value());
  CHECK_FALSE(parse_integer("x").has_value());
  CHECK(trim("  a b \t") == "a b");
}
