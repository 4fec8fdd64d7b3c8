#include "doctest.h"
#include "ellcone/program.hpp"

using namespace ellcone::lang;

namespace {

const char* kWalk2 = R"(
# two-dimensional random +-1 walk
var x1, x2;
init (0, 0);
loop y {
  choose { x1 := x1 + 1; | x1 := x1 - 1; | x2 := x2 + 1; | x2 := x2 - 1; }
}
)";

}  // namespace

TEST_CASE("the random-walk program parses to the expected shape") {
  Program p = parse(kWalk2);
  CHECK(p.vars == std::vector<std::string>({"x1", "x2"}));
  REQUIRE(p.has_init);
  CHECK(p.init_lo.isZero());
  CHECK(p.init_hi.isZero());
  REQUIRE(p.body.size() == 1);
  const Statement& loop = p.body[0];
  CHECK(loop.kind == Statement::Kind::Loop);
  CHECK(loop.counter == "y");
  CHECK(!loop.bound.has_value());
  REQUIRE(loop.body.size() == 1);
  const Statement& ch = loop.body[0];
  CHECK(ch.kind == Statement::Kind::Choose);
  CHECK(ch.branches.size() == 4);
  // Branch one is x1 := x1 + 1 as a full-state map.
  const Statement& a = ch.branches[0][0];
  CHECK(a.A.isIdentity(0.0));
  CHECK(a.b[0] == 1.0);
  CHECK(a.b[1] == 0.0);
}

TEST_CASE("empty loop bodies become Nop") {
  Program p = parse("var x; loop y to 5 { }");
  REQUIRE(p.body.size() == 1);
  REQUIRE(p.body[0].body.size() == 1);
  CHECK(p.body[0].body[0].kind == Statement::Kind::Nop);
  CHECK(p.body[0].bound == 5.0);
}

TEST_CASE("errors carry source locations") {
  try {
    parse("var x;\nx := z + 1;");
    FAIL("expected parse error");
  } catch (const ProgramParseError& e) {
    CHECK(e.where().line == 2);
    CHECK(std::string(e.what()).find("undeclared") != std::string::npos);
  }
  CHECK_THROWS_AS(parse("var x; loop y { loop y { x := x; } }"),
                  ProgramParseError);
  CHECK_THROWS_AS(parse("var x; loop x { }"), ProgramParseError);
  CHECK_THROWS_AS(parse("var x; x := 1 +"), ProgramParseError);
  CHECK_THROWS_AS(parse("var x; init (1, 2);"), ProgramParseError);
}

TEST_CASE("hexadecimal literals are bit-exact") {
  Program p = parse("var x; x := 0x1.8p+1 * x + 0x1p-2;");
  const Statement& a = p.body[0];
  CHECK(a.A(0, 0) == 3.0);
  CHECK(a.b[0] == 0.25);
}

TEST_CASE("affine expressions combine signs and coefficients") {
  Program p = parse("var u, v; u := -2 * u + 0.5 * v - 1 + v;");
  const Statement& a = p.body[0];
  CHECK(a.A(0, 0) == -2.0);
  CHECK(a.A(0, 1) == 1.5);
  CHECK(a.b[0] == -1.0);
  CHECK(a.A(1, 1) == 1.0);  // v untouched
}

TEST_CASE("counter_intervals reads bounds syntactically") {
  Program p = parse(
      "var x; loop a to 10 { x := x + 1; loop b { x := x; } } loop c to 3 { "
      "x := x; }");
  auto iv = counter_intervals(p, 1000.0);
  CHECK(iv.at("a").hi == 10.0);
  CHECK(!iv.at("a").horizon_relative);
  CHECK(iv.at("b").hi == 1000.0);
  CHECK(iv.at("b").horizon_relative);
  CHECK(iv.at("c").hi == 3.0);
  CHECK(iv.at("a").lo == 0.0);
}

TEST_CASE("box init parses per-variable brackets") {
  Program p = parse("var x, y; init [0, 1] [2, 3];");
  CHECK(p.init_lo[0] == 0.0);
  CHECK(p.init_hi[0] == 1.0);
  CHECK(p.init_lo[1] == 2.0);
  CHECK(p.init_hi[1] == 3.0);
}
