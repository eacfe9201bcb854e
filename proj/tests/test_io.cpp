#include <gtest/gtest.h>

#include "rmc/io.hpp"
#include "multimap_fixtures.hpp"

namespace {

using rmc::io::Json;

TEST(Io, RationalRoundTrip) {
  for (const char* s : {"0", "3/4", "-7/3", "123456789012345678901234567891/7"}) {
    const rmc::Rational q = rmc::io::rational_of(Json(s));
    EXPECT_EQ(rmc::io::rational_of(rmc::io::rational_json(q)), q);
    EXPECT_EQ(q.get_str(), s);
  }
  EXPECT_EQ(rmc::io::rational_of(Json(5)), rmc::Rational(5));
  EXPECT_THROW(rmc::io::rational_of(Json("1/0")), std::exception);
}

TEST(Io, SeriesTextMatchesJson) {
  const auto text = rmc::io::parse_series("3/4*x^2*(x-y)^-1", {});
  const Json j = Json::parse(R"({"variables":["x","y"],"module":"R",
    "terms":[{"coeff":"3/4","basis":"R.1","monomial":{"x":2},"poles":{"x-y":1}}]})");
  const auto from_json = rmc::io::series_of(j, rmc::ModuleRef::scalars(), rmc::scalars_module().get(), {});
  EXPECT_FALSE(rmc::difference_witness(text, from_json));
}

TEST(Io, SeriesTermFormat) {
  const auto s = rmc::io::parse_series("3/4*x^2*(x-y)^-1", {});
  const Json j = rmc::io::series_json(s, rmc::scalars_module().get());
  ASSERT_EQ(j["terms"].size(), 1u);
  const Json& t = j["terms"][0];
  EXPECT_EQ(t["coeff"], "3/4");
  EXPECT_EQ(t["basis"], "R.1");
  EXPECT_EQ(t["monomial"], Json::parse(R"({"x":2})"));
  EXPECT_EQ(t["poles"].size(), 1u);
}

TEST(Io, PositivePowersOfFormsExpand) {
  const auto a = rmc::io::parse_series("(x+y)^2", {});
  const auto b = rmc::io::parse_series("x^2 + 2*x*y + y^2", {});
  EXPECT_FALSE(rmc::difference_witness(a, b));
}

TEST(Io, MalformedSeriesRejected) {
  for (const char* s : {"x^", "(x-y", "3/", "x**y", "(x-x)^-1"}) {
    EXPECT_ANY_THROW(rmc::io::parse_series(s, {})) << s;
  }
}

TEST(Io, MultimapRoundTrip) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = testing_support::random_invariant(rng, std::vector<std::size_t>(1 + trial % 3, 1 + trial % 2));
    const Json j = rmc::io::multimap_json(m);
    const auto back = rmc::io::multimap_of(j);
    EXPECT_EQ(rmc::io::multimap_json(back), j);
  }
}

TEST(Io, AlgebraRoundTrip) {
  // dual numbers: one module serves every weight
  const Json dual = Json::parse(R"({"name":"D","basis":["1","e"],"derivations":[],"nilpotent":true,
    "table":[[["1","0"],["0","1"]],[["0","1"],["0","0"]]],"unit":["1","0"]})");
  const auto a = rmc::io::finite_algebra_of(dual);
  const Json j = rmc::io::algebra_json(a);
  EXPECT_EQ(rmc::io::algebra_json(rmc::io::finite_algebra_of(j)), j);
  EXPECT_EQ(a.product(1, 1, 1, 1), (rmc::Vec{rmc::Rational(0), rmc::Rational(0)}));
}

TEST(Io, BadModuleRejected) {
  EXPECT_THROW(rmc::io::module_of(Json("Q[u]<=x")), rmc::io::FormatError);
  EXPECT_THROW(rmc::io::module_of(Json("S")), rmc::io::FormatError);
}

}  // namespace
