#include <gtest/gtest.h>

#include <random>

#include "rmc/series.hpp"

using namespace rmc;

namespace {

const std::set<Variable> XY = {"x", "y"};
const LinearForm X_MINUS_Y = parse_form("x-y");

SingularSeries pole(int k, Rational c = 1, std::set<Variable> vars = XY) {
  SingularSeries s = SingularSeries::scalar(std::move(vars));
  s.add_term(c, {}, {{X_MINUS_Y, k}}, 0);
  return s;
}

SingularSeries poly(std::initializer_list<std::pair<Rational, Monomial>> terms, std::set<Variable> vars = XY,
                    ModuleRef m = ModuleRef::scalars(), std::size_t basis = 0) {
  SingularSeries s(std::move(vars), std::move(m));
  for (const auto& [c, mono] : terms) s.add_term(c, mono, {}, basis);
  return s;
}

// sum_{n<=N} x^(-1-n) y^n, written out directly
SingularSeries geometric_x_first(int N) {
  SingularSeries s = SingularSeries::scalar(XY);
  for (int n = 0; n <= N; ++n) s.add_term(1, monomial({{"x", -1 - n}, {"y", n}}), {}, 0);
  return s;
}

SingularSeries random_series(std::mt19937& rng, const std::set<Variable>& vars, ModuleRef m, bool with_poles,
                             SeriesWindow w = {}) {
  std::vector<Variable> names(vars.begin(), vars.end());
  std::uniform_int_distribution<int> coef(-4, 4), ex(0, 2), pick(0, static_cast<int>(names.size()) - 1), k(1, 2);
  SingularSeries s(vars, m, w);
  for (int t = 0; t < 4; ++t) {
    Monomial mono;
    for (int j = 0; j < 2; ++j) mono.mul(names[static_cast<std::size_t>(pick(rng))], ex(rng));
    std::vector<std::pair<LinearForm, int>> poles;
    if (with_poles && rng() % 2) {
      const auto a = names[static_cast<std::size_t>(pick(rng))];
      const auto b = names[static_cast<std::size_t>(pick(rng))];
      if (a != b) poles.emplace_back(LinearForm::var(a) - LinearForm::var(b), k(rng));
    }
    s.add_term(coef(rng), mono, poles, rng() % m.rank);
  }
  return s;
}

}  // namespace

TEST(LinearForms, ParseFormatNormalize) {
  const LinearForm f = parse_form("y - x + 2*z");
  EXPECT_EQ(format_form(f), "-x+y+2*z");
  const auto [c, g] = normalize(f);
  EXPECT_EQ(c, -1);
  EXPECT_EQ(format_form(g), "x-y-2*z");
  EXPECT_THROW(normalize(LinearForm{}), PoleAtZero);
  EXPECT_THROW(parse_form("x--"), std::invalid_argument);
}

TEST(Series, PoleNormalizationSign) {
  SingularSeries s = SingularSeries::scalar(XY);
  s.add_term(1, {}, {{parse_form("y-x"), 1}}, 0);
  EXPECT_EQ(s, pole(1, -1));
  SingularSeries t = SingularSeries::scalar(XY);
  t.add_term(1, {}, {{parse_form("y-x"), 2}}, 0);
  EXPECT_EQ(t, pole(2));
}

TEST(Series, DegreeTruncation) {
  SingularSeries s = SingularSeries::scalar(XY);
  s.add_term(1, monomial({{"x", 7}}), {}, 0);
  EXPECT_TRUE(s.is_zero());
  EXPECT_EQ(s.reliability().degree_through, 6);
}

TEST(Expand, PoleFreeIsIdentity) {
  const SingularSeries c = poly({{3, {}}, {2, monomial({{"x", 1}})}});
  EXPECT_EQ(expand(c, {"x", "y"}), c);
  EXPECT_EQ(expand(c, {"y", "x"}), c);
}

TEST(Expand, GeometricSeriesBothRegions) {
  const auto e1 = expand(pole(1), {"x", "y"});
  EXPECT_EQ(e1.terms(), geometric_x_first(6).terms());
  EXPECT_EQ(e1.reliability().weight_through.front().second, 6);
  const auto e2 = expand(pole(1), {"y", "x"});
  SingularSeries want = SingularSeries::scalar(XY);
  for (int n = 0; n <= 6; ++n) want.add_term(-1, monomial({{"y", -1 - n}, {"x", n}}), {}, 0);
  EXPECT_EQ(e2.terms(), want.terms());
}

TEST(Expand, InverseRecoversOneAndDeltaIsAnnihilated) {
  const SingularSeries xy = poly({{1, monomial({{"x", 1}})}, {-1, monomial({{"y", 1}})}});
  const SingularSeries one = SingularSeries::constant(1, XY);
  const auto e1 = expand(pole(1), {"x", "y"});
  const auto e2 = expand(pole(1), {"y", "x"});
  EXPECT_FALSE(nonzero_witness(multiply(xy, e1) - one));
  EXPECT_FALSE(nonzero_witness(multiply(xy, e2) - one));
  const auto delta = e1 - e2;
  EXPECT_TRUE(nonzero_witness(delta));
  EXPECT_FALSE(nonzero_witness(multiply(xy, delta)));
  // the cut-off term sits just outside the reliable window
  const auto raw = multiply(xy, e1);
  EXPECT_EQ(raw.terms().size(), 2u);
}

TEST(Expand, HigherOrderPoleMatchesSquaredGeometric) {
  const auto e = expand(pole(2), {"x", "y"});
  const auto g = geometric_x_first(6);
  SingularSeries g2 = SingularSeries::scalar(XY);
  for (const auto& [ka, ca] : g.terms())
    for (const auto& [kb, cb] : g.terms()) g2.add_key({{}, ka.mono * kb.mono, 0}, ca * cb);
  g2.reliability().bound_weight({"x", "y"}, 6);
  EXPECT_TRUE(equivalent(e, g2));
}

TEST(Expand, MultiplicativeAgainstPoleFreeFactors) {
  std::mt19937 rng(23);
  const std::set<Variable> vars = {"x", "y", "z"};
  const ModuleRef mod{"B", 2};
  std::vector<ExpansionOrder> orders = {{"x", "y", "z"}, {"z", "y", "x"}, {"y", "x", "z"}};
  for (int n = 0; n < 200; ++n) {
    const SingularSeries s = random_series(rng, vars, mod, true);
    const SingularSeries t = random_series(rng, vars, ModuleRef::scalars(), false);
    const auto& o = orders[static_cast<std::size_t>(n) % orders.size()];
    EXPECT_TRUE(equivalent(expand(multiply(t, s), o), multiply(t, expand(s, o)))) << n;
  }
}

TEST(Agreement, Examples) {
  const std::vector<ExpansionOrder> both = {{"x", "y"}, {"y", "x"}};
  EXPECT_TRUE(agree_after_expansion(pole(1), pole(1), both));
  const SingularSeries pre = expand(pole(1), {"x", "y"});
  EXPECT_TRUE(agree_after_expansion(pole(1), pre, {{"x", "y"}}));
  const auto r = agree_after_expansion(pole(1), pre, both);
  EXPECT_FALSE(r);
  EXPECT_EQ(*r.order, (ExpansionOrder{"y", "x"}));
  const SingularSeries a = poly({{1, monomial({{"x", 1}})}, {2, monomial({{"y", 2}})}});
  const SingularSeries b = poly({{2, monomial({{"y", 2}})}, {1, monomial({{"x", 1}})}});
  EXPECT_TRUE(agree_after_expansion(a, b, both));
}

TEST(Equivalence, PartialFractions) {
  // x/(x-y) = 1 + y/(x-y)
  SingularSeries a = SingularSeries::scalar(XY);
  a.add_term(1, monomial({{"x", 1}}), {{X_MINUS_Y, 1}}, 0);
  SingularSeries b = SingularSeries::constant(1, XY);
  b.add_term(1, monomial({{"y", 1}}), {{X_MINUS_Y, 1}}, 0);
  EXPECT_TRUE(equivalent(a, b));
  EXPECT_FALSE(equivalent(a, pole(1)));
  // 1/((x-y)(y-z)) = 1/((x-z)(x-y)) + 1/((x-z)(y-z))
  const std::set<Variable> v3 = {"x", "y", "z"};
  SingularSeries c = SingularSeries::scalar(v3);
  c.add_term(1, {}, {{parse_form("x-y"), 1}, {parse_form("y-z"), 1}}, 0);
  SingularSeries d = SingularSeries::scalar(v3);
  d.add_term(1, {}, {{parse_form("x-z"), 1}, {parse_form("x-y"), 1}}, 0);
  d.add_term(1, {}, {{parse_form("x-z"), 1}, {parse_form("y-z"), 1}}, 0);
  EXPECT_TRUE(equivalent(c, d));
  EXPECT_TRUE(agree_after_expansion(c, d, {{"x", "y", "z"}, {"z", "x", "y"}}));
}

TEST(Act, Examples) {
  const SingularSeries s = poly({{1, monomial({{"x", 2}, {"y", 1}})}});
  EXPECT_EQ(act_variable(HElem::unit(), "x", s), s);
  EXPECT_EQ(act_variable(HElem::generator(1), "x", s), poly({{2, monomial({{"x", 1}, {"y", 1}})}}));
  EXPECT_EQ(act_variable(HElem::generator(1), "y", pole(1)), pole(2));
  EXPECT_EQ(act_variable(HElem::generator(1), "x", pole(1)), pole(2, -1));
  EXPECT_EQ(act_variable(HElem::generator(2), "y", pole(1)), pole(3));
  EXPECT_THROW(act_variable(HElem::generator(9), "y", pole(1)), WindowUnderflow);
}

TEST(Act, CommutesWithExpansion) {
  // differentiate the expansion termwise, compare with expanding the derivative
  for (std::size_t i = 0; i <= 3; ++i) {
    for (const Variable v : {"x", "y"}) {
      const auto lhs = act_variable(HElem::generator(i), v, expand(pole(1), {"x", "y"}));
      const auto rhs = expand(act_variable(HElem::generator(i), v, pole(1)), {"x", "y"});
      EXPECT_TRUE(equivalent(lhs, rhs)) << i << v;
    }
  }
  std::mt19937 rng(2);
  for (int n = 0; n < 30; ++n) {
    const auto s = random_series(rng, XY, ModuleRef::scalars(), false);
    for (std::size_t i = 0; i <= 3; ++i) {
      EXPECT_EQ(act_variable(HElem::generator(i), "x", expand(s, {"y", "x"})), expand(act_variable(HElem::generator(i), "x", s), {"y", "x"}));
    }
  }
}

TEST(Act, ModuleLawPerVariable) {
  std::mt19937 rng(4);
  const std::set<Variable> vars = {"x", "y", "z"};
  for (int n = 0; n < 20; ++n) {
    // D(4)D(4) raises a double pole to order 10, past the default depth
    const auto s = random_series(rng, vars, {"B", 2}, true, {6, 10});
    for (std::size_t a = 0; a <= 4; ++a) {
      for (std::size_t b = 0; b <= 4; ++b) {
        const auto ha = HElem::generator(a), hb = HElem::generator(b);
        const auto lhs = act_variable(h_mul(ha, hb), "y", s);
        const auto rhs = act_variable(ha, "y", act_variable(hb, "y", s));
        EXPECT_TRUE(equivalent(lhs, rhs));
      }
    }
  }
}

TEST(Swap, SignInvolutionAndAction) {
  EXPECT_EQ(swap_variables(pole(1), "x", "y"), pole(1, -1));
  EXPECT_EQ(swap_variables(pole(2), "x", "y"), pole(2));
  const SingularSeries sym = poly({{1, monomial({{"x", 1}, {"y", 1}})}, {1, monomial({{"x", 2}})}, {1, monomial({{"y", 2}})}});
  EXPECT_EQ(swap_variables(sym, "x", "y"), sym);
  std::mt19937 rng(8);
  for (int n = 0; n < 30; ++n) {
    const auto s = random_series(rng, {"x", "y", "z"}, {"B", 3}, true);
    EXPECT_EQ(swap_variables(swap_variables(s, "x", "z"), "x", "z"), s);
    const auto h = HElem::generator(static_cast<std::size_t>(n % 3));
    EXPECT_EQ(swap_variables(act_variable(h, "x", s), "x", "z"), act_variable(h, "z", swap_variables(s, "x", "z")));
  }
}

TEST(Substitute, Examples) {
  const SingularSeries s = pole(1);
  EXPECT_EQ(substitute(s, "x", LinearForm::var("x")), s);
  EXPECT_THROW(substitute(s, "x", LinearForm::var("y")), PoleAtZero);
  const std::set<Variable> v1 = {"x"};
  const SingularSeries sq = poly({{1, monomial({{"x", 2}})}}, v1);
  const auto r = substitute(sq, "x", parse_form("u+z"));
  EXPECT_EQ(r, poly({{1, monomial({{"u", 2}})}, {2, monomial({{"u", 1}, {"z", 1}})}, {1, monomial({{"z", 2}})}}, {"u", "z"}));
  // pole along a shifted form
  const auto shifted = substitute(s, "x", parse_form("u+z"));
  SingularSeries want = SingularSeries::scalar({"u", "y", "z"});
  want.add_term(1, {}, {{parse_form("u-y+z"), 1}}, 0);
  EXPECT_EQ(shifted, want);
  // a zero form kills positive powers and keeps constants
  const auto killed = substitute(poly({{1, monomial({{"x", 1}})}, {5, {}}}, v1), "x", LinearForm{});
  EXPECT_EQ(killed, SingularSeries::constant(5, {}));
}

TEST(SumRule, Examples) {
  EXPECT_TRUE(check_sum_rule(pole(3), {"x", "y"}, "z", 6));
  const SingularSeries sum = poly({{1, monomial({{"x", 1}})}, {1, monomial({{"y", 1}})}});
  std::map<std::size_t, SingularSeries> two{{1, SingularSeries::constant(2, XY)}};
  std::map<std::size_t, SingularSeries> one{{1, SingularSeries::constant(1, XY)}};
  EXPECT_TRUE(check_sum_rule(sum, {"x", "y"}, two, 6));
  const auto bad = check_sum_rule(sum, {"x", "y"}, one, 6);
  EXPECT_FALSE(bad);
  EXPECT_EQ(bad.degree, 1u);
  EXPECT_FALSE(check_sum_rule(sum, {"x", "y"}, "z", 6));
}

TEST(SumRule, TailTreeReexpression) {
  // a flat-tree series f(x, y) = (x - y)^-1 * x^2 y re-expressed with x+z, y+z
  SingularSeries flat = SingularSeries::scalar(XY);
  flat.add_term(1, monomial({{"x", 2}, {"y", 1}}), {{X_MINUS_Y, 1}}, 0);
  flat.add_term(3, monomial({{"y", 1}}), {}, 0);
  const auto tail = substitute(flat, {{"x", parse_form("x+z")}, {"y", parse_form("y+z")}});
  EXPECT_TRUE(check_sum_rule(tail, {"x", "y"}, "z", 6));
  EXPECT_FALSE(check_sum_rule(flat, {"x", "y"}, "z", 6));
}

TEST(SumRule, SubstitutionAgreesWithDistributedAction) {
  std::mt19937 rng(31);
  const std::set<Variable> vars = {"x", "y", "z"};
  for (int n = 0; n < 40; ++n) {
    auto s = random_series(rng, vars, {"B", 2}, true);
    if (n % 2) s = substitute(s, {{"x", parse_form("x+z")}, {"y", parse_form("y+z")}}, vars);
    const bool by_substitution = static_cast<bool>(check_sum_rule(s, {"x", "y"}, "z", 4));
    std::map<std::size_t, SingularSeries> declared;
    for (std::size_t i = 1; i <= 4; ++i) declared.emplace(i, act_variable(HElem::generator(i), "z", s));
    const bool by_action = static_cast<bool>(check_sum_rule(s, {"x", "y"}, declared, 4));
    EXPECT_EQ(by_substitution, by_action) << n << "\n" << format_series(s);
  }
}
