#pragma once

// The divided-power Hopf algebra H = Q[D0, D1, ...] and the truncated
// Laurent series K = Q((x)) it acts on.

#include <algorithm>
#include <array>
#include <cctype>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rmc/rational.hpp"

namespace rmc {

// ---------------------------------------------------------------------------
// H

class HElem {
 public:
  HElem() = default;
  static HElem generator(std::size_t i, Rational c = 1) {
    HElem h;
    h.add(i, c);
    return h;
  }
  static HElem unit() { return generator(0); }

  void add(std::size_t i, const Rational& c) {
    if (c == 0) return;
    auto [it, inserted] = terms_.try_emplace(i, c);
    if (!inserted) {
      it->second += c;
      if (it->second == 0) terms_.erase(it);
    }
  }

  const std::map<std::size_t, Rational>& terms() const noexcept { return terms_; }
  bool is_zero() const noexcept { return terms_.empty(); }
  std::size_t degree() const { return terms_.empty() ? 0 : terms_.rbegin()->first; }
  Rational coeff(std::size_t i) const {
    auto it = terms_.find(i);
    return it == terms_.end() ? Rational(0) : it->second;
  }

  friend bool operator==(const HElem&, const HElem&) = default;
  friend HElem operator+(HElem a, const HElem& b) {
    for (const auto& [i, c] : b.terms_) a.add(i, c);
    return a;
  }
  friend HElem operator-(HElem a, const HElem& b) {
    for (const auto& [i, c] : b.terms_) a.add(i, -c);
    return a;
  }
  friend HElem operator*(const Rational& s, const HElem& a) {
    HElem out;
    for (const auto& [i, c] : a.terms_) out.add(i, s * c);
    return out;
  }

 private:
  std::map<std::size_t, Rational> terms_;
};

using HTensor2 = std::map<std::pair<std::size_t, std::size_t>, Rational>;
using HTensor3 = std::map<std::array<std::size_t, 3>, Rational>;

template <class Map, class Key>
void accumulate(Map& m, const Key& k, const Rational& c) {
  if (c == 0) return;
  auto [it, inserted] = m.try_emplace(k, c);
  if (!inserted) {
    it->second += c;
    if (it->second == 0) m.erase(it);
  }
}

/// Structure constants on generators. The classical structure is the
/// default; tests substitute broken tables as negative controls.
struct HopfStructure {
  std::function<Rational(std::size_t, std::size_t)> mul_coeff;          // D_i D_j = c D_{i+j}
  std::function<std::vector<std::pair<std::size_t, std::size_t>>(std::size_t)> comul_terms;
  std::function<Rational(std::size_t)> counit;
  std::function<Rational(std::size_t)> antipode_sign;                    // S(D_i) = s D_i

  static HopfStructure classical() {
    return {
        [](std::size_t i, std::size_t j) { return binomial(static_cast<std::int64_t>(i + j), static_cast<std::int64_t>(i)); },
        [](std::size_t i) {
          std::vector<std::pair<std::size_t, std::size_t>> out;
          for (std::size_t p = 0; p <= i; ++p) out.emplace_back(p, i - p);
          return out;
        },
        [](std::size_t i) { return Rational(i == 0 ? 1 : 0); },
        [](std::size_t i) { return Rational(i % 2 == 0 ? 1 : -1); },
    };
  }
};

inline HElem h_mul(const HElem& a, const HElem& b, const HopfStructure& hs = HopfStructure::classical()) {
  HElem out;
  for (const auto& [i, ci] : a.terms()) {
    for (const auto& [j, cj] : b.terms()) out.add(i + j, ci * cj * hs.mul_coeff(i, j));
  }
  return out;
}

inline HTensor2 comul(const HElem& a, const HopfStructure& hs = HopfStructure::classical()) {
  HTensor2 out;
  for (const auto& [i, c] : a.terms()) {
    for (const auto& pq : hs.comul_terms(i)) accumulate(out, pq, c);
  }
  return out;
}

inline Rational counit(const HElem& a, const HopfStructure& hs = HopfStructure::classical()) {
  Rational out = 0;
  for (const auto& [i, c] : a.terms()) out += c * hs.counit(i);
  return out;
}

inline HElem antipode_h(const HElem& a, const HopfStructure& hs = HopfStructure::classical()) {
  HElem out;
  for (const auto& [i, c] : a.terms()) out.add(i, c * hs.antipode_sign(i));
  return out;
}

// ---------------------------------------------------------------------------
// K

class WindowUnderflow : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct KWindow {
  int laurent_depth = 8;  // M: lowest allowed exponent is -M
  int ceiling = 12;       // N: exponents above N are dropped
  friend bool operator==(const KWindow&, const KWindow&) = default;
};

/// A truncated Laurent series. `exact_through` is the largest exponent up to
/// which every coefficient is known; empty means the series is exact.
class KElem {
 public:
  KElem() = default;
  explicit KElem(KWindow w) : window_(w) {}

  static KElem monomial(int j, Rational c = 1, KWindow w = {}) {
    KElem k(w);
    k.add(j, c);
    return k;
  }

  /// Adds c*x^j; exponents above the ceiling are dropped and mark truncation.
  void add(int j, const Rational& c) {
    if (c == 0) return;
    if (j < -window_.laurent_depth) {
      throw WindowUnderflow("exponent " + std::to_string(j) + " below Laurent floor -" +
                            std::to_string(window_.laurent_depth));
    }
    if (j > window_.ceiling) {
      mark_truncated(window_.ceiling);
      return;
    }
    accumulate(terms_, j, c);
  }

  void mark_truncated(int through) {
    exact_through_ = exact_through_ ? std::min(*exact_through_, through) : through;
  }

  const std::map<int, Rational>& terms() const noexcept { return terms_; }
  const KWindow& window() const noexcept { return window_; }
  const std::optional<int>& exact_through() const noexcept { return exact_through_; }
  bool truncated() const noexcept { return exact_through_.has_value(); }
  bool is_zero() const noexcept { return terms_.empty(); }
  std::optional<int> low() const {
    if (terms_.empty()) return std::nullopt;
    return terms_.begin()->first;
  }
  Rational coeff(int j) const {
    auto it = terms_.find(j);
    return it == terms_.end() ? Rational(0) : it->second;
  }

  /// Widens the Laurent floor so exponents down to -depth are admissible.
  void widen_floor(int depth) { window_.laurent_depth = std::max(window_.laurent_depth, depth); }

  friend bool operator==(const KElem&, const KElem&) = default;

  friend KElem operator+(const KElem& a, const KElem& b) { return combine(a, b, 1); }
  friend KElem operator-(const KElem& a, const KElem& b) { return combine(a, b, -1); }
  friend KElem operator*(const Rational& s, const KElem& a) {
    KElem out(a.window_);
    out.exact_through_ = a.exact_through_;
    for (const auto& [j, c] : a.terms_) out.add(j, s * c);
    return out;
  }

 private:
  static KElem combine(const KElem& a, const KElem& b, int sign) {
    KWindow w{std::max(a.window_.laurent_depth, b.window_.laurent_depth), std::min(a.window_.ceiling, b.window_.ceiling)};
    KElem out(w);
    for (const auto& [j, c] : a.terms_) out.add(j, c);
    for (const auto& [j, c] : b.terms_) out.add(j, sign * c);
    if (a.exact_through_) out.mark_truncated(*a.exact_through_);
    if (b.exact_through_) out.mark_truncated(*b.exact_through_);
    return out;
  }

  KWindow window_;
  std::map<int, Rational> terms_;
  std::optional<int> exact_through_;
};

/// Equality on the exponents known in both operands.
inline bool agree_on_reliable(const KElem& a, const KElem& b) {
  std::optional<int> bound = a.exact_through();
  if (b.exact_through()) bound = bound ? std::min(*bound, *b.exact_through()) : b.exact_through();
  std::set<int> exps;
  for (const auto& [j, c] : a.terms()) exps.insert(j);
  for (const auto& [j, c] : b.terms()) exps.insert(j);
  for (int j : exps) {
    if (bound && j > *bound) break;
    if (a.coeff(j) != b.coeff(j)) return false;
  }
  return true;
}

inline KElem k_mul(const KElem& a, const KElem& b) {
  KWindow w{std::max(a.window().laurent_depth, b.window().laurent_depth),
            std::min(a.window().ceiling, b.window().ceiling)};
  KElem out(w);
  std::map<int, Rational> raw;
  for (const auto& [i, ci] : a.terms()) {
    for (const auto& [j, cj] : b.terms()) accumulate(raw, i + j, ci * cj);
  }
  for (const auto& [j, c] : raw) {
    if (j < -w.laurent_depth) {
      throw WindowUnderflow("product exponent " + std::to_string(j) + " below Laurent floor -" +
                            std::to_string(w.laurent_depth));
    }
    out.add(j, c);
  }
  // the unknown tail of one factor meets the whole support of the other
  constexpr int inf = std::numeric_limits<int>::max() / 4;
  auto support_low = [&](const KElem& k) {
    int lo = k.low().value_or(inf);
    if (k.exact_through()) lo = std::min(lo, *k.exact_through() + 1);
    return lo;
  };
  if (a.exact_through() && support_low(b) < inf) out.mark_truncated(*a.exact_through() + support_low(b));
  if (b.exact_through() && support_low(a) < inf) out.mark_truncated(*b.exact_through() + support_low(a));
  return out;
}

/// D(i) x^j = binom(j, i) x^(j-i), extended bilinearly.
inline KElem act_on_k(const HElem& h, const KElem& k) {
  KElem out(k.window());
  int lowest = 0;
  for (const auto& [i, ci] : h.terms()) {
    for (const auto& [j, cj] : k.terms()) {
      const Rational c = ci * cj * binomial(j, static_cast<std::int64_t>(i));
      if (c != 0) lowest = std::min(lowest, j - static_cast<int>(i));
    }
  }
  out.widen_floor(-lowest);
  for (const auto& [i, ci] : h.terms()) {
    for (const auto& [j, cj] : k.terms()) {
      out.add(j - static_cast<int>(i), ci * cj * binomial(j, static_cast<std::int64_t>(i)));
    }
  }
  if (k.exact_through()) out.mark_truncated(*k.exact_through() - static_cast<int>(h.degree()));
  return out;
}

inline KElem antipode_k(const KElem& k) {
  KElem out(k.window());
  for (const auto& [j, c] : k.terms()) out.add(j, (j % 2 == 0) ? c : Rational(-c));
  if (k.exact_through()) out.mark_truncated(*k.exact_through());
  return out;
}

// ---------------------------------------------------------------------------
// Axiom report

struct LawResult {
  std::string law;
  bool passed = true;
  std::string witness;
};

struct HopfReport {
  std::size_t max_degree = 0;
  std::vector<LawResult> laws;
  bool all_passed() const {
    return std::all_of(laws.begin(), laws.end(), [](const LawResult& l) { return l.passed; });
  }
};

namespace detail {

inline std::string gen(std::size_t i) { return "D" + std::to_string(i); }

inline HTensor2 tensor_mul(const HTensor2& a, const HTensor2& b, const HopfStructure& hs) {
  HTensor2 out;
  for (const auto& [ka, ca] : a) {
    for (const auto& [kb, cb] : b) {
      const Rational c = ca * cb * hs.mul_coeff(ka.first, kb.first) * hs.mul_coeff(ka.second, kb.second);
      accumulate(out, std::pair{ka.first + kb.first, ka.second + kb.second}, c);
    }
  }
  return out;
}

}  // namespace detail

inline HopfReport hopf_axiom_report(std::size_t max_degree, const HopfStructure& hs = HopfStructure::classical()) {
  HopfReport report{max_degree, {}};
  auto D = [](std::size_t i) { return HElem::generator(i); };
  auto record = [&](const std::string& law, std::function<std::string()> first_failure) {
    LawResult r{law, true, {}};
    r.witness = first_failure();
    r.passed = r.witness.empty();
    report.laws.push_back(std::move(r));
  };

  record("associativity", [&]() -> std::string {
    for (std::size_t i = 0; i <= max_degree; ++i)
      for (std::size_t j = 0; j <= max_degree; ++j)
        for (std::size_t k = 0; k <= max_degree; ++k)
          if (h_mul(h_mul(D(i), D(j), hs), D(k), hs) != h_mul(D(i), h_mul(D(j), D(k), hs), hs))
            return "(" + detail::gen(i) + "*" + detail::gen(j) + ")*" + detail::gen(k);
    return {};
  });

  record("coassociativity", [&]() -> std::string {
    for (std::size_t i = 0; i <= max_degree; ++i) {
      HTensor3 left, right;
      for (const auto& [pq, c] : comul(D(i), hs)) {
        for (const auto& [ab, c2] : comul(D(pq.first), hs)) accumulate(left, std::array{ab.first, ab.second, pq.second}, c * c2);
        for (const auto& [ab, c2] : comul(D(pq.second), hs)) accumulate(right, std::array{pq.first, ab.first, ab.second}, c * c2);
      }
      if (left != right) return detail::gen(i);
    }
    return {};
  });

  record("cocommutativity", [&]() -> std::string {
    for (std::size_t i = 0; i <= max_degree; ++i) {
      const auto d = comul(D(i), hs);
      HTensor2 flipped;
      for (const auto& [pq, c] : d) accumulate(flipped, std::pair{pq.second, pq.first}, c);
      if (flipped != d) return detail::gen(i);
    }
    return {};
  });

  record("bialgebra compatibility", [&]() -> std::string {
    for (std::size_t i = 0; i <= max_degree; ++i)
      for (std::size_t j = 0; j <= max_degree; ++j)
        if (comul(h_mul(D(i), D(j), hs), hs) != detail::tensor_mul(comul(D(i), hs), comul(D(j), hs), hs))
          return "Delta(" + detail::gen(i) + "*" + detail::gen(j) + ")";
    return {};
  });

  record("unit", [&]() -> std::string {
    for (std::size_t i = 0; i <= max_degree; ++i)
      if (h_mul(HElem::unit(), D(i), hs) != D(i) || h_mul(D(i), HElem::unit(), hs) != D(i)) return detail::gen(i);
    return {};
  });

  record("counit", [&]() -> std::string {
    for (std::size_t i = 0; i <= max_degree; ++i) {
      HElem left, right;
      for (const auto& [pq, c] : comul(D(i), hs)) {
        left.add(pq.second, c * hs.counit(pq.first));
        right.add(pq.first, c * hs.counit(pq.second));
      }
      if (left != D(i) || right != D(i)) return detail::gen(i);
    }
    return {};
  });

  record("antipode", [&]() -> std::string {
    for (std::size_t i = 0; i <= max_degree; ++i) {
      HElem left, right;
      for (const auto& [pq, c] : comul(D(i), hs)) {
        left = left + c * h_mul(antipode_h(D(pq.first), hs), D(pq.second), hs);
        right = right + c * h_mul(D(pq.first), antipode_h(D(pq.second), hs), hs);
      }
      const HElem expected = counit(D(i), hs) * HElem::unit();
      if (left != expected || right != expected) return "m(S x id)Delta " + detail::gen(i);
    }
    return {};
  });

  return report;
}

// ---------------------------------------------------------------------------
// Text forms: "3/2*x^-2 + x^0 - 5*x^3" and "2*D2 + D0"

namespace detail {

struct LinearTerm {
  Rational coeff;
  std::optional<int> exponent;  // absent for a bare constant
};

// Parses a signed sum of `coeff*<sym><int>` terms; `caret` requires '^' after sym.
inline std::vector<LinearTerm> parse_linear(std::string_view text, char sym, bool caret) {
  std::string s;
  for (char ch : text) {
    if (!std::isspace(static_cast<unsigned char>(ch))) s.push_back(ch);
  }
  if (s.empty()) throw std::invalid_argument("empty expression");
  std::vector<LinearTerm> out;
  std::size_t pos = 0;
  auto fail = [&](const std::string& why) {
    throw std::invalid_argument(why + " at position " + std::to_string(pos) + " in '" + std::string(text) + "'");
  };
  auto read_int = [&]() -> int {
    std::size_t start = pos;
    if (pos < s.size() && (s[pos] == '-' || s[pos] == '+')) ++pos;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
    if (start == pos || !std::isdigit(static_cast<unsigned char>(s[pos - 1]))) fail("expected integer");
    return std::stoi(s.substr(start, pos - start));
  };
  bool first = true;
  while (pos < s.size()) {
    int sign = 1;
    if (s[pos] == '+' || s[pos] == '-') {
      sign = s[pos] == '-' ? -1 : 1;
      ++pos;
    } else if (!first) {
      fail("expected '+' or '-'");
    }
    first = false;
    Rational coeff = 1;
    if (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
      std::size_t start = pos;
      while (pos < s.size() && (std::isdigit(static_cast<unsigned char>(s[pos])) || s[pos] == '/')) ++pos;
      coeff = parse_rational(s.substr(start, pos - start));
      if (pos < s.size() && s[pos] == '*') {
        ++pos;
      } else {
        out.push_back({sign * coeff, std::nullopt});
        continue;
      }
    }
    if (pos >= s.size() || s[pos] != sym) fail(std::string("expected '") + sym + "'");
    ++pos;
    int e = 1;
    if (caret) {
      if (pos < s.size() && s[pos] == '^') {
        ++pos;
        e = read_int();
      }
    } else {
      e = read_int();
      if (e < 0) fail("negative generator index");
    }
    out.push_back({sign * coeff, e});
  }
  return out;
}

inline std::string format_coeff_prefix(const Rational& c, bool first) {
  std::string out;
  const Rational a = abs(c);
  if (first) {
    out = c < 0 ? "-" : "";
  } else {
    out = c < 0 ? " - " : " + ";
  }
  if (a != 1) out += a.get_str() + "*";
  return out;
}

}  // namespace detail

inline KElem parse_k(std::string_view text, KWindow w = {}) {
  KElem out(w);
  for (const auto& t : detail::parse_linear(text, 'x', true)) out.add(t.exponent.value_or(0), t.coeff);
  return out;
}

inline HElem parse_h(std::string_view text) {
  HElem out;
  for (const auto& t : detail::parse_linear(text, 'D', false)) {
    out.add(static_cast<std::size_t>(t.exponent.value_or(0)), t.coeff);
  }
  return out;
}

inline std::string format_k(const KElem& k) {
  if (k.is_zero()) return "0";
  std::string out;
  bool first = true;
  for (const auto& [j, c] : k.terms()) {
    out += detail::format_coeff_prefix(c, first) + "x^" + std::to_string(j);
    first = false;
  }
  return out;
}

inline std::string format_h(const HElem& h) {
  if (h.is_zero()) return "0";
  std::string out;
  bool first = true;
  for (const auto& [i, c] : h.terms()) {
    out += detail::format_coeff_prefix(c, first) + "D" + std::to_string(i);
    first = false;
  }
  return out;
}

}  // namespace rmc
