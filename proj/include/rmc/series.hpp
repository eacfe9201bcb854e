#pragma once

// Module-valued truncated series in named variables, with poles along
// linear forms in those variables (differences of input positions).
//
// A term is  coeff * prod x_v^e_v * prod L^-k  (basis vector b), where each
// pole form L is normalized to leading coefficient +1 in variable-name order.
// Terms are graded by  degree = sum e_v - sum k, which every operation here
// preserves or shifts uniformly, so truncation is by degree.

#include <algorithm>
#include <cctype>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <boost/container/small_vector.hpp>

#include "rmc/hopf.hpp"
#include "rmc/rational.hpp"

namespace rmc {

using Variable = std::string;
/// Outermost to innermost: earlier variables dominate later ones.
using ExpansionOrder = std::vector<Variable>;

class SeriesError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PoleAtZero : public SeriesError {
 public:
  using SeriesError::SeriesError;
};

// ---------------------------------------------------------------------------
// Linear forms and monomials (sorted by variable name, no zero entries)

struct LinearForm {
  std::vector<std::pair<Variable, Rational>> terms;

  static LinearForm var(const Variable& v, Rational c = 1) {
    LinearForm f;
    if (c != 0) f.terms.emplace_back(v, c);
    return f;
  }
  bool is_zero() const { return terms.empty(); }
  Rational coeff(const Variable& v) const {
    for (const auto& [w, c] : terms) {
      if (w == v) return c;
    }
    return 0;
  }
  void add(const Variable& v, const Rational& c) {
    if (c == 0) return;
    auto it = std::lower_bound(terms.begin(), terms.end(), v, [](const auto& p, const Variable& x) { return p.first < x; });
    if (it != terms.end() && it->first == v) {
      it->second += c;
      if (it->second == 0) terms.erase(it);
    } else {
      terms.insert(it, {v, c});
    }
  }
  friend LinearForm operator+(LinearForm a, const LinearForm& b) {
    for (const auto& [v, c] : b.terms) a.add(v, c);
    return a;
  }
  friend LinearForm operator-(LinearForm a, const LinearForm& b) {
    for (const auto& [v, c] : b.terms) a.add(v, -c);
    return a;
  }
  friend LinearForm operator*(const Rational& s, LinearForm a) {
    if (s == 0) return {};
    for (auto& [v, c] : a.terms) c *= s;
    return a;
  }
  friend bool operator==(const LinearForm& a, const LinearForm& b) { return a.terms == b.terms; }
  friend bool operator<(const LinearForm& a, const LinearForm& b) { return a.terms < b.terms; }
};

/// Splits f = c * g with g's leading coefficient equal to 1.
inline std::pair<Rational, LinearForm> normalize(const LinearForm& f) {
  if (f.is_zero()) throw PoleAtZero("pole at zero: linear form vanishes");
  const Rational c = f.terms.front().second;
  return {c, (1 / c) * f};
}

inline std::string format_form(const LinearForm& f) {
  if (f.is_zero()) return "0";
  std::string out;
  bool first = true;
  for (const auto& [v, c] : f.terms) {
    const Rational a = abs(c);
    if (first) {
      if (c < 0) out += "-";
    } else {
      out += c < 0 ? "-" : "+";
    }
    if (a != 1) out += a.get_str() + "*";
    out += v;
    first = false;
  }
  return out;
}

inline bool is_variable_char(char ch) {
  return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '.';
}

/// Parses "x1-x2", "x1+x1_1-2*x2", "-y".
inline LinearForm parse_form(std::string_view text) {
  std::string s;
  for (char ch : text) {
    if (!std::isspace(static_cast<unsigned char>(ch))) s.push_back(ch);
  }
  LinearForm f;
  std::size_t pos = 0;
  if (s.empty()) throw std::invalid_argument("empty linear form");
  while (pos < s.size()) {
    Rational sign = 1;
    if (s[pos] == '+' || s[pos] == '-') {
      if (s[pos] == '-') sign = -1;
      ++pos;
    } else if (pos != 0) {
      throw std::invalid_argument("malformed linear form '" + std::string(text) + "'");
    }
    Rational c = 1;
    std::size_t star = s.find('*', pos);
    std::size_t next = s.find_first_of("+-", pos);
    if (star != std::string::npos && (next == std::string::npos || star < next)) {
      c = parse_rational(s.substr(pos, star - pos));
      pos = star + 1;
    }
    std::size_t start = pos;
    while (pos < s.size() && is_variable_char(s[pos])) ++pos;
    if (start == pos || !std::isalpha(static_cast<unsigned char>(s[start]))) {
      throw std::invalid_argument("expected variable in linear form '" + std::string(text) + "'");
    }
    f.add(s.substr(start, pos - start), sign * c);
  }
  return f;
}

/// An interned variable name: equality is identity, order is by name.
class Sym {
 public:
  Sym(const Variable& name) : p_(intern(name)) {}  // NOLINT: implicit by design
  Sym(const char* name) : p_(intern(name)) {}      // NOLINT

  const Variable& name() const noexcept { return *p_; }
  std::size_t hash() const noexcept { return std::hash<const void*>()(p_); }
  operator const Variable&() const noexcept { return *p_; }  // NOLINT

  friend bool operator==(Sym a, Sym b) noexcept { return a.p_ == b.p_; }
  friend bool operator==(Sym a, const Variable& b) noexcept { return *a.p_ == b; }
  friend bool operator<(Sym a, Sym b) noexcept { return a.p_ != b.p_ && *a.p_ < *b.p_; }
  friend std::string operator+(const std::string& a, Sym b) { return a + *b.p_; }
  friend std::string operator+(Sym a, const std::string& b) { return *a.p_ + b; }

 private:
  static const Variable* intern(const Variable& name) {
    static std::mutex mu;
    static std::unordered_set<Variable> names;
    std::lock_guard<std::mutex> lock(mu);
    return &*names.insert(name).first;
  }
  const Variable* p_;
};

struct Monomial {
  // sorted by variable; up to eight variables stay inline
  boost::container::small_vector<std::pair<Sym, int>, 8> exps;

  int exponent(Sym v) const {
    for (const auto& [w, e] : exps) {
      if (w == v) return e;
    }
    return 0;
  }
  int exponent(const Variable& v) const {
    for (const auto& [w, e] : exps) {
      if (w == v) return e;
    }
    return 0;
  }
  int exponent(const char* v) const { return exponent(Variable(v)); }
  int total_degree() const {
    int d = 0;
    for (const auto& [v, e] : exps) d += e;
    return d;
  }
  void mul(const Variable& v, int e) {
    if (e != 0) mul(Sym(v), e);
  }
  void mul(const char* v, int e) {
    if (e != 0) mul(Sym(v), e);
  }
  void mul(Sym v, int e) {
    if (e == 0) return;
    auto it = std::lower_bound(exps.begin(), exps.end(), v, [](const auto& p, Sym x) { return p.first < x; });
    if (it != exps.end() && it->first == v) {
      it->second += e;
      if (it->second == 0) exps.erase(it);
    } else {
      exps.insert(it, {v, e});
    }
  }
  bool has_negative() const {
    return std::any_of(exps.begin(), exps.end(), [](const auto& p) { return p.second < 0; });
  }
  friend Monomial operator*(const Monomial& a, const Monomial& b) {
    if (b.exps.empty()) return a;
    if (a.exps.empty()) return b;
    Monomial out;
    out.exps.reserve(a.exps.size() + b.exps.size());
    auto i = a.exps.begin(), j = b.exps.begin();
    while (i != a.exps.end() && j != b.exps.end()) {
      if (i->first == j->first) {
        if (const int e = i->second + j->second; e != 0) out.exps.emplace_back(i->first, e);
        ++i;
        ++j;
      } else if (i->first < j->first) {
        out.exps.push_back(*i++);
      } else {
        out.exps.push_back(*j++);
      }
    }
    out.exps.insert(out.exps.end(), i, a.exps.end());
    out.exps.insert(out.exps.end(), j, b.exps.end());
    return out;
  }
  friend bool operator==(const Monomial&, const Monomial&) = default;
  friend bool operator<(const Monomial& a, const Monomial& b) { return a.exps < b.exps; }
};

inline Monomial monomial(std::initializer_list<std::pair<Variable, int>> list) {
  Monomial m;
  for (const auto& [v, e] : list) m.mul(v, e);
  return m;
}

/// Poles as (normalized form, order >= 1), sorted by form.
struct PolePart {
  std::vector<std::pair<LinearForm, int>> factors;

  int total_order() const {
    int k = 0;
    for (const auto& [f, o] : factors) k += o;
    return k;
  }
  bool empty() const { return factors.empty(); }
  void mul(const LinearForm& normalized, int order) {
    if (order == 0) return;
    auto it = std::lower_bound(factors.begin(), factors.end(), normalized,
                               [](const auto& p, const LinearForm& f) { return p.first < f; });
    if (it != factors.end() && it->first == normalized) {
      it->second += order;
      if (it->second == 0) factors.erase(it);
    } else {
      factors.insert(it, {normalized, order});
    }
  }
  friend bool operator==(const PolePart&, const PolePart&) = default;
  friend bool operator<(const PolePart& a, const PolePart& b) { return a.factors < b.factors; }
};

struct TermKey {
  PolePart poles;
  Monomial mono;
  std::size_t basis = 0;

  int degree() const { return mono.total_degree() - poles.total_order(); }
  friend bool operator==(const TermKey&, const TermKey&) = default;
  friend bool operator<(const TermKey& a, const TermKey& b) {
    if (a.basis != b.basis) return a.basis < b.basis;
    if (!(a.poles == b.poles)) return a.poles < b.poles;
    return a.mono < b.mono;
  }
};

/// All monomials of f^n with coefficients (multinomial theorem), n >= 0.
inline std::map<Monomial, Rational> form_power_uncached(const LinearForm& f, int n) {
  std::map<Monomial, Rational> out;
  out[Monomial{}] = 1;
  for (int step = 0; step < n; ++step) {
    std::map<Monomial, Rational> next;
    for (const auto& [m, c] : out) {
      for (const auto& [v, a] : f.terms) {
        Monomial mm = m;
        mm.mul(v, 1);
        accumulate(next, mm, Rational(c * a));
      }
    }
    out = std::move(next);
  }
  return out;
}

/// Cached per thread: substitutions raise the same few forms over and over.
inline const std::map<Monomial, Rational>& form_power(const LinearForm& f, int n) {
  thread_local std::map<std::pair<LinearForm, int>, std::map<Monomial, Rational>> cache;
  auto key = std::make_pair(f, n);
  auto it = cache.find(key);
  if (it == cache.end()) {
    it = cache.emplace(std::move(key), form_power_uncached(f, n)).first;
  }
  return it->second;
}

// ---------------------------------------------------------------------------
// Series

struct ModuleRef {
  std::string id;
  std::size_t rank = 1;
  friend bool operator==(const ModuleRef&, const ModuleRef&) = default;
  static ModuleRef scalars() { return {"R", 1}; }
};

struct SeriesWindow {
  int ceiling = 6;        // total-degree ceiling N
  int laurent_depth = 8;  // largest admissible pole order M
  friend bool operator==(const SeriesWindow&, const SeriesWindow&) = default;
};

/// Where coefficients are known: every term of degree <= degree_through, and
/// for each (order, w) every term of weight <= w in that order.
struct Reliability {
  std::optional<int> degree_through;
  std::vector<std::pair<ExpansionOrder, int>> weight_through;

  bool exact() const { return !degree_through && weight_through.empty(); }
  void bound_degree(int d) { degree_through = degree_through ? std::min(*degree_through, d) : d; }
  void bound_weight(const ExpansionOrder& o, int w) {
    for (auto& [ord, bound] : weight_through) {
      if (ord == o) {
        bound = std::min(bound, w);
        return;
      }
    }
    weight_through.emplace_back(o, w);
  }
  void merge(const Reliability& r) {
    if (r.degree_through) bound_degree(*r.degree_through);
    for (const auto& [o, w] : r.weight_through) bound_weight(o, w);
  }
  friend bool operator==(const Reliability&, const Reliability&) = default;
};

/// Weight sum pos(v) * e_v, positions taken in `ord`.
inline int weight(const Monomial& m, const ExpansionOrder& ord) {
  int w = 0;
  for (const auto& [v, e] : m.exps) {
    auto it = std::find(ord.begin(), ord.end(), v);
    if (it == ord.end()) throw SeriesError("variable " + v + " missing from expansion order");
    w += static_cast<int>(it - ord.begin()) * e;
  }
  return w;
}

class SingularSeries {
 public:
  using Terms = std::map<TermKey, Rational>;

  SingularSeries() = default;
  SingularSeries(std::set<Variable> vars, ModuleRef module, SeriesWindow window = {})
      : vars_(std::move(vars)), module_(std::move(module)), window_(window) {}

  static SingularSeries scalar(std::set<Variable> vars, SeriesWindow window = {}) {
    return SingularSeries(std::move(vars), ModuleRef::scalars(), window);
  }
  static SingularSeries constant(const Rational& c, std::set<Variable> vars = {}, SeriesWindow window = {}) {
    SingularSeries s = scalar(std::move(vars), window);
    s.add_term(c, {}, {}, 0);
    return s;
  }

  /// Adds coeff * mono * prod raw_form^-order at basis b. Forms are
  /// normalized; single-variable forms become negative monomial powers.
  void add_term(const Rational& coeff, const Monomial& mono,
                const std::vector<std::pair<LinearForm, int>>& raw_poles, std::size_t basis) {
    if (coeff == 0) return;
    TermKey key{{}, mono, basis};
    Rational c = coeff;
    for (const auto& [form, order] : raw_poles) {
      if (order == 0) continue;
      if (order < 0) throw SeriesError("add_term: pole orders must be positive");
      auto [lead, normal] = normalize(form);
      c *= power(lead, -order);
      if (normal.terms.size() == 1) {
        key.mono.mul(normal.terms.front().first, -order);
      } else {
        key.poles.mul(normal, order);
      }
    }
    insert(key, c);
  }

  /// Adds a term whose key is already normalized.
  void add_key(const TermKey& key, const Rational& c) { insert(key, c); }
  /// As add_key, for keys built from terms of a series over the same
  /// variables: the declared-variable check is skipped.
  void add_known_key(const TermKey& key, const Rational& c) { insert(key, c, false); }

  const Terms& terms() const noexcept { return terms_; }
  const std::set<Variable>& variables() const noexcept { return vars_; }
  const ModuleRef& module() const noexcept { return module_; }
  const SeriesWindow& window() const noexcept { return window_; }
  const Reliability& reliability() const noexcept { return rel_; }
  Reliability& reliability() noexcept { return rel_; }
  bool is_zero() const noexcept { return terms_.empty(); }
  bool pole_free() const {
    return std::all_of(terms_.begin(), terms_.end(), [](const auto& t) { return t.first.poles.empty(); });
  }
  bool has_negative_powers() const {
    for (const auto& [k, c] : terms_) {
      for (const auto& [v, e] : k.mono.exps) {
        if (e < 0) return true;
      }
    }
    return false;
  }
  std::set<Variable> used_variables() const {
    std::set<Variable> out;
    for (const auto& [k, c] : terms_) {
      for (const auto& [v, e] : k.mono.exps) out.insert(v);
      for (const auto& [f, o] : k.poles.factors) {
        for (const auto& [v, a] : f.terms) out.insert(v);
      }
    }
    return out;
  }
  int max_pole_order() const {
    int k = 0;
    for (const auto& [key, c] : terms_) {
      for (const auto& [f, o] : key.poles.factors) k = std::max(k, o);
    }
    return k;
  }

  void declare(const Variable& v) { vars_.insert(v); }
  void set_variables(std::set<Variable> vars) { vars_ = std::move(vars); }
  void set_module(ModuleRef m) { module_ = std::move(m); }

  /// Coefficient series of one basis vector, as a scalar series.
  SingularSeries component(std::size_t basis) const {
    SingularSeries out = scalar(vars_, window_);
    out.rel_ = rel_;
    for (const auto& [k, c] : terms_) {
      if (k.basis != basis) continue;
      TermKey kk = k;
      kk.basis = 0;
      out.terms_.emplace(kk, c);
    }
    return out;
  }

  friend bool operator==(const SingularSeries&, const SingularSeries&) = default;

  friend SingularSeries operator+(const SingularSeries& a, const SingularSeries& b) { return combine(a, b, 1); }
  friend SingularSeries operator-(const SingularSeries& a, const SingularSeries& b) { return combine(a, b, -1); }
  friend SingularSeries operator*(const Rational& s, const SingularSeries& a) {
    SingularSeries out = a;
    if (s == 0) {
      out.terms_.clear();
      return out;
    }
    for (auto& [k, c] : out.terms_) c *= s;
    return out;
  }

 private:
  void insert(const TermKey& key, const Rational& c, bool check_variables = true) {
    if (c == 0) return;
    if (key.basis >= module_.rank) {
      throw SeriesError("basis index " + std::to_string(key.basis) + " outside module " + module_.id + " of rank " +
                        std::to_string(module_.rank));
    }
    if (check_variables) {
      for (const auto& [v, e] : key.mono.exps) {
        if (!vars_.count(v)) throw SeriesError("undeclared variable " + v);
      }
    }
    for (const auto& [f, o] : key.poles.factors) {
      if (check_variables) {
        for (const auto& [v, a] : f.terms) {
          if (!vars_.count(v)) throw SeriesError("undeclared variable " + v + " in pole");
        }
      }
      if (o > window_.laurent_depth) {
        throw WindowUnderflow("pole order " + std::to_string(o) + " exceeds Laurent depth " +
                              std::to_string(window_.laurent_depth));
      }
    }
    if (key.degree() > window_.ceiling) {
      rel_.bound_degree(window_.ceiling);
      return;
    }
    accumulate(terms_, key, c);
  }

  static SingularSeries combine(const SingularSeries& a, const SingularSeries& b, int sign) {
    if (!(a.module_ == b.module_)) throw SeriesError("adding series over different modules");
    std::set<Variable> vars = a.vars_;
    vars.insert(b.vars_.begin(), b.vars_.end());
    SeriesWindow w{std::min(a.window_.ceiling, b.window_.ceiling),
                   std::max(a.window_.laurent_depth, b.window_.laurent_depth)};
    SingularSeries out(std::move(vars), a.module_, w);
    out.rel_ = a.rel_;
    out.rel_.merge(b.rel_);
    if (a.window_ == w) {
      out.terms_ = a.terms_;
    } else {
      for (const auto& [k, c] : a.terms_) out.insert(k, c, false);
    }
    for (const auto& [k, c] : b.terms_) out.insert(k, sign * c, false);
    return out;
  }

  std::set<Variable> vars_;
  ModuleRef module_ = ModuleRef::scalars();
  SeriesWindow window_;
  Reliability rel_;
  Terms terms_;
};

// ---------------------------------------------------------------------------
// Reliable window

inline bool in_reliable_window(const TermKey& k, const Reliability& r) {
  if (r.degree_through && k.degree() > *r.degree_through) return false;
  for (const auto& [o, w] : r.weight_through) {
    if (!k.poles.empty()) return false;
    if (weight(k.mono, o) > w) return false;
  }
  return true;
}

inline SingularSeries restrict_to_reliable(const SingularSeries& s) {
  SingularSeries out(s.variables(), s.module(), s.window());
  out.reliability() = s.reliability();
  for (const auto& [k, c] : s.terms()) {
    if (in_reliable_window(k, s.reliability())) out.add_known_key(k, c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Expansion

/// Replaces every pole L^-k by its expansion in the region where the
/// ord-earliest variable of L dominates. Each expansion step raises the
/// order-weight by at least one; steps are cut after window.ceiling, and the
/// reliable weight is recorded.
inline SingularSeries expand(const SingularSeries& s, const ExpansionOrder& ord) {
  for (const auto& v : s.variables()) {
    if (std::find(ord.begin(), ord.end(), v) == ord.end()) {
      throw SeriesError("expansion order does not cover variable " + v);
    }
  }
  auto pos = [&](const Variable& v) { return static_cast<int>(std::find(ord.begin(), ord.end(), v) - ord.begin()); };
  const int steps = s.window().ceiling;
  SingularSeries out(s.variables(), s.module(), s.window());
  out.reliability() = s.reliability();

  struct Piece {
    int n;
    Monomial mono;
    Rational coeff;
  };
  std::optional<int> reliable;
  std::vector<std::pair<TermKey, Rational>> expanded;
  for (const auto& [key, coeff] : s.terms()) {
    if (key.poles.empty()) {
      expanded.emplace_back(key, coeff);
      continue;
    }
    int lead_weight = 0;
    for (const auto& [v, e] : key.mono.exps) lead_weight += pos(v) * e;
    std::vector<Piece> acc{{0, key.mono, coeff}};
    for (const auto& [form, k] : key.poles.factors) {
      const Variable* u = nullptr;
      for (const auto& [v, a] : form.terms) {
        if (!u || pos(v) < pos(*u)) u = &v;
      }
      const Rational cu = form.coeff(*u);
      LinearForm rest = form - LinearForm::var(*u, cu);
      lead_weight -= k * pos(*u);
      std::vector<Piece> next;
      for (int n = 0; n <= steps; ++n) {
        const Rational head = binomial(-k, n) * power(cu, -k - n);
        for (const auto& [m, a] : form_power(rest, n)) {
          Monomial factor = m;
          factor.mul(*u, -k - n);
          const Rational fc = head * a;
          for (const auto& p : acc) {
            if (p.n + n > steps) continue;
            next.push_back({p.n + n, p.mono * factor, p.coeff * fc});
          }
        }
      }
      acc = std::move(next);
    }
    const int bound = lead_weight + steps;
    reliable = reliable ? std::min(*reliable, bound) : bound;
    for (auto& p : acc) expanded.emplace_back(TermKey{{}, std::move(p.mono), key.basis}, p.coeff);
  }
  if (reliable) out.reliability().bound_weight(ord, *reliable);
  for (const auto& [k, c] : expanded) {
    if (reliable && weight(k.mono, ord) > *reliable) continue;
    out.add_key(k, c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Products (scalar times module-valued)

inline SingularSeries multiply(const SingularSeries& scalar, const SingularSeries& m) {
  if (scalar.module().rank != 1) throw SeriesError("left factor of a product must be scalar-valued");
  std::set<Variable> vars = scalar.variables();
  vars.insert(m.variables().begin(), m.variables().end());
  SeriesWindow w{std::min(scalar.window().ceiling, m.window().ceiling),
                 std::max(scalar.window().laurent_depth, m.window().laurent_depth)};
  SingularSeries out(std::move(vars), m.module(), w);

  constexpr int inf = std::numeric_limits<int>::max() / 4;
  auto low_degree = [&](const SingularSeries& s) {
    int lo = inf;
    for (const auto& [k, c] : s.terms()) lo = std::min(lo, k.degree());
    if (s.reliability().degree_through) lo = std::min(lo, *s.reliability().degree_through + 1);
    return lo;
  };
  auto low_weight = [&](const SingularSeries& s, const ExpansionOrder& o) {
    int lo = inf;
    for (const auto& [k, c] : s.terms()) lo = std::min(lo, weight(k.mono, o));
    for (const auto& [ord, wb] : s.reliability().weight_through) {
      if (ord == o) lo = std::min(lo, wb + 1);
    }
    return lo;
  };
  auto transfer = [&](const SingularSeries& a, const SingularSeries& b) {
    if (a.reliability().degree_through && low_degree(b) < inf) {
      out.reliability().bound_degree(*a.reliability().degree_through + low_degree(b));
    }
    for (const auto& [o, wb] : a.reliability().weight_through) {
      if (!b.pole_free()) throw SeriesError("weight-truncated series multiplied by a series with poles");
      const int lw = low_weight(b, o);
      if (lw < inf) out.reliability().bound_weight(o, wb + lw);
    }
  };
  transfer(scalar, m);
  transfer(m, scalar);

  for (const auto& [ka, ca] : scalar.terms()) {
    for (const auto& [kb, cb] : m.terms()) {
      TermKey k{kb.poles, ka.mono * kb.mono, kb.basis};
      for (const auto& [f, o] : ka.poles.factors) k.poles.mul(f, o);
      out.add_known_key(k, ca * cb);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Substitution

/// Simultaneous substitution v -> form(v). Weight reliabilities survive only
/// when the substitution renames variables bijectively.
inline SingularSeries substitute(const SingularSeries& s, const std::map<Variable, LinearForm>& repl,
                                 std::optional<std::set<Variable>> new_vars = std::nullopt) {
  std::set<Variable> vars;
  if (new_vars) {
    vars = *new_vars;
  } else {
    for (const auto& v : s.variables()) {
      auto it = repl.find(v);
      if (it == repl.end()) {
        vars.insert(v);
      } else {
        for (const auto& [w, c] : it->second.terms) vars.insert(w);
      }
    }
  }
  SingularSeries out(vars, s.module(), s.window());
  out.reliability().degree_through = s.reliability().degree_through;
  if (!s.reliability().weight_through.empty()) {
    std::set<Variable> images;
    for (const auto& [v, f] : repl) {
      if (f.terms.size() != 1 || f.terms.front().second != 1) {
        throw SeriesError("substitution into a weight-truncated series must be a renaming");
      }
      images.insert(f.terms.front().first);
    }
    if (images.size() != repl.size()) throw SeriesError("renaming is not injective");
    for (const auto& [o, w] : s.reliability().weight_through) {
      ExpansionOrder renamed = o;
      for (auto& v : renamed) {
        auto it = repl.find(v);
        if (it != repl.end()) v = it->second.terms.front().first;
      }
      out.reliability().bound_weight(renamed, w);
    }
  }
  auto image = [&](const Variable& v) {
    auto it = repl.find(v);
    return it == repl.end() ? LinearForm::var(v) : it->second;
  };
  // per-variable image looked up by interned name; when every image variable
  // is declared, pole-free terms skip the declared-variable check
  struct Image {
    Sym v;
    LinearForm f;
    std::vector<const std::map<Monomial, Rational>*> powers;
  };
  std::vector<Image> images;
  bool images_declared = true;
  for (const auto& v : s.variables()) {
    LinearForm f = image(v);
    for (const auto& [w, c] : f.terms) images_declared = images_declared && vars.count(w);
    images.push_back({Sym(v), std::move(f), {}});
  }
  auto power_of = [&](Sym v, int e) -> const std::map<Monomial, Rational>& {
    for (auto& im : images) {
      if (im.v != v) continue;
      if (im.powers.size() <= static_cast<std::size_t>(e)) im.powers.resize(e + 1, nullptr);
      if (!im.powers[e]) im.powers[e] = &form_power(im.f, e);
      return *im.powers[e];
    }
    throw SeriesError("substitute: " + std::string(v) + " is not a variable of the series");
  };

  for (const auto& [key, coeff] : s.terms()) {
    if (images_declared && key.poles.empty() && !key.mono.has_negative()) {
      std::map<Monomial, Rational> body{{Monomial{}, coeff}};
      for (const auto& [v, e] : key.mono.exps) {
        const auto& pw = power_of(v, e);
        std::map<Monomial, Rational> next;
        for (const auto& [pm, pc] : pw) {
          for (const auto& [bm, bc] : body) accumulate(next, bm * pm, Rational(bc * pc));
        }
        body = std::move(next);
        if (body.empty()) break;
      }
      for (auto& [m, c] : body) out.add_known_key(TermKey{{}, m, key.basis}, c);
      continue;
    }
    std::vector<std::pair<LinearForm, int>> poles;
    std::map<Monomial, Rational> body{{Monomial{}, coeff}};
    for (const auto& [v, e] : key.mono.exps) {
      const LinearForm f = image(v);
      if (e < 0) {
        if (f.is_zero()) throw PoleAtZero("pole at zero: " + v + " substituted by 0");
        poles.emplace_back(f, -e);
        continue;
      }
      std::map<Monomial, Rational> next;
      for (const auto& [pm, pc] : form_power(f, e)) {
        for (const auto& [bm, bc] : body) accumulate(next, bm * pm, Rational(bc * pc));
      }
      body = std::move(next);
      if (body.empty()) break;
    }
    if (body.empty()) continue;
    for (const auto& [form, k] : key.poles.factors) {
      LinearForm img;
      for (const auto& [v, a] : form.terms) img = img + a * image(v);
      if (img.is_zero()) throw PoleAtZero("pole at zero: (" + format_form(form) + ") collapses");
      poles.emplace_back(img, k);
    }
    for (const auto& [m, c] : body) out.add_term(c, m, poles, key.basis);
  }
  return out;
}

inline SingularSeries substitute(const SingularSeries& s, const Variable& v, const LinearForm& replacement) {
  return substitute(s, std::map<Variable, LinearForm>{{v, replacement}});
}

inline SingularSeries rename(const SingularSeries& s, const std::map<Variable, Variable>& names) {
  std::map<Variable, LinearForm> repl;
  for (const auto& [a, b] : names) repl[a] = LinearForm::var(b);
  std::set<Variable> vars;
  for (const auto& v : s.variables()) {
    auto it = names.find(v);
    vars.insert(it == names.end() ? v : it->second);
  }
  if (!s.reliability().weight_through.empty()) return substitute(s, repl, vars);
  // a renaming maps monomials to monomials: no expansion needed
  std::vector<std::pair<Sym, Sym>> table;
  for (const auto& [a, b] : names) table.emplace_back(Sym(a), Sym(b));
  auto image = [&](Sym v) {
    for (const auto& [a, b] : table) {
      if (a == v) return b;
    }
    return v;
  };
  SingularSeries out(vars, s.module(), s.window());
  out.reliability().degree_through = s.reliability().degree_through;
  for (const auto& [key, coeff] : s.terms()) {
    Monomial mono;
    for (const auto& [v, e] : key.mono.exps) mono.mul(image(v), e);
    if (key.poles.empty()) {
      out.add_known_key(TermKey{{}, std::move(mono), key.basis}, coeff);
      continue;
    }
    std::vector<std::pair<LinearForm, int>> poles;
    for (const auto& [form, k] : key.poles.factors) {
      LinearForm img;
      for (const auto& [v, a] : form.terms) img.add(image(Sym(v)), a);
      if (img.is_zero()) throw PoleAtZero("pole at zero: (" + format_form(form) + ") collapses");
      poles.emplace_back(std::move(img), k);
    }
    out.add_term(coeff, mono, poles, key.basis);
  }
  return out;
}

inline SingularSeries swap_variables(const SingularSeries& s, const Variable& u, const Variable& v) {
  if (!s.variables().count(u) || !s.variables().count(v)) throw SeriesError("swap of undeclared variable");
  if (u == v) return s;
  return rename(s, {{u, v}, {v, u}});
}

// ---------------------------------------------------------------------------
// H-action on one variable

/// D(i) in variable v, by the divided-power Leibniz rule over the factors of
/// each term: x_v^e -> binom(e,p) x_v^(e-p), L^-k -> binom(-k,p) c^p L^(-k-p)
/// where c is the coefficient of v in L.
inline SingularSeries act_variable(const HElem& h, const Variable& v, const SingularSeries& s) {
  if (!s.variables().count(v)) throw SeriesError("act_variable: " + v + " is not a variable of the series");
  SingularSeries out(s.variables(), s.module(), s.window());
  out.reliability().degree_through = s.reliability().degree_through;
  const int deg = static_cast<int>(h.degree());
  if (s.reliability().degree_through) out.reliability().bound_degree(*s.reliability().degree_through - deg);
  for (const auto& [o, w] : s.reliability().weight_through) {
    const int p = static_cast<int>(std::find(o.begin(), o.end(), v) - o.begin());
    // each unit of action lowers the weight by p
    out.reliability().bound_weight(o, w - deg * p);
  }

  for (const auto& [i_, hc] : h.terms()) {
    const int i = static_cast<int>(i_);
    for (const auto& [key, coeff] : s.terms()) {
      // factor 0: the monomial power of v; factors 1..: poles containing v
      const int e = key.mono.exponent(v);
      std::vector<std::size_t> pole_idx;
      for (std::size_t f = 0; f < key.poles.factors.size(); ++f) {
        if (key.poles.factors[f].first.coeff(v) != 0) pole_idx.push_back(f);
      }
      std::vector<int> split(pole_idx.size() + 1, 0);
      std::function<void(std::size_t, int)> distribute = [&](std::size_t slot, int remaining) {
        if (slot == split.size() - 1) {
          split[slot] = remaining;
          Rational c = hc * coeff * binomial(e, split[0]);
          if (c == 0) return;
          TermKey k = key;
          k.mono.mul(v, -split[0]);
          for (std::size_t t = 0; t < pole_idx.size(); ++t) {
            const int p = split[t + 1];
            if (p == 0) continue;
            auto& [form, order] = k.poles.factors[pole_idx[t]];
            c *= binomial(-order, p) * power(form.coeff(v), p);
            order += p;
          }
          out.add_known_key(k, c);
          return;
        }
        for (int p = 0; p <= remaining; ++p) {
          split[slot] = p;
          distribute(slot + 1, remaining - p);
        }
      };
      if (e == 0 && pole_idx.empty()) {
        if (i == 0) out.add_known_key(key, hc * coeff);
        continue;
      }
      distribute(0, i);
    }
  }
  return out;
}

/// The first-order derivation sum_v field[v] d/dv, in one pass.
inline SingularSeries derivation(const SingularSeries& s, const std::map<Variable, Rational>& field) {
  for (const auto& [v, a] : field) {
    if (!s.variables().count(v)) throw SeriesError("derivation: " + v + " is not a variable of the series");
  }
  SingularSeries out(s.variables(), s.module(), s.window());
  out.reliability().degree_through = s.reliability().degree_through;
  if (s.reliability().degree_through) out.reliability().bound_degree(*s.reliability().degree_through - 1);
  for (const auto& [o, w] : s.reliability().weight_through) {
    int p = 0;
    for (const auto& [v, a] : field) p = std::max(p, static_cast<int>(std::find(o.begin(), o.end(), v) - o.begin()));
    out.reliability().bound_weight(o, w - p);
  }
  for (const auto& [key, coeff] : s.terms()) {
    for (const auto& [v, e] : key.mono.exps) {
      auto it = field.find(v);
      if (it == field.end()) continue;
      TermKey k = key;
      k.mono.mul(v, -1);
      out.add_known_key(k, coeff * e * it->second);
    }
    for (std::size_t f = 0; f < key.poles.factors.size(); ++f) {
      const auto& [form, order] = key.poles.factors[f];
      Rational slope = 0;
      for (const auto& [v, a] : form.terms) {
        auto it = field.find(v);
        if (it != field.end()) slope += a * it->second;
      }
      if (slope == 0) continue;
      TermKey k = key;
      k.poles.factors[f].second += 1;
      out.add_known_key(k, -coeff * order * slope);
    }
  }
  return out;
}

/// The comultiplication-distributed action of D(i) across `parts`.
inline SingularSeries distributed_action(const SingularSeries& s, const std::vector<Variable>& parts, std::size_t i) {
  // table[j] = sum over distributions of degree j among the parts so far
  std::vector<SingularSeries> table(i + 1, 0 * s);
  table[0] = s;
  for (const auto& v : parts) {
    std::vector<SingularSeries> next(i + 1, 0 * s);
    for (std::size_t j = 0; j <= i; ++j) {
      for (std::size_t p = 0; p <= j; ++p) {
        if (table[j - p].is_zero()) continue;
        next[j] = next[j] + act_variable(HElem::generator(p), v, table[j - p]);
      }
    }
    table = std::move(next);
  }
  return table[i];
}

// ---------------------------------------------------------------------------
// Equality

namespace detail {

// Multiplies every term by the common denominator so that the result is a
// polynomial; equal rational functions give equal polynomials.
inline std::map<std::pair<std::size_t, Monomial>, Rational> clear_denominators(const SingularSeries& s) {
  std::map<LinearForm, int> common;
  for (const auto& [k, c] : s.terms()) {
    for (const auto& [f, o] : k.poles.factors) common[f] = std::max(common[f], o);
  }
  std::map<std::pair<std::size_t, Monomial>, Rational> out;
  for (const auto& [k, c] : s.terms()) {
    std::map<Monomial, Rational> body{{k.mono, c}};
    for (const auto& [f, top] : common) {
      int have = 0;
      for (const auto& [g, o] : k.poles.factors) {
        if (g == f) have = o;
      }
      std::map<Monomial, Rational> next;
      for (const auto& [pm, pc] : form_power(f, top - have)) {
        for (const auto& [bm, bc] : body) accumulate(next, bm * pm, Rational(bc * pc));
      }
      body = std::move(next);
    }
    for (const auto& [m, a] : body) accumulate(out, std::pair{k.basis, m}, a);
  }
  return out;
}

}  // namespace detail

/// Locates a term of s that is nonzero on its reliable window, for witnesses.
struct Discrepancy {
  TermKey key;
  Rational coeff;
};

/// Is s zero on its reliable window? Series with poles and no weight bounds
/// are compared as rational functions, degree by degree.
inline std::optional<Discrepancy> nonzero_witness(const SingularSeries& s) {
  const auto& rel = s.reliability();
  if (s.pole_free() || !rel.weight_through.empty()) {
    for (const auto& [k, c] : s.terms()) {
      if (in_reliable_window(k, rel)) return Discrepancy{k, c};
    }
    return std::nullopt;
  }
  SingularSeries kept(s.variables(), s.module(), s.window());
  for (const auto& [k, c] : s.terms()) {
    if (!rel.degree_through || k.degree() <= *rel.degree_through) kept.add_known_key(k, c);
  }
  const auto cleared = detail::clear_denominators(kept);
  if (cleared.empty()) return std::nullopt;
  // report the lowest-degree original term of an offending basis vector
  const std::size_t basis = cleared.begin()->first.first;
  for (const auto& [k, c] : kept.terms()) {
    if (k.basis == basis) return Discrepancy{k, c};
  }
  return Discrepancy{kept.terms().begin()->first, kept.terms().begin()->second};
}

inline std::optional<Discrepancy> difference_witness(const SingularSeries& a, const SingularSeries& b) {
  if (a.terms() == b.terms()) return std::nullopt;
  if (!a.reliability().weight_through.empty() || !b.reliability().weight_through.empty()) {
    // compare in a common expansion
    const ExpansionOrder& o = !a.reliability().weight_through.empty() ? a.reliability().weight_through.front().first
                                                                      : b.reliability().weight_through.front().first;
    return nonzero_witness(expand(a, o) - expand(b, o));
  }
  return nonzero_witness(a - b);
}

inline bool equivalent(const SingularSeries& a, const SingularSeries& b) { return !difference_witness(a, b); }

struct AgreementResult {
  bool agree = true;
  std::optional<ExpansionOrder> order;
  std::optional<Discrepancy> witness;
  explicit operator bool() const { return agree; }
};

inline AgreementResult agree_after_expansion(const SingularSeries& s1, const SingularSeries& s2,
                                             const std::vector<ExpansionOrder>& orders) {
  for (const auto& o : orders) {
    if (auto w = nonzero_witness(expand(s1, o) - expand(s2, o))) return {false, o, *w};
  }
  return {};
}

// ---------------------------------------------------------------------------
// Sum rules

/// Coefficients of t^0..t^bound of s, expanding poles around t = 0.
inline std::vector<SingularSeries> taylor_in(const SingularSeries& s, const Variable& t, std::size_t bound) {
  std::set<Variable> vars = s.variables();
  vars.erase(t);
  std::vector<SingularSeries> out(bound + 1, SingularSeries(vars, s.module(), s.window()));
  for (auto& c : out) c.reliability().degree_through = s.reliability().degree_through;
  for (std::size_t j = 0; j <= bound; ++j) {
    if (s.reliability().degree_through) out[j].reliability().bound_degree(*s.reliability().degree_through - static_cast<int>(j));
    for (const auto& [o, w] : s.reliability().weight_through) {
      ExpansionOrder rest;
      for (const auto& v : o) {
        if (v != t) rest.push_back(v);
      }
      const int p = static_cast<int>(std::find(o.begin(), o.end(), t) - o.begin());
      out[j].reliability().bound_weight(rest, w - static_cast<int>(j) * p);
    }
  }
  for (const auto& [key, coeff] : s.terms()) {
    const int e = key.mono.exponent(t);
    if (e < 0) throw SeriesError("negative power of " + t + " has no Taylor expansion");
    struct Piece {
      int n;
      std::vector<std::pair<LinearForm, int>> poles;
      Rational c;
    };
    std::vector<Piece> acc{{e, {}, coeff}};
    for (const auto& [form, k] : key.poles.factors) {
      const Rational ct = form.coeff(t);
      if (ct == 0) {
        for (auto& p : acc) p.poles.emplace_back(form, k);
        continue;
      }
      const LinearForm rest = form - LinearForm::var(t, ct);
      if (rest.is_zero()) throw SeriesError("pole along " + t + " alone has no Taylor expansion");
      std::vector<Piece> next;
      for (const auto& p : acc) {
        for (int n = 0; p.n + n <= static_cast<int>(bound); ++n) {
          Piece q = p;
          q.n += n;
          q.c *= binomial(-k, n) * power(ct, n);
          q.poles.emplace_back(rest, k + n);
          next.push_back(std::move(q));
        }
      }
      acc = std::move(next);
    }
    Monomial mono = key.mono;
    mono.mul(t, -e);
    for (const auto& p : acc) {
      if (p.n > static_cast<int>(bound)) continue;
      out[static_cast<std::size_t>(p.n)].add_term(p.c, mono, p.poles, key.basis);
    }
  }
  return out;
}

namespace detail {

struct PoleFreeKeyHash {
  std::size_t operator()(const TermKey& k) const noexcept {
    std::size_t h = k.basis * 0x9e3779b97f4a7c15ULL;
    for (const auto& [v, e] : k.mono.exps) h = (h ^ (v.hash() + static_cast<std::size_t>(e) * 0x51ed27ULL)) * 0x100000001b3ULL;
    return h;
  }
};

// Whether the derivation of a pole-free series is nonzero, accumulated in a
// hash table; the ordered route is only needed to name a witness.
inline bool derivation_nonzero(const SingularSeries& s, const std::map<Variable, Rational>& field) {
  std::vector<std::pair<Sym, Rational>> dirs;
  for (const auto& [v, a] : field) {
    if (a != 0) dirs.emplace_back(Sym(v), a);
  }
  std::unordered_map<TermKey, Rational, PoleFreeKeyHash> acc;
  acc.reserve(2 * s.terms().size());
  for (const auto& [key, coeff] : s.terms()) {
    for (const auto& [v, a] : dirs) {
      const int e = key.mono.exponent(v);
      if (e == 0) continue;
      TermKey k = key;
      k.mono.mul(v, -1);
      acc[k] += coeff * e * a;
    }
  }
  for (const auto& [k, c] : acc) {
    if (c != 0) return true;
  }
  return false;
}

}  // namespace detail

struct SumRuleResult {
  bool ok = true;
  std::size_t degree = 0;
  std::optional<Discrepancy> witness;
  explicit operator bool() const { return ok; }
};

/// Checks D(i)_whole s = sum over p_1+...+p_r = i of prod D(p_u)_{parts_u} s
/// for 1 <= i <= bound, as the substitution identity
///   s[whole -> whole + t] = s[u -> u + t for u in parts]  (mod t^(bound+1)).
/// A `whole` that does not occur in s acts by zero.
inline SumRuleResult check_sum_rule_by_shift(const SingularSeries& s, const std::vector<Variable>& parts,
                                             const Variable& whole, std::size_t bound) {
  const Variable t = "t.shift";
  std::set<Variable> vars = s.variables();
  vars.insert(t);
  SingularSeries base = s;
  base.set_variables(vars);
  SingularSeries left = base;
  if (s.variables().count(whole)) left = substitute(base, whole, LinearForm::var(whole) + LinearForm::var(t));
  std::map<Variable, LinearForm> shift;
  for (const auto& u : parts) shift[u] = LinearForm::var(u) + LinearForm::var(t);
  const SingularSeries right = substitute(base, shift, vars);
  const auto coeffs = taylor_in(left - right, t, bound);
  for (std::size_t i = 1; i <= bound; ++i) {
    if (auto w = nonzero_witness(coeffs[i])) return {false, i, *w};
  }
  return {};
}

/// The same identity through its degree-one part. Both sides are exp(t A) s
/// for commuting derivations A, so A_whole s = sum_u A_u s gives every
/// degree at once; this needs no expansion in t.
inline SumRuleResult check_sum_rule(const SingularSeries& s, const std::vector<Variable>& parts, const Variable& whole,
                                    std::size_t bound) {
  if (bound == 0) return {};
  std::map<Variable, Rational> field;
  if (s.variables().count(whole)) field[whole] = 1;
  for (const auto& u : parts) field[u] -= 1;
  if (s.pole_free() && s.reliability().weight_through.empty() && !detail::derivation_nonzero(s, field)) return {};
  if (auto w = nonzero_witness(derivation(s, field))) return {false, 1, *w};
  return {};
}

/// Sum rule against declared whole-actions D(i) -> declared[i] (absent = 0).
inline SumRuleResult check_sum_rule(const SingularSeries& s, const std::vector<Variable>& parts,
                                    const std::map<std::size_t, SingularSeries>& declared, std::size_t bound) {
  for (std::size_t i = 1; i <= bound; ++i) {
    const SingularSeries got = distributed_action(s, parts, i);
    auto it = declared.find(i);
    const SingularSeries want = it == declared.end() ? 0 * s : it->second;
    if (auto w = difference_witness(got, want)) return {false, i, *w};
  }
  return {};
}

// ---------------------------------------------------------------------------
// Text

inline std::string format_term(const TermKey& k, const Rational& c, const std::vector<std::string>& basis_names = {}) {
  std::string body;
  for (const auto& [v, e] : k.mono.exps) {
    if (!body.empty()) body += "*";
    body += v;
    if (e != 1) body += "^" + std::to_string(e);
  }
  for (const auto& [f, o] : k.poles.factors) {
    if (!body.empty()) body += "*";
    body += "(" + format_form(f) + ")^-" + std::to_string(o);
  }
  std::string out;
  if (body.empty()) {
    out = c.get_str();
  } else if (c == 1) {
    out = body;
  } else if (c == -1) {
    out = "-" + body;
  } else {
    out = c.get_str() + "*" + body;
  }
  if (!basis_names.empty() && k.basis < basis_names.size()) {
    out += " " + basis_names[k.basis];
  } else if (basis_names.empty()) {
    out += " [" + std::to_string(k.basis) + "]";
  }
  return out;
}

inline std::string format_series(const SingularSeries& s, const std::vector<std::string>& basis_names = {}) {
  if (s.is_zero()) return "0";
  std::string out;
  for (const auto& [k, c] : s.terms()) {
    if (!out.empty()) out += "\n";
    out += format_term(k, c, basis_names);
  }
  return out;
}

}  // namespace rmc
