#pragma once

// JSON documents for modules, series, multimaps and algebras, and a small
// text syntax for scalar series such as "x^2*y - 3/2*(x-y)^-2".

#include <json.hpp>

#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "rmc/algebra.hpp"

namespace rmc::io {

using Json = nlohmann::ordered_json;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

inline Rational rational_of(const Json& j) {
  if (j.is_number_integer()) return Rational(j.get<long long>());
  if (j.is_string()) return parse_rational(j.get<std::string>());
  throw FormatError("expected a rational (integer or string), got " + j.dump());
}

inline Json rational_json(const Rational& r) {
  if (r.is_small() && r.denominator() == 1) return r.numerator().get_si();
  return r.get_str();
}

// ---------------------------------------------------------------------------
// Modules: "Q[u]<=d", "R", or {"id", "basis", "action", "nilpotent"}

inline Json matrix_json(const Matrix& m) {
  Json rows = Json::array();
  for (const auto& row : m) {
    Json r = Json::array();
    for (const auto& x : row) r.push_back(rational_json(x));
    rows.push_back(r);
  }
  return rows;
}

inline Matrix matrix_of(const Json& j, std::size_t n) {
  if (!j.is_array() || j.size() != n) throw FormatError("matrix must have " + std::to_string(n) + " rows");
  Matrix m;
  for (const auto& row : j) {
    if (!row.is_array() || row.size() != n) throw FormatError("matrix row must have " + std::to_string(n) + " entries");
    std::vector<Rational> r;
    for (const auto& x : row) r.push_back(rational_of(x));
    m.push_back(std::move(r));
  }
  return m;
}

inline Json module_json(const HModule& m) {
  const std::string& id = m.id();
  if (id == "R" && m.rank() == 1) return "R";
  if (id.rfind("Q[u]<=", 0) == 0) return id;
  Json action = Json::array();
  for (std::size_t i = 1; i <= m.bound(); ++i) action.push_back(matrix_json(m.action(i)));
  return Json{{"id", id}, {"basis", m.basis()}, {"action", action}, {"nilpotent", m.nilpotent_beyond_bound()}};
}

/// `action` lists D(1), D(2), ...; D(0) is the identity.
inline ModulePtr module_of(const Json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "R") return scalars_module();
    if (s.rfind("Q[u]<=", 0) == 0) {
      try {
        return polynomials_up_to(std::stoul(s.substr(6)));
      } catch (const std::exception&) {
        throw FormatError("bad module name " + s);
      }
    }
    throw FormatError("unknown module " + s);
  }
  if (!j.is_object()) throw FormatError("module must be a name or an object");
  const auto basis = j.at("basis").get<std::vector<std::string>>();
  std::vector<Matrix> action{identity_matrix(basis.size())};
  if (j.contains("action")) {
    for (const auto& m : j.at("action")) action.push_back(matrix_of(m, basis.size()));
  }
  return std::make_shared<const HModule>(j.at("id").get<std::string>(), basis, std::move(action),
                                         j.value("nilpotent", true));
}

/// Basis vector by name; "u" and "1" also name u^1 and u^0 in Q[u].
inline std::size_t basis_of(const HModule& m, const std::string& qualified) {
  const std::string prefix = m.id() + ".";
  const std::string name = qualified.rfind(prefix, 0) == 0 ? qualified.substr(prefix.size()) : qualified;
  for (const auto& alt : {name, name == "u" ? std::string("u^1") : name == "1" ? std::string("u^0") : name}) {
    try {
      return m.basis_index(alt);
    } catch (const ModuleError&) {
    }
  }
  throw FormatError("module " + m.id() + " has no basis vector '" + name + "'");
}

// ---------------------------------------------------------------------------
// Series: {"variables", "terms": [{"coeff","basis","monomial","poles"}]}

inline Json term_json(const TermKey& k, const Rational& c, const HModule* m) {
  Json mono = Json::object();
  for (const auto& [v, e] : k.mono.exps) mono[std::string(v)] = e;
  Json poles = Json::object();
  for (const auto& [f, o] : k.poles.factors) poles[format_form(f)] = o;
  Json basis = m ? Json(m->id() + "." + m->basis()[k.basis]) : Json(k.basis);
  return Json{{"coeff", c.get_str()}, {"basis", basis}, {"monomial", mono}, {"poles", poles}};
}

inline Json series_json(const SingularSeries& s, const HModule* m = nullptr) {
  Json terms = Json::array();
  for (const auto& [k, c] : s.terms()) terms.push_back(term_json(k, c, m));
  Json out{{"variables", s.variables()}, {"module", s.module().id}, {"terms", terms}};
  const Reliability& r = s.reliability();
  if (r.degree_through) out["exact_through_degree"] = *r.degree_through;
  if (!r.weight_through.empty()) {
    Json w = Json::array();
    for (const auto& [o, b] : r.weight_through) w.push_back({{"order", o}, {"weight", b}});
    out["exact_through_weight"] = w;
  }
  return out;
}

inline void add_term_json(SingularSeries& s, const Json& t, const HModule* m) {
  const Rational c = rational_of(t.at("coeff"));
  std::size_t basis = 0;
  if (t.contains("basis")) {
    const Json& b = t.at("basis");
    if (b.is_number_unsigned()) {
      basis = b.get<std::size_t>();
    } else if (m) {
      basis = basis_of(*m, b.get<std::string>());
    } else {
      throw FormatError("named basis " + b.dump() + " without a module");
    }
  }
  Monomial mono;
  if (t.contains("monomial")) {
    for (const auto& [v, e] : t.at("monomial").items()) mono.mul(v, e.get<int>());
  }
  std::vector<std::pair<LinearForm, int>> poles;
  if (t.contains("poles")) {
    for (const auto& [f, o] : t.at("poles").items()) poles.emplace_back(parse_form(f), o.get<int>());
  }
  s.add_term(c, mono, poles, basis);
}

inline SingularSeries series_of(const Json& j, ModuleRef ref, const HModule* m = nullptr, SeriesWindow w = {},
                                std::optional<std::set<Variable>> vars = std::nullopt) {
  std::set<Variable> v = vars ? *vars : std::set<Variable>{};
  if (!vars && j.contains("variables")) v = j.at("variables").get<std::set<Variable>>();
  SingularSeries s(v, std::move(ref), w);
  for (const auto& t : j.at("terms")) add_term_json(s, t, m);
  return s;
}

// ---------------------------------------------------------------------------
// Scalar series in text

namespace detail {

class SeriesParser {
 public:
  explicit SeriesParser(std::string_view text) {
    for (char ch : text) {
      if (!std::isspace(static_cast<unsigned char>(ch))) s_.push_back(ch);
    }
  }

  struct Term {
    Rational coeff = 1;
    Monomial mono;
    std::vector<std::pair<LinearForm, int>> poles;
    std::vector<std::map<Monomial, Rational>> factors;  // positive powers of forms
  };

  std::vector<Term> parse() {
    if (s_.empty()) throw FormatError("empty series");
    std::vector<Term> out;
    for (;;) {
      Rational sign = 1;
      if (peek() == '+' || peek() == '-') {
        if (get() == '-') sign = -1;
      } else if (!out.empty()) {
        fail("expected + or -");
      }
      Term t = term();
      t.coeff *= sign;
      out.push_back(std::move(t));
      if (pos_ == s_.size()) break;
    }
    return out;
  }

  const std::set<Variable>& variables() const { return vars_; }

 private:
  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
  char get() { return pos_ < s_.size() ? s_[pos_++] : '\0'; }
  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(what + " at offset " + std::to_string(pos_) + " in '" + s_ + "'");
  }

  int exponent() {
    if (peek() != '^') return 1;
    get();
    std::size_t start = pos_;
    if (peek() == '-') get();
    while (std::isdigit(static_cast<unsigned char>(peek()))) get();
    if (start == pos_ || s_[pos_ - 1] == '-') fail("expected an exponent");
    return std::stoi(s_.substr(start, pos_ - start));
  }

  Term term() {
    Term t;
    for (;;) {
      factor(t);
      if (peek() != '*') break;
      get();
    }
    return t;
  }

  void factor(Term& t) {
    const char c = peek();
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      while (std::isdigit(static_cast<unsigned char>(peek())) || peek() == '/') get();
      t.coeff *= parse_rational(s_.substr(start, pos_ - start));
    } else if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      while (is_variable_char(peek())) get();
      const Variable v = s_.substr(start, pos_ - start);
      vars_.insert(v);
      t.mono.mul(v, exponent());
    } else if (c == '(') {
      get();
      std::size_t start = pos_;
      int depth = 1;
      while (pos_ < s_.size() && depth > 0) {
        const char ch = get();
        depth += (ch == '(') - (ch == ')');
      }
      if (depth != 0) fail("unbalanced parenthesis");
      const LinearForm f = parse_form(s_.substr(start, pos_ - 1 - start));
      for (const auto& [v, a] : f.terms) vars_.insert(v);
      const int e = exponent();
      if (e < 0) {
        t.poles.emplace_back(f, -e);
      } else if (e > 0) {
        t.factors.push_back(form_power(f, e));
      }
    } else {
      fail("unexpected character");
    }
  }

  std::string s_;
  std::size_t pos_ = 0;
  std::set<Variable> vars_;
};

}  // namespace detail

/// Scalar-valued series from text. Variables are those that appear, plus
/// `extra`.
inline SingularSeries parse_series(std::string_view text, const std::set<Variable>& extra = {}, SeriesWindow w = {}) {
  detail::SeriesParser p(text);
  const auto terms = p.parse();
  std::set<Variable> vars = p.variables();
  vars.insert(extra.begin(), extra.end());
  SingularSeries s(vars, ModuleRef::scalars(), w);
  for (const auto& t : terms) {
    std::map<Monomial, Rational> body{{t.mono, t.coeff}};
    for (const auto& f : t.factors) {
      std::map<Monomial, Rational> next;
      for (const auto& [bm, bc] : body)
        for (const auto& [fm, fc] : f) accumulate(next, bm * fm, Rational(bc * fc));
      body = std::move(next);
    }
    for (const auto& [m, c] : body) s.add_term(c, m, t.poles, 0);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Multimaps: {"tree", "leaves", "root", "leaf_invariant", "root_invariant",
// "table": [{"inputs": [...], "terms": [...]}], "representatives"}

inline Json table_json(const LabelledTree& lt, const std::map<Tuple, SingularSeries>& table) {
  Json out = Json::array();
  for (const auto& [t, s] : table) {
    Json inputs = Json::array();
    for (std::size_t j = 0; j < t.size(); ++j) inputs.push_back(lt.leaves[j]->basis()[t[j]]);
    Json entry = series_json(s, lt.root.get());
    entry.erase("variables");
    entry.erase("module");
    Json row{{"inputs", inputs}};
    row.update(entry);
    out.push_back(row);
  }
  return out;
}

inline Json multimap_json(const MultiMap& m) {
  const LabelledTree& lt = m.shape();
  Json leaves = Json::array();
  for (const auto& l : lt.leaves) leaves.push_back(module_json(*l));
  Json out{{"tree", render_tree(lt.tree)},
           {"leaves", leaves},
           {"root", module_json(*lt.root)},
           {"leaf_invariant", lt.leaf_invariant},
           {"root_invariant", lt.root_invariant},
           {"table", table_json(lt, m.table())}};
  if (!m.representatives().empty()) {
    Json reps = Json::array();
    for (const auto& r : m.representatives()) {
      reps.push_back({{"label", r.label}, {"order", r.order}, {"table", table_json(lt, r.table)}});
    }
    out["representatives"] = reps;
  }
  return out;
}

inline std::map<Tuple, SingularSeries> table_of(const Json& j, const LabelledTree& lt, SeriesWindow w) {
  std::map<Tuple, SingularSeries> out;
  const std::set<Variable> vars = tree_variables(lt.tree);
  for (const auto& row : j) {
    Tuple t;
    const auto inputs = row.at("inputs");
    if (inputs.size() != lt.leaves.size()) throw FormatError("entry needs one input per leaf: " + inputs.dump());
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      t.push_back(inputs[k].is_number_unsigned() ? inputs[k].get<std::size_t>()
                                                 : basis_of(*lt.leaves[k], inputs[k].get<std::string>()));
    }
    SingularSeries s = series_of(row, lt.root->ref(), lt.root.get(), w, vars);
    auto [it, fresh] = out.emplace(t, s);
    if (!fresh) it->second = it->second + s;
  }
  return out;
}

inline LabelledTree shape_of(const Json& j) {
  LabelledTree lt;
  try {
    lt.tree = parse_tree(j.at("tree").get<std::string>());
  } catch (const TreeParseError& e) {
    throw FormatError(e.what());
  }
  for (const auto& l : j.at("leaves")) lt.leaves.push_back(module_of(l));
  lt.root = module_of(j.at("root"));
  lt.leaf_invariant = j.value("leaf_invariant", std::vector<bool>(lt.leaves.size(), true));
  lt.root_invariant = j.value("root_invariant", true);
  return lt;
}

/// Builds and verifies the multimap described by `j`.
inline MultiMap multimap_of(const Json& j, MultiConfig cfg = {}) {
  const LabelledTree lt = shape_of(j);
  auto table = table_of(j.at("table"), lt, cfg.window);
  std::vector<Representative> reps;
  if (j.contains("representatives")) {
    for (const auto& r : j.at("representatives")) {
      reps.push_back({r.at("label").get<std::string>(), r.at("order").get<ExpansionOrder>(),
                      table_of(r.at("table"), lt, cfg.window)});
    }
  }
  return make_multimap(lt, std::move(table), cfg, std::move(reps));
}

// ---------------------------------------------------------------------------
// Algebras: {"example": "q-u", "degree": d} or {"name", "basis", "derivations",
// "nilpotent", "table", "unit", "f2"}

inline CommDiffAlgebra finite_algebra_of(const Json& j) {
  const auto basis = j.at("basis").get<std::vector<std::string>>();
  const std::size_t n = basis.size();
  const std::string name = j.value("name", std::string("B"));
  std::vector<Matrix> action{identity_matrix(n)};
  if (j.contains("derivations")) {
    for (const auto& m : j.at("derivations")) action.push_back(matrix_of(m, n));
  }
  const ModulePtr b = std::make_shared<const HModule>(name, basis, std::move(action), j.value("nilpotent", true));
  std::vector<std::vector<Vec>> table;
  const Json& t = j.at("table");
  if (!t.is_array() || t.size() != n) throw FormatError("multiplication table must have " + std::to_string(n) + " rows");
  for (const auto& row : t) {
    if (!row.is_array() || row.size() != n) throw FormatError("multiplication table row has the wrong size");
    std::vector<Vec> r;
    for (const auto& cell : row) {
      Vec v;
      for (const auto& x : cell) v.push_back(rational_of(x));
      r.push_back(std::move(v));
    }
    table.push_back(std::move(r));
  }
  Vec unit;
  for (const auto& x : j.at("unit")) unit.push_back(rational_of(x));
  return CommDiffAlgebra::finite(name, b, std::move(table), std::move(unit));
}

inline AlgebraStructure example_algebra(const std::string& name, std::size_t degree, MultiConfig cfg) {
  if (name == "q-u") return AlgebraStructure(CommDiffAlgebra::polynomial(degree), cfg);
  if (name == "q") return AlgebraStructure(CommDiffAlgebra::rationals(), cfg);
  if (name == "q-u-corrupted") {
    const auto a = CommDiffAlgebra::polynomial(degree);
    return AlgebraStructure(a, cfg, corrupted_f2(a, cfg));
  }
  throw FormatError("unknown example algebra '" + name + "' (q-u, q, q-u-corrupted)");
}

/// A given f2 table is used for every pair of weights: a finite algebra has
/// one module for all weights.
inline AlgebraStructure algebra_of(const Json& j, std::size_t default_degree, MultiConfig cfg) {
  if (j.contains("example")) return example_algebra(j.at("example").get<std::string>(), j.value("degree", default_degree), cfg);
  CommDiffAlgebra alg = finite_algebra_of(j);
  if (!j.contains("f2")) return AlgebraStructure(std::move(alg), cfg);
  const ModulePtr b = alg.module(1);
  const LabelledTree lt{Tree::corolla(2), {b, b}, b, {true, true}, true};
  const auto table = table_of(j.at("f2"), lt, cfg.window);
  const MultiMap f2 = make_multimap(lt, table, cfg);
  return AlgebraStructure(std::move(alg), cfg, [f2](std::size_t, std::size_t) { return f2; });
}

inline Json algebra_json(const CommDiffAlgebra& a, const std::optional<MultiMap>& f2 = std::nullopt) {
  const ModulePtr b = a.module(1);
  const std::size_t n = b->rank();
  Json derivations = Json::array();
  for (std::size_t i = 1; i <= b->bound(); ++i) derivations.push_back(matrix_json(b->action(i)));
  Json table = Json::array();
  for (std::size_t x = 0; x < n; ++x) {
    Json row = Json::array();
    for (std::size_t y = 0; y < n; ++y) {
      Json cell = Json::array();
      for (const auto& c : a.product(1, x, 1, y)) cell.push_back(rational_json(c));
      row.push_back(cell);
    }
    table.push_back(row);
  }
  Json unit = Json::array();
  for (const auto& c : a.unit()) unit.push_back(rational_json(c));
  Json out{{"name", a.name()}, {"basis", b->basis()}, {"derivations", derivations}, {"nilpotent", b->nilpotent_beyond_bound()},
           {"table", table}, {"unit", unit}};
  if (f2) out["f2"] = table_json(f2->shape(), f2->table());
  return out;
}

}  // namespace rmc::io
