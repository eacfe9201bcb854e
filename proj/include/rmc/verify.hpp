#pragma once

// The invariant suites run by `rmc verify` and by the acceptance binary.
// Every check records how many cases it ran and the first failure.

#include <chrono>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "rmc/algebra.hpp"
#include "rmc/hopf.hpp"
#include "rmc/multimap.hpp"
#include "rmc/series.hpp"
#include "rmc/tree.hpp"

namespace rmc::verify {

struct Check {
  std::string name;
  std::size_t cases = 0;
  bool passed = true;
  std::string witness;
  std::string reproduce;  // a focused command showing the failure

  // Counts a case; keeps the first failure.
  void expect(bool ok, const std::function<std::string()>& witness_of) {
    ++cases;
    if (ok || !passed) return;
    passed = false;
    witness = witness_of();
  }
  void fail(std::string w) {
    ++cases;
    if (!passed) return;
    passed = false;
    witness = std::move(w);
  }
};

struct SuiteReport {
  std::string suite;
  std::vector<Check> checks;
  double seconds = 0;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
  }
};

struct Options {
  unsigned seed = 7;
  std::size_t max_leaves = 4;  // algebra suite
  std::size_t degree = 4;      // Q[u] degree bound per input
  MultiConfig config;
};

// ---------------------------------------------------------------------------
// Random inputs

/// Random tree of bounded depth; may contain empty and unary nodes.
inline Tree random_tree(std::mt19937& rng, int depth) {
  std::uniform_int_distribution<int> arity(0, 3);
  if (depth == 0 || rng() % 3 == 0) return Tree::leaf();
  std::vector<Tree> kids;
  const int k = arity(rng);
  for (int i = 0; i < k; ++i) kids.push_back(random_tree(rng, depth - 1));
  return Tree::node(std::move(kids));
}

inline Tree random_tree_with_leaves(std::mt19937& rng, int depth) {
  for (;;) {
    auto t = random_tree(rng, depth);
    if (t.leaf_count() > 0) return t;
  }
}

namespace detail {

using Vec = std::vector<Rational>;

inline Vec basis_vector(std::size_t n, std::size_t b) {
  Vec v(n, Rational(0));
  v[b] = 1;
  return v;
}

inline Vec act(const HModule& m, std::size_t i, const Vec& v) {
  Vec out(m.rank(), Rational(0));
  if (!m.knows(i)) return out;
  const Matrix& a = m.action(i);
  for (std::size_t c = 0; c < v.size(); ++c) {
    if (v[c] == 0) continue;
    for (std::size_t r = 0; r < m.rank(); ++r) out[r] += a[r][c] * v[c];
  }
  return out;
}

// sum_k r_k D(k) commutes with the action, so it is H-linear
inline Vec apply_endo(const HModule& m, const Vec& r, const Vec& v) {
  Vec out(m.rank(), Rational(0));
  for (std::size_t k = 0; k < r.size(); ++k) {
    if (r[k] == 0) continue;
    const Vec w = act(m, k, v);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += r[k] * w[j];
  }
  return out;
}

inline Vec poly_product(const Vec& a, const Vec& b, std::size_t out_rank) {
  Vec out(out_rank, Rational(0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (a[i] == 0 || b[j] == 0) continue;
      if (i + j >= out_rank) throw std::logic_error("product leaves the target degree");
      out[i + j] += a[i] * b[j];
    }
  return out;
}

inline Vec random_endo(std::mt19937& rng, std::size_t len) {
  std::uniform_int_distribution<int> c(-3, 3);
  Vec r(len);
  for (auto& x : r) x = c(rng);
  if (r[0] == 0) r[0] = 1;
  return r;
}

}  // namespace detail

/// A pole-free multimap over the n-corolla (the unary root for n = 1) with
/// leaves Q[u]<=d_j and output Q[u]<=sum d_j:
///   g(a_1..a_n)(x) = sum_i prod x_j^(i_j) T(prod_j T_j D(i_j) a_j)
/// with T, T_j random polynomials in D. Over <> (n = 0) it is c * u^0.
/// Every such map is invariant at all leaves and at the root.
inline MultiMap random_invariant(std::mt19937& rng, const std::vector<std::size_t>& degrees, MultiConfig cfg = {}) {
  using namespace detail;
  const std::size_t n = degrees.size();
  std::size_t total = 0;
  std::vector<ModulePtr> leaves;
  for (auto d : degrees) {
    total += d;
    leaves.push_back(polynomials_up_to(d));
  }
  const ModulePtr out = polynomials_up_to(total);
  const Tree tree = n == 0 ? Tree::empty() : Tree::corolla(n);
  LabelledTree lt{tree, leaves, out, std::vector<bool>(n, true), true};
  const std::set<Variable> vars = tree_variables(tree);
  std::map<Tuple, SingularSeries> table;
  if (n == 0) {
    SingularSeries s(vars, out->ref(), cfg.window);
    s.add_term(static_cast<int>(rng() % 5) + 1, {}, {}, 0);
    table.emplace(Tuple{}, std::move(s));
    return make_multimap(lt, table, cfg);
  }
  const Vec outer = random_endo(rng, out->rank());
  std::vector<Vec> inner;
  for (std::size_t j = 0; j < n; ++j) inner.push_back(random_endo(rng, leaves[j]->rank()));
  for (const auto& t : all_tuples(lt.leaves)) {
    SingularSeries s(vars, out->ref(), cfg.window);
    Tuple idx(n, 0);
    for (;;) {
      Vec prod = basis_vector(out->rank(), 0);
      Monomial mono;
      for (std::size_t j = 0; j < n; ++j) {
        const Vec factor = apply_endo(*leaves[j], inner[j], act(*leaves[j], idx[j], basis_vector(leaves[j]->rank(), t[j])));
        prod = poly_product(prod, factor, out->rank());
        mono.mul(edge_variable({j}), static_cast<int>(idx[j]));
      }
      const Vec value = apply_endo(*out, outer, prod);
      for (std::size_t b = 0; b < out->rank(); ++b) s.add_term(value[b], mono, {}, b);
      std::size_t j = 0;
      while (j < n && ++idx[j] > t[j]) idx[j++] = 0;
      if (j == n) break;
    }
    table.emplace(t, std::move(s));
  }
  return make_multimap(lt, table, cfg);
}

// ---------------------------------------------------------------------------
// Suites

namespace detail {

inline SuiteReport timed(std::string name, const std::function<void(std::vector<Check>&)>& body) {
  SuiteReport r{std::move(name), {}, 0};
  const auto start = std::chrono::steady_clock::now();
  body(r.checks);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

inline std::string describe(const std::exception& e) { return std::string("exception: ") + e.what(); }

// Every bracket string of the right length, kept when it parses to a binary
// tree with n leaves. A binary tree with n leaves has n - 1 vertices.
inline std::set<std::string> brute_force_binary(std::size_t n) {
  std::set<std::string> out;
  const std::size_t len = n + 2 * (n - 1);
  std::string s;
  std::function<void(int)> grow = [&](int depth) {
    if (s.size() == len) {
      if (depth != 0) return;
      try {
        const Tree t = parse_tree(s);
        if (t.leaf_count() == n && t.is_binary()) out.insert(render_tree(t));
      } catch (const TreeParseError&) {
      }
      return;
    }
    const std::size_t left = len - s.size();
    if (static_cast<std::size_t>(depth) > left) return;
    for (char c : {'(', ')', '*'}) {
      if (c == ')' && depth == 0) continue;
      if (c != ')' && depth == 0 && !s.empty()) continue;  // one root only
      s.push_back(c);
      grow(depth + (c == '(') - (c == ')'));
      s.pop_back();
    }
  };
  grow(0);
  return out;
}

}  // namespace detail

inline SuiteReport trees_suite(const Options& opt) {
  return detail::timed("trees", [&](std::vector<Check>& out) {
    Check counts{"binary tree counts 1,1,2,5,14 against brute force"};
    const std::size_t catalan[] = {1, 1, 2, 5, 14};
    for (std::size_t n = 1; n <= 5; ++n) {
      std::set<std::string> ours;
      for (const auto& t : reduced_trees(n, true)) ours.insert(render_tree(t));
      const auto oracle = detail::brute_force_binary(n);
      counts.expect(ours == oracle && ours.size() == catalan[n - 1], [&] {
        return "n=" + std::to_string(n) + ": enumerated " + std::to_string(ours.size()) + ", brute force " +
               std::to_string(oracle.size()) + ", expected " + std::to_string(catalan[n - 1]);
      });
    }
    counts.reproduce = "rmc trees enumerate --leaves 5 --binary";
    out.push_back(counts);

    std::mt19937 rng(opt.seed);
    Check law{"grafting leaf-count law on 1000 pairs"};
    for (int k = 0; k < 1000; ++k) {
      const Tree q = random_tree_with_leaves(rng, 4);
      const Tree p = random_tree(rng, 3);
      const std::size_t i = std::uniform_int_distribution<std::size_t>(1, q.leaf_count())(rng);
      const Tree g = graft(q, i, p);
      law.expect(g.leaf_count() == q.leaf_count() + p.leaf_count() - 1, [&] {
        return render_tree(q) + " o" + std::to_string(i) + " " + render_tree(p) + " = " + render_tree(g);
      });
    }
    out.push_back(law);

    Check assoc{"grafting associativity on 500 triples"};
    for (int k = 0; k < 500; ++k) {
      const Tree r = random_tree_with_leaves(rng, 3);
      const Tree q = random_tree_with_leaves(rng, 3);
      const Tree p = random_tree(rng, 3);
      const std::size_t j = std::uniform_int_distribution<std::size_t>(1, r.leaf_count())(rng);
      const std::size_t i = std::uniform_int_distribution<std::size_t>(1, q.leaf_count())(rng);
      // leaf i of q is leaf j-1+i of r o_j q
      const Tree a = graft(graft(r, j, q), j - 1 + i, p);
      const Tree b = graft(r, j, graft(q, i, p));
      assoc.expect(a == b, [&] {
        return render_tree(r) + " o" + std::to_string(j) + " " + render_tree(q) + " o" + std::to_string(i) + " " +
               render_tree(p) + ": " + render_tree(a) + " vs " + render_tree(b);
      });
    }
    out.push_back(assoc);

    Check text{"text round trip on 500 trees"};
    for (int k = 0; k < 500; ++k) {
      const Tree t = random_tree(rng, 4);
      text.expect(parse_tree(render_tree(t)) == t, [&] { return render_tree(t); });
    }
    out.push_back(text);
  });
}

inline SuiteReport hopf_suite(const Options&) {
  return detail::timed("hopf", [&](std::vector<Check>& out) {
    const HopfReport report = hopf_axiom_report(6);
    for (const auto& law : report.laws) {
      Check c{"H " + law.law + " (degree <= 6)"};
      c.expect(law.passed, [&] { return law.witness; });
      c.reproduce = "rmc hopf check --max-degree 6";
      out.push_back(c);
    }

    auto D = [](std::size_t i) { return HElem::generator(i); };
    Check module_law{"K module law, D(a)D(b) on x^j, a,b <= 6, j in [-8,12]"};
    for (std::size_t a = 0; a <= 6; ++a)
      for (std::size_t b = 0; b <= 6; ++b)
        for (int j = -8; j <= 12; ++j) {
          const KElem k = KElem::monomial(j);
          const KElem lhs = act_on_k(h_mul(D(a), D(b)), k);
          const KElem rhs = act_on_k(D(a), act_on_k(D(b), k));
          module_law.expect(lhs.terms() == rhs.terms(), [&] {
            return "D" + std::to_string(a) + "*D" + std::to_string(b) + " on x^" + std::to_string(j) + ": " +
                   format_k(lhs) + " vs " + format_k(rhs);
          });
        }
    out.push_back(module_law);

    // products reach exponents down to -16, so they are formed in a deeper window
    const KWindow deep{28, 12};
    Check leibniz{"K Leibniz law, D(i) on x^j x^k, i <= 6, j,k in [-8,12]"};
    for (int j = -8; j <= 12; ++j)
      for (int k = -8; k <= 12; ++k) {
        const KElem a = KElem::monomial(j, 1, deep), b = KElem::monomial(k, 1, deep);
        for (std::size_t i = 0; i <= 6; ++i) {
          KElem rhs(deep);
          for (std::size_t p = 0; p <= i; ++p) rhs = rhs + k_mul(act_on_k(D(p), a), act_on_k(D(i - p), b));
          const KElem lhs = act_on_k(D(i), k_mul(a, b));
          leibniz.expect(agree_on_reliable(lhs, rhs), [&] {
            return "D" + std::to_string(i) + "(x^" + std::to_string(j) + " x^" + std::to_string(k) + "): " +
                   format_k(lhs) + " vs " + format_k(rhs);
          });
        }
      }
    out.push_back(leibniz);

    Check invol{"antipode involution on H (degree <= 6) and on K ([-8,12])"};
    for (std::size_t i = 0; i <= 6; ++i) {
      invol.expect(antipode_h(antipode_h(D(i))) == D(i), [&] { return "S(S(D" + std::to_string(i) + "))"; });
    }
    for (int j = -8; j <= 12; ++j) {
      const KElem k = KElem::monomial(j, frac(j + 20, 3));
      invol.expect(antipode_k(antipode_k(k)) == k, [&] { return "S(S(x^" + std::to_string(j) + "))"; });
    }
    out.push_back(invol);
  });
}

namespace detail {

inline SingularSeries random_series(std::mt19937& rng, const std::set<Variable>& vars, ModuleRef m, bool with_poles) {
  std::vector<Variable> names(vars.begin(), vars.end());
  std::uniform_int_distribution<int> coef(-4, 4), ex(0, 2), pick(0, static_cast<int>(names.size()) - 1), k(1, 2);
  SingularSeries s(vars, m);
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

inline std::string show(const std::optional<Discrepancy>& w) { return w ? format_term(w->key, w->coeff) : "none"; }

}  // namespace detail

inline SuiteReport series_suite(const Options& opt) {
  return detail::timed("series", [&](std::vector<Check>& out) {
    const std::set<Variable> xy{"x", "y"};
    SingularSeries pole = SingularSeries::scalar(xy);
    pole.add_term(1, {}, {{parse_form("x-y"), 1}}, 0);
    SingularSeries x_minus_y = SingularSeries::scalar(xy);
    x_minus_y.add_term(1, monomial({{"x", 1}}), {}, 0);
    x_minus_y.add_term(-1, monomial({{"y", 1}}), {}, 0);
    const SingularSeries one = SingularSeries::constant(1, xy);
    const SingularSeries e1 = expand(pole, {"x", "y"});
    const SingularSeries e2 = expand(pole, {"y", "x"});

    Check inverse{"(x-y) times either expansion of (x-y)^-1 is 1"};
    for (const auto* e : {&e1, &e2}) {
      const auto w = nonzero_witness(multiply(x_minus_y, *e) - one);
      inverse.expect(!w, [&] { return "residue " + detail::show(w); });
    }
    inverse.reproduce = "rmc series expand --series \"(x-y)^-1\" --order x,y";
    out.push_back(inverse);

    Check delta{"formal delta e1 - e2 is nonzero and killed by (x-y)"};
    const SingularSeries d = e1 - e2;
    delta.expect(nonzero_witness(d).has_value(), [] { return std::string("the two expansions coincide"); });
    const auto killed = nonzero_witness(multiply(x_minus_y, d));
    delta.expect(!killed, [&] { return "(x-y) delta has " + detail::show(killed); });
    out.push_back(delta);

    Check mult{"expand is multiplicative against pole-free factors on 200 cases"};
    std::mt19937 rng(opt.seed);
    const std::set<Variable> vars{"x", "y", "z"};
    const ModuleRef mod{"B", 2};
    const std::vector<ExpansionOrder> orders = {{"x", "y", "z"}, {"z", "y", "x"}, {"y", "x", "z"}};
    for (int n = 0; n < 200; ++n) {
      const SingularSeries s = detail::random_series(rng, vars, mod, true);
      const SingularSeries t = detail::random_series(rng, vars, ModuleRef::scalars(), false);
      const auto& o = orders[static_cast<std::size_t>(n) % orders.size()];
      const auto w = difference_witness(expand(multiply(t, s), o), multiply(t, expand(s, o)));
      mult.expect(!w, [&] { return "case " + std::to_string(n) + ": s = " + format_series(s) + ", t = " + format_series(t); });
    }
    out.push_back(mult);
  });
}

namespace detail {

inline std::vector<std::size_t> random_degrees(std::mt19937& rng, std::size_t n, std::size_t slot = 0, std::size_t forced = 0) {
  std::vector<std::size_t> d(n);
  for (auto& x : d) x = 1 + rng() % 2;
  if (forced) d[slot] = forced;
  return d;
}

inline std::size_t output_degree(const MultiMap& m) { return m.shape().root->rank() - 1; }

// Reduced refinements of t, and t under a fresh unary root.
inline std::vector<Tree> refinement_targets(const Tree& t) {
  std::vector<Tree> out = enumerate_refining_trees(t);
  out.push_back(Tree::node({t}));
  return out;
}

inline void guarded(Check& c, const std::string& where, const std::function<std::optional<std::string>()>& body) {
  try {
    const auto w = body();
    c.expect(!w, [&] { return where + ": " + *w; });
  } catch (const std::exception& e) {
    c.fail(where + ": " + describe(e));
  }
}

}  // namespace detail

inline SuiteReport multi_suite(const Options& opt) {
  return detail::timed("multi", [&](std::vector<Check>& out) {
    std::mt19937 rng(opt.seed);
    const MultiConfig cfg = opt.config;

    Check unit{"identity laws of composition"};
    for (std::size_t n = 1; n <= 3; ++n) {
      const MultiMap f = random_invariant(rng, detail::random_degrees(rng, n), cfg);
      detail::guarded(unit, "1 o f over " + render_tree(f.tree()),
                      [&] { return multimap_difference(compose(identity(f.shape().root, cfg), 1, f), f); });
      for (std::size_t i = 1; i <= n; ++i) {
        detail::guarded(unit, "f o" + std::to_string(i) + " 1", [&] {
          return multimap_difference(compose(f, i, identity(f.shape().leaves[i - 1], cfg)), f);
        });
      }
    }
    out.push_back(unit);

    Check assoc{"associativity on 100 random pole-free triples"};
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t nh = 2 + rng() % 2, ng = 1 + rng() % 2, nf = 1 + rng() % 2;
      const MultiMap f = random_invariant(rng, detail::random_degrees(rng, nf), cfg);
      if (trial % 2 == 0) {
        const std::size_t i = 1 + rng() % nh, j = 1 + rng() % ng;
        const MultiMap g = random_invariant(rng, detail::random_degrees(rng, ng, j - 1, detail::output_degree(f)), cfg);
        const MultiMap h = random_invariant(rng, detail::random_degrees(rng, nh, i - 1, detail::output_degree(g)), cfg);
        detail::guarded(assoc, "nested, i=" + std::to_string(i) + " j=" + std::to_string(j), [&]() -> std::optional<std::string> {
          const auto r = associativity_check(h, g, f, i, j, true);
          return r ? std::nullopt : std::optional<std::string>(r.witness);
        });
      } else {
        const MultiMap g = random_invariant(rng, detail::random_degrees(rng, ng), cfg);
        auto hd = detail::random_degrees(rng, nh, 0, detail::output_degree(g));
        hd[nh - 1] = detail::output_degree(f);
        const MultiMap h = random_invariant(rng, hd, cfg);
        detail::guarded(assoc, "parallel, i=1 j=" + std::to_string(nh), [&]() -> std::optional<std::string> {
          const auto r = associativity_check(h, g, f, 1, nh, false);
          return r ? std::nullopt : std::optional<std::string>(r.witness);
        });
      }
    }
    out.push_back(assoc);

    // one random map per corolla; every tree is reached by refining it
    std::map<std::size_t, MultiMap> corolla_maps;
    for (std::size_t n = 2; n <= 4; ++n) corolla_maps.emplace(n, random_invariant(rng, std::vector<std::size_t>(n, 1), cfg));

    Check functorial{"refinement functoriality over all tree pairs with <= 4 leaves"};
    for (const auto& [n, m] : corolla_maps) {
      for (const Tree& p : detail::refinement_targets(m.tree())) {
        const MultiMap mp = refine(m, p);
        for (const Tree& q : detail::refinement_targets(p)) {
          if (q == p) continue;
          detail::guarded(functorial, render_tree(m.tree()) + " -> " + render_tree(p) + " -> " + render_tree(q),
                          [&] { return multimap_difference(refine(mp, q), refine(m, q)); });
        }
      }
    }
    out.push_back(functorial);

    Check natural{"refinement naturality over all graftings with <= 4 leaves"};
    for (std::size_t ng = 2; ng <= 3; ++ng) {
      for (std::size_t nf = 2; ng + nf - 1 <= 4; ++nf) {
        const MultiMap f = random_invariant(rng, std::vector<std::size_t>(nf, 1), cfg);
        for (std::size_t i = 1; i <= ng; ++i) {
          const MultiMap g = random_invariant(rng, detail::random_degrees(rng, ng, i - 1, nf), cfg);
          const MultiMap gf = compose(g, i, f);
          for (const Tree& qg : enumerate_refining_trees(g.tree())) {
            for (const Tree& qf : enumerate_refining_trees(f.tree())) {
              detail::guarded(natural, render_tree(qg) + " o" + std::to_string(i) + " " + render_tree(qf), [&] {
                return multimap_difference(refine(gf, graft(qg, i, qf)), compose(refine(g, qg), i, refine(f, qf)));
              });
            }
          }
        }
      }
    }
    out.push_back(natural);

    Check null{"null composition factors through the vacuum on 100 cases"};
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 1 + rng() % 3;
      const std::size_t k = 1 + rng() % n;
      auto deg = detail::random_degrees(rng, n);
      deg[k - 1] = 0;
      const MultiMap f = random_invariant(rng, deg, cfg);
      const MultiMap a = random_invariant(rng, {}, cfg);
      const Variable removed = edge_variable(leaf_paths(f.tree())[k - 1]);
      detail::guarded(null, render_tree(f.tree()) + " o" + std::to_string(k) + " <>", [&]() -> std::optional<std::string> {
        // invariance at a leaf of the trivial module forbids any dependence on its variable
        for (const auto& [t, s] : f.table()) {
          for (const auto& [key, c] : s.terms()) {
            if (key.mono.exponent(removed) != 0) return "f depends on " + removed;
          }
        }
        const MultiMap r = compose(f, k, a);
        if (r.tree().leaf_count() != n - 1) return "wrong leaf count " + render_tree(r.tree());
        for (const auto& [t, s] : r.table()) {
          if (!s.pole_free()) return "pole left at " + tuple_label(r.shape(), t);
          if (s.variables() != tree_variables(r.tree())) return "stray variables at " + tuple_label(r.shape(), t);
        }
        if (auto w = full_invariance_filter(r); !w) return "composite not invariant: " + w.witness;
        return std::nullopt;
      });
    }
    out.push_back(null);
  });
}

inline SuiteReport algebra_suite(const Options& opt) {
  return detail::timed("algebra", [&](std::vector<Check>& out) {
    const CommDiffAlgebra qu = CommDiffAlgebra::polynomial(opt.degree);
    const AlgebraStructure alg(qu, opt.config);

    Check f2{"f2(u,u) = u^2 + u x1 + u x2 + x1 x2"};
    detail::guarded(f2, "f2", [&]() -> std::optional<std::string> {
      const MultiMap m = alg.f2();
      const SingularSeries& s = m.at({1, 1});
      SingularSeries want(tree_variables(Tree::corolla(2)), m.shape().root->ref(), s.window());
      want.add_term(1, {}, {}, 2);
      want.add_term(1, monomial({{"x1", 1}}), {}, 1);
      want.add_term(1, monomial({{"x2", 1}}), {}, 1);
      want.add_term(1, monomial({{"x1", 1}, {"x2", 1}}), {}, 0);
      if (auto w = difference_witness(s, want)) return "got " + format_series(s, m.shape().root->basis());
      return std::nullopt;
    });
    f2.reproduce = "rmc algebra demo --example q-u --max-leaves 2";
    out.push_back(f2);

    const AlgebraReport report = check_algebra(alg, opt.max_leaves);
    for (const std::string axiom : {"composition", "unit", "refinement", "commutativity"}) {
      Check c{"check_algebra " + axiom + " for all trees with <= " + std::to_string(opt.max_leaves) + " leaves"};
      for (const auto& e : report.entries) {
        if (e.axiom != axiom) continue;
        c.expect(e.passed, [&] { return e.tree + " " + e.detail + ": " + e.witness; });
      }
      if (c.cases == 0) c.fail("no " + axiom + " cases were generated");
      c.reproduce = "rmc algebra demo --example q-u --max-leaves " + std::to_string(opt.max_leaves);
      out.push_back(c);
    }

    Check control{"corrupted f2 fails with a witness"};
    {
      const AlgebraStructure bad(qu, opt.config, corrupted_f2(qu, opt.config));
      const AlgebraReport r = check_algebra(bad, std::min<std::size_t>(opt.max_leaves, 3));
      const auto it = std::find_if(r.entries.begin(), r.entries.end(), [](const AxiomEntry& e) { return !e.passed; });
      control.expect(it != r.entries.end() && !it->witness.empty(),
                     [] { return std::string("the corrupted structure passed every axiom"); });
    }
    out.push_back(control);

    Check ope{"OPE of u with u: regular at x1 = x2 with value (u + x2)^2"};
    detail::guarded(ope, "ope", [&]() -> std::optional<std::string> {
      const auto terms = ope_extract(alg, 1, 1);
      for (const auto& t : terms) {
        if (t.pole_order != 0) return "pole of order " + std::to_string(t.pole_order);
      }
      if (terms.empty()) return "no terms";
      const SingularSeries at = substitute(terms.back().coefficient, {{"w", LinearForm{}}}, std::set<Variable>{"x2"});
      SingularSeries want({"x2"}, at.module(), at.window());
      want.add_term(1, {}, {}, 2);
      want.add_term(2, monomial({{"x2", 1}}), {}, 1);
      want.add_term(1, monomial({{"x2", 2}}), {}, 0);
      if (difference_witness(at, want)) return "got " + format_series(at);
      return std::nullopt;
    });
    ope.reproduce = "rmc algebra ope --a u --b u";
    out.push_back(ope);
  });
}

/// The two-cherry tree and its pullback membership.
inline SuiteReport ord_suite(const Options& opt) {
  return detail::timed("ord", [&](std::vector<Check>& out) {
    const Tree dbl = parse_tree("((**)(**))");
    const auto shapes = ord_shapes(dbl);
    Check count{"the double tree has exactly two Ord shapes"};
    count.expect(shapes.size() == 2, [&] { return std::to_string(shapes.size()) + " shapes"; });
    count.reproduce = "rmc trees extensions \"((**)(**))\"";
    out.push_back(count);

    // a pole between leaf 1 (under the first cherry) and leaf 3 (under the second)
    const auto vars = tree_variables(dbl);
    SingularSeries s = SingularSeries::scalar(vars, opt.config.window);
    s.add_term(1, {}, {{parse_form("x1+x1_1-x2-x2_1"), 1}}, 0);
    s.add_term(2, monomial({{"x1", 1}}), {}, 0);
    s.add_term(2, monomial({{"x1_2", 1}}), {}, 0);
    const ModulePtr r = scalars_module();
    const LabelledTree lt{dbl, std::vector<ModulePtr>(4, r), r, std::vector<bool>(4, false), false};
    const Tuple zero(4, 0);
    // Both extensions start at the root, so x1 precedes x2 in both induced
    // orders. The failing candidate hands the second region the expansion
    // with x2 dominant instead.
    const ExpansionOrder x2_first = {"x2", "x1", "x2_1", "x2_2", "x1_1", "x1_2"};
    std::vector<Representative> good, bad;
    for (std::size_t k = 0; k < shapes.size(); ++k) {
      const std::string label = "t" + std::to_string(k + 1);
      good.push_back({label, shapes[k].induced_order, {{zero, expand(s, shapes[k].induced_order)}}});
      bad.push_back({label, shapes[k].induced_order, {{zero, expand(s, k == 0 ? shapes[k].induced_order : x2_first)}}});
    }
    auto expansions_agree = [&](const std::vector<Representative>& reps) {
      return reps.size() == 2 && !difference_witness(reps[0].table.at(zero), reps[1].table.at(zero));
    };
    auto accepted = [&](const std::vector<Representative>& reps, std::string& why) {
      try {
        make_multimap(lt, {{zero, s}}, opt.config, reps);
        return true;
      } catch (const MembershipError& e) {
        why = e.what();
        return false;
      }
    };

    Check pass{"a candidate whose two expansions agree passes membership"};
    std::string why;
    pass.expect(expansions_agree(good), [] { return std::string("expansions disagree"); });
    pass.expect(accepted(good, why), [&] { return why; });
    out.push_back(pass);

    Check fail{"a candidate whose two expansions disagree fails with a witness"};
    why.clear();
    fail.expect(!expansions_agree(bad), [] { return std::string("expansions agree"); });
    const bool took = accepted(bad, why);
    fail.expect(!took && !why.empty(), [] { return std::string("accepted"); });
    out.push_back(fail);
  });
}

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"trees", "hopf", "series", "multi", "algebra", "ord"};
  return names;
}

inline SuiteReport run_suite(const std::string& name, const Options& opt) {
  if (name == "trees") return trees_suite(opt);
  if (name == "hopf") return hopf_suite(opt);
  if (name == "series") return series_suite(opt);
  if (name == "multi") return multi_suite(opt);
  if (name == "algebra") return algebra_suite(opt);
  if (name == "ord") return ord_suite(opt);
  throw std::invalid_argument("unknown suite '" + name + "'");
}

}  // namespace rmc::verify
