#pragma once

// Algebras in the relaxed multicategory: the family {f_p} generated by a
// binary map f2 and a unit, the axiom checker, and OPE extraction.
//
// A commutative algebra may be infinite-dimensional (Q[u]); it is presented
// by weight. Inputs of weight w live in module(w) and a product of weights
// w1, w2 lands in module(w1 + w2). A finite algebra uses one module for
// every weight.

#include <algorithm>
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rmc/multimap.hpp"

namespace rmc {

using Vec = std::vector<Rational>;

class AlgebraError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CommDiffAlgebra {
 public:
  using ModuleFn = std::function<ModulePtr(std::size_t)>;
  using ProductFn = std::function<Vec(std::size_t, std::size_t, std::size_t, std::size_t)>;

  CommDiffAlgebra(std::string name, ModuleFn module, ProductFn product, Vec unit)
      : name_(std::move(name)), module_(std::move(module)), product_(std::move(product)), unit_(std::move(unit)) {
    validate();
  }

  /// A finite algebra: table[a][b] is the coordinate vector of e_a e_b.
  static CommDiffAlgebra finite(std::string name, ModulePtr b, std::vector<std::vector<Vec>> table, Vec unit) {
    const std::size_t n = b->rank();
    if (table.size() != n) throw AlgebraError("multiplication table has wrong size");
    for (const auto& row : table) {
      if (row.size() != n) throw AlgebraError("multiplication table has wrong size");
      for (const auto& v : row) {
        if (v.size() != n) throw AlgebraError("multiplication table has wrong size");
      }
    }
    auto shared = std::make_shared<const std::vector<std::vector<Vec>>>(std::move(table));
    return CommDiffAlgebra(
        std::move(name), [b](std::size_t) { return b; },
        [shared](std::size_t, std::size_t x, std::size_t, std::size_t y) { return (*shared)[x][y]; }, std::move(unit));
  }

  /// Q[u] with Hasse derivatives; inputs of weight w have degree <= w * d.
  static CommDiffAlgebra polynomial(std::size_t d) {
    return CommDiffAlgebra(
        "Q[u]", [d](std::size_t w) { return polynomials_up_to(w * d); },
        [d](std::size_t w1, std::size_t x, std::size_t w2, std::size_t y) {
          Vec out((w1 + w2) * d + 1, Rational(0));
          out[x + y] = 1;
          return out;
        },
        Vec{Rational(1)});
  }

  /// Rationals with the trivial derivation.
  static CommDiffAlgebra rationals() {
    return finite("Q", scalars_module(), {{Vec{Rational(1)}}}, Vec{Rational(1)});
  }

  const std::string& name() const noexcept { return name_; }
  ModulePtr module(std::size_t weight) const { return module_(weight); }
  Vec product(std::size_t w1, std::size_t a, std::size_t w2, std::size_t b) const { return product_(w1, a, w2, b); }
  /// The product of coordinate vectors.
  Vec product(std::size_t w1, const Vec& a, std::size_t w2, const Vec& b) const {
    Vec out(module(w1 + w2)->rank(), Rational(0));
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] == 0) continue;
      for (std::size_t j = 0; j < b.size(); ++j) {
        if (b[j] == 0) continue;
        const Vec p = product(w1, i, w2, j);
        for (std::size_t k = 0; k < out.size(); ++k) out[k] += a[i] * b[j] * p[k];
      }
    }
    return out;
  }
  const Vec& unit() const noexcept { return unit_; }

 private:
  static Vec act(const HModule& m, std::size_t i, const Vec& v) {
    Vec out(m.rank(), Rational(0));
    if (!m.knows(i)) throw AlgebraError("derivation degree beyond the declared bound of " + m.id());
    const Matrix& a = m.action(i);
    for (std::size_t c = 0; c < v.size(); ++c) {
      if (v[c] == 0) continue;
      for (std::size_t r = 0; r < m.rank(); ++r) out[r] += a[r][c] * v[c];
    }
    return out;
  }

  static Vec basis(std::size_t n, std::size_t i) {
    Vec v(n, Rational(0));
    v[i] = 1;
    return v;
  }

  /// Commutativity, associativity and the unit on weight-1 inputs, and the
  /// divided-power Leibniz rule up to the degree bound.
  void validate() const {
    const ModulePtr b0 = module(0), b1 = module(1), b2 = module(2);
    if (unit_.size() != b0->rank()) throw AlgebraError(name_ + ": unit has the wrong size");
    const std::size_t n = b1->rank();
    for (std::size_t x = 0; x < n; ++x) {
      if (product(0, unit_, 1, basis(n, x)) != basis(n, x)) throw AlgebraError(name_ + ": unit law fails at " + b1->basis()[x]);
      for (std::size_t y = 0; y < n; ++y) {
        if (product(1, x, 1, y) != product(1, y, 1, x)) {
          throw AlgebraError(name_ + ": product not commutative at " + b1->basis()[x] + "*" + b1->basis()[y]);
        }
        for (std::size_t z = 0; z < n; ++z) {
          if (product(2, product(1, x, 1, y), 1, basis(n, z)) != product(1, basis(n, x), 2, product(1, y, 1, z))) {
            throw AlgebraError(name_ + ": product not associative at " + b1->basis()[x] + "*" + b1->basis()[y] + "*" +
                               b1->basis()[z]);
          }
        }
      }
    }
    const std::size_t top = b2->nilpotent_beyond_bound() ? b2->bound() + 1 : b2->bound();
    for (std::size_t i = 1; i <= top; ++i) {
      for (std::size_t x = 0; x < n; ++x) {
        for (std::size_t y = 0; y < n; ++y) {
          const Vec lhs = act(*b2, i, product(1, x, 1, y));
          Vec rhs(b2->rank(), Rational(0));
          for (std::size_t p = 0; p <= i; ++p) {
            const Vec t = product(1, act(*b1, p, basis(n, x)), 1, act(*b1, i - p, basis(n, y)));
            for (std::size_t k = 0; k < rhs.size(); ++k) rhs[k] += t[k];
          }
          if (lhs != rhs) {
            throw AlgebraError(name_ + ": D(" + std::to_string(i) + ") violates the Leibniz rule on " + b1->basis()[x] +
                               "*" + b1->basis()[y]);
          }
        }
      }
    }
  }

  std::string name_;
  ModuleFn module_;
  ProductFn product_;
  Vec unit_;
};

/// f2(a, b)(x1, x2) = sum_(i,j) (D(i) a)(D(j) b) x1^i x2^j.
inline MultiMap holomorphic_f2(const CommDiffAlgebra& alg, std::size_t w1, std::size_t w2, MultiConfig cfg = {}) {
  const ModulePtr a = alg.module(w1), b = alg.module(w2), out = alg.module(w1 + w2);
  const Tree tree = Tree::corolla(2);
  LabelledTree lt{tree, {a, b}, out, {true, true}, true};
  auto top = [&](const HModule& m) {
    const auto ceiling = static_cast<std::size_t>(cfg.window.ceiling);
    return m.nilpotent_beyond_bound() ? std::min(m.bound(), ceiling) : ceiling;
  };
  std::map<Tuple, SingularSeries> table;
  for (const auto& t : all_tuples(lt.leaves)) {
    SingularSeries s(tree_variables(tree), out->ref(), cfg.window);
    for (std::size_t i = 0; i <= top(*a); ++i) {
      const Vec da = a->image(i, t[0]);
      for (std::size_t j = 0; j <= top(*b); ++j) {
        const Vec v = alg.product(w1, da, w2, b->image(j, t[1]));
        const Monomial mono = monomial({{"x1", static_cast<int>(i)}, {"x2", static_cast<int>(j)}});
        for (std::size_t k = 0; k < v.size(); ++k) s.add_term(v[k], mono, {}, k);
      }
    }
    table.emplace(t, std::move(s));
  }
  return make_multimap(std::move(lt), std::move(table), cfg);
}

/// The unit as a multimap over the empty tree.
inline MultiMap unit_multimap(const CommDiffAlgebra& alg, MultiConfig cfg = {}) {
  const ModulePtr b0 = alg.module(0);
  SingularSeries s({}, b0->ref(), cfg.window);
  for (std::size_t k = 0; k < alg.unit().size(); ++k) s.add_term(alg.unit()[k], {}, {}, k);
  return make_multimap({Tree::empty(), {}, b0, {}, true}, {{Tuple{}, s}}, cfg);
}

/// Generators (f_unit, f2) with the family f_p derived and cached.
class AlgebraStructure {
 public:
  using BinaryFn = std::function<MultiMap(std::size_t, std::size_t)>;

  AlgebraStructure(CommDiffAlgebra alg, MultiConfig cfg = {}, BinaryFn f2 = nullptr)
      : alg_(std::make_shared<const CommDiffAlgebra>(std::move(alg))), cfg_(cfg), cache_(std::make_shared<Cache>()) {
    if (f2) {
      f2_ = std::move(f2);
    } else {
      auto a = alg_;
      f2_ = [a, cfg](std::size_t w1, std::size_t w2) { return holomorphic_f2(*a, w1, w2, cfg); };
    }
  }

  const CommDiffAlgebra& algebra() const noexcept { return *alg_; }
  const MultiConfig& config() const noexcept { return cfg_; }
  MultiMap f2(std::size_t w1 = 1, std::size_t w2 = 1) const { return f2_(w1, w2); }
  MultiMap unit() const { return unit_multimap(*alg_, cfg_); }

  /// f_p with the given leaf weights (all 1 when empty).
  MultiMap f_for_tree(const Tree& p, std::vector<std::size_t> weights = {}) const {
    if (weights.empty()) weights.assign(p.leaf_count(), 1);
    if (weights.size() != p.leaf_count()) throw std::invalid_argument("one weight per leaf is required");
    const std::string key = render_tree(p) + key_suffix(weights);
    if (auto hit = lookup(cache_->maps, key)) return *hit;
    return *store(cache_->maps, key, generate(p, weights));
  }

  /// f_q composed at leaf i with f_p. Results met while generating the
  /// family are reused; others are computed and not kept.
  MultiMap composed(const Tree& q, const std::vector<std::size_t>& wq, std::size_t i, const Tree& p,
                    const std::vector<std::size_t>& wp) const {
    if (auto hit = lookup(cache_->composed, compose_key(q, wq, i, p, wp))) return *hit;
    return compose(f_for_tree(q, wq), i, f_for_tree(p, wp));
  }

  /// f_p refined to q, reusing refinements made while generating.
  MultiMap refined(const Tree& p, const std::vector<std::size_t>& w, const Tree& q) const {
    if (auto hit = lookup(cache_->refined, refine_key(p, w, q))) return *hit;
    return refine(f_for_tree(p, w), q);
  }

 private:
  using Store = std::map<std::string, std::shared_ptr<const MultiMap>>;
  struct Cache {
    std::mutex mu;
    Store maps, composed, refined;
  };

  static std::string key_suffix(const std::vector<std::size_t>& w) {
    std::string s;
    for (auto x : w) s += "," + std::to_string(x);
    return s;
  }
  static std::string compose_key(const Tree& q, const std::vector<std::size_t>& wq, std::size_t i, const Tree& p,
                                 const std::vector<std::size_t>& wp) {
    return render_tree(q) + key_suffix(wq) + " o" + std::to_string(i) + " " + render_tree(p) + key_suffix(wp);
  }
  static std::string refine_key(const Tree& p, const std::vector<std::size_t>& w, const Tree& q) {
    return render_tree(p) + key_suffix(w) + " -> " + render_tree(q);
  }

  std::shared_ptr<const MultiMap> lookup(const Store& st, const std::string& key) const {
    std::lock_guard<std::mutex> lock(cache_->mu);
    auto it = st.find(key);
    return it == st.end() ? nullptr : it->second;
  }
  std::shared_ptr<const MultiMap> store(Store& st, const std::string& key, MultiMap m) const {
    auto made = std::make_shared<const MultiMap>(std::move(m));
    std::lock_guard<std::mutex> lock(cache_->mu);
    return st.emplace(key, std::move(made)).first->second;
  }

  /// The corolla with k inputs of the given weights: coarsened from the left
  /// comb, then checked against every binary generation.
  MultiMap corolla(const std::vector<std::size_t>& w) const {
    const std::size_t k = w.size();
    if (k == 1) return refine(identity(alg_->module(w[0]), cfg_), Tree::corolla(1));
    if (k == 2) return f2(w[0], w[1]);
    const Tree target = Tree::corolla(k);
    MultiMap fk = coarsen(f_for_tree(left_comb(k), w), target);
    for (const auto& b : reduced_trees(k, true)) {
      const auto back = store(cache_->refined, refine_key(target, w, b), refine(fk, b));
      if (auto diff = multimap_difference(*back, f_for_tree(b, w))) {
        throw AlgebraError("generations of " + render_tree(target) + " disagree at " + render_tree(b) + ": " + *diff);
      }
    }
    return fk;
  }

  /// Children are grafted right to left: p is the tree with its first
  /// non-leaf child cut off, composed with that child.
  MultiMap generate(const Tree& p, const std::vector<std::size_t>& w) const {
    if (p.is_leaf()) return identity(alg_->module(w[0]), cfg_);
    if (p.is_empty_node()) return unit();
    std::size_t at = 0;
    std::vector<std::size_t> child_weights;
    for (const auto& c : p.children()) {
      if (c.is_empty_node()) throw AlgebraError("empty subtree inside " + render_tree(p));
      std::size_t sum = 0;
      for (std::size_t x = at; x < at + c.leaf_count(); ++x) sum += w[x];
      child_weights.push_back(sum);
      at += c.leaf_count();
    }
    at = 0;
    for (std::size_t j = 0; j < p.children().size(); ++j) {
      const Tree& c = p.children()[j];
      if (c.is_leaf()) {
        ++at;
        continue;
      }
      const std::vector<std::size_t> slice(w.begin() + static_cast<std::ptrdiff_t>(at),
                                           w.begin() + static_cast<std::ptrdiff_t>(at + c.leaf_count()));
      std::vector<std::size_t> outer_w(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(at));
      outer_w.push_back(child_weights[j]);
      outer_w.insert(outer_w.end(), w.begin() + static_cast<std::ptrdiff_t>(at + c.leaf_count()), w.end());
      const Tree outer = p.replaced({j}, Tree::leaf());
      const std::string key = compose_key(outer, outer_w, at + 1, c, slice);
      return *store(cache_->composed, key, compose(f_for_tree(outer, outer_w), at + 1, f_for_tree(c, slice)));
    }
    return corolla(child_weights);
  }

  std::shared_ptr<const CommDiffAlgebra> alg_;
  MultiConfig cfg_;
  BinaryFn f2_;
  std::shared_ptr<Cache> cache_;
};

/// The holomorphic f2 with every x1*x2 term removed; not a valid algebra.
inline AlgebraStructure::BinaryFn corrupted_f2(const CommDiffAlgebra& alg, MultiConfig cfg = {}) {
  auto a = std::make_shared<const CommDiffAlgebra>(alg);
  return [a, cfg](std::size_t w1, std::size_t w2) {
    const MultiMap good = holomorphic_f2(*a, w1, w2, cfg);
    const Monomial xy = monomial({{"x1", 1}, {"x2", 1}});
    std::map<Tuple, SingularSeries> table;
    for (const auto& [t, s] : good.table()) {
      SingularSeries kept(s.variables(), s.module(), s.window());
      for (const auto& [k, c] : s.terms()) {
        if (!(k.mono == xy)) kept.add_key(k, c);
      }
      table.emplace(t, std::move(kept));
    }
    return make_multimap(good.shape(), std::move(table), cfg);
  };
}

// ---------------------------------------------------------------------------
// Axiom checking

struct AxiomEntry {
  std::string axiom;  // composition | unit | refinement | commutativity
  std::string tree;
  std::string detail;  // the grafting, leaf, morphism or permutation checked
  bool passed = true;
  std::string witness;
  double seconds = 0;
};

struct AlgebraReport {
  std::size_t max_leaves = 0;
  std::vector<AxiomEntry> entries;

  bool passed(const std::string& axiom) const {
    for (const auto& e : entries) {
      if (e.axiom == axiom && !e.passed) return false;
    }
    return true;
  }
  bool all_passed() const {
    for (const auto& e : entries) {
      if (!e.passed) return false;
    }
    return true;
  }
  bool commutative() const { return passed("commutativity"); }
  const AxiomEntry* first_failure(const std::string& axiom) const {
    for (const auto& e : entries) {
      if (e.axiom == axiom && !e.passed) return &e;
    }
    return nullptr;
  }
};

namespace detail {

inline AxiomEntry run_check(std::string axiom, const Tree& tree, std::string detail,
                            const std::function<std::optional<std::string>()>& body) {
  AxiomEntry e{std::move(axiom), render_tree(tree), std::move(detail), true, ""};
  const auto start = std::chrono::steady_clock::now();
  struct Stamp {
    AxiomEntry& e;
    std::chrono::steady_clock::time_point start;
    ~Stamp() { e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); }
  } stamp{e, start};
  try {
    if (auto w = body()) {
      e.passed = false;
      e.witness = *w;
    }
  } catch (const std::exception& ex) {
    e.passed = false;
    e.witness = ex.what();
  }
  return e;
}

}  // namespace detail

/// Composition, unit, refinement and commutativity for all trees without
/// unary vertices and with 1..max_leaves leaves, inputs of weight 1.
inline AlgebraReport check_algebra(const AlgebraStructure& alg, std::size_t max_leaves = 4) {
  AlgebraReport report;
  report.max_leaves = max_leaves;
  std::vector<Tree> trees;
  for (std::size_t n = 1; n <= max_leaves; ++n) {
    for (const auto& t : reduced_trees(n)) trees.push_back(t);
  }

  for (const auto& p : trees) {
    const std::vector<std::size_t> ones(p.leaf_count(), 1);
    const auto leaves = leaf_paths(p);
    // composition: cut at every internal vertex below the root
    for (const auto& v : vertex_paths(p)) {
      if (v.empty() || p.at(v).is_leaf()) continue;
      const Tree inner = p.at(v);
      const Tree outer = p.replaced(v, Tree::leaf());
      const auto outer_leaves = leaf_paths(outer);
      const std::size_t i = static_cast<std::size_t>(std::find(outer_leaves.begin(), outer_leaves.end(), v) -
                                                     outer_leaves.begin()) + 1;
      std::vector<std::size_t> wq(outer.leaf_count(), 1);
      wq[i - 1] = inner.leaf_count();
      const std::vector<std::size_t> wp(inner.leaf_count(), 1);
      report.entries.push_back(detail::run_check(
          "composition", p, render_tree(outer) + " o" + std::to_string(i) + " " + render_tree(inner), [&] {
            return multimap_difference(alg.composed(outer, wq, i, inner, wp), alg.f_for_tree(p, ones));
          }));
    }
    // unit: feed f_unit into each leaf
    for (std::size_t k = 1; k <= p.leaf_count(); ++k) {
      report.entries.push_back(detail::run_check("unit", p, "leaf " + std::to_string(k), [&] {
        std::vector<std::size_t> w = ones;
        w[k - 1] = 0;
        std::vector<std::size_t> rest = ones;
        rest.pop_back();
        return multimap_difference(compose(alg.f_for_tree(p, w), k, alg.unit()), alg.f_for_tree(remove_leaf(p, k), rest));
      }));
    }
    // refinement: along every morphism from another tree of the same size
    for (const auto& q : trees) {
      if (q == p || q.leaf_count() != p.leaf_count() || !morphism(q, p)) continue;
      report.entries.push_back(detail::run_check("refinement", p, "from " + render_tree(q), [&] {
        return multimap_difference(alg.refined(p, ones, q), alg.f_for_tree(q, ones));
      }));
    }
    // commutativity: adjacent transpositions of siblings
    for (const auto& v : vertex_paths(p)) {
      const Tree& sub = p.at(v);
      if (sub.is_leaf()) continue;
      for (std::size_t j = 0; j + 1 < sub.children().size(); ++j) {
        std::vector<std::size_t> perm(sub.children().size());
        std::iota(perm.begin(), perm.end(), 0);
        std::swap(perm[j], perm[j + 1]);
        const std::string at = v.empty() ? std::string("root") : path_label(v);
        report.entries.push_back(detail::run_check(
            "commutativity", p, "swap " + std::to_string(j + 1) + "," + std::to_string(j + 2) + " at " + at, [&] {
              const MultiMap moved = symmetry_action(alg.f_for_tree(p, ones), v, perm);
              return multimap_difference(moved, alg.f_for_tree(moved.tree(), ones));
            }));
      }
    }
  }
  // the unary refinements of the one- and two-leaf trees
  for (const auto& [fine, coarse] : std::vector<std::pair<Tree, Tree>>{
           {Tree::corolla(1), Tree::leaf()}, {Tree::node({Tree::corolla(2)}), Tree::corolla(2)}}) {
    if (coarse.leaf_count() > max_leaves) continue;
    report.entries.push_back(detail::run_check("refinement", coarse, "from " + render_tree(fine), [&] {
      const std::vector<std::size_t> ones(coarse.leaf_count(), 1);
      return multimap_difference(refine(alg.f_for_tree(coarse, ones), fine), alg.f_for_tree(fine, ones));
    }));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Operator product expansion

struct OpeTerm {
  int pole_order = 0;
  SingularSeries coefficient;  // in w = x1 - x2 (order 0 only) and x2
};

/// f2(a, b) re-centred at x1 = x2 + w and split by the power of w^-1.
/// Order 0 collects the regular part.
inline std::vector<OpeTerm> ope_extract(const AlgebraStructure& alg, std::size_t a, std::size_t b) {
  const MultiMap f = alg.f2(1, 1);
  const SingularSeries s = f.at({a, b});
  const SingularSeries centred = substitute(s, {{"x1", parse_form("w+x2")}}, std::set<Variable>{"w", "x2"});
  std::map<int, SingularSeries> parts;
  for (const auto& [k, c] : centred.terms()) {
    const int e = k.mono.exponent("w");
    const int order = e < 0 ? -e : 0;
    auto it = parts.find(order);
    if (it == parts.end()) {
      it = parts.emplace(order, SingularSeries(order ? std::set<Variable>{"x2"} : std::set<Variable>{"w", "x2"},
                                               s.module(), s.window()))
               .first;
    }
    TermKey kk = k;
    if (order) kk.mono.mul("w", order);
    it->second.add_key(kk, c);
  }
  std::vector<OpeTerm> out;
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) out.push_back({it->first, it->second});
  return out;
}

}  // namespace rmc
