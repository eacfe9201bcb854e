#pragma once

// Multimaps over labelled trees: a series for every input tuple, with the
// membership conditions, composition, refinement and the symmetric action.
//
// Variables are edge displacements. The edge into the vertex at path p is
// named "x" + path_label(p); a leaf's position is the sum of the edge
// variables along its path from the root.

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "rmc/hopf.hpp"
#include "rmc/module.hpp"
#include "rmc/series.hpp"
#include "rmc/tree.hpp"

namespace rmc {

using Tuple = std::vector<std::size_t>;

inline Variable edge_variable(const Path& p) { return "x" + path_label(p); }

inline std::set<Variable> tree_variables(const Tree& t) {
  std::set<Variable> out;
  for (const auto& p : vertex_paths(t)) {
    if (!p.empty()) out.insert(edge_variable(p));
  }
  return out;
}

/// Edge variables from v to its children, in child order.
inline std::vector<Variable> child_variables(const Tree& t, const Path& v) {
  std::vector<Variable> out;
  const Tree& sub = t.at(v);
  for (std::size_t i = 0; i < sub.children().size(); ++i) {
    Path c = v;
    c.push_back(i);
    out.push_back(edge_variable(c));
  }
  return out;
}

inline bool is_prefix(const Path& pre, const Path& p) {
  return pre.size() <= p.size() && std::equal(pre.begin(), pre.end(), p.begin());
}

/// Sum of edge variables from `top` down to `bottom` (top must be an ancestor).
inline LinearForm path_sum(const Path& top, const Path& bottom) {
  if (!is_prefix(top, bottom)) throw std::logic_error("path_sum: not an ancestor");
  LinearForm f;
  for (std::size_t len = top.size() + 1; len <= bottom.size(); ++len) {
    f.add(edge_variable(Path(bottom.begin(), bottom.begin() + static_cast<std::ptrdiff_t>(len))), 1);
  }
  return f;
}

// ---------------------------------------------------------------------------
// Errors and configuration

class MembershipError : public std::runtime_error {
 public:
  MembershipError(std::string kind, std::string witness)
      : std::runtime_error(kind + ": " + witness), kind_(std::move(kind)), witness_(std::move(witness)) {}
  const std::string& kind() const noexcept { return kind_; }
  const std::string& witness() const noexcept { return witness_; }

 private:
  std::string kind_;
  std::string witness_;
};

class CompositionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RefinementError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MultiConfig {
  SeriesWindow window;
  std::size_t invariance_degree = 6;  // sum rules and H-actions checked for D(1)..D(this)
};

struct LabelledTree {
  Tree tree = Tree::leaf();
  std::vector<ModulePtr> leaves;
  ModulePtr root;
  std::vector<bool> leaf_invariant;  // declared H-invariance per leaf
  bool root_invariant = true;
};

inline std::vector<Tuple> all_tuples(const std::vector<ModulePtr>& leaves) {
  std::vector<Tuple> out{{}};
  for (const auto& m : leaves) {
    std::vector<Tuple> next;
    for (const auto& t : out) {
      for (std::size_t b = 0; b < m->rank(); ++b) {
        Tuple u = t;
        u.push_back(b);
        next.push_back(std::move(u));
      }
    }
    out = std::move(next);
  }
  return out;
}

inline std::string tuple_label(const LabelledTree& lt, const Tuple& t) {
  std::string s = "(";
  for (std::size_t j = 0; j < t.size(); ++j) {
    if (j) s += ", ";
    s += lt.leaves[j]->basis()[t[j]];
  }
  return s + ")";
}

/// An element of one Ord_t, given by its expansion in the order induced by t.
struct Representative {
  std::string label;
  ExpansionOrder order;
  std::map<Tuple, SingularSeries> table;
};

// ---------------------------------------------------------------------------
// Ord shapes and the orders on which membership is tested

struct OrdShape {
  Tree tree = Tree::leaf();
  TotalOrdering ordering;
  std::string formula;
  ExpansionOrder induced_order;
};

/// Vertices in t order and, within each vertex, its outgoing edge variables.
inline ExpansionOrder induced_order(const Tree& tree, const TotalOrdering& t) {
  ExpansionOrder out;
  for (const auto& v : t) {
    if (v.bottom) continue;
    for (const auto& x : child_variables(tree, v.path)) out.push_back(x);
  }
  return out;
}

inline OrdShape make_ord_shape(const Tree& tree, const TotalOrdering& t) {
  const AugmentedTree aug = augment(tree);
  if (!is_linear_extension(internal_poset(aug), t)) throw std::invalid_argument("not a linear extension of the tree");
  std::string inner = "Hom(" + render_slot(aug.slot(VertexId::output())) + ", C)";
  for (const auto& v : t) {
    if (v.bottom) continue;
    const std::string x = render_slot(aug.slot(v));
    inner = tree.at(v.path).is_unary() ? "Hom(" + x + ", " + inner + ")" : "Hom(" + x + ", K⊗" + inner + ")";
  }
  return {tree, t, inner, induced_order(tree, t)};
}

inline std::vector<OrdShape> ord_shapes(const Tree& tree) {
  std::vector<OrdShape> out;
  for (const auto& t : linear_extensions(internal_poset(augment(tree)))) out.push_back(make_ord_shape(tree, t));
  return out;
}

/// Flat trees with at least three leaves are tested in every leaf order;
/// other trees in the orders induced by their linear extensions.
inline std::vector<ExpansionOrder> required_orders(const Tree& tree) {
  std::vector<ExpansionOrder> out;
  if (tree.is_flat() && tree.leaf_count() >= 3) {
    std::vector<std::size_t> idx(tree.leaf_count());
    std::iota(idx.begin(), idx.end(), 0);
    do {
      ExpansionOrder o;
      for (auto i : idx) o.push_back(edge_variable({i}));
      out.push_back(std::move(o));
    } while (std::next_permutation(idx.begin(), idx.end()));
    return out;
  }
  for (const auto& s : ord_shapes(tree)) {
    if (std::find(out.begin(), out.end(), s.induced_order) == out.end()) out.push_back(s.induced_order);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dependency profile

/// A pole form must be +-(chain from child a of m) - (chain from child b of m)
/// with a != b, each chain a run of consecutive edges going down.
inline std::optional<std::string> profile_violation(const LinearForm& f, const std::map<Variable, Path>& paths) {
  std::vector<Path> plus, minus;
  for (const auto& [v, c] : f.terms) {
    auto it = paths.find(v);
    if (it == paths.end()) return "variable " + v + " is not an edge of the tree";
    if (c == 1) {
      plus.push_back(it->second);
    } else if (c == -1) {
      minus.push_back(it->second);
    } else {
      return "coefficient " + to_string(c) + " on " + v;
    }
  }
  auto chain = [](std::vector<Path>& ps) {
    std::sort(ps.begin(), ps.end(), [](const Path& a, const Path& b) { return a.size() < b.size(); });
    for (std::size_t i = 1; i < ps.size(); ++i) {
      if (ps[i].size() != ps[i - 1].size() + 1 || !is_prefix(ps[i - 1], ps[i])) return false;
    }
    return !ps.empty();
  };
  if (!chain(plus) || !chain(minus)) return "(" + format_form(f) + ") is not a difference of two descending chains";
  const Path& a = plus.front();
  const Path& b = minus.front();
  if (a.size() != b.size() || !std::equal(a.begin(), a.end() - 1, b.begin()) || a.back() == b.back()) {
    return "(" + format_form(f) + ") does not separate two children of one vertex";
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Multimaps

class MultiMap;
MultiMap make_multimap(LabelledTree lt, std::map<Tuple, SingularSeries> table, MultiConfig config = {},
                       std::vector<Representative> reps = {});

class MultiMap {
 public:
  const LabelledTree& shape() const noexcept { return lt_; }
  const Tree& tree() const noexcept { return lt_.tree; }
  const std::map<Tuple, SingularSeries>& table() const noexcept { return table_; }
  const std::vector<Representative>& representatives() const noexcept { return reps_; }
  const MultiConfig& config() const noexcept { return config_; }

  const SingularSeries& at(const Tuple& t) const {
    auto it = table_.find(t);
    if (it == table_.end()) throw std::out_of_range("no such input tuple");
    return it->second;
  }

 private:
  friend MultiMap make_multimap(LabelledTree, std::map<Tuple, SingularSeries>, MultiConfig, std::vector<Representative>);
  MultiMap() = default;

  LabelledTree lt_;
  std::map<Tuple, SingularSeries> table_;
  std::vector<Representative> reps_;
  MultiConfig config_;
};

namespace detail {

inline void normalize_entry(const LabelledTree& lt, const std::set<Variable>& vars, const Tuple& t,
                            SingularSeries& s) {
  if (s.module().id != lt.root->id() || s.module().rank != lt.root->rank()) {
    throw MembershipError("shape", "value at " + tuple_label(lt, t) + " lies in " + s.module().id + ", not " +
                                       lt.root->id());
  }
  for (const auto& v : s.used_variables()) {
    if (!vars.count(v)) throw MembershipError("shape", "variable " + v + " at " + tuple_label(lt, t) + " is not an edge");
  }
  s.set_variables(vars);
}

inline void check_tuple(const LabelledTree& lt, const Tuple& t) {
  bool ok = t.size() == lt.leaves.size();
  for (std::size_t j = 0; ok && j < t.size(); ++j) ok = t[j] < lt.leaves[j]->rank();
  if (!ok) throw MembershipError("shape", "input tuple outside the leaf modules");
}

}  // namespace detail

/// Validates and builds a multimap. Missing tuples are zero.
inline MultiMap make_multimap(LabelledTree lt, std::map<Tuple, SingularSeries> table, MultiConfig config,
                              std::vector<Representative> reps) {
  const Tree& tree = lt.tree;
  if (tree.has_empty_node() && !tree.is_empty_node()) {
    throw MembershipError("shape", "empty node inside " + render_tree(tree));
  }
  if (lt.leaves.size() != tree.leaf_count()) throw MembershipError("shape", "one module per leaf is required");
  if (!lt.root) throw MembershipError("shape", "missing output module");
  for (const auto& m : lt.leaves) {
    if (!m) throw MembershipError("shape", "missing leaf module");
  }
  if (lt.leaf_invariant.empty()) lt.leaf_invariant.assign(lt.leaves.size(), true);
  if (lt.leaf_invariant.size() != lt.leaves.size()) throw MembershipError("shape", "one flag per leaf is required");

  const std::set<Variable> vars = tree_variables(tree);
  for (auto& [t, s] : table) {
    detail::check_tuple(lt, t);
    detail::normalize_entry(lt, vars, t, s);
  }
  for (const auto& t : all_tuples(lt.leaves)) {
    if (!table.count(t)) table.emplace(t, SingularSeries(vars, lt.root->ref(), config.window));
  }

  std::map<Variable, Path> paths;
  for (const auto& p : vertex_paths(tree)) {
    if (!p.empty()) paths[edge_variable(p)] = p;
  }
  for (const auto& [t, s] : table) {
    for (const auto& [k, c] : s.terms()) {
      for (const auto& [v, e] : k.mono.exps) {
        if (e < 0) throw MembershipError("profile", "pole along " + v + " alone at " + tuple_label(lt, t));
      }
      for (const auto& [f, o] : k.poles.factors) {
        if (auto why = profile_violation(f, paths)) throw MembershipError("profile", *why + " at " + tuple_label(lt, t));
      }
    }
  }

  for (const auto& p : vertex_paths(tree)) {
    if (p.empty() || tree.at(p).is_leaf()) continue;
    const auto parts = child_variables(tree, p);
    const Variable whole = edge_variable(p);
    for (const auto& [t, s] : table) {
      const auto r = check_sum_rule(s, parts, whole, config.invariance_degree);
      if (!r) {
        throw MembershipError("sum rule", "vertex " + path_label(p) + ", D(" + std::to_string(r.degree) + ") at " +
                                              tuple_label(lt, t) + ": " +
                                              format_term(r.witness->key, r.witness->coeff, lt.root->basis()));
      }
    }
  }

  if (!reps.empty()) {
    const auto orders = required_orders(tree);
    for (auto& rep : reps) {
      if (std::find(orders.begin(), orders.end(), rep.order) == orders.end()) {
        throw MembershipError("shape", "representative " + rep.label + " is not attached to a required order");
      }
      for (auto& [t, s] : rep.table) {
        detail::check_tuple(lt, t);
        detail::normalize_entry(lt, vars, t, s);
      }
      for (const auto& [t, s] : table) {
        auto it = rep.table.find(t);
        const SingularSeries r = it == rep.table.end() ? 0 * s : it->second;
        const auto a = agree_after_expansion(s, r, {rep.order});
        if (!a) {
          throw MembershipError("agreement", "representative " + rep.label + " at " + tuple_label(lt, t) + ": " +
                                                 format_term(a.witness->key, a.witness->coeff, lt.root->basis()));
        }
      }
    }
  }

  MultiMap m;
  m.lt_ = std::move(lt);
  m.table_ = std::move(table);
  m.reps_ = std::move(reps);
  m.config_ = config;
  return m;
}

inline SingularSeries zero_value(const MultiMap& m) {
  return SingularSeries(tree_variables(m.tree()), m.shape().root->ref(), m.config().window);
}

/// 1_A over the one-leaf tree.
inline MultiMap identity(const ModulePtr& a, MultiConfig config = {}) {
  LabelledTree lt{Tree::leaf(), {a}, a, {true}, true};
  std::map<Tuple, SingularSeries> table;
  for (std::size_t b = 0; b < a->rank(); ++b) {
    SingularSeries s({}, a->ref(), config.window);
    s.add_term(1, {}, {}, b);
    table.emplace(Tuple{b}, std::move(s));
  }
  return make_multimap(std::move(lt), std::move(table), config);
}

/// Differences on reliable windows; nullopt when the multimaps agree.
inline std::optional<std::string> multimap_difference(const MultiMap& a, const MultiMap& b) {
  if (!(a.tree() == b.tree())) return "trees differ: " + render_tree(a.tree()) + " vs " + render_tree(b.tree());
  if (a.shape().root->id() != b.shape().root->id()) return "output modules differ";
  for (std::size_t j = 0; j < a.shape().leaves.size(); ++j) {
    if (a.shape().leaves[j]->id() != b.shape().leaves[j]->id()) return "leaf modules differ at " + std::to_string(j + 1);
  }
  for (const auto& [t, s] : a.table()) {
    if (auto w = difference_witness(s, b.at(t))) {
      return tuple_label(a.shape(), t) + ": " + format_term(w->key, w->coeff, a.shape().root->basis());
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Composition

/// g o_i f: f's output is fed into leaf i of g (1-based).
inline MultiMap compose(const MultiMap& g, std::size_t i, const MultiMap& f) {
  const Tree& q = g.tree();
  if (i < 1 || i > q.leaf_count()) throw CompositionError("no leaf " + std::to_string(i) + " in " + render_tree(q));
  const LabelledTree& gl = g.shape();
  const LabelledTree& fl = f.shape();
  if (gl.leaves[i - 1]->id() != fl.root->id()) {
    throw CompositionError("leaf " + std::to_string(i) + " takes " + gl.leaves[i - 1]->id() + " but f produces " +
                           fl.root->id());
  }
  if (!gl.leaf_invariant[i - 1]) throw CompositionError("leaf " + std::to_string(i) + " is not H-invariant");
  if (!fl.root_invariant) throw CompositionError("the output of f is not H-invariant");

  const Path L = leaf_paths(q)[i - 1];
  const std::size_t slot = i - 1;

  if (f.tree().leaf_count() == 0) {
    const Tree r = remove_leaf(q, i);
    LabelledTree lt{r, gl.leaves, gl.root, gl.leaf_invariant, gl.root_invariant};
    lt.leaves.erase(lt.leaves.begin() + static_cast<std::ptrdiff_t>(slot));
    lt.leaf_invariant.erase(lt.leaf_invariant.begin() + static_cast<std::ptrdiff_t>(slot));
    const SingularSeries& value = f.at({});
    std::map<Tuple, SingularSeries> sums;
    for (const auto& [tg, s] : g.table()) {
      const SingularSeries c = value.component(tg[slot]);
      if (c.is_zero()) continue;
      Tuple t = tg;
      t.erase(t.begin() + static_cast<std::ptrdiff_t>(slot));
      SingularSeries term = multiply(c, s);
      auto it = sums.find(t);
      if (it == sums.end()) {
        sums.emplace(t, std::move(term));
      } else {
        it->second = it->second + term;
      }
    }
    if (L.empty()) {
      // the bare leaf: the result lives on the empty tree
      std::map<Tuple, SingularSeries> table;
      for (auto& [t, s] : sums) {
        s.set_variables({});
        table.emplace(t, std::move(s));
      }
      return make_multimap(std::move(lt), std::move(table), g.config());
    }
    // later siblings of the removed leaf move one place left
    const Variable gone = edge_variable(L);
    const Path parent(L.begin(), L.end() - 1);
    std::map<Variable, Variable> names;
    for (const auto& p : vertex_paths(q)) {
      if (p.empty() || p == L) continue;
      Path np = p;
      if (p.size() > parent.size() && is_prefix(parent, p) && p[parent.size()] > L.back()) --np[parent.size()];
      names[edge_variable(p)] = edge_variable(np);
    }
    std::map<Tuple, SingularSeries> table;
    for (auto& [t, s] : sums) {
      if (s.used_variables().count(gone)) {
        throw MembershipError("nullary composition", "result at " + tuple_label(lt, t) + " still depends on " + gone);
      }
      std::set<Variable> vars = s.variables();
      vars.erase(gone);
      s.set_variables(vars);
      SingularSeries renamed = rename(s, names);
      renamed.set_variables(tree_variables(r));
      table.emplace(t, std::move(renamed));
    }
    return make_multimap(std::move(lt), std::move(table), g.config());
  }

  const Tree r = graft(q, i, f.tree());
  const std::set<Variable> rvars = tree_variables(r);
  LabelledTree lt{r, {}, gl.root, {}, gl.root_invariant};
  for (std::size_t j = 0; j < gl.leaves.size(); ++j) {
    if (j == slot) {
      lt.leaves.insert(lt.leaves.end(), fl.leaves.begin(), fl.leaves.end());
      lt.leaf_invariant.insert(lt.leaf_invariant.end(), fl.leaf_invariant.begin(), fl.leaf_invariant.end());
    } else {
      lt.leaves.push_back(gl.leaves[j]);
      lt.leaf_invariant.push_back(gl.leaf_invariant[j]);
    }
  }
  std::map<Variable, Variable> names;
  for (const auto& p : vertex_paths(f.tree())) {
    if (p.empty()) continue;
    Path np = L;
    np.insert(np.end(), p.begin(), p.end());
    names[edge_variable(p)] = edge_variable(np);
  }

  std::map<Tuple, SingularSeries> table;
  for (const auto& [tf, fs] : f.table()) {
    if (fs.is_zero()) continue;
    SingularSeries moved = rename(fs, names);
    moved.set_variables(rvars);
    std::vector<SingularSeries> comps;
    for (std::size_t c = 0; c < fl.root->rank(); ++c) comps.push_back(moved.component(c));
    for (const auto& [tg, gs] : g.table()) {
      const SingularSeries& c = comps[tg[slot]];
      if (c.is_zero() || gs.is_zero()) continue;
      Tuple t(tg.begin(), tg.begin() + static_cast<std::ptrdiff_t>(slot));
      t.insert(t.end(), tf.begin(), tf.end());
      t.insert(t.end(), tg.begin() + static_cast<std::ptrdiff_t>(slot) + 1, tg.end());
      SingularSeries term = multiply(c, gs);
      auto it = table.find(t);
      if (it == table.end()) {
        table.emplace(std::move(t), std::move(term));
      } else {
        it->second = it->second + term;
      }
    }
  }
  return make_multimap(std::move(lt), std::move(table), g.config());
}

struct AssociativityResult {
  bool ok = true;
  std::string witness;
  explicit operator bool() const { return ok; }
};

/// Nested: h o_i (g o_j f) = (h o_i g) o_(i+j-1) f.
/// Parallel (i < j, both leaves of h): (h o_j f) o_i g = (h o_i g) o_(j+|g|-1) f.
inline AssociativityResult associativity_check(const MultiMap& h, const MultiMap& g, const MultiMap& f, std::size_t i,
                                               std::size_t j, bool nested) {
  std::optional<std::string> diff;
  if (nested) {
    diff = multimap_difference(compose(h, i, compose(g, j, f)), compose(compose(h, i, g), i + j - 1, f));
  } else {
    if (!(i < j)) throw std::invalid_argument("parallel associativity needs i < j");
    const std::size_t shift = g.tree().leaf_count();
    diff = multimap_difference(compose(compose(h, j, f), i, g), compose(compose(h, i, g), j + shift - 1, f));
  }
  if (diff) return {false, *diff};
  return {};
}

// ---------------------------------------------------------------------------
// Refinement along tree morphisms

namespace detail {

/// For a move before -> after: the vertex of `before` that a vertex of
/// `after` is placed at when an after-series is read in before-coordinates.
inline Path after_to_before(const Tree& before, const Move& mv, const Path& a) {
  const Path& u = mv.path;
  switch (mv.kind) {
    case Move::Kind::Contract: {
      const Path parent(u.begin(), u.end() - 1);
      const std::size_t k = u.back();
      const std::size_t c = before.at(u).children().size();
      if (a.size() <= parent.size() || !is_prefix(parent, a)) return a;
      const std::size_t idx = a[parent.size()];
      Path out = parent;
      if (idx < k) {
        out.push_back(idx);
      } else if (idx < k + c) {
        out.push_back(k);
        out.push_back(idx - k);
      } else {
        out.push_back(idx - c + 1);
      }
      out.insert(out.end(), a.begin() + static_cast<std::ptrdiff_t>(parent.size()) + 1, a.end());
      return out;
    }
    case Move::Kind::UnaryDelete: {
      // a deleted unary root keeps the old root as origin
      if (u.empty() && a.empty()) return a;
      if (!is_prefix(u, a)) return a;
      Path out = u;
      out.push_back(0);
      out.insert(out.end(), a.begin() + static_cast<std::ptrdiff_t>(u.size()), a.end());
      return out;
    }
    case Move::Kind::UnaryInsert: {
      // the inserted vertex sits on top of its child
      if (!is_prefix(u, a)) return a;
      if (a.size() == u.size()) return a;
      Path out = u;
      out.insert(out.end(), a.begin() + static_cast<std::ptrdiff_t>(u.size()) + 1, a.end());
      return out;
    }
  }
  return a;
}

/// For a move before -> after: where a vertex of `before` lands in `after`.
inline Path before_to_after(const Tree& before, const Move& mv, const Path& b) {
  const Path& u = mv.path;
  switch (mv.kind) {
    case Move::Kind::Contract: {
      const Path parent(u.begin(), u.end() - 1);
      const std::size_t k = u.back();
      const std::size_t c = before.at(u).children().size();
      if (b.size() <= parent.size() || !is_prefix(parent, b)) return b;
      if (b == u) return parent;
      const std::size_t idx = b[parent.size()];
      Path out = parent;
      std::size_t skip = parent.size() + 1;
      if (idx < k) {
        out.push_back(idx);
      } else if (idx == k) {
        out.push_back(k + b[parent.size() + 1]);
        skip = parent.size() + 2;
      } else {
        out.push_back(idx + c - 1);
      }
      out.insert(out.end(), b.begin() + static_cast<std::ptrdiff_t>(skip), b.end());
      return out;
    }
    case Move::Kind::UnaryDelete: {
      // the deleted vertex collapses onto its child
      if (!is_prefix(u, b)) return b;
      if (b.size() == u.size()) return b;
      Path out = u;
      out.insert(out.end(), b.begin() + static_cast<std::ptrdiff_t>(u.size()) + 1, b.end());
      return out;
    }
    case Move::Kind::UnaryInsert: {
      if (u.empty() && b.empty()) return b;
      if (!is_prefix(u, b)) return b;
      Path out = u;
      out.push_back(0);
      out.insert(out.end(), b.begin() + static_cast<std::ptrdiff_t>(u.size()), b.end());
      return out;
    }
  }
  return b;
}

/// Reads series over `from` in the coordinates of `to`, given where each
/// vertex of `from` is placed in `to`.
/// The substitution taking edge variables of `from` to forms over `to`.
inline std::map<Variable, LinearForm> transport_forms(const Tree& from, const std::function<Path(const Path&)>& place) {
  std::map<Variable, LinearForm> repl;
  for (const auto& p : vertex_paths(from)) {
    if (p.empty()) continue;
    const Path parent(p.begin(), p.end() - 1);
    repl[edge_variable(p)] = path_sum(place(parent), place(p));
  }
  return repl;
}

/// first, then second: forms of `first` rewritten through `second`.
inline std::map<Variable, LinearForm> chain_forms(const std::map<Variable, LinearForm>& first,
                                                  const std::map<Variable, LinearForm>& second) {
  std::map<Variable, LinearForm> out;
  for (const auto& [v, f] : first) {
    LinearForm g;
    for (const auto& [w, a] : f.terms) {
      auto it = second.find(w);
      g = g + a * (it == second.end() ? LinearForm::var(w) : it->second);
    }
    out[v] = g;
  }
  return out;
}

inline std::map<Tuple, SingularSeries> substitute_table(const std::map<Tuple, SingularSeries>& table,
                                                        const std::map<Variable, LinearForm>& repl, const Tree& to) {
  const std::set<Variable> vars = tree_variables(to);
  std::map<Tuple, SingularSeries> out;
  for (const auto& [t, s] : table) out.emplace(t, substitute(s, repl, vars));
  return out;
}

inline std::map<Tuple, SingularSeries> transport(const Tree& from, const Tree& to,
                                                 const std::function<Path(const Path&)>& place,
                                                 const std::map<Tuple, SingularSeries>& table) {
  return substitute_table(table, transport_forms(from, place), to);
}

/// Values over <*> from values over *: f(a)(y) = sum_i y^i phi(D(i) a).
inline std::map<Tuple, SingularSeries> unfold_leaf(const HModule& a, const std::map<Tuple, SingularSeries>& table,
                                                   const SeriesWindow& w) {
  const Variable y = edge_variable({0});
  const std::size_t top = a.nilpotent_beyond_bound() ? std::min<std::size_t>(a.bound(), static_cast<std::size_t>(w.ceiling))
                                                     : static_cast<std::size_t>(w.ceiling);
  std::map<Tuple, SingularSeries> out;
  for (const auto& [t, s] : table) {
    SingularSeries acc({y}, s.module(), s.window());
    for (std::size_t i = 0; i <= top; ++i) {
      const auto img = a.image(i, t[0]);
      for (std::size_t b = 0; b < a.rank(); ++b) {
        if (img[b] == 0) continue;
        const SingularSeries& v = table.at({b});
        for (const auto& [k, c] : v.terms()) {
          TermKey kk = k;
          kk.mono.mul(y, static_cast<int>(i));
          acc.add_key(kk, c * img[b]);
        }
      }
    }
    out.emplace(t, std::move(acc));
  }
  return out;
}

inline bool is_unary_over_leaf(const Tree& t) { return t.is_unary() && t.children()[0].is_leaf(); }

}  // namespace detail

/// The map Multi_p -> Multi_q along the morphism q -> p.
inline MultiMap refine(const MultiMap& m, const Tree& q) {
  const auto mor = morphism(q, m.tree());
  if (!mor) throw RefinementError("no morphism " + render_tree(q) + " -> " + render_tree(m.tree()));
  std::vector<Tree> seq{q};
  for (const auto& mv : mor->moves) seq.push_back(apply_move(seq.back(), mv));
  // consecutive moves compose into one substitution, applied once
  auto table = m.table();
  std::optional<std::map<Variable, LinearForm>> pending;
  Tree pending_to = m.tree();
  auto flush = [&] {
    if (pending) table = detail::substitute_table(table, *pending, pending_to);
    pending.reset();
  };
  for (std::size_t k = mor->moves.size(); k-- > 0;) {
    const Tree& before = seq[k];
    const Move& mv = mor->moves[k];
    if (mv.kind == Move::Kind::UnaryDelete && mv.path.empty() && detail::is_unary_over_leaf(before)) {
      flush();
      table = detail::unfold_leaf(*m.shape().leaves[0], table, m.config().window);
      continue;
    }
    auto step = detail::transport_forms(seq[k + 1], [&](const Path& a) { return detail::after_to_before(before, mv, a); });
    pending = pending ? detail::chain_forms(*pending, step) : std::move(step);
    pending_to = before;
  }
  flush();
  LabelledTree lt = m.shape();
  lt.tree = q;
  return make_multimap(std::move(lt), std::move(table), m.config());
}

/// The inverse of refinement on its image: Multi_q -> Multi_p along q -> p.
/// make_multimap rejects results outside Multi_p.
inline MultiMap coarsen(const MultiMap& m, const Tree& p) {
  const auto mor = morphism(m.tree(), p);
  if (!mor) throw RefinementError("no morphism " + render_tree(m.tree()) + " -> " + render_tree(p));
  auto table = m.table();
  Tree cur = m.tree();
  std::optional<std::map<Variable, LinearForm>> pending;
  auto flush = [&] {
    if (pending) table = detail::substitute_table(table, *pending, cur);
    pending.reset();
  };
  for (const auto& mv : mor->moves) {
    const Tree next = apply_move(cur, mv);
    if (mv.kind == Move::Kind::UnaryInsert && mv.path.empty() && cur.is_leaf()) {
      flush();
      table = detail::unfold_leaf(*m.shape().leaves[0], table, m.config().window);
    } else {
      auto step = detail::transport_forms(cur, [&](const Path& b) { return detail::before_to_after(cur, mv, b); });
      pending = pending ? detail::chain_forms(*pending, step) : std::move(step);
    }
    cur = next;
  }
  flush();
  LabelledTree lt = m.shape();
  lt.tree = p;
  return make_multimap(std::move(lt), std::move(table), m.config());
}

// ---------------------------------------------------------------------------
// Symmetric action

/// Reorders the children of vertex v: new child j is old child perm[j].
inline MultiMap symmetry_action(const MultiMap& m, const Path& v, const std::vector<std::size_t>& perm) {
  const Tree& t = m.tree();
  const Tree& sub = t.at(v);
  if (sub.is_leaf()) throw std::invalid_argument("symmetry_action at a leaf");
  std::vector<std::size_t> check = perm;
  std::sort(check.begin(), check.end());
  for (std::size_t j = 0; j < check.size(); ++j) {
    if (check[j] != j) throw std::invalid_argument("not a permutation of the children");
  }
  if (perm.size() != sub.children().size()) throw std::invalid_argument("not a permutation of the children");
  std::vector<Tree> kids;
  for (auto j : perm) kids.push_back(sub.children()[j]);
  const Tree nt = t.replaced(v, Tree::node(std::move(kids)));

  std::vector<std::size_t> inv(perm.size());
  for (std::size_t j = 0; j < perm.size(); ++j) inv[perm[j]] = j;
  auto move_path = [&](const Path& p) {
    Path np = p;
    if (p.size() > v.size() && is_prefix(v, p)) np[v.size()] = inv[p[v.size()]];
    return np;
  };
  std::map<Variable, Variable> names;
  for (const auto& p : vertex_paths(t)) {
    if (!p.empty()) names[edge_variable(p)] = edge_variable(move_path(p));
  }
  const auto old_leaves = leaf_paths(t);
  const auto new_leaves = leaf_paths(nt);
  // source[k] = old index of the leaf now in position k
  std::vector<std::size_t> source(new_leaves.size());
  for (std::size_t o = 0; o < old_leaves.size(); ++o) {
    const Path np = move_path(old_leaves[o]);
    source[static_cast<std::size_t>(std::find(new_leaves.begin(), new_leaves.end(), np) - new_leaves.begin())] = o;
  }
  LabelledTree lt{nt, {}, m.shape().root, {}, m.shape().root_invariant};
  for (auto o : source) {
    lt.leaves.push_back(m.shape().leaves[o]);
    lt.leaf_invariant.push_back(m.shape().leaf_invariant[o]);
  }
  auto permute = [&](const std::map<Tuple, SingularSeries>& table) {
    std::map<Tuple, SingularSeries> out;
    for (const auto& [t_old, s] : table) {
      Tuple tn(source.size());
      for (std::size_t k = 0; k < source.size(); ++k) tn[k] = t_old[source[k]];
      out.emplace(std::move(tn), rename(s, names));
    }
    return out;
  };
  std::vector<Representative> reps;
  for (const auto& r : m.representatives()) {
    ExpansionOrder o = r.order;
    for (auto& x : o) x = names.at(x);
    reps.push_back({r.label, std::move(o), permute(r.table)});
  }
  return make_multimap(std::move(lt), permute(m.table()), m.config(), std::move(reps));
}

// ---------------------------------------------------------------------------
// H-invariance

struct InvarianceReport {
  bool ok = true;
  std::string witness;
  explicit operator bool() const { return ok; }
};

/// Checks the declared invariance flags: leaves j with M(k) a_j = D(k) on the
/// leaf's edge, and the root with M_B(k) = D(k) distributed over the root's
/// outgoing edges, for 1 <= k <= the invariance degree.
inline InvarianceReport full_invariance_filter(const MultiMap& m) {
  const LabelledTree& lt = m.shape();
  const Tree& tree = m.tree();
  const HModule& out = *lt.root;
  const auto leaves = leaf_paths(tree);
  const std::size_t deg = m.config().invariance_degree;
  auto describe = [&](const std::string& where, std::size_t k, const Tuple& t, const std::optional<Discrepancy>& w) {
    return InvarianceReport{false, where + ", D(" + std::to_string(k) + ") at " + tuple_label(lt, t) + ": " +
                                       format_term(w->key, w->coeff, out.basis())};
  };

  for (std::size_t j = 0; j < leaves.size(); ++j) {
    if (!lt.leaf_invariant[j]) continue;
    const HModule& a = *lt.leaves[j];
    for (std::size_t k = 1; k <= deg; ++k) {
      if (!a.knows(k)) break;
      const Matrix& mk = a.action(k);
      for (const auto& [t, s] : m.table()) {
        SingularSeries lhs = zero_value(m);
        for (std::size_t b = 0; b < a.rank(); ++b) {
          if (mk[b][t[j]] == 0) continue;
          Tuple u = t;
          u[j] = b;
          lhs = lhs + mk[b][t[j]] * m.at(u);
        }
        const SingularSeries rhs =
            tree.is_leaf() ? act_on_values(out, k, s) : act_variable(HElem::generator(k), edge_variable(leaves[j]), s);
        if (auto w = difference_witness(lhs, rhs)) return describe("leaf " + std::to_string(j + 1), k, t, w);
      }
    }
  }
  if (lt.root_invariant && !tree.is_leaf()) {
    const auto parts = child_variables(tree, {});
    for (std::size_t k = 1; k <= deg; ++k) {
      if (!out.knows(k)) break;
      for (const auto& [t, s] : m.table()) {
        const SingularSeries lhs = act_on_values(out, k, s);
        const SingularSeries rhs = distributed_action(s, parts, k);
        if (auto w = difference_witness(lhs, rhs)) return describe("output", k, t, w);
      }
    }
  }
  return {};
}

}  // namespace rmc
