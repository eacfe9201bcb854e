#pragma once

// Leafed trees: the recursion  tree := leaf | <tree, ..., tree>,
// grafting, refinement morphisms, augmented vertex posets, and
// enumeration of the trees that refine to a given tree.

#include <algorithm>
#include <compare>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rmc {

/// Position of a vertex: child indices (0-based) from the root.
using Path = std::vector<std::size_t>;

class TreeParseError : public std::runtime_error {
 public:
  TreeParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " at byte " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class Tree {
 public:
  static Tree leaf() { return Tree(true, {}); }
  static Tree node(std::vector<Tree> children) { return Tree(false, std::move(children)); }
  /// The empty tree < >, drawn as a hollow circle.
  static Tree empty() { return node({}); }
  static Tree corolla(std::size_t n) { return node(std::vector<Tree>(n, leaf())); }

  bool is_leaf() const noexcept { return leaf_; }
  bool is_node() const noexcept { return !leaf_; }
  bool is_empty_node() const noexcept { return !leaf_ && children_.empty(); }
  bool is_unary() const noexcept { return !leaf_ && children_.size() == 1; }
  const std::vector<Tree>& children() const noexcept { return children_; }
  std::size_t leaf_count() const noexcept { return leaves_; }
  std::size_t height() const noexcept { return height_; }

  /// Every leaf sits at level one.
  bool is_flat() const {
    if (leaf_) return false;
    return std::all_of(children_.begin(), children_.end(), [](const Tree& c) { return c.is_leaf(); });
  }

  bool has_empty_node() const {
    if (is_empty_node()) return true;
    return std::any_of(children_.begin(), children_.end(), [](const Tree& c) { return c.has_empty_node(); });
  }

  bool has_unary_vertex() const {
    if (is_unary()) return true;
    return std::any_of(children_.begin(), children_.end(), [](const Tree& c) { return c.has_unary_vertex(); });
  }

  bool is_binary() const {
    if (leaf_) return true;
    if (children_.size() != 2) return false;
    return children_[0].is_binary() && children_[1].is_binary();
  }

  const Tree& at(const Path& path) const {
    const Tree* t = this;
    for (std::size_t idx : path) {
      if (t->leaf_ || idx >= t->children_.size()) throw std::out_of_range("tree path out of range");
      t = &t->children_[idx];
    }
    return *t;
  }

  Tree replaced(const Path& path, Tree replacement, std::size_t depth = 0) const {
    if (depth == path.size()) return replacement;
    if (leaf_ || path[depth] >= children_.size()) throw std::out_of_range("tree path out of range");
    std::vector<Tree> kids = children_;
    kids[path[depth]] = kids[path[depth]].replaced(path, std::move(replacement), depth + 1);
    return node(std::move(kids));
  }

  friend bool operator==(const Tree& a, const Tree& b) {
    return a.leaf_ == b.leaf_ && a.children_ == b.children_;
  }

  // Leaf sorts before any node; nodes compare by their child lists.
  friend std::strong_ordering operator<=>(const Tree& a, const Tree& b) {
    if (a.leaf_ != b.leaf_) return a.leaf_ ? std::strong_ordering::less : std::strong_ordering::greater;
    const auto n = std::min(a.children_.size(), b.children_.size());
    for (std::size_t i = 0; i < n; ++i) {
      auto c = a.children_[i] <=> b.children_[i];
      if (c != 0) return c;
    }
    return a.children_.size() <=> b.children_.size();
  }

 private:
  Tree(bool is_leaf, std::vector<Tree> children) : leaf_(is_leaf), children_(std::move(children)) {
    if (leaf_) {
      leaves_ = 1;
      height_ = 0;
      return;
    }
    leaves_ = 0;
    height_ = 0;
    for (const auto& c : children_) {
      leaves_ += c.leaves_;
      height_ = std::max(height_, c.height_ + 1);
    }
  }

  bool leaf_ = true;
  std::vector<Tree> children_;
  std::size_t leaves_ = 1;
  std::size_t height_ = 0;
};

// ---------------------------------------------------------------------------
// Text and DOT forms

inline Tree parse_tree(std::string_view text) {
  std::size_t pos = 0;
  auto skip_ws = [&] {
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t' || text[pos] == '\n' || text[pos] == '\r')) ++pos;
  };
  std::function<Tree()> parse_one = [&]() -> Tree {
    skip_ws();
    if (pos >= text.size()) throw TreeParseError("unexpected end of input", pos);
    const char ch = text[pos];
    if (ch == '*') {
      ++pos;
      return Tree::leaf();
    }
    if (ch == '(') {
      ++pos;
      std::vector<Tree> kids;
      for (;;) {
        skip_ws();
        if (pos >= text.size()) throw TreeParseError("unbalanced '('", pos);
        if (text[pos] == ')') {
          ++pos;
          return Tree::node(std::move(kids));
        }
        kids.push_back(parse_one());
      }
    }
    if (ch == ')') throw TreeParseError("unbalanced ')'", pos);
    throw TreeParseError(std::string("unexpected character '") + ch + "'", pos);
  };
  Tree t = parse_one();
  skip_ws();
  if (pos != text.size()) throw TreeParseError("trailing input", pos);
  return t;
}

inline std::string render_tree(const Tree& t) {
  if (t.is_leaf()) return "*";
  std::string out = "(";
  for (const auto& c : t.children()) out += render_tree(c);
  out += ")";
  return out;
}

inline std::string path_label(const Path& p) {
  std::string s;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i) s += "_";
    s += std::to_string(p[i] + 1);
  }
  return s;
}

/// Graphviz description with the root drawn at the bottom.
inline std::string render_dot(const Tree& t) {
  std::ostringstream os;
  os << "digraph tree {\n  rankdir=BT;\n";
  std::function<void(const Tree&, const Path&)> walk = [&](const Tree& sub, const Path& path) {
    const std::string id = "v" + path_label(path);
    if (sub.is_leaf()) {
      os << "  \"" << id << "\" [shape=point];\n";
    } else if (sub.is_empty_node()) {
      os << "  \"" << id << "\" [shape=circle,label=\"\"];\n";
    } else {
      os << "  \"" << id << "\" [shape=circle,style=filled,label=\"\",width=0.15];\n";
    }
    for (std::size_t i = 0; i < sub.children().size(); ++i) {
      Path child = path;
      child.push_back(i);
      walk(sub.children()[i], child);
      // edges point parent -> child; rankdir=BT keeps the root at the bottom
      os << "  \"" << id << "\" -> \"v" << path_label(child) << "\";\n";
    }
  };
  walk(t, {});
  os << "}\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Leaves and grafting

inline std::vector<Path> leaf_paths(const Tree& t) {
  std::vector<Path> out;
  std::function<void(const Tree&, Path&)> walk = [&](const Tree& sub, Path& path) {
    if (sub.is_leaf()) {
      out.push_back(path);
      return;
    }
    for (std::size_t i = 0; i < sub.children().size(); ++i) {
      path.push_back(i);
      walk(sub.children()[i], path);
      path.pop_back();
    }
  };
  Path p;
  walk(t, p);
  return out;
}

/// Every vertex path in preorder (root first).
inline std::vector<Path> vertex_paths(const Tree& t) {
  std::vector<Path> out;
  std::function<void(const Tree&, Path&)> walk = [&](const Tree& sub, Path& path) {
    out.push_back(path);
    for (std::size_t i = 0; i < sub.children().size(); ++i) {
      path.push_back(i);
      walk(sub.children()[i], path);
      path.pop_back();
    }
  };
  Path p;
  walk(t, p);
  return out;
}

/// q o_i p: the root of p replaces the i-th leaf of q (1-based).
inline Tree graft(const Tree& q, std::size_t i, const Tree& p) {
  if (q.leaf_count() == 0) throw std::invalid_argument("cannot graft onto a tree without leaves");
  if (i < 1 || i > q.leaf_count()) {
    throw std::out_of_range("graft index " + std::to_string(i) + " outside 1.." + std::to_string(q.leaf_count()));
  }
  return q.replaced(leaf_paths(q)[i - 1], p);
}

/// Removes the k-th leaf (1-based). The one-leaf tree becomes the empty tree.
inline Tree remove_leaf(const Tree& t, std::size_t k) {
  if (k < 1 || k > t.leaf_count()) throw std::out_of_range("leaf index out of range");
  if (t.is_leaf()) return Tree::empty();
  const Path target = leaf_paths(t)[k - 1];
  Path parent(target.begin(), target.end() - 1);
  const Tree& par = t.at(parent);
  std::vector<Tree> kids = par.children();
  kids.erase(kids.begin() + static_cast<std::ptrdiff_t>(target.back()));
  return t.replaced(parent, Tree::node(std::move(kids)));
}

// ---------------------------------------------------------------------------
// Augmented trees and the internal vertex poset

/// Internal vertex of an augmented tree; the added output vertex is `bottom`.
struct VertexId {
  bool bottom = false;
  Path path;

  static VertexId output() { return {true, {}}; }
  static VertexId at(Path p) { return {false, std::move(p)}; }

  friend bool operator==(const VertexId&, const VertexId&) = default;
  friend auto operator<=>(const VertexId& a, const VertexId& b) {
    if (a.bottom != b.bottom) return a.bottom ? std::strong_ordering::less : std::strong_ordering::greater;
    return a.path <=> b.path;
  }
};

inline std::string to_string(const VertexId& v) {
  if (v.bottom) return "bot";
  if (v.path.empty()) return "root";
  return "v" + path_label(v.path);
}

/// Label of an input slot X_v: a run of H factors or a leaf module.
struct SlotFactor {
  enum class Kind { H, Leaf, Unit } kind = Kind::H;
  std::size_t count = 1;  // H^count, or leaf number for Kind::Leaf (1-based)
};

struct AugmentedTree {
  Tree tree;
  std::vector<VertexId> internal;  // bottom first, then paths in preorder

  /// X_v: tensor product of the labels of the non-empty incoming nodes.
  std::vector<SlotFactor> slot(const VertexId& v) const {
    std::vector<SlotFactor> out;
    auto label_of = [&](const Tree& sub, const Path& path, std::vector<SlotFactor>& acc) {
      if (sub.is_leaf()) {
        const auto leaves = leaf_paths(tree);
        const auto it = std::find(leaves.begin(), leaves.end(), path);
        acc.push_back({SlotFactor::Kind::Leaf, static_cast<std::size_t>(it - leaves.begin()) + 1});
        return;
      }
      if (sub.is_empty_node()) return;
      std::size_t incoming = 0;
      for (const auto& c : sub.children()) {
        if (!c.is_empty_node()) ++incoming;
      }
      if (!acc.empty() && acc.back().kind == SlotFactor::Kind::H) {
        acc.back().count += incoming;
      } else {
        acc.push_back({SlotFactor::Kind::H, incoming});
      }
    };
    if (v.bottom) {
      if (tree.is_empty_node()) {
        out.push_back({SlotFactor::Kind::Unit, 0});
      } else {
        label_of(tree, {}, out);
      }
      return out;
    }
    const Tree& sub = tree.at(v.path);
    for (std::size_t i = 0; i < sub.children().size(); ++i) {
      Path child = v.path;
      child.push_back(i);
      label_of(sub.children()[i], child, out);
    }
    return out;
  }
};

inline std::string render_slot(const std::vector<SlotFactor>& slot) {
  std::string s;
  for (const auto& f : slot) {
    if (!s.empty()) s += "⊗";
    switch (f.kind) {
      case SlotFactor::Kind::H: s += f.count == 1 ? "H" : "H⊗" + std::to_string(f.count); break;
      case SlotFactor::Kind::Leaf: s += "A" + std::to_string(f.count); break;
      case SlotFactor::Kind::Unit: s += "R"; break;
    }
  }
  return s.empty() ? "R" : s;
}

inline AugmentedTree augment(const Tree& p) {
  AugmentedTree out{p, {VertexId::output()}};
  for (const auto& path : vertex_paths(p)) {
    const Tree& sub = p.at(path);
    if (sub.is_node() && !sub.is_empty_node()) out.internal.push_back(VertexId::at(path));
  }
  return out;
}

class VertexPoset {
 public:
  explicit VertexPoset(std::vector<VertexId> elements) : elements_(std::move(elements)) {
    std::sort(elements_.begin(), elements_.end());
  }

  const std::vector<VertexId>& elements() const noexcept { return elements_; }

  /// a <= b when a lies on the way from b down to the output vertex.
  static bool leq(const VertexId& a, const VertexId& b) {
    if (a.bottom) return true;
    if (b.bottom) return false;
    if (a.path.size() > b.path.size()) return false;
    return std::equal(a.path.begin(), a.path.end(), b.path.begin());
  }
  static bool less(const VertexId& a, const VertexId& b) { return !(a == b) && leq(a, b); }

 private:
  std::vector<VertexId> elements_;
};

inline VertexPoset internal_poset(const AugmentedTree& t) { return VertexPoset(t.internal); }

using TotalOrdering = std::vector<VertexId>;

/// All linear extensions, in lexicographic order of the vertex sequences.
inline std::vector<TotalOrdering> linear_extensions(const VertexPoset& poset) {
  const auto& elems = poset.elements();
  std::vector<TotalOrdering> out;
  TotalOrdering current;
  std::vector<bool> used(elems.size(), false);
  std::function<void()> extend = [&] {
    if (current.size() == elems.size()) {
      out.push_back(current);
      return;
    }
    for (std::size_t i = 0; i < elems.size(); ++i) {
      if (used[i]) continue;
      bool minimal = true;
      for (std::size_t j = 0; j < elems.size() && minimal; ++j) {
        if (!used[j] && j != i && VertexPoset::less(elems[j], elems[i])) minimal = false;
      }
      if (!minimal) continue;
      used[i] = true;
      current.push_back(elems[i]);
      extend();
      current.pop_back();
      used[i] = false;
    }
  };
  extend();
  return out;
}

inline bool is_linear_extension(const VertexPoset& poset, const TotalOrdering& t) {
  auto sorted = t;
  std::sort(sorted.begin(), sorted.end());
  if (sorted != poset.elements()) return false;
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (std::size_t j = i + 1; j < t.size(); ++j) {
      if (VertexPoset::less(t[j], t[i])) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Refinement moves and morphisms

struct Move {
  enum class Kind { UnaryInsert, UnaryDelete, Contract };
  Kind kind;
  Path path;
  friend bool operator==(const Move&, const Move&) = default;
};

inline std::string to_string(const Move& m) {
  std::string k;
  switch (m.kind) {
    case Move::Kind::UnaryInsert: k = "unary-insert"; break;
    case Move::Kind::UnaryDelete: k = "unary-delete"; break;
    case Move::Kind::Contract: k = "contract"; break;
  }
  return k + "@" + (m.path.empty() ? std::string("root") : path_label(m.path));
}

inline Tree apply_move(const Tree& t, const Move& m) {
  const Tree& sub = t.at(m.path);
  switch (m.kind) {
    case Move::Kind::UnaryInsert:
      return t.replaced(m.path, Tree::node({sub}));
    case Move::Kind::UnaryDelete:
      if (!sub.is_unary()) throw std::invalid_argument("unary-delete on a vertex that is not unary");
      return t.replaced(m.path, sub.children()[0]);
    case Move::Kind::Contract: {
      if (m.path.empty()) throw std::invalid_argument("cannot contract the root edge");
      if (sub.is_leaf() || sub.is_empty_node()) throw std::invalid_argument("contract needs an internal vertex");
      Path parent(m.path.begin(), m.path.end() - 1);
      const Tree& par = t.at(parent);
      std::vector<Tree> kids;
      for (std::size_t i = 0; i < par.children().size(); ++i) {
        if (i == m.path.back()) {
          kids.insert(kids.end(), sub.children().begin(), sub.children().end());
        } else {
          kids.push_back(par.children()[i]);
        }
      }
      return t.replaced(parent, Tree::node(std::move(kids)));
    }
  }
  return t;
}

/// Deletes unary vertices (first in preorder each time); returns the moves.
inline std::pair<Tree, std::vector<Move>> strip_unary(const Tree& t) {
  Tree cur = t;
  std::vector<Move> moves;
  for (;;) {
    std::optional<Path> found;
    for (const auto& p : vertex_paths(cur)) {
      const Tree& sub = cur.at(p);
      // a unary wrapper around an empty node would turn a no-leaf tree into another one
      if (sub.is_unary() && !sub.children()[0].is_empty_node()) {
        found = p;
        break;
      }
    }
    if (!found) break;
    Move m{Move::Kind::UnaryDelete, *found};
    cur = apply_move(cur, m);
    moves.push_back(m);
  }
  return {cur, moves};
}

namespace detail {

struct Slot {
  const Tree* tree;
  Path path;  // path in the source tree
};

// Can the slots be turned into the target children by contracting internal
// vertices? Contracted source paths are appended to `contracted`.
inline bool match_children(std::vector<Slot> slots, const std::vector<Tree>& targets, std::size_t ti,
                           std::vector<Path>& contracted);

inline bool match_tree(const Tree& s, const Path& spath, const Tree& t, std::vector<Path>& contracted) {
  if (s.is_leaf() || t.is_leaf()) return s.is_leaf() && t.is_leaf();
  if (s.is_empty_node() || t.is_empty_node()) return s.is_empty_node() && t.is_empty_node();
  std::vector<Slot> slots;
  for (std::size_t i = 0; i < s.children().size(); ++i) {
    Path p = spath;
    p.push_back(i);
    slots.push_back({&s.children()[i], p});
  }
  return match_children(std::move(slots), t.children(), 0, contracted);
}

inline bool match_children(std::vector<Slot> slots, const std::vector<Tree>& targets, std::size_t ti,
                           std::vector<Path>& contracted) {
  if (slots.empty()) return ti == targets.size();
  const Slot head = slots.front();
  std::vector<Slot> rest(slots.begin() + 1, slots.end());
  if (ti < targets.size()) {
    const auto mark = contracted.size();
    if (head.tree->leaf_count() <= targets[ti].leaf_count() &&
        match_tree(*head.tree, head.path, targets[ti], contracted) &&
        match_children(rest, targets, ti + 1, contracted)) {
      return true;
    }
    contracted.resize(mark);
  }
  if (head.tree->is_node() && !head.tree->is_empty_node()) {
    const auto mark = contracted.size();
    contracted.push_back(head.path);
    std::vector<Slot> spliced;
    for (std::size_t i = 0; i < head.tree->children().size(); ++i) {
      Path p = head.path;
      p.push_back(i);
      spliced.push_back({&head.tree->children()[i], p});
    }
    spliced.insert(spliced.end(), rest.begin(), rest.end());
    if (match_children(std::move(spliced), targets, ti, contracted)) return true;
    contracted.resize(mark);
  }
  return false;
}

}  // namespace detail

/// Source paths whose incoming edges must be contracted to turn `source`
/// into `target`, ordered so each contraction leaves the remaining paths valid.
inline std::optional<std::vector<Path>> contraction_set(const Tree& source, const Tree& target) {
  if (source.leaf_count() != target.leaf_count()) return std::nullopt;
  std::vector<Path> contracted;
  if (!detail::match_tree(source, {}, target, contracted)) return std::nullopt;
  // reverse preorder: descendants and later siblings go first
  std::sort(contracted.begin(), contracted.end());
  std::reverse(contracted.begin(), contracted.end());
  return contracted;
}

struct TreeMorphism {
  Tree source;
  Tree target;
  std::vector<Move> moves;

  bool is_identity() const { return moves.empty(); }
};

/// The unique morphism source -> target: target is reachable from source by
/// unary deletions/insertions and internal-edge contractions.
inline std::optional<TreeMorphism> morphism(const Tree& source, const Tree& target) {
  if (source == target) return TreeMorphism{source, target, {}};
  if (source.leaf_count() != target.leaf_count()) return std::nullopt;
  // no-leaf trees are only related to themselves
  if (source.leaf_count() == 0) return std::nullopt;
  if (source.has_empty_node() || target.has_empty_node()) return std::nullopt;
  auto [src_norm, deletes] = strip_unary(source);
  auto [tgt_norm, tgt_deletes] = strip_unary(target);
  auto contractions = contraction_set(src_norm, tgt_norm);
  if (!contractions) return std::nullopt;
  TreeMorphism m{source, target, deletes};
  for (const auto& p : *contractions) m.moves.push_back({Move::Kind::Contract, p});
  for (auto it = tgt_deletes.rbegin(); it != tgt_deletes.rend(); ++it) {
    m.moves.push_back({Move::Kind::UnaryInsert, it->path});
  }
  return m;
}

// ---------------------------------------------------------------------------
// Enumeration

inline bool enumeration_less(const Tree& a, const Tree& b) {
  if (a.leaf_count() != b.leaf_count()) return a.leaf_count() < b.leaf_count();
  if (a.height() != b.height()) return a.height() < b.height();
  return a < b;
}

/// Trees with n leaves, no unary vertices and no empty nodes. With
/// `binary_only`, every internal vertex has exactly two children.
inline std::vector<Tree> reduced_trees(std::size_t n, bool binary_only = false) {
  if (n == 0) return {};
  std::vector<std::vector<Tree>> by_size(n + 1);
  by_size[1] = {Tree::leaf()};
  for (std::size_t m = 2; m <= n; ++m) {
    // ordered sequences of >= 2 subtrees whose sizes sum to m
    std::vector<Tree> acc;
    std::vector<Tree> current;
    std::function<void(std::size_t)> build = [&](std::size_t remaining) {
      if (remaining == 0) {
        if (current.size() >= 2 && (!binary_only || current.size() == 2)) acc.push_back(Tree::node(current));
        return;
      }
      if (binary_only && current.size() >= 2) return;
      for (std::size_t k = 1; k <= remaining; ++k) {
        if (k == m) continue;  // a single child of full size would be unary
        for (const auto& sub : by_size[k]) {
          current.push_back(sub);
          build(remaining - k);
          current.pop_back();
        }
      }
    };
    build(m);
    std::sort(acc.begin(), acc.end(), enumeration_less);
    by_size[m] = std::move(acc);
  }
  return by_size[n];
}

/// Trees p with the leaf count of q, no unary vertices, height <= n-1 (for
/// n >= 2), and a morphism p -> q.
inline std::vector<Tree> enumerate_refining_trees(const Tree& q) {
  const std::size_t n = q.leaf_count();
  if (n == 0) throw std::invalid_argument("refining trees need at least one leaf");
  std::vector<Tree> out;
  for (const auto& p : reduced_trees(n)) {
    if (n >= 2 && p.height() > n - 1) continue;
    if (morphism(p, q)) out.push_back(p);
  }
  std::sort(out.begin(), out.end(), enumeration_less);
  return out;
}

/// The left comb < <<*,*>,*> ..., *> with n >= 2 leaves.
inline Tree left_comb(std::size_t n) {
  if (n == 0) return Tree::empty();
  Tree t = Tree::leaf();
  for (std::size_t k = 1; k < n; ++k) t = Tree::node({t, Tree::leaf()});
  return t;
}

}  // namespace rmc
