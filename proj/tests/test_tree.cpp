#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "rmc/tree.hpp"
#include "tree_gen.hpp"

using namespace rmc;

namespace {

// Full binary shapes by repeated grafting of the cherry, deduplicated by text.
std::set<std::string> binary_by_grafting(std::size_t n) {
  std::set<std::string> level = {"*"};
  for (std::size_t k = 1; k < n; ++k) {
    std::set<std::string> next;
    for (const auto& s : level) {
      const Tree t = parse_tree(s);
      for (std::size_t i = 1; i <= t.leaf_count(); ++i) next.insert(render_tree(graft(t, i, Tree::corolla(2))));
    }
    level = std::move(next);
  }
  return level;
}

// Reduced shapes by grafting corollas of arity >= 2.
std::set<std::string> reduced_by_grafting(std::size_t n) {
  std::set<std::string> all = {"*"};
  std::set<std::string> frontier = all;
  while (!frontier.empty()) {
    std::set<std::string> next;
    for (const auto& s : frontier) {
      const Tree t = parse_tree(s);
      for (std::size_t a = 2; t.leaf_count() + a - 1 <= n; ++a) {
        for (std::size_t i = 1; i <= t.leaf_count(); ++i) {
          auto r = render_tree(graft(t, i, Tree::corolla(a)));
          if (all.insert(r).second) next.insert(r);
        }
      }
    }
    frontier = std::move(next);
  }
  std::set<std::string> out;
  for (const auto& s : all) {
    if (parse_tree(s).leaf_count() == n) out.insert(s);
  }
  return out;
}

// Number of subsets of internal non-root vertices of q whose contraction gives p.
std::size_t contraction_subsets(const Tree& q, const Tree& p) {
  std::vector<Path> internal;
  for (const auto& path : vertex_paths(q)) {
    if (!path.empty() && q.at(path).is_node()) internal.push_back(path);
  }
  std::size_t hits = 0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << internal.size()); ++mask) {
    std::vector<Path> chosen;
    for (std::size_t b = 0; b < internal.size(); ++b) {
      if (mask >> b & 1) chosen.push_back(internal[b]);
    }
    std::sort(chosen.rbegin(), chosen.rend());
    Tree cur = q;
    for (const auto& c : chosen) cur = apply_move(cur, {Move::Kind::Contract, c});
    if (cur == p) ++hits;
  }
  return hits;
}

}  // namespace

TEST(TreeParse, Basics) {
  EXPECT_TRUE(parse_tree("*").is_leaf());
  const Tree e = parse_tree("()");
  EXPECT_TRUE(e.is_empty_node());
  EXPECT_EQ(e.leaf_count(), 0u);
  const Tree t = parse_tree(" ( (* *) * ) ");
  EXPECT_EQ(t.leaf_count(), 3u);
  EXPECT_EQ(render_tree(t), "((**)*)");
  EXPECT_EQ(parse_tree("(()())").leaf_count(), 0u);
}

TEST(TreeParse, ErrorsCarryOffsets) {
  try {
    parse_tree("((**)");
    FAIL();
  } catch (const TreeParseError& e) {
    EXPECT_EQ(e.offset(), 5u);
  }
  EXPECT_THROW(parse_tree("(*x)"), TreeParseError);
  EXPECT_THROW(parse_tree("*)"), TreeParseError);
  EXPECT_THROW(parse_tree(""), TreeParseError);
}

TEST(TreeParse, RoundTripRandom) {
  std::mt19937 rng(11);
  for (int i = 0; i < 1000; ++i) {
    const Tree t = testing_support::random_tree(rng, 4);
    EXPECT_EQ(parse_tree(render_tree(t)), t);
  }
}

TEST(TreeShape, FlatAndHeight) {
  EXPECT_TRUE(Tree::corolla(4).is_flat());
  EXPECT_FALSE(parse_tree("((**)*)").is_flat());
  EXPECT_EQ(parse_tree("((**)*)").height(), 2u);
  EXPECT_EQ(Tree::leaf().height(), 0u);
}

TEST(TreeDot, RootAtBottom) {
  const auto dot = render_dot(parse_tree("((**)*)"));
  EXPECT_NE(dot.find("rankdir=BT"), std::string::npos);
  EXPECT_NE(dot.find("shape=point"), std::string::npos);
  EXPECT_EQ(std::count(dot.begin(), dot.end(), '>'), 4);
}

TEST(Graft, Examples) {
  const Tree p = parse_tree("((**)(*()))");
  EXPECT_EQ(graft(Tree::leaf(), 1, p), p);
  EXPECT_EQ(graft(Tree::corolla(2), 1, Tree::corolla(2)), parse_tree("((**)*)"));
  EXPECT_THROW(graft(Tree::corolla(2), 3, p), std::out_of_range);
  EXPECT_THROW(graft(Tree::empty(), 1, p), std::invalid_argument);
}

TEST(Graft, LeafCountLaw) {
  std::mt19937 rng(5);
  for (int k = 0; k < 1000; ++k) {
    const Tree q = testing_support::random_tree_with_leaves(rng, 4);
    const Tree p = testing_support::random_tree(rng, 3);
    std::uniform_int_distribution<std::size_t> pick(1, q.leaf_count());
    EXPECT_EQ(graft(q, pick(rng), p).leaf_count(), q.leaf_count() + p.leaf_count() - 1);
  }
}

TEST(Graft, Associativity) {
  std::mt19937 rng(9);
  for (int k = 0; k < 500; ++k) {
    const Tree r = testing_support::random_tree_with_leaves(rng, 3);
    const Tree q = testing_support::random_tree_with_leaves(rng, 3);
    const Tree p = testing_support::random_tree(rng, 3);
    const std::size_t j = std::uniform_int_distribution<std::size_t>(1, r.leaf_count())(rng);
    const std::size_t i = std::uniform_int_distribution<std::size_t>(1, q.leaf_count())(rng);
    // leaf i of q is leaf j-1+i of r o_j q
    EXPECT_EQ(graft(graft(r, j, q), j - 1 + i, p), graft(r, j, graft(q, i, p)));
  }
}

TEST(RemoveLeaf, Cases) {
  EXPECT_EQ(remove_leaf(Tree::leaf(), 1), Tree::empty());
  EXPECT_EQ(remove_leaf(parse_tree("(*)"), 1), Tree::empty());
  EXPECT_EQ(remove_leaf(parse_tree("((**)*)"), 2), parse_tree("((*)*)"));
  EXPECT_EQ(remove_leaf(Tree::corolla(2), 1), parse_tree("(*)"));
}

TEST(Augment, Labels) {
  const auto a = augment(Tree::leaf());
  ASSERT_EQ(a.internal.size(), 1u);
  EXPECT_EQ(render_slot(a.slot(VertexId::output())), "A1");
  const auto b = augment(Tree::corolla(2));
  ASSERT_EQ(b.internal.size(), 2u);
  EXPECT_EQ(render_slot(b.slot(VertexId::output())), "H⊗2");
  EXPECT_EQ(render_slot(b.slot(VertexId::at({}))), "A1⊗A2");
  const auto e = augment(Tree::empty());
  EXPECT_EQ(e.internal.size(), 1u);
  EXPECT_EQ(render_slot(e.slot(VertexId::output())), "R");
  const auto c = augment(parse_tree("((**)*)"));
  EXPECT_EQ(render_slot(c.slot(VertexId::at({}))), "H⊗2⊗A3");
}

TEST(Poset, ChainsAndAntichains) {
  const auto chain = internal_poset(augment(parse_tree("((**)*)")));
  ASSERT_EQ(chain.elements().size(), 3u);
  EXPECT_EQ(linear_extensions(chain).size(), 1u);
  EXPECT_EQ(linear_extensions(internal_poset(augment(Tree::corolla(5)))).size(), 1u);

  const auto dbl = internal_poset(augment(parse_tree("((**)(**))")));
  const auto ext = linear_extensions(dbl);
  ASSERT_EQ(ext.size(), 2u);
  for (const auto& t : ext) {
    EXPECT_TRUE(t[0].bottom);
    EXPECT_EQ(t[1], VertexId::at({}));
  }
  EXPECT_LT(ext[0], ext[1]);
}

TEST(Poset, PartialOrderAxiomsAndRootMinimum) {
  const auto poset = internal_poset(augment(parse_tree("(((**)*)(**)*)")));
  const auto& el = poset.elements();
  for (const auto& a : el) {
    EXPECT_TRUE(VertexPoset::leq(VertexId::output(), a));
    EXPECT_TRUE(VertexPoset::leq(a, a));
    if (!a.bottom) EXPECT_TRUE(VertexPoset::leq(VertexId::at({}), a));
    for (const auto& b : el) {
      if (VertexPoset::leq(a, b) && VertexPoset::leq(b, a)) EXPECT_EQ(a, b);
      for (const auto& c : el) {
        if (VertexPoset::leq(a, b) && VertexPoset::leq(b, c)) EXPECT_TRUE(VertexPoset::leq(a, c));
      }
    }
  }
}

TEST(Poset, ExtensionsMatchPermutationFilter) {
  // three incomparable cherries above the root
  const auto poset = internal_poset(augment(parse_tree("((**)(**)(**))")));
  auto perm = poset.elements();
  std::size_t brute = 0;
  do {
    if (is_linear_extension(poset, perm)) ++brute;
  } while (std::next_permutation(perm.begin(), perm.end()));
  EXPECT_EQ(brute, 6u);
  EXPECT_EQ(linear_extensions(poset).size(), brute);
}

TEST(Morphism, Examples) {
  const Tree t = parse_tree("((**)*)");
  const auto id = morphism(t, t);
  ASSERT_TRUE(id);
  EXPECT_TRUE(id->is_identity());

  const auto c = morphism(t, Tree::corolla(3));
  ASSERT_TRUE(c);
  ASSERT_EQ(c->moves.size(), 1u);
  EXPECT_EQ(c->moves[0].kind, Move::Kind::Contract);

  const auto u = morphism(parse_tree("(*)"), Tree::leaf());
  ASSERT_TRUE(u);
  EXPECT_EQ(u->moves.size(), 1u);
  EXPECT_EQ(u->moves[0].kind, Move::Kind::UnaryDelete);

  EXPECT_TRUE(morphism(Tree::leaf(), parse_tree("((*))")));
  EXPECT_FALSE(morphism(Tree::corolla(3), t));
  EXPECT_FALSE(morphism(Tree::empty(), parse_tree("(()())")));
  EXPECT_FALSE(morphism(parse_tree("((**)*)"), parse_tree("(*(**))")));
}

TEST(Morphism, MovesReachTarget) {
  std::vector<Tree> trees;
  for (std::size_t n = 1; n <= 4; ++n) {
    for (const auto& t : reduced_trees(n)) {
      trees.push_back(t);
      trees.push_back(Tree::node({t}));
      if (t.is_node()) trees.push_back(t.replaced({0}, Tree::node({t.children()[0]})));
    }
  }
  for (const auto& q : trees) {
    for (const auto& p : trees) {
      const auto m = morphism(q, p);
      if (!m) continue;
      Tree cur = q;
      for (const auto& mv : m->moves) cur = apply_move(cur, mv);
      EXPECT_EQ(cur, p) << render_tree(q) << " -> " << render_tree(p);
    }
  }
}

TEST(Morphism, UniquenessAgainstSubsetOracle) {
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto trees = reduced_trees(n);
    for (const auto& q : trees) {
      for (const auto& p : trees) {
        const std::size_t hits = contraction_subsets(q, p);
        EXPECT_LE(hits, 1u);
        EXPECT_EQ(hits == 1, morphism(q, p).has_value()) << render_tree(q) << " -> " << render_tree(p);
      }
    }
  }
}

TEST(Enumerate, BinaryCountsAgainstGraftingOracle) {
  const std::size_t catalan[] = {1, 1, 2, 5, 14};
  for (std::size_t n = 1; n <= 5; ++n) {
    const auto oracle = binary_by_grafting(n);
    EXPECT_EQ(oracle.size(), catalan[n - 1]);
    std::set<std::string> ours;
    for (const auto& t : reduced_trees(n, true)) ours.insert(render_tree(t));
    EXPECT_EQ(ours, oracle);
  }
}

TEST(Enumerate, ReducedAgainstGraftingOracle) {
  for (std::size_t n = 1; n <= 5; ++n) {
    std::set<std::string> ours;
    for (const auto& t : reduced_trees(n)) ours.insert(render_tree(t));
    EXPECT_EQ(ours, reduced_by_grafting(n));
  }
  EXPECT_EQ(reduced_trees(4).size(), 11u);
}

TEST(Enumerate, RefiningTrees) {
  EXPECT_EQ(enumerate_refining_trees(Tree::corolla(2)), std::vector<Tree>{Tree::corolla(2)});
  const auto three = enumerate_refining_trees(Tree::corolla(3));
  ASSERT_EQ(three.size(), 3u);
  EXPECT_EQ(three[0], Tree::corolla(3));
  const auto four = enumerate_refining_trees(Tree::corolla(4));
  EXPECT_EQ(four.size(), 11u);
  EXPECT_EQ(std::count_if(four.begin(), four.end(), [](const Tree& t) { return t.is_binary(); }), 5);
  for (std::size_t i = 1; i < four.size(); ++i) EXPECT_TRUE(enumeration_less(four[i - 1], four[i]));
  const auto sub = enumerate_refining_trees(parse_tree("((**)**)"));
  EXPECT_EQ(sub.size(), 3u);  // itself, and both ways of splitting the ternary root
}
