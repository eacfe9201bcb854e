#pragma once

// The `rmc` command line: trees, hopf, series, multi, algebra, verify.
// Exit codes: 0 success, 1 verification failure, 2 usage or parse error.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "rmc/io.hpp"
#include "rmc/verify.hpp"

namespace rmc::cli {

enum Exit { kOk = 0, kFailed = 1, kUsage = 2 };

struct Config {
  std::size_t degree = 4;        // module degree bound for Q[u] inputs
  int ceiling = 6;               // series total-degree ceiling N
  int laurent_depth = 8;         // M
  std::size_t invariance_degree = 6;
  std::string format = "text";   // text | json | dot
  unsigned seed = 7;
  std::string output;            // write results here instead of stdout

  MultiConfig multi() const { return {{ceiling, laurent_depth}, invariance_degree}; }
};

/// A failed verification; the message is the witness.
class Failure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

using io::Json;

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

inline Tree tree_arg(const std::string& s) { return parse_tree(s); }

inline std::string ordering_text(const TotalOrdering& t) {
  std::string s;
  for (const auto& v : t) s += (s.empty() ? "" : " < ") + to_string(v);
  return s;
}

inline std::string join(const std::vector<std::string>& v, const std::string& sep) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : sep) + x;
  return s;
}

struct Context {
  Config cfg;
  std::ostream& out;
  bool json() const { return cfg.format == "json"; }
  void emit(const Json& j) const { out << j.dump(2) << "\n"; }
};

// ---------------------------------------------------------------------------
// trees

inline int trees_parse(const Context& c, const std::string& text) {
  const Tree t = tree_arg(text);
  if (c.cfg.format == "dot") {
    c.out << render_dot(t);
  } else if (c.json()) {
    c.emit({{"tree", render_tree(t)}, {"leaves", t.leaf_count()}, {"height", t.height()}, {"binary", t.is_binary()},
            {"flat", t.is_flat()}});
  } else {
    c.out << render_tree(t) << "\nleaves: " << t.leaf_count() << "\nheight: " << t.height() << "\n";
  }
  return kOk;
}

inline int trees_list(const Context& c, const std::vector<Tree>& trees) {
  if (c.json()) {
    Json a = Json::array();
    for (const auto& t : trees) a.push_back(render_tree(t));
    c.emit(a);
  } else {
    for (const auto& t : trees) c.out << render_tree(t) << "\n";
  }
  return kOk;
}

inline int trees_extensions(const Context& c, const std::string& text) {
  const Tree t = tree_arg(text);
  const auto shapes = ord_shapes(t);
  if (c.json()) {
    Json a = Json::array();
    for (const auto& s : shapes) {
      a.push_back({{"ordering", ordering_text(s.ordering)}, {"ord", s.formula}, {"induced_order", s.induced_order}});
    }
    c.emit(a);
    return kOk;
  }
  for (std::size_t k = 0; k < shapes.size(); ++k) {
    const auto& s = shapes[k];
    c.out << "t" << k + 1 << ": " << ordering_text(s.ordering) << "\n  Ord = " << s.formula
          << "\n  expansion order: " << join(s.induced_order, ",") << "\n";
  }
  return kOk;
}

inline int trees_morphism(const Context& c, const std::string& from, const std::string& to) {
  const auto m = morphism(tree_arg(from), tree_arg(to));
  if (!m) throw Failure("no morphism " + from + " -> " + to);
  std::vector<std::string> moves;
  for (const auto& mv : m->moves) moves.push_back(to_string(mv));
  if (c.json()) {
    c.emit({{"source", render_tree(m->source)}, {"target", render_tree(m->target)}, {"moves", moves}});
  } else {
    c.out << render_tree(m->source) << " -> " << render_tree(m->target) << ": "
          << (moves.empty() ? std::string("identity") : join(moves, ", ")) << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// hopf

inline int hopf_check(const Context& c, std::size_t degree) {
  const HopfReport r = hopf_axiom_report(degree);
  if (c.json()) {
    Json a = Json::array();
    for (const auto& l : r.laws) a.push_back({{"law", l.law}, {"passed", l.passed}, {"witness", l.witness}});
    c.emit({{"max_degree", degree}, {"laws", a}});
  } else {
    for (const auto& l : r.laws) {
      c.out << (l.passed ? "ok   " : "FAIL ") << l.law << (l.passed ? "" : " at " + l.witness) << "\n";
    }
  }
  return r.all_passed() ? kOk : kFailed;
}

inline int hopf_act(const Context& c, const std::string& h, const std::string& k) {
  const KElem out = act_on_k(parse_h(h), parse_k(k));
  if (c.json()) {
    c.emit({{"h", format_h(parse_h(h))}, {"k", format_k(parse_k(k))}, {"result", format_k(out)}});
  } else {
    c.out << format_k(out) << "\n";
  }
  return kOk;
}

inline int hopf_antipode(const Context& c, const std::string& h, const std::string& k) {
  if (!h.empty()) c.out << format_h(antipode_h(parse_h(h))) << "\n";
  if (!k.empty()) c.out << format_k(antipode_k(parse_k(k))) << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// series

inline SingularSeries series_arg(const Context& c, const std::string& text, const std::string& input) {
  if (!input.empty()) {
    const Json j = io::read_json_file(input);
    return io::series_of(j, ModuleRef::scalars(), scalars_module().get(), c.cfg.multi().window);
  }
  if (text.empty()) throw io::FormatError("give a series with --series or --input");
  return io::parse_series(text, {}, c.cfg.multi().window);
}

// scalar series print without a basis suffix
inline std::string scalar_text(const SingularSeries& s) {
  if (s.is_zero()) return "0";
  std::string out;
  for (const auto& [k, c] : s.terms()) {
    std::string t = format_term(k, c);
    if (k.basis == 0) t.erase(t.rfind(" ["));
    out += (out.empty() ? "" : "\n") + t;
  }
  return out;
}

inline void show_series(const Context& c, const SingularSeries& s) {
  if (c.json()) {
    c.emit(io::series_json(s, scalars_module().get()));
  } else {
    c.out << scalar_text(s) << "\n";
    if (s.reliability().degree_through) c.out << "exact through degree " << *s.reliability().degree_through << "\n";
    for (const auto& [o, w] : s.reliability().weight_through) {
      c.out << "exact through weight " << w << " in order " << join(o, ",") << "\n";
    }
  }
}

inline int series_expand(const Context& c, const SingularSeries& s, const std::string& order) {
  show_series(c, expand(s, split(order, ',')));
  return kOk;
}

inline int series_agree(const Context& c, const SingularSeries& a, const SingularSeries& b, const std::string& orders) {
  std::vector<ExpansionOrder> os;
  for (const auto& o : split(orders, ';')) os.push_back(split(o, ','));
  if (os.empty()) {
    std::set<Variable> vars = a.variables();
    vars.insert(b.variables().begin(), b.variables().end());
    ExpansionOrder o(vars.begin(), vars.end());
    do {
      os.push_back(o);
    } while (std::next_permutation(o.begin(), o.end()));
  }
  SingularSeries aa = a, bb = b;
  std::set<Variable> vars = a.variables();
  vars.insert(b.variables().begin(), b.variables().end());
  aa.set_variables(vars);
  bb.set_variables(vars);
  const AgreementResult r = agree_after_expansion(aa, bb, os);
  if (!r.agree) {
    std::string where = r.order ? join(*r.order, ",") : "?";
    std::string what = "?";
    if (r.witness) {
      SingularSeries w = SingularSeries::scalar({});
      w.add_known_key(r.witness->key, r.witness->coeff);
      what = scalar_text(w);
    }
    throw Failure("expansions differ in order " + where + " at " + what);
  }
  if (c.json()) {
    c.emit({{"agree", true}, {"orders", os.size()}});
  } else {
    c.out << "agree in " << os.size() << " order" << (os.size() == 1 ? "" : "s") << "\n";
  }
  return kOk;
}

inline int series_act(const Context& c, const SingularSeries& s, const std::string& h, const std::string& var) {
  show_series(c, act_variable(parse_h(h), var, s));
  return kOk;
}

// ---------------------------------------------------------------------------
// multi

inline MultiMap multimap_arg(const Context& c, const std::string& path) {
  return io::multimap_of(io::read_json_file(path), c.cfg.multi());
}

inline void show_multimap(const Context& c, const MultiMap& m) {
  if (c.json()) {
    c.emit(io::multimap_json(m));
    return;
  }
  c.out << "tree " << render_tree(m.tree()) << "\n";
  for (const auto& [t, s] : m.table()) {
    c.out << tuple_label(m.shape(), t) << ":\n";
    std::istringstream lines(format_series(s, m.shape().root->basis()));
    for (std::string line; std::getline(lines, line);) c.out << "  " << line << "\n";
  }
}

inline int multi_check(const Context& c, const std::string& path) {
  const MultiMap m = multimap_arg(c, path);
  const InvarianceReport inv = full_invariance_filter(m);
  if (!inv) throw Failure("invariance: " + inv.witness);
  if (c.json()) {
    c.emit({{"member", true}, {"tree", render_tree(m.tree())}, {"entries", m.table().size()}});
  } else {
    c.out << "member of Multi_" << render_tree(m.tree()) << " (" << m.table().size() << " entries, "
          << required_orders(m.tree()).size() << " expansion orders)\n";
  }
  return kOk;
}

inline int write_or_show(const Context& c, const MultiMap& m) {
  show_multimap(c, m);
  return kOk;
}

inline int multi_invariance(const Context& c, const std::string& path) {
  // membership without the declared flags, then the flags one by one
  Json j = io::read_json_file(path);
  const MultiMap m = io::multimap_of(j, c.cfg.multi());
  const InvarianceReport r = full_invariance_filter(m);
  if (c.json()) {
    c.emit({{"invariant", r.ok}, {"witness", r.witness}});
  } else {
    c.out << (r.ok ? "invariant at every declared leaf and at the root" : "not invariant: " + r.witness) << "\n";
  }
  return r.ok ? kOk : kFailed;
}

// ---------------------------------------------------------------------------
// algebra

inline AlgebraStructure algebra_arg(const Context& c, const std::string& example, const std::string& input) {
  if (!input.empty()) return io::algebra_of(io::read_json_file(input), c.cfg.degree, c.cfg.multi());
  return io::example_algebra(example, c.cfg.degree, c.cfg.multi());
}

inline int report_algebra(const Context& c, const AlgebraReport& r, bool verbose) {
  std::map<std::string, std::pair<std::size_t, std::size_t>> tally;  // passed, total
  for (const auto& e : r.entries) {
    auto& [p, n] = tally[e.axiom];
    ++n;
    if (e.passed) ++p;
  }
  if (c.json()) {
    Json entries = Json::array();
    for (const auto& e : r.entries) {
      if (!verbose && e.passed) continue;
      entries.push_back({{"axiom", e.axiom}, {"tree", e.tree}, {"detail", e.detail}, {"passed", e.passed}, {"witness", e.witness}});
    }
    Json axioms = Json::object();
    for (const auto& [a, pn] : tally) axioms[a] = {{"passed", pn.first}, {"total", pn.second}};
    c.emit({{"max_leaves", r.max_leaves}, {"axioms", axioms}, {"entries", entries}, {"passed", r.all_passed()}});
  } else {
    for (const auto& [a, pn] : tally) {
      c.out << (pn.first == pn.second ? "ok   " : "FAIL ") << a << ": " << pn.first << "/" << pn.second << "\n";
    }
    for (const auto& e : r.entries) {
      if (e.passed && !verbose) continue;
      c.out << "  " << (e.passed ? "ok   " : "FAIL ") << e.axiom << " " << e.tree << " " << e.detail
            << (e.passed ? "" : ": " + e.witness) << "\n";
    }
  }
  return r.all_passed() ? kOk : kFailed;
}

inline int algebra_check(const Context& c, const AlgebraStructure& a, std::size_t max_leaves, bool verbose) {
  return report_algebra(c, check_algebra(a, max_leaves), verbose);
}

inline int algebra_ope(const Context& c, const AlgebraStructure& a, const std::string& x, const std::string& y) {
  const ModulePtr b = a.algebra().module(1);
  const auto terms = ope_extract(a, io::basis_of(*b, x), io::basis_of(*b, y));
  const auto& names = a.algebra().module(2)->basis();
  if (c.json()) {
    Json arr = Json::array();
    for (const auto& t : terms) arr.push_back({{"pole_order", t.pole_order}, {"coefficient", io::series_json(t.coefficient, a.algebra().module(2).get())}});
    c.emit({{"a", x}, {"b", y}, {"w", "x1 - x2"}, {"terms", arr}});
    return kOk;
  }
  c.out << "f2(" << x << ", " << y << ") at x1 = x2 + w\n";
  if (terms.empty()) c.out << "0\n";
  for (const auto& t : terms) {
    c.out << (t.pole_order == 0 ? std::string("regular part") : "w^-" + std::to_string(t.pole_order)) << ":\n";
    std::istringstream lines(format_series(t.coefficient, names));
    for (std::string line; std::getline(lines, line);) c.out << "  " << line << "\n";
  }
  return kOk;
}

inline int algebra_demo(const Context& c, const AlgebraStructure& a, std::size_t max_leaves) {
  const MultiMap f2 = a.f2();
  const auto& basis = a.algebra().module(1)->basis();
  if (!c.json()) {
    c.out << "algebra " << a.algebra().name() << ", inputs " << join(basis, " ") << "\n";
    if (basis.size() > 1) {
      c.out << "f2(" << basis[1] << ", " << basis[1] << "):\n";
      std::istringstream lines(format_series(f2.at({1, 1}), f2.shape().root->basis()));
      for (std::string line; std::getline(lines, line);) c.out << "  " << line << "\n";
    }
    c.out << "axioms on trees with <= " << max_leaves << " leaves:\n";
  }
  return algebra_check(c, a, max_leaves, false);
}

// ---------------------------------------------------------------------------
// verify

inline int run_verify(const Context& c, const std::string& suite, std::size_t max_leaves, bool timings) {
  verify::Options opt;
  opt.seed = c.cfg.seed;
  opt.max_leaves = max_leaves;
  opt.degree = c.cfg.degree;
  opt.config = c.cfg.multi();
  std::vector<std::string> names;
  if (suite == "all") {
    names = verify::suite_names();
  } else {
    names = split(suite, ',');
    for (const auto& n : names) {
      const auto& known = verify::suite_names();
      if (std::find(known.begin(), known.end(), n) == known.end()) {
        throw io::FormatError("unknown suite '" + n + "' (all, " + join(known, ", ") + ")");
      }
    }
  }
  bool ok = true;
  Json all = Json::array();
  for (const auto& n : names) {
    const verify::SuiteReport r = verify::run_suite(n, opt);
    ok = ok && r.passed();
    if (c.json()) {
      Json checks = Json::array();
      for (const auto& ch : r.checks) {
        Json j{{"check", ch.name}, {"cases", ch.cases}, {"passed", ch.passed}};
        if (!ch.passed) {
          j["witness"] = ch.witness;
          if (!ch.reproduce.empty()) j["reproduce"] = ch.reproduce;
        }
        checks.push_back(j);
      }
      Json sj{{"suite", r.suite}, {"passed", r.passed()}, {"checks", checks}};
      if (timings) sj["seconds"] = r.seconds;
      all.push_back(sj);
      continue;
    }
    c.out << "[" << r.suite << "]";
    if (timings) c.out << " " << r.seconds << " s";
    c.out << "\n";
    for (const auto& ch : r.checks) {
      c.out << (ch.passed ? "PASS " : "FAIL ") << ch.name << " (" << ch.cases << " cases)\n";
      if (!ch.passed) {
        c.out << "     witness: " << ch.witness << "\n";
        if (!ch.reproduce.empty()) c.out << "     reproduce: " << ch.reproduce << "\n";
      }
    }
  }
  if (c.json()) {
    c.emit({{"seed", c.cfg.seed}, {"passed", ok}, {"suites", all}});
  } else {
    c.out << (ok ? "all checks passed" : "some checks FAILED") << " (seed " << c.cfg.seed << ")\n";
  }
  return ok ? kOk : kFailed;
}

}  // namespace detail

/// Runs one command. Results go to `out`, diagnostics to `err`.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Config cfg;
  CLI::App app{"Relaxed multicategory calculus over exact rationals", "rmc"};
  // --h names an H element, so help is --help only
  app.set_help_flag("--help", "print this help and exit");
  app.set_help_all_flag("--help-all", "help for every subcommand");
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--degree", cfg.degree, "module degree bound per input")->envname("RMC_DEGREE")->capture_default_str();
  app.add_option("--ceiling", cfg.ceiling, "series total-degree ceiling N")->envname("RMC_CEILING")->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  app.add_option("--laurent-depth", cfg.laurent_depth, "largest pole order M")->envname("RMC_LAURENT_DEPTH")
      ->capture_default_str()->check(CLI::NonNegativeNumber);
  app.add_option("--invariance-degree", cfg.invariance_degree, "D(i) checked up to this degree")
      ->envname("RMC_INVARIANCE_DEGREE")->capture_default_str();
  app.add_option("--format", cfg.format, "output format")->envname("RMC_FORMAT")->capture_default_str()
      ->check(CLI::IsMember({"text", "json", "dot"}));
  app.add_option("--seed", cfg.seed, "seed for the property suites")->envname("RMC_SEED")->capture_default_str();
  app.add_option("--output", cfg.output, "write results to this file");

  std::function<int(const detail::Context&)> action;
  auto set = [&](CLI::App* sub, std::function<int(const detail::Context&)> f) {
    sub->callback([&action, f = std::move(f)] { action = f; });
  };

  // trees
  auto* trees = app.add_subcommand("trees", "tree parsing, grafting and enumeration");
  trees->require_subcommand(1);
  std::string tree_a, tree_b;
  std::size_t at = 1, leaves = 3;
  bool binary = false;
  auto* t_parse = trees->add_subcommand("parse", "canonical form and leaf count");
  t_parse->add_option("tree", tree_a, "tree text, e.g. ((**)*)")->required();
  set(t_parse, [&](const detail::Context& c) { return detail::trees_parse(c, tree_a); });
  auto* t_graft = trees->add_subcommand("graft", "graft the second tree onto leaf --at of the first");
  t_graft->add_option("outer", tree_a)->required();
  t_graft->add_option("inner", tree_b)->required();
  t_graft->add_option("--at", at, "leaf, counted from 1")->required();
  set(t_graft, [&](const detail::Context& c) {
    return detail::trees_list(c, {graft(detail::tree_arg(tree_a), at, detail::tree_arg(tree_b))});
  });
  auto* t_ref = trees->add_subcommand("refinements", "reduced trees mapping to the given one");
  t_ref->add_option("tree", tree_a)->required();
  set(t_ref, [&](const detail::Context& c) { return detail::trees_list(c, enumerate_refining_trees(detail::tree_arg(tree_a))); });
  auto* t_ext = trees->add_subcommand("extensions", "linear extensions and their Ord shapes");
  t_ext->add_option("tree", tree_a)->required();
  set(t_ext, [&](const detail::Context& c) { return detail::trees_extensions(c, tree_a); });
  auto* t_dot = trees->add_subcommand("dot", "Graphviz rendering");
  t_dot->add_option("tree", tree_a)->required();
  set(t_dot, [&](const detail::Context& c) {
    c.out << render_dot(detail::tree_arg(tree_a));
    return int(kOk);
  });
  auto* t_enum = trees->add_subcommand("enumerate", "trees without unary vertices");
  t_enum->add_option("--leaves", leaves)->capture_default_str();
  t_enum->add_flag("--binary", binary);
  set(t_enum, [&](const detail::Context& c) { return detail::trees_list(c, reduced_trees(leaves, binary)); });
  auto* t_mor = trees->add_subcommand("morphism", "the morphism between two trees, as moves");
  t_mor->add_option("source", tree_a)->required();
  t_mor->add_option("target", tree_b)->required();
  set(t_mor, [&](const detail::Context& c) { return detail::trees_morphism(c, tree_a, tree_b); });

  // hopf
  auto* hopf = app.add_subcommand("hopf", "divided-power Hopf algebra and its action on K");
  hopf->require_subcommand(1);
  std::size_t max_degree = 6;
  std::string h_text, k_text;
  auto* h_check = hopf->add_subcommand("check", "Hopf axioms on generators");
  h_check->add_option("--max-degree", max_degree)->capture_default_str();
  set(h_check, [&](const detail::Context& c) { return detail::hopf_check(c, max_degree); });
  auto* h_act = hopf->add_subcommand("act", "h acting on k, e.g. --h D2 --k x^3");
  h_act->add_option("--h", h_text)->required();
  h_act->add_option("--k", k_text)->required();
  set(h_act, [&](const detail::Context& c) { return detail::hopf_act(c, h_text, k_text); });
  auto* h_anti = hopf->add_subcommand("antipode", "antipode of --h and/or --k");
  h_anti->add_option("--h", h_text);
  h_anti->add_option("--k", k_text);
  set(h_anti, [&](const detail::Context& c) { return detail::hopf_antipode(c, h_text, k_text); });

  // series
  auto* series = app.add_subcommand("series", "singular series: expansion, agreement, H-action");
  series->require_subcommand(1);
  std::string s_text, s_text2, s_input, order, orders, var;
  auto* s_exp = series->add_subcommand("expand", "expand the poles in a variable order");
  s_exp->add_option("--series", s_text, "e.g. \"(x-y)^-1\"");
  s_exp->add_option("--input", s_input, "series JSON");
  s_exp->add_option("--order", order, "comma separated, most dominant first")->required();
  set(s_exp, [&](const detail::Context& c) { return detail::series_expand(c, detail::series_arg(c, s_text, s_input), order); });
  auto* s_agree = series->add_subcommand("agree", "compare two series after expansion");
  s_agree->add_option("--a", s_text)->required();
  s_agree->add_option("--b", s_text2)->required();
  s_agree->add_option("--orders", orders, "orders separated by ';' (default: all)");
  set(s_agree, [&](const detail::Context& c) {
    return detail::series_agree(c, detail::series_arg(c, s_text, ""), detail::series_arg(c, s_text2, ""), orders);
  });
  auto* s_act = series->add_subcommand("act", "act by h in one variable");
  s_act->add_option("--h", h_text)->required();
  s_act->add_option("--var", var)->required();
  s_act->add_option("--series", s_text);
  s_act->add_option("--input", s_input);
  set(s_act, [&](const detail::Context& c) { return detail::series_act(c, detail::series_arg(c, s_text, s_input), h_text, var); });

  // multi
  auto* multi = app.add_subcommand("multi", "multimaps: membership, composition, refinement");
  multi->require_subcommand(1);
  std::string m_input, m_with, m_to;
  auto* m_check = multi->add_subcommand("check", "membership and invariance");
  m_check->add_option("--input", m_input)->required();
  set(m_check, [&](const detail::Context& c) { return detail::multi_check(c, m_input); });
  auto* m_comp = multi->add_subcommand("compose", "feed --with into leaf --at of --input");
  m_comp->add_option("--input", m_input)->required();
  m_comp->add_option("--with", m_with)->required();
  m_comp->add_option("--at", at)->required();
  set(m_comp, [&](const detail::Context& c) {
    return detail::write_or_show(c, compose(detail::multimap_arg(c, m_input), at, detail::multimap_arg(c, m_with)));
  });
  auto* m_ref = multi->add_subcommand("refine", "pull back along a tree morphism");
  m_ref->add_option("--input", m_input)->required();
  m_ref->add_option("--to", m_to)->required();
  set(m_ref, [&](const detail::Context& c) {
    return detail::write_or_show(c, refine(detail::multimap_arg(c, m_input), detail::tree_arg(m_to)));
  });
  auto* m_inv = multi->add_subcommand("invariance", "check the declared H-invariance flags");
  m_inv->add_option("--input", m_input)->required();
  set(m_inv, [&](const detail::Context& c) { return detail::multi_invariance(c, m_input); });

  // algebra
  auto* algebra = app.add_subcommand("algebra", "algebras: generated families, axioms, OPE");
  algebra->require_subcommand(1);
  std::string example = "q-u", a_input, a_name = "u", b_name = "u";
  std::size_t max_leaves = 3;
  bool verbose = false;
  auto* a_demo = algebra->add_subcommand("demo", "a built-in algebra checked on small trees");
  a_demo->add_option("--example", example, "q-u, q or q-u-corrupted")->capture_default_str();
  a_demo->add_option("--max-leaves", max_leaves)->capture_default_str();
  set(a_demo, [&](const detail::Context& c) { return detail::algebra_demo(c, detail::algebra_arg(c, example, ""), max_leaves); });
  auto* a_check = algebra->add_subcommand("check", "composition, unit, refinement and commutativity");
  a_check->add_option("--input", a_input, "algebra JSON");
  a_check->add_option("--example", example)->capture_default_str();
  a_check->add_option("--max-leaves", max_leaves)->capture_default_str();
  a_check->add_flag("--verbose", verbose, "list passing entries too");
  set(a_check, [&](const detail::Context& c) {
    return detail::algebra_check(c, detail::algebra_arg(c, example, a_input), max_leaves, verbose);
  });
  auto* a_ope = algebra->add_subcommand("ope", "f2(a, b) split by pole order at x1 = x2");
  a_ope->add_option("--a", a_name)->capture_default_str();
  a_ope->add_option("--b", b_name)->capture_default_str();
  a_ope->add_option("--input", a_input);
  a_ope->add_option("--example", example)->capture_default_str();
  set(a_ope, [&](const detail::Context& c) { return detail::algebra_ope(c, detail::algebra_arg(c, example, a_input), a_name, b_name); });

  // verify
  auto* ver = app.add_subcommand("verify", "run the invariant suites");
  std::string suite = "all";
  std::size_t verify_leaves = 4;
  bool timings = false;
  ver->add_option("--suite", suite, "all or a comma list of trees, hopf, series, multi, algebra, ord")->capture_default_str();
  ver->add_option("--max-leaves", verify_leaves, "tree size for the algebra suite")->capture_default_str();
  ver->add_flag("--timings", timings, "print seconds per suite (output is then not reproducible)");
  set(ver, [&](const detail::Context& c) { return detail::run_verify(c, suite, verify_leaves, timings); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    // the whole grammar, not just the selected subcommand's help
    err << "error: " << e.what() << "\n\n" << app.get_formatter()->make_help(&app, "rmc", CLI::AppFormatMode::All);
    return kUsage;
  }
  if (!action) {
    err << app.get_formatter()->make_help(&app, "rmc", CLI::AppFormatMode::All);
    return kUsage;
  }

  std::ostringstream buffer;
  const detail::Context ctx{cfg, buffer};
  int code = kOk;
  try {
    code = action(ctx);
  } catch (const TreeParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kUsage;
  } catch (const io::FormatError& e) {
    err << "input error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    err << "input error: " << e.what() << "\n";
    return kUsage;
  } catch (const Failure& e) {
    err << "FAILED: " << e.what() << "\n";
    code = kFailed;
  } catch (const MembershipError& e) {
    err << "FAILED membership (" << e.kind() << "): " << e.witness() << "\n";
    code = kFailed;
  } catch (const std::exception& e) {
    err << "FAILED: " << e.what() << "\n";
    code = kFailed;
  }
  if (cfg.output.empty()) {
    out << buffer.str();
  } else {
    std::ofstream file(cfg.output);
    if (!file) {
      err << "cannot write " << cfg.output << "\n";
      return kUsage;
    }
    file << buffer.str();
  }
  return code;
}

}  // namespace rmc::cli
