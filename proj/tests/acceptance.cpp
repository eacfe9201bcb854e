// One line per acceptance criterion; exits nonzero if any fails.

#include <cstdio>
#include <string>
#include <vector>

#include "rmc/verify.hpp"

namespace {

struct Criterion {
  int id;
  std::string suite;
  double limit_seconds;
  std::string what;
};

const std::vector<Criterion> kCriteria{
    {1, "trees", 1.0, "tree counts, graft leaf law, graft associativity"},
    {2, "hopf", 5.0, "Hopf axioms, K module and Leibniz laws, antipode involutions"},
    {3, "series", 5.0, "inverse expansions, delta annihilation, multiplicative expand"},
    {4, "multi", 30.0, "unit laws, associativity, refinement functoriality and naturality, null composition"},
    {5, "algebra", 60.0, "Q[u] f2, check_algebra on <= 4 leaves, corrupted control"},
    {6, "ord", 5.0, "double tree Ord shapes and pullback membership"},
};

}  // namespace

int main() {
  rmc::verify::Options opt;
  opt.seed = 7;
  opt.max_leaves = 4;
  opt.degree = 4;
  bool all = true;
  for (const auto& c : kCriteria) {
    const auto report = rmc::verify::run_suite(c.suite, opt);
    const bool in_time = report.seconds < c.limit_seconds;
    const bool ok = report.passed() && in_time;
    all = all && ok;
    std::printf("%s criterion %d: %s (%.2f s, limit %.0f s)\n", ok ? "PASS" : "FAIL", c.id, c.what.c_str(), report.seconds,
                c.limit_seconds);
    for (const auto& check : report.checks) {
      if (check.passed) continue;
      std::printf("     %s: %s\n", check.name.c_str(), check.witness.c_str());
      if (!check.reproduce.empty()) std::printf("     reproduce: %s\n", check.reproduce.c_str());
    }
    if (!in_time) std::printf("     over the time limit\n");
  }
  return all ? 0 : 1;
}
