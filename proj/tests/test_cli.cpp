#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "rmc/cli.hpp"

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "rmc");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = rmc::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string data(const std::string& name) { return std::string(RMC_DATA_DIR) + "/" + name; }

TEST(Cli, TreesParse) {
  const auto r = run({"trees", "parse", "((**)*)"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "((**)*)");
  EXPECT_NE(r.out.find("leaves: 3"), std::string::npos);
}

TEST(Cli, TreesParseJson) {
  const auto r = run({"--format", "json", "trees", "parse", "(* (*  *))"});
  ASSERT_EQ(r.code, 0);
  const auto j = rmc::io::Json::parse(r.out);
  EXPECT_EQ(j["tree"], "(*(**))");
  EXPECT_EQ(j["leaves"], 3);
}

TEST(Cli, HopfAct) {
  const auto r = run({"hopf", "act", "--h", "D2", "--k", "x^3"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "3*x^1\n");
}

TEST(Cli, TreeCountsFromEnumerate) {
  for (std::size_t n = 1; n <= 5; ++n) {
    const auto r = run({"trees", "enumerate", "--leaves", std::to_string(n), "--binary"});
    ASSERT_EQ(r.code, 0);
    const std::size_t lines = std::count(r.out.begin(), r.out.end(), '\n');
    EXPECT_EQ(lines, std::vector<std::size_t>({1, 1, 2, 5, 14})[n - 1]);
  }
}

TEST(Cli, UsageErrorPrintsGrammarAndFlags) {
  const auto r = run({"trees"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--format"), std::string::npos);
  EXPECT_NE(r.err.find("SUBCOMMAND"), std::string::npos);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"--format", "xml", "trees", "parse", "*"}).code, 2);
}

TEST(Cli, ParseErrorsExitTwo) {
  EXPECT_EQ(run({"trees", "parse", "((*)"}).code, 2);
  EXPECT_EQ(run({"hopf", "act", "--h", "Q2", "--k", "x"}).code, 2);
  EXPECT_EQ(run({"series", "expand", "--series", "x^", "--order", "x"}).code, 2);
  EXPECT_EQ(run({"multi", "check", "--input", "/nonexistent.json"}).code, 2);
}

TEST(Cli, HelpExitsZero) {
  const auto r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("verify"), std::string::npos);
}

TEST(Cli, SeriesExpansionsAgreeAfterMultiplying) {
  const auto r = run({"series", "agree", "--a", "(x-y)^-1*(x-y)", "--b", "1"});
  EXPECT_EQ(r.code, 0) << r.err;
  const auto bad = run({"series", "agree", "--a", "(x-y)^-1", "--b", "(y-x)^-1"});
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.err.find("differ"), std::string::npos);
}

TEST(Cli, SeriesActOnVariable) {
  const auto r = run({"series", "act", "--h", "D1", "--var", "y", "--series", "x*y^2"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "2*x*y\n");
}

TEST(Cli, SeriesFromFile) {
  const auto r = run({"series", "expand", "--input", data("inverse.json"), "--order", "x,y", "--ceiling", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("x^-1\n"), std::string::npos);
  EXPECT_NE(r.out.find("x^-2*y\n"), std::string::npos);
}

TEST(Cli, MembershipOfTheDoubleTreeCandidates) {
  EXPECT_EQ(run({"multi", "check", "--input", data("double_tree_good.json")}).code, 0);
  const auto bad = run({"multi", "check", "--input", data("double_tree_bad.json")});
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.err.find("t2"), std::string::npos);
}

TEST(Cli, ComposeAndRefine) {
  const auto c = run({"--format", "json", "multi", "compose", "--input", data("f2_q.json"), "--with", data("f2_q.json"), "--at", "2"});
  ASSERT_EQ(c.code, 0) << c.err;
  EXPECT_EQ(rmc::io::Json::parse(c.out)["tree"], "(*(**))");
  const auto r = run({"multi", "refine", "--input", data("f2_q_u.json"), "--to", "((**))"});
  EXPECT_EQ(r.code, 0) << r.err;
  const auto mismatch = run({"multi", "compose", "--input", data("f2_q_u.json"), "--with", data("unit_q_u.json"), "--at", "1"});
  EXPECT_EQ(mismatch.code, 1);
}

TEST(Cli, AlgebraFromFile) {
  const auto r = run({"algebra", "check", "--input", data("dual_numbers.json"), "--max-leaves", "3"});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
}

TEST(Cli, CorruptedAlgebraReportsReproducibleWitness) {
  const auto r = run({"algebra", "demo", "--example", "q-u-corrupted", "--max-leaves", "2"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("FAIL refinement (**) from ((**))"), std::string::npos);
  // the witness names a tree the focused command accepts
  EXPECT_EQ(run({"trees", "morphism", "((**))", "(**)"}).code, 0);
}

TEST(Cli, OpeOfUWithU) {
  const auto r = run({"algebra", "ope", "--a", "u", "--b", "u"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("regular part"), std::string::npos);
  EXPECT_EQ(r.out.find("w^-"), std::string::npos);
}

TEST(Cli, EnvironmentOverridesDefaults) {
  setenv("RMC_FORMAT", "json", 1);
  const auto r = run({"trees", "parse", "*"});
  unsetenv("RMC_FORMAT");
  EXPECT_EQ(r.out.front(), '{');
  EXPECT_EQ(run({"trees", "parse", "*"}).out.front(), '*');
}

TEST(Cli, OutputFile) {
  const std::string path = testing::TempDir() + "rmc_cli_out.txt";
  const auto r = run({"--output", path, "hopf", "act", "--h", "D1", "--k", "x^2"});
  EXPECT_EQ(r.code, 0);
  EXPECT_TRUE(r.out.empty());
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "2*x^1");
}

TEST(Cli, VerifyIsDeterministic) {
  const std::vector<std::string> args{"verify", "--suite", "trees,series,multi,ord", "--seed", "11"};
  const auto a = run(args);
  const auto b = run(args);
  EXPECT_EQ(a.code, 0) << a.out;
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(run({"verify", "--suite", "nope"}).code, 2);
}

}  // namespace
