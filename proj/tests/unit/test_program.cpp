#include <doctest.h>

#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "generators.hpp"
#include "qpa/cfg.hpp"
#include "qpa/errors.hpp"
#include "qpa/oracle.hpp"
#include "qpa/program.hpp"

using namespace qpa;
using qpa::testing::compile;

namespace {

std::string read_program(const std::string& name) {
  std::ifstream in(std::string(QPA_PROGRAMS_DIR) + "/" + name);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

using Vec = std::vector<std::uint8_t>;

// Every source-to-sink path as an edge vector, by DFS.
std::vector<Vec> all_paths(const WeightedCfg& g) {
  std::vector<Vec> out;
  Vec cur(g.edges().size(), 0);
  auto dfs = [&](auto& self, std::size_t b) -> void {
    if (b == g.sink()) {
      out.push_back(cur);
      return;
    }
    for (std::size_t e : g.out_edges(b)) {
      cur[e] = 1;
      self(self, g.edges()[e].to);
      cur[e] = 0;
    }
  };
  dfs(dfs, g.source());
  return out;
}

std::int64_t block_sum(const WeightedCfg& g, const Vec& v) {
  std::int64_t w = g.blocks()[g.source()].weight;
  for (std::size_t e = 0; e < v.size(); ++e)
    if (v[e]) w += g.blocks()[g.edges()[e].to].weight;
  return w;
}

PathVec as_path(const WeightedCfg& g, const Vec& v) { return PathVec{v, branch_set(g, v)}; }

std::vector<bool> flags(std::size_t n, std::uint64_t mask) {
  std::vector<bool> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = (mask >> i) & 1;
  return t;
}

const char* kModexpLoop = R"(input e : 2;
var b : 8 = 3;
var m : 8 = 7;
var r : 8;

r = 1;
repeat 2 {
  if ((e & 1) == 1) {
    r = r * b % m;
  }
  e = e >> 1;
  b = b * b % m;
}
return r;
)";

}  // namespace

TEST_CASE("parse: the modexp2 program has two conditionals") {
  SourceProgram p = parse(read_program("modexp2.qp"));
  int ifs = 0;
  for (const Stmt& s : p.body) ifs += std::holds_alternative<IfStmt>(s.node);
  CHECK(ifs == 2);
  CHECK(p.inputs->total_bits() == 2);
  CHECK(p.is_loop_free());
}

TEST_CASE("parse: one input and no statements") {
  SourceProgram p = parse("input x : 3;\n");
  CHECK(p.body.empty());
  CHECK(p.vars.size() == 1);
  CHECK(p.inputs->total_bits() == 3);
}

TEST_CASE("parse errors carry positions") {
  auto fails_at = [](const std::string& src, int line) {
    try {
      parse(src);
    } catch (const ParseError& e) {
      CHECK(e.line() == line);
      CHECK(e.column() >= 1);
      return true;
    }
    return false;
  };
  CHECK(fails_at("input x : 4;\nvar y : 4 = 0;\nrepeat x { y = y + 1; }\n", 3));
  CHECK(fails_at("input x : 4;\ninput x : 2;\n", 2));
  CHECK(fails_at("input x : 4;\nif (z == 1) {}\n", 2));
  CHECK(fails_at("input x : 4;\nvar y : 8 = 0;\ny = x;\n", 3));
  CHECK(fails_at("input x : 4;\nx = x + ;\n", 2));
  CHECK(fails_at("input x : 65;\n", 1));
  CHECK(fails_at("input x : 4;\nif (x == ) {}\n", 2));
}

TEST_CASE("unroll: repeat 2 gives the modexp2 CFG") {
  SourceProgram looped = parse(kModexpLoop);
  CHECK_FALSE(looped.is_loop_free());
  WeightedCfg a = build_cfg(unroll(looped));
  WeightedCfg b = compile(read_program("modexp2.qp"));
  REQUIRE(a.edges().size() == b.edges().size());
  for (std::size_t i = 0; i < a.edges().size(); ++i) {
    CHECK(a.edges()[i].from == b.edges()[i].from);
    CHECK(a.edges()[i].to == b.edges()[i].to);
    CHECK(a.edges()[i].kind == b.edges()[i].kind);
  }
  for (std::size_t i = 0; i < a.blocks().size(); ++i) CHECK(a.blocks()[i].weight == b.blocks()[i].weight);
}

TEST_CASE("unroll: repeat 0 and repeat 8") {
  SourceProgram p = unroll(parse("input x : 8;\nrepeat 0 { x = x + 1; }\n"));
  CHECK(p.body.empty());

  SourceProgram m = unroll(parse(read_program("modexp8.qp")));
  int ifs = 0;
  for (const Stmt& s : m.body) ifs += std::holds_alternative<IfStmt>(s.node);
  CHECK(ifs == 8);
}

TEST_CASE("unroll: statement budget") {
  SourceProgram p = parse("input x : 8;\nvar y : 8 = 0;\nrepeat 1000 { repeat 1000 { y = y + 1; } }\n");
  CHECK_THROWS_AS(unroll(p, UnrollLimits{10'000, 64}), BudgetError);
}

TEST_CASE("unroll preserves concrete semantics") {
  std::mt19937_64 rng(8);
  CostModel cost;
  for (int trial = 0; trial < 40; ++trial) {
    std::string src = qpa::testing::random_program(rng, {10, 6, true, true, 0});
    SourceProgram p = parse(src);
    SourceProgram u = unroll(p);
    for (int k = 0; k < 20; ++k) {
      InputAssignment a = unpack_assignment(*p.inputs, rng());
      ExecutionTrace x = execute_ast(p, cost, a), y = execute_ast(u, cost, a);
      CHECK(x.result == y.result);
      CHECK(x.weight == y.weight);
    }
  }
}

TEST_CASE("build_cfg: modexp2 shape and path vectors") {
  WeightedCfg g = compile(read_program("modexp2.qp"));
  CHECK(g.branch_points().size() == 2);
  CHECK(g.edges().size() == 9);
  CHECK_FALSE(check_unnested(g).has_value());

  SpecialPaths sp = special_paths(g);
  const Vec A{1, 0, 1, 1, 1, 1, 0, 0, 1};
  CHECK(sp.single[0].edges == A);
  const Vec& B = sp.single[1].edges;
  const Vec& C = sp.none.edges;
  CHECK(B == Vec{1, 1, 0, 0, 1, 0, 1, 1, 1});
  CHECK(C == Vec{1, 1, 0, 0, 1, 1, 0, 0, 1});

  CHECK(path_weight(g, sp.single[0]) == block_sum(g, A));

  // The rightmost path is A + B - C, and weight is linear in the vector.
  PathVec both = compose_path(g, {true, true});
  for (std::size_t e = 0; e < 9; ++e) CHECK(int(both.edges[e]) == int(A[e]) + int(B[e]) - int(C[e]));
  CHECK(path_weight(g, both) == path_weight(g, sp.single[0]) + path_weight(g, sp.single[1]) -
                                    path_weight(g, sp.none));
  CHECK(compose_path(g, {false, false}).edges == C);
  CHECK(both.branches == std::vector<std::size_t>{0, 1});
}

TEST_CASE("build_cfg: straight-line and nested programs") {
  WeightedCfg s = compile("input x : 4;\nvar y : 4 = 0;\ny = x + 1;\nreturn y;\n");
  CHECK(s.branch_points().empty());
  CHECK(all_paths(s).size() == 1);
  SpecialPaths sp = special_paths(s);
  CHECK(sp.single.empty());
  CHECK(path_weight(s, sp.none) == 3);

  WeightedCfg n = compile(read_program("nested.qp"));
  CHECK(n.branch_points().size() == 2);
  auto w = check_unnested(n);
  REQUIRE(w.has_value());
  CHECK(w->outer == 0);
  CHECK(w->inner == 1);
  CHECK_THROWS_AS(special_paths(n), StructuralError);
  CHECK_THROWS_AS(compose_path(n, {true, false}), StructuralError);
}

TEST_CASE("build_cfg rejects loops") {
  CHECK_THROWS_AS(build_cfg(parse(kModexpLoop)), StructuralError);
}

TEST_CASE("path_weight: zero weights and invalid paths") {
  CostModel zero;
  zero.statement_cost = 0;
  WeightedCfg g = compile(read_program("modexp2.qp"), zero);
  for (const Vec& v : all_paths(g)) CHECK(path_weight(g, as_path(g, v)) == 0);
  PathVec bad{Vec{1, 1, 1, 1, 1, 1, 0, 0, 1}, {}};
  CHECK_THROWS_AS(path_weight(g, bad), StructuralError);
  PathVec short_vec{Vec{1, 0, 1}, {}};
  CHECK_THROWS_AS(path_weight(g, short_vec), StructuralError);
}

TEST_CASE("8-diamond modexp: special paths and all 256 compositions") {
  WeightedCfg g = compile(read_program("modexp8.qp"));
  REQUIRE(g.branch_points().size() == 8);
  CHECK_FALSE(check_unnested(g).has_value());
  SpecialPaths sp = special_paths(g);
  CHECK(sp.single.size() + 1 == 9);
  std::set<Vec> seen;
  for (std::uint64_t mask = 0; mask < 256; ++mask) {
    PathVec p = compose_path(g, flags(8, mask));
    CHECK_NOTHROW(path_weight(g, p));
    seen.insert(p.edges);
  }
  CHECK(seen.size() == 256);
}

TEST_CASE("compose_path is a bijection onto all paths and matches the basis combination") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 60; ++trial) {
    WeightedCfg g = compile(qpa::testing::random_program(rng, {12, 10, true, true, 0}));
    const std::size_t nb = g.branch_points().size();
    REQUIRE(!check_unnested(g).has_value());
    auto paths = all_paths(g);
    CHECK(paths.size() == (std::size_t{1} << nb));
    std::set<Vec> all(paths.begin(), paths.end());
    std::set<Vec> composed;
    SpecialPaths sp = special_paths(g);
    const std::int64_t w0 = path_weight(g, sp.none);
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << nb); ++mask) {
      auto taken = flags(nb, mask);
      PathVec p = compose_path(g, taken);
      composed.insert(p.edges);
      auto combo = basis_combination(g, taken);
      for (std::size_t e = 0; e < combo.size(); ++e) CHECK(combo[e] == p.edges[e]);
      // Weight decomposes over the basis.
      std::int64_t w = w0;
      for (std::size_t c = 0; c < nb; ++c)
        if (taken[c]) w += path_weight(g, sp.single[c]) - w0;
      CHECK(path_weight(g, p) == w);
      CHECK(path_weight(g, p) == block_sum(g, p.edges));
      CHECK(branch_set(g, p.edges) == p.branches);
    }
    CHECK(composed == all);
  }
}

TEST_CASE("symbolic_conditions: modexp2 reads e[0] then e[1]") {
  WeightedCfg g = compile(read_program("modexp2.qp"));
  auto conds = symbolic_conditions(g);
  REQUIRE(conds.size() == 2);
  CHECK(conds[0].bits() == std::vector<InputBit>{0});
  CHECK(conds[1].bits() == std::vector<InputBit>{1});
  for (std::uint64_t v = 0; v < 4; ++v) {
    CHECK(conds[0].eval({v}) == bool(v & 1));
    CHECK(conds[1].eval({v}) == bool(v & 2));
  }
}

TEST_CASE("symbolic_conditions: constant and merge-dependent conditions") {
  auto t = symbolic_conditions(compile("input x : 2;\nif (1 == 1) { weight 1; }\n"));
  REQUIRE(t[0].constant_value().has_value());
  CHECK(*t[0].constant_value());

  WeightedCfg g = compile(read_program("merge_dependent.qp"));
  try {
    symbolic_conditions(g);
    FAIL("expected UnsupportedStructure");
  } catch (const UnsupportedStructure& e) {
    CHECK(e.branch() == 1);
    CHECK(e.variable() == "r");
  }
}

TEST_CASE("CFG traversal and AST interpretation agree on random inputs") {
  std::mt19937_64 rng(77);
  CostModel cost;
  for (int trial = 0; trial < 60; ++trial) {
    std::string src = qpa::testing::random_program(rng, {14, 8, true, true, 1});
    SourceProgram p = parse(src);
    WeightedCfg g = build_cfg(unroll(p), cost);
    for (int k = 0; k < 30; ++k) {
      InputAssignment a = unpack_assignment(*p.inputs, rng());
      ExecutionTrace c = execute_cfg(g, a);
      ExecutionTrace s = execute_ast(p, cost, a);
      REQUIRE_MESSAGE(c.block_weights == s.block_weights, src);
      CHECK(c.decisions == s.decisions);
      CHECK(c.weight == s.weight);
      CHECK(c.result == s.result);
      std::vector<bool> taken(g.branch_points().size(), false);
      for (std::size_t b : c.taken) taken[b] = true;
      CHECK(path_weight(g, compose_path(g, taken)) == c.weight);
    }
  }
}

TEST_CASE("cost model: statements, operator costs and annotations") {
  CostModel cost = CostModel::from_json(R"({"statement": 2, "ops": {"*": 3, "%": 10}})");
  WeightedCfg g = compile("input x : 4;\nvar y : 4;\ny = x * x % 3;\nreturn y;\n", cost);
  CHECK(g.blocks()[0].weight == 2 + 3 + 10 + 2);
  WeightedCfg h = compile("input x : 4;\nvar y : 4;\ny = x * x % 3;\nweight 7;\nweight 1;\n", cost);
  CHECK(h.blocks()[0].weight == 8);
  CHECK_THROWS(CostModel::from_json(R"({"ops": {"@": 1}})"));
}
