#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "generators.hpp"
#include "qpa/analysis.hpp"
#include "qpa/errors.hpp"
#include "qpa/oracle.hpp"

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

BranchProfile supports(const WeightedCfg& g, AnalysisStats* st = nullptr) {
  auto r = find_condition_supports(g, {}, st);
  REQUIRE(r.ok());
  return r.value();
}

std::vector<std::int64_t> keys(const WeightDistribution& d) { return d.weights(); }

std::vector<bool> flags(std::size_t n, std::uint64_t mask) {
  std::vector<bool> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = (mask >> i) & 1;
  return t;
}

const char* kModexp2Distinct = R"(input e : 2;
var r : 8 = 1;
if ((e & 1) == 1) { r = r * 3; weight 2; }
e = e >> 1;
if ((e & 1) == 1) { r = r * 5; weight 7; }
return r;
)";

}  // namespace

TEST_CASE("supports: modexp2 program") {
  WeightedCfg g = compile(read_program("modexp2.qp"));
  AnalysisStats st;
  BranchProfile p = supports(g, &st);
  REQUIRE(p.branches.size() == 2);
  CHECK(p.branches[0].support == std::vector<InputBit>{0});
  CHECK(p.branches[1].support == std::vector<InputBit>{1});
  CHECK(p.residual.empty());
  CHECK(st.equiv_calls == 2);
  CHECK(check_independence(p).pairwise_independent);
}

TEST_CASE("supports: nested and merge-dependent programs fail with a witness") {
  auto n = find_condition_supports(compile(read_program("nested.qp")));
  REQUIRE_FALSE(n.ok());
  CHECK(n.failure().reason == FailureReason::Nested);
  CHECK(n.failure().witness == std::vector<std::size_t>{0, 1});

  auto m = find_condition_supports(compile(read_program("merge_dependent.qp")));
  REQUIRE_FALSE(m.ok());
  CHECK(m.failure().reason == FailureReason::Unsupported);
  CHECK(m.failure().witness == std::vector<std::size_t>{1});
  CHECK(m.failure().variable == "r");
  CHECK_THROWS_AS(m.value(), StructuralError);

  CHECK_FALSE(find_weight_distribution(compile(read_program("nested.qp"))).ok());
  CHECK_FALSE(find_possible_weights(compile(read_program("nested.qp"))).ok());
  CHECK_FALSE(count_possible_weights(compile(read_program("merge_dependent.qp"))).ok());
}

TEST_CASE("supports: tautological masked condition has empty support") {
  WeightedCfg g = compile("input e : 4;\nif (((e | ~e) & 1) == 1) { weight 1; }\n");
  BranchProfile p = supports(g);
  CHECK(p.branches[0].support.empty());
  CHECK(p.residual.size() == 4);
}

TEST_CASE("independence: shared bit and the MT-style program") {
  WeightedCfg g = compile("input e : 2;\nif ((e & 1) == 1) { weight 1; }\nif ((e & 1) == 0) { weight 2; }\n");
  Independence ind = check_independence(supports(g));
  CHECK_FALSE(ind.pairwise_independent);
  REQUIRE(ind.groups.size() == 1);
  CHECK(ind.groups[0] == std::vector<std::size_t>{0, 1});

  Independence mt = check_independence(supports(compile(read_program("mt_step.qp"))));
  CHECK_FALSE(mt.pairwise_independent);
  std::size_t singles = 0, pairs = 0;
  for (const auto& grp : mt.groups) {
    singles += grp.size() == 1;
    pairs += grp.size() == 2;
  }
  CHECK(singles == 6);
  CHECK(pairs == 1);
  CHECK(mt.groups.size() == 7);
}

TEST_CASE("true counts") {
  AnalysisStats st;
  BranchProfile f = true_counts(supports(compile(read_program("modexp2.qp"))), {}, &st);
  CHECK(*f.branches[0].true_count == BigInt(1));
  CHECK(*f.branches[1].true_count == BigInt(1));
  CHECK(st.counter_calls == 2);

  BranchProfile t = true_counts(supports(compile("input e : 3;\nif (1 == 1) { weight 1; }\n")));
  CHECK(t.branches[0].support.empty());
  CHECK(*t.branches[0].true_count == BigInt(1));

  BranchProfile o = true_counts(supports(compile("input b : 2;\nif ((b & 1) == 1 || (b & 2) == 2) {}\n")));
  CHECK(*o.branches[0].true_count == BigInt(3));
}

TEST_CASE("path probabilities") {
  BranchProfile f = true_counts(supports(compile(read_program("modexp2.qp"))));
  for (std::uint64_t m = 0; m < 4; ++m) CHECK(path_probability(f, flags(2, m)) == BigInt(1));

  // (b0 || b1), then b2, with residual bit b3: T = 3, 1; R = {b3}.
  BranchProfile g = true_counts(supports(compile(
      "input b : 4;\nif ((b & 1) == 1 || (b & 2) == 2) { weight 1; }\nif ((b & 4) != 0) { weight 2; }\n")));
  CHECK(g.residual == std::vector<InputBit>{3});
  CHECK(path_probability(g, {true, true}) == BigInt(2 * 3 * 1));
  CHECK(path_probability(g, {true, false}) == BigInt(2 * 3 * 1));
  CHECK(path_probability(g, {false, true}) == BigInt(2 * 1 * 1));
  CHECK(path_probability(g, {false, false}) == BigInt(2 * 1 * 1));
  CHECK_THROWS_AS(path_probability(supports(compile(read_program("modexp2.qp"))), {true, true}),
                  StructuralError);
}

TEST_CASE("path probabilities sum to 2^|I|") {
  std::mt19937_64 rng(404);
  for (int trial = 0; trial < 40; ++trial) {
    WeightedCfg g = compile(qpa::testing::random_program(rng, {14, 10, true, true, 0}));
    BranchProfile p = true_counts(supports(g));
    const std::size_t nb = p.branches.size();
    BigInt sum = 0;
    for (std::uint64_t m = 0; m < (std::uint64_t{1} << nb); ++m) sum += path_probability(p, flags(nb, m));
    CHECK(sum == BigInt(1) << p.input_bits());
  }
}

TEST_CASE("weight distribution: modexp2 with unit weights") {
  WeightedCfg g = compile(read_program("modexp2.qp"));
  AnalysisStats st;
  auto d = find_weight_distribution(g, {}, &st);
  REQUIRE(d.ok());
  CHECK(d.value() == brute_force_distribution(g));
  CHECK(d.value().total() == BigInt(4));
  CHECK(st.counter_calls == 2);
  CHECK(st.paths == 4);
  CHECK(d.value().counts == std::map<std::int64_t, BigInt>{{10, 1}, {11, 2}, {12, 1}});
}

TEST_CASE("weight distribution: straight-line program") {
  WeightedCfg g = compile("input x : 5;\nvar y : 5;\ny = x + 1;\nreturn y;\n");
  auto d = find_weight_distribution(g);
  REQUIRE(d.ok());
  CHECK(d.value().counts == std::map<std::int64_t, BigInt>{{2, BigInt(32)}});
  CHECK(shannon_entropy(d.value()) == 0.0);
}

TEST_CASE("weight distribution: 8-bit modexp is binomial") {
  WeightedCfg g = compile(read_program("modexp8.qp"));
  AnalysisStats st;
  auto d = find_weight_distribution(g, {}, &st);
  REQUIRE(d.ok());
  CHECK(st.counter_calls == 8);
  const auto& counts = d.value().counts;
  REQUIRE(counts.size() == 9);
  std::int64_t w0 = counts.begin()->first;
  for (unsigned k = 0; k <= 8; ++k) {
    auto it = counts.find(w0 + 5 * k);
    REQUIRE(it != counts.end());
    CHECK(it->second == BigInt(qpa::testing::binomial(8, k)));
  }
  CHECK(d.value() == brute_force_distribution(g));
  // Binomial(8, 1/2) entropy, computed directly.
  double h = 0;
  for (unsigned k = 0; k <= 8; ++k) {
    double p = double(qpa::testing::binomial(8, k)) / 256.0;
    h -= p * std::log2(p);
  }
  CHECK(std::abs(shannon_entropy(d.value()) - h) < 1e-12);
  CHECK(std::abs(h - 2.5442) < 1e-4);
}

TEST_CASE("weight distribution: path budget and parallel jobs") {
  WeightedCfg g = compile(read_program("modexp8.qp"));
  AnalysisOptions small;
  small.max_paths = 255;
  CHECK_THROWS_AS(find_weight_distribution(g, small), BudgetError);
  AnalysisOptions par;
  par.jobs = 4;
  CHECK(find_weight_distribution(g, par).value() == find_weight_distribution(g).value());
}

TEST_CASE("eliminate_trivial") {
  WeightedCfg g = compile("input e : 2;\nif (0 == 1) { weight 9; }\nif ((e & 1) == 1) { weight 1; }\n");
  BranchProfile p = supports(g);
  Elimination el = eliminate_trivial(g, p);
  CHECK(el.forced == std::map<std::size_t, bool>{{0, false}});
  CHECK(el.graph.branch_points().size() == 1);
  CHECK(el.profile.branches.size() == 1);
  CHECK(el.profile.branches[0].support == std::vector<InputBit>{0});

  WeightedCfg fig = compile(read_program("modexp2.qp"));
  Elimination id = eliminate_trivial(fig, supports(fig));
  CHECK(id.forced.empty());
  CHECK(id.graph.edges().size() == fig.edges().size());

  WeightedCfg taut = compile("input e : 4;\nif (((e | ~e) & 1) == 1) { weight 4; }\n");
  Elimination t = eliminate_trivial(taut, supports(taut));
  CHECK(t.forced == std::map<std::size_t, bool>{{0, true}});
  CHECK(t.graph.branch_points().empty());
}

TEST_CASE("trivial program: eliminated branches and residual analysis match brute force") {
  WeightedCfg g = compile(read_program("trivial.qp"));
  BranchProfile p = supports(g);
  Elimination el = eliminate_trivial(g, p);
  CHECK(el.forced == std::map<std::size_t, bool>{{0, true}, {2, false}});
  WeightDistribution oracle = brute_force_distribution(g);
  CHECK(find_weight_distribution(g).value() == oracle);
  CHECK(find_possible_weights(g).value().values == oracle.weights());
}

TEST_CASE("possible weights") {
  WeightedCfg g = compile(kModexp2Distinct);
  auto v = find_possible_weights(g);
  REQUIRE(v.ok());
  std::int64_t w0 = v.value().values.front();
  CHECK(v.value().values == std::vector<std::int64_t>{w0, w0 + 2, w0 + 7, w0 + 9});
  CHECK(v.value().provenance == ValueProvenance::Exact);
  CHECK(v.value().values == keys(brute_force_distribution(g)));

  WeightedCfg flat = compile("input e : 2;\nif ((e & 1) == 1) { weight 3; } else { weight 3; }\n");
  CHECK(find_possible_weights(flat).value().values.size() == 1);

  auto m = find_possible_weights(compile(read_program("modexp8.qp")));
  CHECK(m.value().values.size() == 9);
  CHECK(std::abs(channel_capacity(m.value()) - std::log2(9.0)) < 1e-9);
  CHECK(count_possible_weights(compile(read_program("modexp8.qp"))).value() == 9);
}

TEST_CASE("channel capacity") {
  CHECK(channel_capacity(ValueSet{{5}, ValueProvenance::Exact}) == 0.0);
  CHECK(channel_capacity(ValueSet{{1, 2, 3, 4}, ValueProvenance::Exact}) == 2.0);
  CHECK_THROWS_AS(channel_capacity(ValueSet{}), StructuralError);
}

TEST_CASE("entropy of uniform and single-key distributions") {
  WeightDistribution one{{{7, BigInt(16)}}, 4};
  CHECK(shannon_entropy(one) == 0.0);
  WeightDistribution uni;
  uni.input_bits = 3;
  for (int k = 0; k < 8; ++k) uni.counts[k] = 1;
  CHECK(std::abs(shannon_entropy(uni) - 3.0) < 1e-12);
}

TEST_CASE("dependent groups: contradictory pair") {
  WeightedCfg g = compile("input e : 1;\nif (e == 1) { weight 1; }\nif (e == 0) { weight 2; }\n");
  CHECK_FALSE(find_weight_distribution(g).ok());
  CHECK(find_weight_distribution(g).failure().reason == FailureReason::Dependent);
  BranchProfile p = supports(g);
  AnalysisStats st;
  auto v = std::get<ValueSet>(analyze_dependent_groups(g, p, Problem::Values, {}, &st));
  CHECK(st.paths == 4);
  CHECK(v.values.size() == 2);
  CHECK(v.values == keys(brute_force_distribution(g)));
  auto d = std::get<WeightDistribution>(analyze_dependent_groups(g, p, Problem::Distribution));
  CHECK(d == brute_force_distribution(g));
}

TEST_CASE("dependent groups: singletons reduce to the independent algorithm") {
  std::mt19937_64 rng(55);
  for (int trial = 0; trial < 30; ++trial) {
    WeightedCfg g = compile(qpa::testing::random_program(rng, {12, 7, false, true, 0}));
    BranchProfile p = supports(g);
    auto d = std::get<WeightDistribution>(analyze_dependent_groups(g, p, Problem::Distribution));
    CHECK(d == find_weight_distribution(g).value());
    auto v = std::get<ValueSet>(analyze_dependent_groups(g, p, Problem::Values));
    CHECK(v.values == find_possible_weights(g).value().values);
  }
}

TEST_CASE("dependent groups: MT-style program matches brute force") {
  WeightedCfg g = compile(read_program("mt_step.qp"));
  auto plain = find_weight_distribution(g);
  REQUIRE_FALSE(plain.ok());
  CHECK(plain.failure().reason == FailureReason::Dependent);
  CHECK(plain.failure().witness == std::vector<std::size_t>{6, 7});
  AnalysisOptions on;
  on.dependent_groups = true;
  WeightDistribution oracle = brute_force_distribution(g);
  CHECK(find_weight_distribution(g, on).value() == oracle);
  CHECK(find_possible_weights(g, on).value().values == oracle.weights());
  AnalysisOptions tight = on;
  tight.max_dependent_group = 1;
  CHECK_THROWS_AS(find_weight_distribution(g, tight), BudgetError);
}

TEST_CASE("random dependent programs match brute force") {
  std::mt19937_64 rng(66);
  AnalysisOptions on;
  on.dependent_groups = true;
  for (int trial = 0; trial < 40; ++trial) {
    WeightedCfg g = compile(qpa::testing::random_program(rng, {12, 8, true, false, 2}));
    WeightDistribution oracle = brute_force_distribution(g);
    REQUIRE(find_weight_distribution(g, on).value() == oracle);
    CHECK(find_possible_weights(g, on).value().values == oracle.weights());
  }
}

TEST_CASE("random programs: supports exact, distribution and values match brute force") {
  std::mt19937_64 rng(808);
  for (int trial = 0; trial < 60; ++trial) {
    std::string src = qpa::testing::random_program(rng, {12, 8, true, true, 0});
    WeightedCfg g = compile(src);
    AnalysisStats st;
    BranchProfile p = supports(g, &st);
    for (const BranchInfo& b : p.branches)
      REQUIRE_MESSAGE(b.support == qpa::testing::truth_table_support(b.cond), src);
    AnalysisStats dst;
    auto d = find_weight_distribution(g, {}, &dst);
    REQUIRE(d.ok());
    CHECK(dst.counter_calls == g.branch_points().size());
    WeightDistribution oracle = brute_force_distribution(g);
    CHECK(d.value() == oracle);
    auto v = find_possible_weights(g);
    CHECK(v.value().values == oracle.weights());
    CHECK(count_possible_weights(g).value() == oracle.counts.size());
  }
}
