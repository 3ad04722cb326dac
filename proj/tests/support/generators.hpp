#pragma once

// Random program and condition generators for property and acceptance tests,
// plus brute-force reference computations that do not go through the
// analysis code.

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "qpa/analysis.hpp"
#include "qpa/cfg.hpp"
#include "qpa/program.hpp"

namespace qpa::testing {

struct ProgramShape {
  unsigned max_input_bits = 14;
  unsigned max_branches = 8;
  bool allow_trivial = true;      // conditions with empty support
  bool allow_loops = true;        // modexp-style repeat segments
  unsigned dependent_pairs = 0;   // branch pairs forced to share one bit
};

// Source text of an unnested program whose conditions read only inputs and
// straight-line state. Without dependent pairs, supports are pairwise disjoint.
std::string random_program(std::mt19937_64& rng, const ProgramShape& shape = {});

struct ConditionShape {
  unsigned max_bits = 12;
  unsigned max_depth = 4;
};

// `input ...; if (<random condition>) { weight 1; }` with inputs of one width.
std::string random_condition_program(std::mt19937_64& rng, const ConditionShape& shape = {});

// Semantic support of a closed condition by truth-table cofactor comparison.
std::vector<InputBit> truth_table_support(const BoolFunc& f);

// Number of assignments to all of I satisfying f, by enumeration.
std::uint64_t truth_table_count(const BoolFunc& f);

// All 2^|d| subset sums, sorted and deduplicated.
std::vector<std::int64_t> brute_subset_sums(const std::vector<std::int64_t>& d);

// C(n, k) as an unsigned 64-bit integer (n <= 60).
std::uint64_t binomial(unsigned n, unsigned k);

// f on every assignment to I, indexed by the packed assignment.
std::vector<bool> truth_table(const BoolFunc& f);

// Closed conditions of a source program, one per branch point.
std::vector<BoolFunc> conditions_of(const std::string& source);

// Loads source text through the whole frontend.
WeightedCfg compile(const std::string& source, const CostModel& cost = {});

}  // namespace qpa::testing
