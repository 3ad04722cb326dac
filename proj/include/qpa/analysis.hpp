#pragma once

// Support analysis, per-branch model counting, and the weight distribution
// and value-set computations over unnested programs with independent branch
// conditions. Probabilities are integer numerators over 2^|I|.

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "qpa/bigint.hpp"
#include "qpa/cfg.hpp"
#include "qpa/errors.hpp"
#include "qpa/expr.hpp"
#include "qpa/solver.hpp"

namespace qpa {

enum class FailureReason { Nested, Unsupported, Dependent };

std::string_view failure_reason_name(FailureReason r);

struct Failure {
  FailureReason reason;
  std::string message;
  std::vector<std::size_t> witness;  // branch indices: (outer, inner), (branch), or a dependent group
  std::string variable;              // Unsupported only
};

// Either a result or a FAILURE.
template <class T>
class Outcome {
 public:
  Outcome(T value) : v_(std::move(value)) {}
  Outcome(Failure failure) : v_(std::move(failure)) {}

  bool ok() const { return v_.index() == 0; }
  explicit operator bool() const { return ok(); }
  const T& value() const {
    if (!ok()) throw StructuralError("FAILURE: " + failure().message);
    return std::get<0>(v_);
  }
  T& value() {
    if (!ok()) throw StructuralError("FAILURE: " + failure().message);
    return std::get<0>(v_);
  }
  const Failure& failure() const { return std::get<1>(v_); }

 private:
  std::variant<T, Failure> v_;
};

struct BranchInfo {
  std::size_t block = 0;        // block id in the graph the profile was built from
  BoolFunc cond;                // condition closed over input bits
  std::vector<InputBit> support;  // S_b, sorted
  std::optional<BigInt> true_count;  // T_b, once counted
};

struct BranchProfile {
  std::shared_ptr<const InputSpace> inputs;
  std::vector<BranchInfo> branches;  // indexed like WeightedCfg::branch_points()
  std::vector<InputBit> residual;    // R = I minus the union of supports

  std::size_t input_bits() const { return inputs->total_bits(); }
};

struct AnalysisOptions {
  SolverOptions solver;
  std::uint64_t max_paths = std::uint64_t{1} << 24;
  bool dependent_groups = false;
  std::size_t max_dependent_group = 16;
  unsigned jobs = 1;
};

struct AnalysisStats {
  std::uint64_t counter_calls = 0;  // model-counter invocations
  std::uint64_t equiv_calls = 0;
  std::uint64_t sat_calls = 0;
  std::uint64_t paths = 0;          // subsets or joint assignments visited
  SolverStats solver;

  AnalysisStats& operator+=(const AnalysisStats& o);
};

// Exact distribution of total path weight over uniform inputs.
struct WeightDistribution {
  std::map<std::int64_t, BigInt> counts;  // weight -> number of inputs, all > 0
  std::size_t input_bits = 0;             // denominator 2^input_bits

  BigInt total() const;
  std::vector<std::int64_t> weights() const;
  bool operator==(const WeightDistribution& o) const = default;
};

enum class ValueProvenance { Exact, IncludesInfeasible };

struct ValueSet {
  std::vector<std::int64_t> values;  // strictly ascending
  ValueProvenance provenance = ValueProvenance::Exact;
};

// Supports by cofactor non-equivalence over the syntactic candidate bits.
// FAILURE on nested conditionals or merge-dependent conditions.
Outcome<BranchProfile> find_condition_supports(const WeightedCfg& g, const AnalysisOptions& opts = {},
                                               AnalysisStats* stats = nullptr);

struct Independence {
  bool pairwise_independent = true;
  std::vector<std::vector<std::size_t>> groups;  // connected components of support overlap
};

Independence check_independence(const BranchProfile& p);

// Fills T_b = model_count(C_b, S_b) with one counter call per branch.
BranchProfile true_counts(BranchProfile p, const AnalysisOptions& opts = {},
                          AnalysisStats* stats = nullptr);

// 2^|R| * prod_{b in S} T_b * prod_{b not in S} (2^|S_b| - T_b). Needs true counts.
BigInt path_probability(const BranchProfile& p, const std::vector<bool>& taken);

// Subset enumeration in Gray-code order, exactly |B| counter calls. FAILURE on
// nesting, unsupported structure, or (without dependent_groups) dependence.
// Throws BudgetError when 2^|B| exceeds max_paths.
Outcome<WeightDistribution> find_weight_distribution(const WeightedCfg& g,
                                                     const AnalysisOptions& opts = {},
                                                     AnalysisStats* stats = nullptr);

struct Elimination {
  WeightedCfg graph;
  BranchProfile profile;
  std::map<std::size_t, bool> forced;  // original branch index -> decided outcome
};

// Resolves every branch with an empty support to the edge its constant
// condition selects.
Elimination eliminate_trivial(const WeightedCfg& g, const BranchProfile& p,
                              const AnalysisOptions& opts = {}, AnalysisStats* stats = nullptr);

// w(P_0) + SubmultisetSums({w(P_b) - w(P_0)}) after trivial elimination.
Outcome<ValueSet> find_possible_weights(const WeightedCfg& g, const AnalysisOptions& opts = {},
                                        AnalysisStats* stats = nullptr);

// Number of possible weights through abs_transform; same FAILURE rules.
Outcome<std::size_t> count_possible_weights(const WeightedCfg& g, const AnalysisOptions& opts = {},
                                            AnalysisStats* stats = nullptr);

enum class Problem { Distribution, Values };

// Joint polarity enumeration per group of branches with overlapping supports.
// Distribution: joint model counts over the union of the group's supports.
// Values: joint assignments kept when satisfiable. Expects a profile from
// find_condition_supports on g; for Values, trivial branches are eliminated
// first. Throws BudgetError past max_dependent_group or max_paths.
std::variant<WeightDistribution, ValueSet> analyze_dependent_groups(
    const WeightedCfg& g, const BranchProfile& p, Problem problem, const AnalysisOptions& opts = {},
    AnalysisStats* stats = nullptr);

// log2 |v|. StructuralError when empty.
double channel_capacity(const ValueSet& v);
double channel_capacity(std::size_t value_count);

// -sum p log2 p with p = count / 2^input_bits.
double shannon_entropy(const WeightDistribution& d);

}  // namespace qpa
