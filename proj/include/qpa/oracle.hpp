#pragma once

// Ground truth by brute force: concrete interpretation of every input, and
// path enumeration with one model count per path.

#include <cstdint>
#include <optional>
#include <vector>

#include "qpa/analysis.hpp"
#include "qpa/cfg.hpp"
#include "qpa/program.hpp"

namespace qpa {

struct ExecutionTrace {
  InputAssignment input;
  std::vector<std::size_t> blocks;         // visited blocks, sink excluded
  std::vector<std::int64_t> block_weights; // weight of each visited block
  std::vector<bool> decisions;             // outcome at each branch point reached
  std::vector<std::size_t> taken;          // beta(path)
  std::int64_t weight = 0;
  std::optional<std::uint64_t> result;     // value of `return`, if any
};

// Walks the CFG under concrete inputs. Locals start at 0.
ExecutionTrace execute_cfg(const WeightedCfg& g, const InputAssignment& input);

// Interprets the source program directly (loops included), cutting the same
// basic blocks as build_cfg so block weights are comparable. Block ids and
// beta are left empty.
ExecutionTrace execute_ast(const SourceProgram& p, const CostModel& cost, const InputAssignment& input);

struct OracleOptions {
  std::size_t max_input_bits = 20;
  std::uint64_t max_paths = std::uint64_t{1} << 24;
  unsigned jobs = 1;
  SolverOptions solver;
};

struct OracleStats {
  std::uint64_t executions = 0;
  std::uint64_t counter_calls = 0;
  std::uint64_t paths = 0;
};

// Throw BudgetError when |I| exceeds max_input_bits.
WeightDistribution brute_force_distribution(const WeightedCfg& g, const OracleOptions& opts = {},
                                            OracleStats* stats = nullptr);
WeightDistribution brute_force_distribution(const SourceProgram& p, const CostModel& cost,
                                            const OracleOptions& opts = {}, OracleStats* stats = nullptr);

// Model-counts the conjunction of polarised conditions for every subset of B.
// Requires an unnested g whose conditions close over inputs. Throws
// BudgetError when 2^|B| exceeds max_paths.
WeightDistribution path_enumeration_distribution(const WeightedCfg& g, const OracleOptions& opts = {},
                                                 OracleStats* stats = nullptr);

}  // namespace qpa
