#pragma once

// SAT decisions and exact projected model counting over bit-blasted CNF.
// Every query builds its own engine state; nothing is shared between calls.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>

#include "qpa/bigint.hpp"
#include "qpa/cnf.hpp"
#include "qpa/expr.hpp"

namespace qpa {

enum class CountStrategy {
  Auto,        // Enumerate up to `enumerate_limit` input variables, else Components
  Enumerate,   // fixed-order DFS over input variables with propagation pruning
  Components,  // DPLL with component decomposition and caching
};

struct SolverOptions {
  std::uint64_t max_decisions = 0;  // 0: unlimited
  double max_seconds = 0;           // 0: unlimited
  std::uint64_t seed = 0;           // decision tie-breaking
  CountStrategy strategy = CountStrategy::Auto;
  unsigned enumerate_limit = 24;
};

struct SolverStats {
  std::uint64_t decisions = 0;
  std::uint64_t propagations = 0;
  std::uint64_t components = 0;
  std::uint64_t cache_hits = 0;
  double seconds = 0;

  SolverStats& operator+=(const SolverStats& o);
};

struct CountResult {
  BigInt count;
  SolverStats stats;
};

bool is_sat(const CnfFormula& cnf, const SolverOptions& opts = {}, SolverStats* stats = nullptr);

// True iff f and g agree on every input assignment (unsatisfiable miter).
bool equiv(const BoolFunc& f, const BoolFunc& g, const SolverOptions& opts = {},
           SolverStats* stats = nullptr);

// Number of assignments to the input variables of `cnf` that extend to a model.
CountResult count_projected(const CnfFormula& cnf, const SolverOptions& opts = {});

// Number of assignments to `vars` satisfying f. Bits of f outside `vars` must
// be semantically irrelevant; a detected violation throws StructuralError.
CountResult model_count(const BoolFunc& f, std::span<const InputBit> vars,
                        const SolverOptions& opts = {});

// DIMACS CNF with `c var <name> <index>` lines for input-bit variables and a
// `c ind ... 0` projection line.
void write_dimacs(const CnfFormula& cnf, std::ostream& os);
void export_dimacs(const CnfFormula& cnf, const std::string& path);

// Reads DIMACS; `c var` / `c ind` lines restore the projection set, otherwise
// every variable is projected.
CnfFormula read_dimacs(std::istream& is);

}  // namespace qpa
