#pragma once

// Weighted control-flow graph of a loop-free program and the path algebra
// over it: edge-vector paths, basis paths, and composition from branch sets.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "qpa/expr.hpp"
#include "qpa/program.hpp"

namespace qpa {

struct CfgAssign {
  std::size_t slot;
  std::string name;
  BVExpr rhs;
};

struct CfgReturn {
  BVExpr value;
};

using CfgStmt = std::variant<CfgAssign, CfgReturn>;

enum class EdgeKind : std::uint8_t { False, True, Next };

struct Edge {
  std::size_t from = 0;
  std::size_t to = 0;
  EdgeKind kind = EdgeKind::Next;
};

struct Block {
  std::vector<CfgStmt> stmts;
  std::optional<BVExpr> cond;  // set on branch points
  std::int64_t weight = 0;
  bool explicit_weight = false;
  bool is_sink = false;  // the dummy sink
};

// Blocks are numbered topologically (every edge goes from a lower to a higher
// id). Edges are numbered by (source block, False before True), which is the
// coordinate order of path vectors.
class WeightedCfg {
 public:
  // Validates the invariants: DAG in id order, one source, one dummy sink
  // reached from every block without successors, outdegree 2 exactly at
  // blocks with a condition, nonnegative weights.
  WeightedCfg(std::vector<VarDecl> vars, std::shared_ptr<const InputSpace> inputs,
              std::vector<Block> blocks, std::vector<Edge> edges);

  const std::vector<VarDecl>& vars() const { return vars_; }
  const InputSpace& inputs() const { return *inputs_; }
  const std::shared_ptr<const InputSpace>& input_space() const { return inputs_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t source() const { return 0; }
  std::size_t sink() const { return blocks_.size() - 1; }

  // Branch points B as block ids, in topological order; "branch index" below
  // means a position in this list.
  const std::vector<std::size_t>& branch_points() const { return branches_; }
  std::optional<std::size_t> branch_index(std::size_t block) const;

  const std::vector<std::size_t>& out_edges(std::size_t block) const { return out_[block]; }
  const std::vector<std::size_t>& in_edges(std::size_t block) const { return in_[block]; }
  std::size_t true_edge(std::size_t branch) const;
  std::size_t false_edge(std::size_t branch) const;

 private:
  std::vector<VarDecl> vars_;
  std::shared_ptr<const InputSpace> inputs_;
  std::vector<Block> blocks_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> out_, in_;
  std::vector<std::size_t> branches_;
};

// Requires a loop-free program (StructuralError otherwise). Each `if` test
// gets its own branch block unless the current block is still empty.
WeightedCfg build_cfg(const SourceProgram& program, const CostModel& cost = {});

// Immediate post-dominator of every block (the sink maps to itself).
std::vector<std::size_t> post_dominators(const WeightedCfg& g);
// Immediate dominator of every block (the source maps to itself).
std::vector<std::size_t> dominators(const WeightedCfg& g);

struct NestingWitness {
  std::size_t outer = 0;  // branch index whose region is not closed
  std::size_t inner = 0;  // branch index found inside it
};

// nullopt iff the two arms of every branch point reconverge before any other
// branch point (the N-diamond shape).
std::optional<NestingWitness> check_unnested(const WeightedCfg& g);

struct PathVec {
  std::vector<std::uint8_t> edges;    // one coordinate per edge
  std::vector<std::size_t> branches;  // beta(P): branch indices whose true edge is taken
};

// Validates P as a source-to-sink path (StructuralError otherwise) and
// returns the sum of the weights of its blocks.
std::int64_t path_weight(const WeightedCfg& g, const PathVec& p);

// Recomputes beta(P) from the edge vector, validating it.
std::vector<std::size_t> branch_set(const WeightedCfg& g, const std::vector<std::uint8_t>& edges);

struct SpecialPaths {
  PathVec none;                 // all false edges
  std::vector<PathVec> single;  // per branch: only that true edge
};

// Unnested g only (StructuralError otherwise).
SpecialPaths special_paths(const WeightedCfg& g);

// The unique path with beta(P) = `taken` (one flag per branch). Unnested g only.
PathVec compose_path(const WeightedCfg& g, const std::vector<bool>& taken);

// sum_{c in S} P_c - (|S| - 1) * P_0, coordinatewise.
std::vector<std::int64_t> basis_combination(const WeightedCfg& g, const std::vector<bool>& taken);

// Each branch condition closed over input bits through the straight-line
// assignments dominating it. Requires unnested g; throws UnsupportedStructure
// when a condition reads a variable written inside an earlier conditional.
std::vector<BoolFunc> symbolic_conditions(const WeightedCfg& g);

// Replaces the listed branch points (branch index -> forced outcome) by plain
// blocks following the forced edge and drops blocks that become unreachable.
// Remaining branch points keep their relative order.
WeightedCfg resolve_branches(const WeightedCfg& g, const std::map<std::size_t, bool>& forced);

// Debug view: blocks, edges, weights, conditions.
std::string cfg_to_json(const WeightedCfg& g);

}  // namespace qpa
