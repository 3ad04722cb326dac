#include "qpa/cfg.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "qpa/errors.hpp"

namespace qpa {

WeightedCfg::WeightedCfg(std::vector<VarDecl> vars, std::shared_ptr<const InputSpace> inputs,
                         std::vector<Block> blocks, std::vector<Edge> edges)
    : vars_(std::move(vars)), inputs_(std::move(inputs)), blocks_(std::move(blocks)),
      edges_(std::move(edges)) {
  if (!inputs_) throw StructuralError("cfg: missing input space");
  if (blocks_.size() < 2) throw StructuralError("cfg: needs at least a source and the dummy sink");
  const std::size_t n = blocks_.size();
  for (std::size_t v = 0; v < n; ++v) {
    const Block& b = blocks_[v];
    if (b.is_sink != (v == n - 1)) throw StructuralError("cfg: the dummy sink must be the last block");
    if (b.weight < 0) throw StructuralError("cfg: negative block weight");
    if (b.cond && b.cond->width() != 1) throw StructuralError("cfg: branch condition must be width 1");
  }
  if (!blocks_.back().stmts.empty() || blocks_.back().weight != 0 || blocks_.back().cond)
    throw StructuralError("cfg: the dummy sink must be empty with weight 0");

  std::stable_sort(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) {
    return a.from != b.from ? a.from < b.from : a.kind < b.kind;
  });
  out_.assign(n, {});
  in_.assign(n, {});
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const Edge& ed = edges_[e];
    if (ed.to >= n || ed.from >= ed.to) throw StructuralError("cfg: edges must go forward in block order");
    out_[ed.from].push_back(e);
    in_[ed.to].push_back(e);
  }
  if (!in_[0].empty()) throw StructuralError("cfg: block 0 must be the source");
  for (std::size_t v = 1; v < n; ++v)
    if (in_[v].empty()) throw StructuralError("cfg: block " + std::to_string(v) + " is unreachable");
  for (std::size_t v = 0; v + 1 < n; ++v) {
    const auto& out = out_[v];
    if (blocks_[v].cond) {
      if (out.size() != 2 || edges_[out[0]].kind != EdgeKind::False ||
          edges_[out[1]].kind != EdgeKind::True)
        throw StructuralError("cfg: branch block " + std::to_string(v) + " needs one false and one true edge");
      branches_.push_back(v);
    } else if (out.size() != 1 || edges_[out[0]].kind != EdgeKind::Next) {
      throw StructuralError("cfg: block " + std::to_string(v) + " needs exactly one successor");
    }
  }
  if (!out_[n - 1].empty()) throw StructuralError("cfg: the dummy sink has outgoing edges");
}

std::optional<std::size_t> WeightedCfg::branch_index(std::size_t block) const {
  auto it = std::lower_bound(branches_.begin(), branches_.end(), block);
  if (it == branches_.end() || *it != block) return std::nullopt;
  return static_cast<std::size_t>(it - branches_.begin());
}

std::size_t WeightedCfg::true_edge(std::size_t branch) const { return out_[branches_.at(branch)][1]; }
std::size_t WeightedCfg::false_edge(std::size_t branch) const { return out_[branches_.at(branch)][0]; }

namespace {

class CfgBuilder {
 public:
  explicit CfgBuilder(const CostModel& cost) : cost_(cost) {}

  WeightedCfg run(const SourceProgram& p) {
    std::size_t last = emit(p.body, new_block());
    std::size_t sink = new_block();
    blocks_[sink].is_sink = true;
    edge(last, sink, EdgeKind::Next);
    for (std::size_t v = 0; v < blocks_.size(); ++v) {
      blocks_[v].explicit_weight = annotated_[v];
      blocks_[v].weight = annotated_[v] ? annotation_[v] : default_cost_[v];
    }
    blocks_[sink].weight = 0;
    return WeightedCfg(p.vars, p.inputs, std::move(blocks_), std::move(edges_));
  }

 private:
  std::size_t new_block() {
    blocks_.emplace_back();
    annotation_.push_back(0);
    annotated_.push_back(false);
    default_cost_.push_back(0);
    return blocks_.size() - 1;
  }

  bool empty(std::size_t v) const {
    return blocks_[v].stmts.empty() && !annotated_[v] && !blocks_[v].cond;
  }

  void edge(std::size_t from, std::size_t to, EdgeKind kind) { edges_.push_back({from, to, kind}); }

  std::size_t emit(const std::vector<Stmt>& body, std::size_t cur) {
    for (const Stmt& s : body) {
      if (const auto* a = std::get_if<AssignStmt>(&s.node)) {
        blocks_[cur].stmts.push_back(CfgAssign{a->slot, a->name, a->rhs});
        default_cost_[cur] += cost_.statement(a->rhs);
      } else if (const auto* r = std::get_if<ReturnStmt>(&s.node)) {
        blocks_[cur].stmts.push_back(CfgReturn{r->value});
        default_cost_[cur] += cost_.statement(r->value);
      } else if (const auto* w = std::get_if<WeightStmt>(&s.node)) {
        annotation_[cur] += w->amount;
        annotated_[cur] = true;
      } else if (const auto* i = std::get_if<IfStmt>(&s.node)) {
        cur = emit_if(*i, cur);
      } else {
        throw StructuralError("build_cfg: program still contains a repeat loop (unroll it first)");
      }
    }
    return cur;
  }

  std::size_t emit_if(const IfStmt& s, std::size_t cur) {
    if (!empty(cur)) {
      std::size_t next = new_block();
      edge(cur, next, EdgeKind::Next);
      cur = next;
    }
    const std::size_t test = cur;
    blocks_[test].cond = s.cond;
    default_cost_[test] += cost_.statement(s.cond);

    std::optional<std::size_t> then_start, then_end, else_start, else_end;
    if (!s.then_body.empty()) {
      then_start = new_block();
      then_end = emit(s.then_body, *then_start);
    }
    if (!s.else_body.empty()) {
      else_start = new_block();
      else_end = emit(s.else_body, *else_start);
    }
    const std::size_t join = new_block();
    edge(test, else_start.value_or(join), EdgeKind::False);
    if (else_end) edge(*else_end, join, EdgeKind::Next);
    edge(test, then_start.value_or(join), EdgeKind::True);
    if (then_end) edge(*then_end, join, EdgeKind::Next);
    return join;
  }

  const CostModel& cost_;
  std::vector<Block> blocks_;
  std::vector<Edge> edges_;
  std::vector<std::int64_t> annotation_;
  std::vector<bool> annotated_;
  std::vector<std::int64_t> default_cost_;
};

}  // namespace

WeightedCfg build_cfg(const SourceProgram& program, const CostModel& cost) {
  if (!program.is_loop_free())
    throw StructuralError("build_cfg: program still contains a repeat loop (unroll it first)");
  return CfgBuilder(cost).run(program);
}

std::vector<std::size_t> dominators(const WeightedCfg& g) {
  const std::size_t n = g.blocks().size();
  std::vector<std::size_t> idom(n, 0);
  for (std::size_t v = 1; v < n; ++v) {
    const auto& in = g.in_edges(v);
    std::size_t d = g.edges()[in[0]].from;
    for (std::size_t k = 1; k < in.size(); ++k) {
      std::size_t b = g.edges()[in[k]].from;
      while (d != b) {
        if (d > b) d = idom[d];
        else b = idom[b];
      }
    }
    idom[v] = d;
  }
  return idom;
}

std::vector<std::size_t> post_dominators(const WeightedCfg& g) {
  const std::size_t n = g.blocks().size();
  std::vector<std::size_t> ipdom(n, n - 1);
  for (std::size_t v = n - 1; v-- > 0;) {
    const auto& out = g.out_edges(v);
    std::size_t d = g.edges()[out[0]].to;
    for (std::size_t k = 1; k < out.size(); ++k) {
      std::size_t b = g.edges()[out[k]].to;
      while (d != b) {
        if (d < b) d = ipdom[d];
        else b = ipdom[b];
      }
    }
    ipdom[v] = d;
  }
  return ipdom;
}

std::optional<NestingWitness> check_unnested(const WeightedCfg& g) {
  const auto ipdom = post_dominators(g);
  const auto& branches = g.branch_points();
  std::vector<std::size_t> seen(g.blocks().size(), SIZE_MAX);
  for (std::size_t i = 0; i < branches.size(); ++i) {
    // Walk the region strictly between the branch and its reconvergence point.
    const std::size_t b = branches[i];
    const std::size_t join = ipdom[b];
    std::vector<std::size_t> stack;
    for (std::size_t e : g.out_edges(b)) stack.push_back(g.edges()[e].to);
    while (!stack.empty()) {
      std::size_t v = stack.back();
      stack.pop_back();
      if (v == join || seen[v] == i) continue;
      seen[v] = i;
      if (g.blocks()[v].cond) return NestingWitness{i, *g.branch_index(v)};
      for (std::size_t e : g.out_edges(v)) stack.push_back(g.edges()[e].to);
    }
  }
  return std::nullopt;
}

namespace {

void require_unnested(const WeightedCfg& g) {
  if (auto w = check_unnested(g))
    throw StructuralError("nested conditionals: branch " + std::to_string(w->inner) +
                          " lies inside branch " + std::to_string(w->outer));
}

// Follows the edge vector from the source; returns visited blocks.
std::vector<std::size_t> walk_edges(const WeightedCfg& g, const std::vector<std::uint8_t>& edges,
                                    std::vector<std::size_t>* taken) {
  if (edges.size() != g.edges().size())
    throw StructuralError("path vector has " + std::to_string(edges.size()) + " coordinates, expected " +
                          std::to_string(g.edges().size()));
  std::size_t selected = 0;
  for (std::uint8_t x : edges) {
    if (x > 1) throw StructuralError("path vector coordinates must be 0 or 1");
    selected += x;
  }
  std::vector<std::size_t> visited;
  std::size_t v = g.source();
  while (v != g.sink()) {
    visited.push_back(v);
    std::optional<std::size_t> next;
    for (std::size_t e : g.out_edges(v)) {
      if (!edges[e]) continue;
      if (next) throw StructuralError("path leaves block " + std::to_string(v) + " twice");
      next = e;
    }
    if (!next) throw StructuralError("path stops at block " + std::to_string(v));
    if (taken && g.edges()[*next].kind == EdgeKind::True) taken->push_back(*g.branch_index(v));
    v = g.edges()[*next].to;
  }
  if (visited.size() != selected) throw StructuralError("path vector selects edges off the path");
  return visited;
}

}  // namespace

std::vector<std::size_t> branch_set(const WeightedCfg& g, const std::vector<std::uint8_t>& edges) {
  std::vector<std::size_t> taken;
  walk_edges(g, edges, &taken);
  return taken;
}

std::int64_t path_weight(const WeightedCfg& g, const PathVec& p) {
  std::vector<std::size_t> taken;
  std::int64_t w = 0;
  for (std::size_t v : walk_edges(g, p.edges, &taken))
    if (__builtin_add_overflow(w, g.blocks()[v].weight, &w)) throw StructuralError("path weight overflows int64");
  if (taken != p.branches) throw StructuralError("path vector disagrees with its branch set");
  return w;
}

namespace {

PathVec follow(const WeightedCfg& g, const std::vector<bool>& taken) {
  if (taken.size() != g.branch_points().size())
    throw StructuralError("branch set has " + std::to_string(taken.size()) + " flags, expected " +
                          std::to_string(g.branch_points().size()));
  PathVec p;
  p.edges.assign(g.edges().size(), 0);
  std::size_t v = g.source();
  while (v != g.sink()) {
    std::size_t e;
    if (auto b = g.branch_index(v)) {
      e = taken[*b] ? g.true_edge(*b) : g.false_edge(*b);
      if (taken[*b]) p.branches.push_back(*b);
    } else {
      e = g.out_edges(v)[0];
    }
    p.edges[e] = 1;
    v = g.edges()[e].to;
  }
  // With nesting some requested branches are never reached.
  std::size_t requested = static_cast<std::size_t>(std::count(taken.begin(), taken.end(), true));
  if (p.branches.size() != requested) throw StructuralError("no path realises the requested branch set");
  return p;
}

}  // namespace

PathVec compose_path(const WeightedCfg& g, const std::vector<bool>& taken) {
  require_unnested(g);
  return follow(g, taken);
}

SpecialPaths special_paths(const WeightedCfg& g) {
  require_unnested(g);
  const std::size_t nb = g.branch_points().size();
  SpecialPaths sp;
  sp.none = follow(g, std::vector<bool>(nb, false));
  for (std::size_t b = 0; b < nb; ++b) {
    std::vector<bool> only(nb, false);
    only[b] = true;
    sp.single.push_back(follow(g, only));
  }
  return sp;
}

std::vector<std::int64_t> basis_combination(const WeightedCfg& g, const std::vector<bool>& taken) {
  SpecialPaths sp = special_paths(g);
  if (taken.size() != sp.single.size()) throw StructuralError("branch set size mismatch");
  const std::int64_t k = std::count(taken.begin(), taken.end(), true);
  std::vector<std::int64_t> out(g.edges().size());
  for (std::size_t e = 0; e < out.size(); ++e) {
    std::int64_t x = -(k - 1) * sp.none.edges[e];
    for (std::size_t b = 0; b < taken.size(); ++b)
      if (taken[b]) x += sp.single[b].edges[e];
    out[e] = x;
  }
  return out;
}

std::vector<BoolFunc> symbolic_conditions(const WeightedCfg& g) {
  require_unnested(g);
  const std::size_t n = g.blocks().size();
  const auto idom = dominators(g);

  // Spine: blocks dominating the sink. Everything else sits in a diamond arm.
  std::vector<bool> spine(n, false);
  for (std::size_t v = g.sink();; v = idom[v]) {
    spine[v] = true;
    if (v == g.source()) break;
  }

  const auto& vars = g.vars();
  std::vector<std::optional<BVExpr>> value(vars.size());
  std::vector<std::optional<std::size_t>> written_in(vars.size());  // branch whose arm wrote it
  for (const VarDecl& d : vars)
    value[d.slot] = d.is_input ? BVExpr::input(*d.input_index, d.name, d.width)
                               : BVExpr::constant(0, d.width);

  auto tainting_read = [&](const BVExpr& e) -> std::optional<std::size_t> {
    std::optional<std::size_t> found;
    substitute(e, [&](std::size_t slot, const std::string&) -> std::optional<BVExpr> {
      if (!found && written_in[slot]) found = slot;
      return std::nullopt;
    });
    return found;
  };
  auto close = [&](const BVExpr& e) {
    return substitute(e, [&](std::size_t slot, const std::string&) { return value[slot]; });
  };

  std::vector<BoolFunc> out;
  for (std::size_t v = 0; v + 1 < n; ++v) {
    const Block& blk = g.blocks()[v];
    if (!spine[v]) {
      std::size_t owner = v;
      while (!g.blocks()[owner].cond || !spine[owner]) owner = idom[owner];
      for (const CfgStmt& s : blk.stmts)
        if (const auto* a = std::get_if<CfgAssign>(&s)) written_in[a->slot] = *g.branch_index(owner);
      continue;
    }
    for (const CfgStmt& s : blk.stmts) {
      const auto* a = std::get_if<CfgAssign>(&s);
      if (!a) continue;
      if (auto slot = tainting_read(a->rhs)) {
        written_in[a->slot] = written_in[*slot];
      } else {
        value[a->slot] = close(a->rhs);
        written_in[a->slot].reset();
      }
    }
    if (!blk.cond) continue;
    const std::size_t branch = *g.branch_index(v);
    if (auto slot = tainting_read(*blk.cond)) {
      throw UnsupportedStructure(
          branch, vars[*slot].name,
          "branch " + std::to_string(branch) + " reads '" + vars[*slot].name +
              "', which is written inside the conditional of branch " +
              std::to_string(*written_in[*slot]));
    }
    std::map<std::string, BVExpr> bindings;
    for (const VarDecl& d : vars) bindings.emplace(d.name, *value[d.slot]);
    out.push_back(close_over_inputs(*blk.cond, bindings, g.input_space()));
  }
  return out;
}

WeightedCfg resolve_branches(const WeightedCfg& g, const std::map<std::size_t, bool>& forced) {
  std::vector<Block> blocks = g.blocks();
  std::vector<Edge> edges = g.edges();
  std::vector<bool> dropped(edges.size(), false);
  for (auto [branch, outcome] : forced) {
    std::size_t v = g.branch_points().at(branch);
    blocks[v].cond.reset();
    std::size_t keep = outcome ? g.true_edge(branch) : g.false_edge(branch);
    std::size_t drop = outcome ? g.false_edge(branch) : g.true_edge(branch);
    edges[keep].kind = EdgeKind::Next;
    dropped[drop] = true;
  }
  const std::size_t n = blocks.size();
  std::vector<bool> reachable(n, false);
  reachable[0] = true;
  for (std::size_t v = 0; v < n; ++v) {
    if (!reachable[v]) continue;
    for (std::size_t e : g.out_edges(v))
      if (!dropped[e]) reachable[edges[e].to] = true;
  }
  std::vector<std::size_t> renumber(n, SIZE_MAX);
  std::vector<Block> kept_blocks;
  for (std::size_t v = 0; v < n; ++v)
    if (reachable[v]) {
      renumber[v] = kept_blocks.size();
      kept_blocks.push_back(std::move(blocks[v]));
    }
  std::vector<Edge> kept_edges;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (dropped[e] || !reachable[edges[e].from]) continue;
    kept_edges.push_back({renumber[edges[e].from], renumber[edges[e].to], edges[e].kind});
  }
  return WeightedCfg(g.vars(), g.input_space(), std::move(kept_blocks), std::move(kept_edges));
}

std::string cfg_to_json(const WeightedCfg& g) {
  using nlohmann::json;
  json j;
  json inputs = json::array();
  for (const InputVar& v : g.inputs().vars()) inputs.push_back({{"name", v.name}, {"width", v.width}});
  j["inputs"] = inputs;
  json blocks = json::array();
  for (std::size_t v = 0; v < g.blocks().size(); ++v) {
    const Block& b = g.blocks()[v];
    json stmts = json::array();
    for (const CfgStmt& s : b.stmts) {
      if (const auto* a = std::get_if<CfgAssign>(&s)) stmts.push_back(a->name + " = " + to_string(a->rhs));
      else stmts.push_back("return " + to_string(std::get<CfgReturn>(s).value));
    }
    json jb = {{"id", v}, {"weight", b.weight}, {"explicit_weight", b.explicit_weight},
               {"statements", stmts}, {"sink", b.is_sink}};
    jb["condition"] = b.cond ? json(to_string(*b.cond)) : json(nullptr);
    blocks.push_back(jb);
  }
  j["blocks"] = blocks;
  json edges = json::array();
  for (std::size_t e = 0; e < g.edges().size(); ++e) {
    const Edge& ed = g.edges()[e];
    const char* kind = ed.kind == EdgeKind::True ? "true" : ed.kind == EdgeKind::False ? "false" : "next";
    edges.push_back({{"id", e + 1}, {"from", ed.from}, {"to", ed.to}, {"kind", kind}});
  }
  j["edges"] = edges;
  j["branch_points"] = g.branch_points();
  return j.dump(2);
}

}  // namespace qpa
