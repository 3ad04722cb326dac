#include "qpa/oracle.hpp"

#include <algorithm>

#include "parallel.hpp"
#include "qpa/cnf.hpp"
#include "qpa/errors.hpp"

namespace qpa {

namespace {

std::vector<std::optional<std::uint64_t>> initial_locals(const std::vector<VarDecl>& vars,
                                                         const InputAssignment& input) {
  std::vector<std::optional<std::uint64_t>> locals(vars.size());
  for (const VarDecl& d : vars)
    locals[d.slot] = d.is_input ? input.at(*d.input_index) & width_mask(d.width) : 0;
  return locals;
}

std::int64_t add_checked(std::int64_t a, std::int64_t b) {
  std::int64_t r;
  if (__builtin_add_overflow(a, b, &r)) throw StructuralError("path weight overflows int64");
  return r;
}

class AstRunner {
 public:
  AstRunner(const SourceProgram& p, const CostModel& cost, const InputAssignment& input)
      : cost_(cost), locals_(initial_locals(p.vars, input)) {
    env_.inputs = &input;
    env_.locals = &locals_;
    trace_.input = input;
  }

  ExecutionTrace run(const std::vector<Stmt>& body) {
    exec(body);
    flush();
    for (std::int64_t w : trace_.block_weights) trace_.weight = add_checked(trace_.weight, w);
    return std::move(trace_);
  }

 private:
  void flush() {
    trace_.block_weights.push_back(annotated_ ? annotation_ : cost_sum_);
    cost_sum_ = annotation_ = 0;
    annotated_ = nonempty_ = false;
  }

  void exec(const std::vector<Stmt>& body) {
    for (const Stmt& s : body) {
      if (const auto* a = std::get_if<AssignStmt>(&s.node)) {
        locals_[a->slot] = eval(a->rhs, env_);
        cost_sum_ += cost_.statement(a->rhs);
        nonempty_ = true;
      } else if (const auto* r = std::get_if<ReturnStmt>(&s.node)) {
        trace_.result = eval(r->value, env_);
        cost_sum_ += cost_.statement(r->value);
        nonempty_ = true;
      } else if (const auto* w = std::get_if<WeightStmt>(&s.node)) {
        annotation_ += w->amount;
        annotated_ = nonempty_ = true;
      } else if (const auto* loop = std::get_if<RepeatStmt>(&s.node)) {
        for (std::uint64_t k = 0; k < loop->count; ++k) exec(loop->body);
      } else {
        const auto& i = std::get<IfStmt>(s.node);
        if (nonempty_) flush();
        cost_sum_ += cost_.statement(i.cond);
        const bool c = eval(i.cond, env_) != 0;
        trace_.decisions.push_back(c);
        flush();
        const auto& arm = c ? i.then_body : i.else_body;
        if (!arm.empty()) {
          exec(arm);
          flush();
        }
      }
    }
  }

  const CostModel& cost_;
  std::vector<std::optional<std::uint64_t>> locals_;
  Env env_;
  ExecutionTrace trace_;
  std::int64_t cost_sum_ = 0;
  std::int64_t annotation_ = 0;
  bool annotated_ = false;
  bool nonempty_ = false;
};

std::int64_t cfg_weight(const WeightedCfg& g, const InputAssignment& input,
                        std::vector<std::optional<std::uint64_t>>& locals) {
  locals = initial_locals(g.vars(), input);
  Env env{&input, &locals};
  std::int64_t w = 0;
  std::size_t v = g.source();
  while (v != g.sink()) {
    const Block& b = g.blocks()[v];
    for (const CfgStmt& s : b.stmts)
      if (const auto* a = std::get_if<CfgAssign>(&s)) locals[a->slot] = eval(a->rhs, env);
    w = add_checked(w, b.weight);
    const auto& out = g.out_edges(v);
    std::size_t e = out[0];
    if (b.cond) e = eval(*b.cond, env) ? out[1] : out[0];
    v = g.edges()[e].to;
  }
  return w;
}

template <class Weigh>
WeightDistribution enumerate_inputs(const InputSpace& space, const OracleOptions& opts, OracleStats* stats,
                                    Weigh&& weigh) {
  const std::size_t bits = space.total_bits();
  if (bits > opts.max_input_bits || bits >= 64)
    throw BudgetError("brute force: " + std::to_string(bits) + " input bits exceed the limit of " +
                      std::to_string(opts.max_input_bits));
  const std::uint64_t total = std::uint64_t{1} << bits;
  const std::uint64_t chunks = std::min<std::uint64_t>(total, std::max(1u, opts.jobs) * 4ull);
  std::vector<std::map<std::int64_t, std::uint64_t>> partial(chunks);
  detail::parallel_for(chunks, opts.jobs, [&](std::size_t c) {
    const std::uint64_t lo = total * c / chunks, hi = total * (c + 1) / chunks;
    for (std::uint64_t x = lo; x < hi; ++x) ++partial[c][weigh(unpack_assignment(space, x))];
  });
  WeightDistribution d;
  d.input_bits = bits;
  for (const auto& part : partial)
    for (const auto& [w, n] : part) d.counts[w] += static_cast<unsigned long>(n);
  if (stats) stats->executions += total;
  return d;
}

}  // namespace

ExecutionTrace execute_cfg(const WeightedCfg& g, const InputAssignment& input) {
  ExecutionTrace t;
  t.input = input;
  auto locals = initial_locals(g.vars(), input);
  Env env{&input, &locals};
  std::size_t v = g.source();
  while (v != g.sink()) {
    const Block& b = g.blocks()[v];
    t.blocks.push_back(v);
    t.block_weights.push_back(b.weight);
    for (const CfgStmt& s : b.stmts) {
      if (const auto* a = std::get_if<CfgAssign>(&s)) locals[a->slot] = eval(a->rhs, env);
      else t.result = eval(std::get<CfgReturn>(s).value, env);
    }
    t.weight = add_checked(t.weight, b.weight);
    const auto& out = g.out_edges(v);
    std::size_t e = out[0];
    if (b.cond) {
      const bool c = eval(*b.cond, env) != 0;
      t.decisions.push_back(c);
      if (c) {
        e = out[1];
        t.taken.push_back(*g.branch_index(v));
      }
    }
    v = g.edges()[e].to;
  }
  return t;
}

ExecutionTrace execute_ast(const SourceProgram& p, const CostModel& cost, const InputAssignment& input) {
  return AstRunner(p, cost, input).run(p.body);
}

WeightDistribution brute_force_distribution(const WeightedCfg& g, const OracleOptions& opts,
                                            OracleStats* stats) {
  return enumerate_inputs(g.inputs(), opts, stats, [&](const InputAssignment& a) {
    thread_local std::vector<std::optional<std::uint64_t>> locals;
    return cfg_weight(g, a, locals);
  });
}

WeightDistribution brute_force_distribution(const SourceProgram& p, const CostModel& cost,
                                            const OracleOptions& opts, OracleStats* stats) {
  return enumerate_inputs(*p.inputs, opts, stats,
                          [&](const InputAssignment& a) { return execute_ast(p, cost, a).weight; });
}

WeightDistribution path_enumeration_distribution(const WeightedCfg& g, const OracleOptions& opts,
                                                 OracleStats* stats) {
  const std::size_t n = g.branch_points().size();
  if (n >= 64 || (std::uint64_t{1} << n) > opts.max_paths)
    throw BudgetError("path enumeration: 2^" + std::to_string(n) + " paths exceed the limit of " +
                      std::to_string(opts.max_paths));
  const std::vector<BoolFunc> conds = symbolic_conditions(g);

  CnfBuilder builder(g.input_space());
  std::vector<Lit> lits;
  for (const BoolFunc& f : conds) lits.push_back(builder.encode(f));

  const std::uint64_t total = std::uint64_t{1} << n;
  const std::uint64_t chunks = std::min<std::uint64_t>(total, std::max(1u, opts.jobs) * 4ull);
  std::vector<std::map<std::int64_t, BigInt>> partial(chunks);
  detail::parallel_for(chunks, opts.jobs, [&](std::size_t c) {
    const std::uint64_t lo = total * c / chunks, hi = total * (c + 1) / chunks;
    for (std::uint64_t s = lo; s < hi; ++s) {
      std::vector<bool> taken(n);
      CnfBuilder path = builder;
      for (std::size_t b = 0; b < n; ++b) {
        taken[b] = (s >> b) & 1;
        path.require(taken[b] ? lits[b] : -lits[b]);
      }
      const CnfFormula cnf = std::move(path).finish();
      const std::size_t free_bits = g.inputs().total_bits() - cnf.input_vars.size();
      BigInt count = count_projected(cnf, opts.solver).count;
      if (count == 0) continue;
      const std::int64_t w = path_weight(g, compose_path(g, taken));
      partial[c][w] += count * pow2(free_bits);
    }
  });

  WeightDistribution d;
  d.input_bits = g.inputs().total_bits();
  for (auto& part : partial)
    for (auto& [w, c] : part) d.counts[w] += c;
  if (stats) {
    stats->counter_calls += total;
    stats->paths += total;
  }
  return d;
}

}  // namespace qpa
