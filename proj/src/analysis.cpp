#include "qpa/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "parallel.hpp"
#include "qpa/cnf.hpp"
#include "qpa/sums.hpp"

namespace qpa {

std::string_view failure_reason_name(FailureReason r) {
  switch (r) {
    case FailureReason::Nested: return "nested";
    case FailureReason::Unsupported: return "unsupported";
    case FailureReason::Dependent: return "dependent";
  }
  return "?";
}

AnalysisStats& AnalysisStats::operator+=(const AnalysisStats& o) {
  counter_calls += o.counter_calls;
  equiv_calls += o.equiv_calls;
  sat_calls += o.sat_calls;
  paths += o.paths;
  solver += o.solver;
  return *this;
}

BigInt WeightDistribution::total() const {
  BigInt t = 0;
  for (const auto& [w, c] : counts) t += c;
  return t;
}

std::vector<std::int64_t> WeightDistribution::weights() const {
  std::vector<std::int64_t> out;
  for (const auto& [w, c] : counts) out.push_back(w);
  return out;
}

namespace {

std::int64_t add_weight(std::int64_t a, std::int64_t b) {
  std::int64_t r;
  if (__builtin_add_overflow(a, b, &r)) throw StructuralError("path weight overflows int64");
  return r;
}

std::int64_t sub_weight(std::int64_t a, std::int64_t b) {
  std::int64_t r;
  if (__builtin_sub_overflow(a, b, &r)) throw StructuralError("path weight overflows int64");
  return r;
}

void check_path_budget(std::size_t exponent, const AnalysisOptions& opts, const char* what) {
  if (exponent >= 64 || (std::uint64_t{1} << exponent) > opts.max_paths)
    throw BudgetError(std::string(what) + ": 2^" + std::to_string(exponent) +
                      " exceeds the path budget of " + std::to_string(opts.max_paths));
}

struct Basis {
  std::int64_t w0 = 0;
  std::vector<std::int64_t> delta;  // w(P_b) - w(P_0)
};

Basis basis_weights(const WeightedCfg& g) {
  SpecialPaths sp = special_paths(g);
  Basis b;
  b.w0 = path_weight(g, sp.none);
  for (const PathVec& p : sp.single) b.delta.push_back(sub_weight(path_weight(g, p), b.w0));
  return b;
}

std::vector<InputBit> residual_bits(const InputSpace& inputs, const std::vector<BranchInfo>& branches) {
  std::vector<bool> used(inputs.total_bits(), false);
  for (const BranchInfo& b : branches)
    for (InputBit x : b.support) used[x] = true;
  std::vector<InputBit> out;
  for (InputBit x = 0; x < used.size(); ++x)
    if (!used[x]) out.push_back(x);
  return out;
}

Failure dependence_failure(const Independence& ind) {
  for (const auto& grp : ind.groups) {
    if (grp.size() < 2) continue;
    std::string msg = "branches";
    for (std::size_t b : grp) msg += " " + std::to_string(b);
    msg += " share support bits (enable dependent-group handling to analyse them jointly)";
    return Failure{FailureReason::Dependent, msg, grp, ""};
  }
  return Failure{FailureReason::Dependent, "dependent branches", {}, ""};
}

}  // namespace

Outcome<BranchProfile> find_condition_supports(const WeightedCfg& g, const AnalysisOptions& opts,
                                               AnalysisStats* stats) {
  if (auto w = check_unnested(g)) {
    return Failure{FailureReason::Nested,
                   "there are nested conditionals: branch " + std::to_string(w->inner) +
                       " (block " + std::to_string(g.branch_points()[w->inner]) +
                       ") lies inside branch " + std::to_string(w->outer) + " (block " +
                       std::to_string(g.branch_points()[w->outer]) + ")",
                   {w->outer, w->inner},
                   ""};
  }
  std::vector<BoolFunc> conds;
  try {
    conds = symbolic_conditions(g);
  } catch (const UnsupportedStructure& e) {
    return Failure{FailureReason::Unsupported, e.what(), {e.branch()}, e.variable()};
  }

  const std::size_t n = conds.size();
  std::vector<std::vector<InputBit>> supports(n);
  std::vector<AnalysisStats> local(n);
  detail::parallel_for(n, opts.jobs, [&](std::size_t i) {
    const BoolFunc& f = conds[i];
    for (InputBit bit : f.bits()) {
      ++local[i].equiv_calls;
      if (!equiv(cofactor(f, bit, false), cofactor(f, bit, true), opts.solver, &local[i].solver))
        supports[i].push_back(bit);
    }
  });

  BranchProfile p;
  p.inputs = g.input_space();
  for (std::size_t i = 0; i < n; ++i) {
    p.branches.push_back(BranchInfo{g.branch_points()[i], conds[i], std::move(supports[i]), std::nullopt});
    if (stats) *stats += local[i];
  }
  p.residual = residual_bits(*p.inputs, p.branches);
  return p;
}

Independence check_independence(const BranchProfile& p) {
  const std::size_t n = p.branches.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::map<InputBit, std::size_t> owner;
  Independence out;
  for (std::size_t b = 0; b < n; ++b) {
    for (InputBit x : p.branches[b].support) {
      auto [it, fresh] = owner.emplace(x, b);
      if (fresh) continue;
      out.pairwise_independent = false;
      std::size_t ra = find(it->second), rb = find(b);
      if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
    }
  }
  std::map<std::size_t, std::size_t> slot;  // root -> group index
  for (std::size_t b = 0; b < n; ++b) {
    std::size_t r = find(b);
    auto [it, fresh] = slot.emplace(r, out.groups.size());
    if (fresh) out.groups.emplace_back();
    out.groups[it->second].push_back(b);
  }
  return out;
}

BranchProfile true_counts(BranchProfile p, const AnalysisOptions& opts, AnalysisStats* stats) {
  const std::size_t n = p.branches.size();
  std::vector<AnalysisStats> local(n);
  detail::parallel_for(n, opts.jobs, [&](std::size_t i) {
    BranchInfo& b = p.branches[i];
    CountResult r = model_count(b.cond, b.support, opts.solver);
    ++local[i].counter_calls;
    local[i].solver += r.stats;
    b.true_count = std::move(r.count);
  });
  if (stats)
    for (const AnalysisStats& s : local) *stats += s;
  return p;
}

BigInt path_probability(const BranchProfile& p, const std::vector<bool>& taken) {
  if (taken.size() != p.branches.size()) throw StructuralError("path_probability: branch set size mismatch");
  BigInt num = pow2(p.residual.size());
  for (std::size_t b = 0; b < taken.size(); ++b) {
    const BranchInfo& info = p.branches[b];
    if (!info.true_count) throw StructuralError("path_probability: true counts not computed");
    num *= taken[b] ? *info.true_count : pow2(info.support.size()) - *info.true_count;
  }
  return num;
}

Outcome<WeightDistribution> find_weight_distribution(const WeightedCfg& g, const AnalysisOptions& opts,
                                                     AnalysisStats* stats) {
  Outcome<BranchProfile> supports = find_condition_supports(g, opts, stats);
  if (!supports) return supports.failure();
  Independence ind = check_independence(supports.value());
  if (!ind.pairwise_independent) {
    if (!opts.dependent_groups) return dependence_failure(ind);
    return std::get<WeightDistribution>(
        analyze_dependent_groups(g, supports.value(), Problem::Distribution, opts, stats));
  }

  const std::size_t n = g.branch_points().size();
  check_path_budget(n, opts, "find_weight_distribution");
  BranchProfile p = true_counts(std::move(supports.value()), opts, stats);
  const Basis basis = basis_weights(g);

  std::vector<BigInt> on(n), off(n);
  for (std::size_t b = 0; b < n; ++b) {
    on[b] = *p.branches[b].true_count;
    off[b] = pow2(p.branches[b].support.size()) - on[b];
  }

  // Gray-code walk over subsets. Zero factors are counted apart so every step
  // is one exact division and one multiplication.
  const std::uint64_t total = std::uint64_t{1} << n;
  const std::uint64_t chunks = std::min<std::uint64_t>(std::max(1u, opts.jobs), total);
  std::vector<std::map<std::int64_t, BigInt>> partial(chunks);
  detail::parallel_for(chunks, opts.jobs, [&](std::size_t c) {
    const std::uint64_t lo = total * c / chunks, hi = total * (c + 1) / chunks;
    std::uint64_t code = lo ^ (lo >> 1);
    BigInt prod = 1;
    std::size_t zeros = 0;
    std::int64_t weight = basis.w0;
    auto include = [&](const BigInt& f) {
      if (f == 0) ++zeros;
      else prod *= f;
    };
    auto exclude = [&](const BigInt& f) {
      if (f == 0) --zeros;
      else mpz_divexact(prod.get_mpz_t(), prod.get_mpz_t(), f.get_mpz_t());
    };
    for (std::size_t b = 0; b < n; ++b) {
      if ((code >> b) & 1) {
        include(on[b]);
        weight = add_weight(weight, basis.delta[b]);
      } else {
        include(off[b]);
      }
    }
    auto& acc = partial[c];
    for (std::uint64_t i = lo; i < hi; ++i) {
      if (i != lo) {
        const unsigned b = static_cast<unsigned>(__builtin_ctzll(i));
        if ((code >> b) & 1) {
          exclude(on[b]);
          include(off[b]);
          weight = sub_weight(weight, basis.delta[b]);
        } else {
          exclude(off[b]);
          include(on[b]);
          weight = add_weight(weight, basis.delta[b]);
        }
        code ^= std::uint64_t{1} << b;
      }
      if (zeros == 0) acc[weight] += prod;
    }
  });

  WeightDistribution d;
  d.input_bits = g.inputs().total_bits();
  const BigInt scale = pow2(p.residual.size());
  for (auto& part : partial)
    for (auto& [w, c] : part) d.counts[w] += c;
  for (auto& [w, c] : d.counts) c *= scale;
  if (stats) stats->paths += total;
  return d;
}

Elimination eliminate_trivial(const WeightedCfg& g, const BranchProfile& p, const AnalysisOptions& opts,
                              AnalysisStats* stats) {
  std::map<std::size_t, bool> forced;
  for (std::size_t b = 0; b < p.branches.size(); ++b) {
    const BranchInfo& info = p.branches[b];
    if (!info.support.empty()) continue;
    SolverStats st;
    forced[b] = is_sat(bit_blast(info.cond), opts.solver, &st);
    if (stats) {
      ++stats->sat_calls;
      stats->solver += st;
    }
  }
  WeightedCfg reduced = resolve_branches(g, forced);
  BranchProfile q;
  q.inputs = p.inputs;
  std::size_t k = 0;
  for (std::size_t b = 0; b < p.branches.size(); ++b) {
    if (forced.count(b)) continue;
    BranchInfo info = p.branches[b];
    info.block = reduced.branch_points().at(k++);
    q.branches.push_back(std::move(info));
  }
  q.residual = residual_bits(*q.inputs, q.branches);
  return Elimination{std::move(reduced), std::move(q), std::move(forced)};
}

namespace {

// Shared front half of the value-set computations: supports, the dependence
// check, trivial elimination, and the difference multiset.
struct ValuePrep {
  std::optional<Failure> failure;
  std::optional<ValueSet> dependent;  // answered by group enumeration
  Basis basis;
};

ValuePrep prepare_values(const WeightedCfg& g, const AnalysisOptions& opts, AnalysisStats* stats) {
  ValuePrep out;
  Outcome<BranchProfile> supports = find_condition_supports(g, opts, stats);
  if (!supports) {
    out.failure = supports.failure();
    return out;
  }
  Independence ind = check_independence(supports.value());
  if (!ind.pairwise_independent) {
    if (!opts.dependent_groups) out.failure = dependence_failure(ind);
    else
      out.dependent = std::get<ValueSet>(
          analyze_dependent_groups(g, supports.value(), Problem::Values, opts, stats));
    return out;
  }
  Elimination el = eliminate_trivial(g, supports.value(), opts, stats);
  out.basis = basis_weights(el.graph);
  return out;
}

}  // namespace

Outcome<ValueSet> find_possible_weights(const WeightedCfg& g, const AnalysisOptions& opts,
                                        AnalysisStats* stats) {
  ValuePrep prep = prepare_values(g, opts, stats);
  if (prep.failure) return *prep.failure;
  if (prep.dependent) return *prep.dependent;
  ValueSet v;
  for (std::int64_t s : submultiset_sums(prep.basis.delta)) v.values.push_back(add_weight(prep.basis.w0, s));
  return v;
}

Outcome<std::size_t> count_possible_weights(const WeightedCfg& g, const AnalysisOptions& opts,
                                            AnalysisStats* stats) {
  ValuePrep prep = prepare_values(g, opts, stats);
  if (prep.failure) return *prep.failure;
  if (prep.dependent) return prep.dependent->values.size();
  return submultiset_sums(abs_transform(prep.basis.delta)).size();
}

std::variant<WeightDistribution, ValueSet> analyze_dependent_groups(
    const WeightedCfg& g, const BranchProfile& p, Problem problem, const AnalysisOptions& opts,
    AnalysisStats* stats) {
  if (p.branches.size() != g.branch_points().size())
    throw StructuralError("analyze_dependent_groups: profile does not match the graph");
  std::optional<Elimination> el;
  const WeightedCfg* graph = &g;
  const BranchProfile* prof = &p;
  if (problem == Problem::Values) {
    el.emplace(eliminate_trivial(g, p, opts, stats));
    graph = &el->graph;
    prof = &el->profile;
  }
  const Independence ind = check_independence(*prof);
  std::size_t joint_bits = 0;
  for (const auto& grp : ind.groups) {
    if (grp.size() > opts.max_dependent_group)
      throw BudgetError("dependent group of " + std::to_string(grp.size()) +
                        " branches exceeds the limit of " + std::to_string(opts.max_dependent_group));
    joint_bits += grp.size();
  }
  check_path_budget(joint_bits, opts, "dependent-group enumeration");
  const Basis basis = basis_weights(*graph);
  const auto& branches = prof->branches;

  AnalysisStats local;
  std::vector<std::int64_t> singles;              // Values: deltas of singleton groups
  std::vector<std::vector<std::int64_t>> joint;   // Values: feasible delta sums per group
  std::map<std::int64_t, BigInt> dist{{basis.w0, pow2(prof->residual.size())}};

  for (const auto& grp : ind.groups) {
    std::vector<std::pair<std::int64_t, BigInt>> entries;  // (delta sum, joint count)
    if (grp.size() == 1) {
      const std::size_t b = grp[0];
      local.paths += 2;
      if (problem == Problem::Values) {
        singles.push_back(basis.delta[b]);
        continue;
      }
      CountResult r = model_count(branches[b].cond, branches[b].support, opts.solver);
      ++local.counter_calls;
      local.solver += r.stats;
      entries.emplace_back(basis.delta[b], r.count);
      entries.emplace_back(0, pow2(branches[b].support.size()) - r.count);
    } else {
      std::set<InputBit> united;
      for (std::size_t b : grp) united.insert(branches[b].support.begin(), branches[b].support.end());
      // Bits a condition mentions but does not depend on are pinned to 0.
      std::vector<BoolFunc> conds;
      for (std::size_t b : grp) {
        BoolFunc f = branches[b].cond;
        for (InputBit x : branches[b].cond.bits())
          if (!united.count(x)) f = cofactor(f, x, false);
        conds.push_back(std::move(f));
      }
      std::set<std::int64_t> feasible;
      for (std::uint64_t a = 0; a < (std::uint64_t{1} << grp.size()); ++a) {
        CnfBuilder builder(prof->inputs);
        std::int64_t delta = 0;
        for (std::size_t j = 0; j < grp.size(); ++j) {
          Lit l = builder.encode(conds[j]);
          const bool on = (a >> j) & 1;
          builder.require(on ? l : -l);
          if (on) delta = add_weight(delta, basis.delta[grp[j]]);
        }
        CnfFormula cnf = std::move(builder).finish();
        ++local.paths;
        if (problem == Problem::Values) {
          ++local.sat_calls;
          if (is_sat(cnf, opts.solver, &local.solver)) feasible.insert(delta);
        } else {
          if (cnf.input_vars.size() > united.size())
            throw StructuralError("dependent group: encoding mentions bits outside the joint support");
          CountResult r = count_projected(cnf, opts.solver);
          ++local.counter_calls;
          local.solver += r.stats;
          BigInt c = r.count * pow2(united.size() - cnf.input_vars.size());
          entries.emplace_back(delta, std::move(c));
        }
      }
      if (problem == Problem::Values) {
        joint.emplace_back(feasible.begin(), feasible.end());
        continue;
      }
    }
    std::map<std::int64_t, BigInt> next;
    for (const auto& [w, c] : dist)
      for (const auto& [delta, k] : entries)
        if (k != 0) next[add_weight(w, delta)] += c * k;
    dist.swap(next);
  }
  if (stats) *stats += local;

  if (problem == Problem::Distribution) {
    WeightDistribution d;
    d.input_bits = prof->inputs->total_bits();
    d.counts = std::move(dist);
    return d;
  }
  std::vector<std::int64_t> acc = submultiset_sums(singles);
  for (const auto& options : joint) {
    std::set<std::int64_t> sum;
    for (std::int64_t x : acc)
      for (std::int64_t y : options) sum.insert(add_weight(x, y));
    acc.assign(sum.begin(), sum.end());
  }
  ValueSet v;
  for (std::int64_t x : acc) v.values.push_back(add_weight(basis.w0, x));
  return v;
}

double channel_capacity(std::size_t value_count) {
  if (value_count == 0) throw StructuralError("channel capacity of an empty value set");
  return std::log2(static_cast<double>(value_count));
}

double channel_capacity(const ValueSet& v) { return channel_capacity(v.values.size()); }

double shannon_entropy(const WeightDistribution& d) {
  double h = 0;
  const double k = static_cast<double>(d.input_bits);
  for (const auto& [w, c] : d.counts) {
    if (c <= 0) continue;
    h += ratio_pow2(c, d.input_bits) * (k - log2_big(c));
  }
  return h;
}

}  // namespace qpa
