#include "qpa/solver.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <unordered_map>

#include "qpa/errors.hpp"

namespace qpa {

SolverStats& SolverStats::operator+=(const SolverStats& o) {
  decisions += o.decisions;
  propagations += o.propagations;
  components += o.components;
  cache_hits += o.cache_hits;
  seconds += o.seconds;
  return *this;
}

namespace {

using Clock = std::chrono::steady_clock;

// Counter-based unit propagation with an undo trail. Each clause tracks how
// many of its literals are true / false, so "every clause satisfied" is O(1).
class Engine {
 public:
  Engine(const CnfFormula& cnf, const SolverOptions& opts)
      : cnf_(cnf), opts_(opts), start_(Clock::now()) {
    const int n = cnf.num_vars;
    val_.assign(n + 1, 0);
    pos_.resize(n + 1);
    neg_.resize(n + 1);
    is_input_.assign(n + 1, false);
    for (const auto& [bit, v] : cnf.input_vars) {
      if (v < 1 || v > n) throw StructuralError("input variable out of range");
      is_input_[v] = true;
      inputs_.push_back(v);
    }
    n_true_.assign(cnf.clauses.size(), 0);
    n_false_.assign(cnf.clauses.size(), 0);
    for (std::size_t c = 0; c < cnf.clauses.size(); ++c) {
      const auto& cl = cnf.clauses[c];
      if (cl.empty()) root_conflict_ = true;
      for (Lit l : cl) {
        int v = std::abs(l);
        if (v < 1 || v > n) throw StructuralError("literal out of range in clause");
        (l > 0 ? pos_ : neg_)[v].push_back(static_cast<int>(c));
      }
      if (cl.size() == 1) queue_.push_back(static_cast<int>(c));
    }
    // Seeded tie-break ranks.
    rank_.resize(n + 1);
    std::iota(rank_.begin(), rank_.end(), 0);
    if (opts.seed != 0) {
      std::mt19937_64 rng(opts.seed);
      std::shuffle(rank_.begin() + 1, rank_.end(), rng);
    }
    std::sort(inputs_.begin(), inputs_.end(),
              [&](int a, int b) { return rank_[a] < rank_[b]; });
    stamp_.assign(cnf.clauses.size(), 0);
    var_stamp_.assign(n + 1, 0);
  }

  SolverStats& stats() { return stats_; }
  std::size_t trail_size() const { return trail_.size(); }
  bool all_satisfied() const { return satisfied_ == cnf_.clauses.size(); }
  std::size_t free_inputs() const { return inputs_.size() - assigned_inputs_; }
  int value(int v) const { return val_[v]; }

  // Root-level propagation. False on conflict.
  bool init() {
    if (root_conflict_) return false;
    return propagate();
  }

  void decide(Lit l) {
    ++stats_.decisions;
    if (opts_.max_decisions && stats_.decisions > opts_.max_decisions)
      throw BudgetError("solver decision budget exceeded (" +
                        std::to_string(opts_.max_decisions) + ")");
    if (opts_.max_seconds > 0 && (stats_.decisions & 255) == 0) {
      double s = std::chrono::duration<double>(Clock::now() - start_).count();
      if (s > opts_.max_seconds) throw BudgetError("solver time budget exceeded");
    }
    assign(l);
  }

  bool propagate() {
    while (!conflict_ && !queue_.empty()) {
      int c = queue_.back();
      queue_.pop_back();
      if (n_true_[c] > 0) continue;
      Lit unit = 0;
      for (Lit l : cnf_.clauses[c])
        if (val_[std::abs(l)] == 0) {
          unit = l;
          break;
        }
      if (unit == 0) {
        conflict_ = true;
        break;
      }
      ++stats_.propagations;
      assign(unit);
    }
    if (conflict_) queue_.clear();
    return !conflict_;
  }

  void undo_to(std::size_t mark) {
    while (trail_.size() > mark) {
      Lit l = trail_.back();
      trail_.pop_back();
      int v = std::abs(l);
      for (int c : (l > 0 ? pos_ : neg_)[v])
        if (--n_true_[c] == 0) --satisfied_;
      for (int c : (l > 0 ? neg_ : pos_)[v]) --n_false_[c];
      val_[v] = 0;
      if (is_input_[v]) --assigned_inputs_;
    }
    conflict_ = false;
    queue_.clear();
  }

  // DFS over input variables in rank order; aux variables only via propagation
  // or the leaf satisfiability check.
  BigInt count_enumerate(std::size_t next) {
    if (all_satisfied()) return pow2(free_inputs());
    while (next < inputs_.size() && val_[inputs_[next]] != 0) ++next;
    if (next == inputs_.size()) return solve_restricted(nullptr) ? BigInt(1) : BigInt(0);
    const int v = inputs_[next];
    BigInt total = 0;
    for (Lit l : {v, -v}) {
      std::size_t mark = trail_.size();
      decide(l);
      if (propagate()) total += count_enumerate(next + 1);
      undo_to(mark);
    }
    return total;
  }

  // Projected count of the whole formula by component decomposition.
  BigInt count_components() {
    std::vector<int> open = open_clauses_all();
    return count_split(open, inputs_in_open_complement(open));
  }

  // DPLL. With `scope`, decisions are limited to variables of those clauses.
  bool solve_restricted(const std::vector<int>* scope) {
    if (conflict_) return false;
    int v = pick_any(scope);
    if (v == 0) return true;
    for (Lit l : {v, -v}) {
      std::size_t mark = trail_.size();
      decide(l);
      bool ok = propagate() && solve_restricted(scope);
      undo_to(mark);
      if (ok) return true;
    }
    return false;
  }

 private:
  void assign(Lit l) {
    int v = std::abs(l);
    val_[v] = l > 0 ? 1 : -1;
    trail_.push_back(l);
    if (is_input_[v]) ++assigned_inputs_;
    for (int c : (l > 0 ? pos_ : neg_)[v])
      if (n_true_[c]++ == 0) ++satisfied_;
    for (int c : (l > 0 ? neg_ : pos_)[v]) {
      int nf = ++n_false_[c];
      if (n_true_[c] > 0) continue;
      int size = static_cast<int>(cnf_.clauses[c].size());
      if (nf == size) conflict_ = true;
      else if (nf == size - 1) queue_.push_back(c);
    }
  }

  // An unassigned variable of an unsatisfied clause (inputs first), or 0.
  int pick_any(const std::vector<int>* scope) {
    int best = 0;
    bool best_input = false;
    auto consider = [&](int c) {
      if (n_true_[c] > 0) return;
      for (Lit l : cnf_.clauses[c]) {
        int v = std::abs(l);
        if (val_[v] != 0) continue;
        bool in = is_input_[v];
        if (best == 0 || (in && !best_input) || (in == best_input && rank_[v] < rank_[best])) {
          best = v;
          best_input = in;
        }
      }
    };
    if (scope) {
      for (int c : *scope) consider(c);
    } else {
      for (std::size_t c = 0; c < cnf_.clauses.size(); ++c) consider(static_cast<int>(c));
    }
    return best;
  }

  std::vector<int> open_clauses_all() const {
    std::vector<int> open;
    for (std::size_t c = 0; c < cnf_.clauses.size(); ++c)
      if (n_true_[c] == 0) open.push_back(static_cast<int>(c));
    return open;
  }

  // Unassigned input variables not occurring in any clause of `open`.
  std::size_t inputs_in_open_complement(const std::vector<int>& open) {
    ++var_epoch_;
    std::size_t seen = 0;
    for (int c : open)
      for (Lit l : cnf_.clauses[c]) {
        int v = std::abs(l);
        if (val_[v] == 0 && is_input_[v] && var_stamp_[v] != var_epoch_) {
          var_stamp_[v] = var_epoch_;
          ++seen;
        }
      }
    return free_inputs() - seen;
  }

  // Partition unsatisfied clauses into variable-disjoint components.
  std::vector<std::vector<int>> split(const std::vector<int>& open) {
    ++epoch_;
    std::vector<std::vector<int>> comps;
    for (int start : open) {
      if (stamp_[start] == epoch_ || n_true_[start] > 0) continue;
      std::vector<int> comp{start};
      stamp_[start] = epoch_;
      for (std::size_t i = 0; i < comp.size(); ++i) {
        for (Lit l : cnf_.clauses[comp[i]]) {
          int v = std::abs(l);
          if (val_[v] != 0) continue;
          for (const auto* occ : {&pos_[v], &neg_[v]})
            for (int c : *occ)
              if (stamp_[c] != epoch_ && n_true_[c] == 0) {
                stamp_[c] = epoch_;
                comp.push_back(c);
              }
        }
      }
      std::sort(comp.begin(), comp.end());
      comps.push_back(std::move(comp));
    }
    return comps;
  }

  BigInt count_split(const std::vector<int>& open, std::size_t free) {
    BigInt result = pow2(free);
    for (const auto& comp : split(open)) {
      ++stats_.components;
      BigInt c = count_component(comp);
      if (c == 0) return 0;
      result *= c;
    }
    return result;
  }

  std::string cache_key(const std::vector<int>& comp) const {
    std::string key;
    for (int c : comp) {
      key.append(reinterpret_cast<const char*>(&c), sizeof c);
      for (Lit l : cnf_.clauses[c])
        if (val_[std::abs(l)] == 0) key.append(reinterpret_cast<const char*>(&l), sizeof l);
      key.push_back('\0');
    }
    return key;
  }

  BigInt count_component(const std::vector<int>& comp) {
    // Branch variable: most frequent unassigned input, ties by rank.
    std::unordered_map<int, int> freq;
    for (int c : comp)
      for (Lit l : cnf_.clauses[c]) {
        int v = std::abs(l);
        if (val_[v] == 0 && is_input_[v]) ++freq[v];
      }
    if (freq.empty()) return solve_restricted(&comp) ? BigInt(1) : BigInt(0);

    std::string key = cache_key(comp);
    if (auto it = cache_.find(key); it != cache_.end()) {
      ++stats_.cache_hits;
      return it->second;
    }
    int best = 0;
    for (auto [v, f] : freq)
      if (best == 0 || f > freq[best] || (f == freq[best] && rank_[v] < rank_[best])) best = v;

    BigInt total = 0;
    for (Lit l : {best, -best}) {
      std::size_t mark = trail_.size();
      decide(l);
      if (propagate()) {
        std::vector<int> open;
        for (int c : comp)
          if (n_true_[c] == 0) open.push_back(c);
        // Inputs of this component left unconstrained by the residual clauses.
        ++var_epoch_;
        std::size_t remaining = 0;
        for (int c : open)
          for (Lit x : cnf_.clauses[c]) {
            int v = std::abs(x);
            if (val_[v] == 0 && is_input_[v] && var_stamp_[v] != var_epoch_) {
              var_stamp_[v] = var_epoch_;
              ++remaining;
            }
          }
        std::size_t unassigned = 0;
        for (auto [v, f] : freq)
          if (val_[v] == 0) ++unassigned;
        total += count_split(open, unassigned - remaining);
      }
      undo_to(mark);
    }
    if (cache_.size() < kCacheLimit) cache_.emplace(std::move(key), total);
    return total;
  }

  static constexpr std::size_t kCacheLimit = 1 << 20;

  const CnfFormula& cnf_;
  const SolverOptions& opts_;
  Clock::time_point start_;
  SolverStats stats_;

  std::vector<signed char> val_;
  std::vector<std::vector<int>> pos_, neg_;
  std::vector<bool> is_input_;
  std::vector<int> inputs_;
  std::vector<int> rank_;
  std::vector<int> n_true_, n_false_;
  std::vector<Lit> trail_;
  std::vector<int> queue_;
  std::size_t satisfied_ = 0;
  std::size_t assigned_inputs_ = 0;
  bool conflict_ = false;
  bool root_conflict_ = false;

  std::vector<std::uint32_t> stamp_, var_stamp_;
  std::uint32_t epoch_ = 0, var_epoch_ = 0;
  std::unordered_map<std::string, BigInt> cache_;
};

double elapsed(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

bool is_sat(const CnfFormula& cnf, const SolverOptions& opts, SolverStats* stats) {
  auto t0 = Clock::now();
  Engine engine(cnf, opts);
  bool sat = engine.init() && engine.solve_restricted(nullptr);
  if (stats) {
    engine.stats().seconds = elapsed(t0);
    *stats += engine.stats();
  }
  return sat;
}

bool equiv(const BoolFunc& f, const BoolFunc& g, const SolverOptions& opts, SolverStats* stats) {
  CnfBuilder builder(f.input_space());
  Lit a = builder.encode(f);
  Lit b = builder.encode(g);
  Lit miter = builder.make_xor(a, b);
  if (miter == CnfBuilder::kFalse) return true;
  builder.require(miter);
  return !is_sat(std::move(builder).finish(), opts, stats);
}

CountResult count_projected(const CnfFormula& cnf, const SolverOptions& opts) {
  auto t0 = Clock::now();
  Engine engine(cnf, opts);
  CountResult r;
  if (!engine.init()) {
    r.count = 0;
  } else {
    bool enumerate = opts.strategy == CountStrategy::Enumerate ||
                     (opts.strategy == CountStrategy::Auto &&
                      cnf.input_vars.size() <= opts.enumerate_limit);
    r.count = enumerate ? engine.count_enumerate(0) : engine.count_components();
  }
  r.stats = engine.stats();
  r.stats.seconds = elapsed(t0);
  return r;
}

CountResult model_count(const BoolFunc& f, std::span<const InputBit> vars_in,
                        const SolverOptions& opts) {
  std::vector<InputBit> vars(vars_in.begin(), vars_in.end());
  std::sort(vars.begin(), vars.end());
  vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
  for (InputBit v : vars)
    if (v >= f.inputs().total_bits())
      throw StructuralError("model_count: input bit " + std::to_string(v) + " out of range");

  std::vector<InputBit> outside;
  for (InputBit b : f.bits())
    if (!std::binary_search(vars.begin(), vars.end(), b)) outside.push_back(b);

  auto count_with = [&](bool fill) {
    BoolFunc g = f;
    for (InputBit b : outside) g = cofactor(g, b, fill);
    CnfFormula cnf = bit_blast(g);
    if (cnf.input_vars.size() > vars.size())
      throw StructuralError("model_count: encoding mentions bits outside the counted set");
    CountResult r = count_projected(cnf, opts);
    r.count *= pow2(vars.size() - cnf.input_vars.size());
    return r;
  };

  CountResult r = count_with(false);
  if (!outside.empty()) {
    CountResult other = count_with(true);
    if (other.count != r.count)
      throw StructuralError("model_count: condition depends on bits outside the counted set");
    r.stats += other.stats;
  }
  return r;
}

void write_dimacs(const CnfFormula& cnf, std::ostream& os) {
  for (const auto& [bit, v] : cnf.input_vars) {
    auto it = cnf.names.find(v);
    os << "c var " << (it != cnf.names.end() ? it->second : "x" + std::to_string(v)) << ' ' << v
       << '\n';
  }
  if (!cnf.input_vars.empty() || cnf.num_vars > 0) {
    os << "c ind";
    for (const auto& [bit, v] : cnf.input_vars) os << ' ' << v;
    os << " 0\n";
  }
  os << "p cnf " << cnf.num_vars << ' ' << cnf.clauses.size() << '\n';
  for (const auto& cl : cnf.clauses) {
    for (Lit l : cl) os << l << ' ';
    os << "0\n";
  }
}

void export_dimacs(const CnfFormula& cnf, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_dimacs(cnf, out);
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

CnfFormula read_dimacs(std::istream& is) {
  CnfFormula cnf;
  std::vector<int> projected;
  bool has_projection = false;
  std::size_t declared_clauses = 0;
  bool header = false;
  std::string line;
  std::vector<Lit> current;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;
    if (tok == "c") {
      std::string kind;
      ls >> kind;
      if (kind == "var") {
        std::string name;
        int v = 0;
        if (ls >> name >> v) {
          cnf.names[v] = name;
          projected.push_back(v);
          has_projection = true;
        }
      } else if (kind == "ind") {
        has_projection = true;
        int v = 0;
        while (ls >> v && v != 0) projected.push_back(v);
      }
      continue;
    }
    if (tok == "p") {
      std::string fmt;
      if (!(ls >> fmt >> cnf.num_vars >> declared_clauses) || fmt != "cnf")
        throw StructuralError("malformed DIMACS header: " + line);
      header = true;
      continue;
    }
    if (!header) throw StructuralError("DIMACS clause before header");
    std::istringstream cs(line);
    Lit l = 0;
    while (cs >> l) {
      if (l == 0) {
        cnf.clauses.push_back(current);
        current.clear();
      } else {
        if (std::abs(l) > cnf.num_vars) throw StructuralError("DIMACS literal out of range");
        current.push_back(l);
      }
    }
  }
  if (!current.empty()) cnf.clauses.push_back(current);
  if (cnf.clauses.size() != declared_clauses)
    throw StructuralError("DIMACS clause count mismatch");
  // The engine expects duplicate-free, non-tautological clauses.
  std::vector<std::vector<Lit>> normalized;
  for (auto& cl : cnf.clauses) {
    std::sort(cl.begin(), cl.end());
    cl.erase(std::unique(cl.begin(), cl.end()), cl.end());
    bool tautology = false;
    for (Lit l : cl)
      if (l > 0 && std::binary_search(cl.begin(), cl.end(), -l)) tautology = true;
    if (!tautology) normalized.push_back(std::move(cl));
  }
  cnf.clauses = std::move(normalized);
  std::sort(projected.begin(), projected.end());
  projected.erase(std::unique(projected.begin(), projected.end()), projected.end());
  if (!has_projection)
    for (int v = 1; v <= cnf.num_vars; ++v) projected.push_back(v);
  InputBit next = 0;
  for (int v : projected) cnf.input_vars.emplace(next++, v);
  return cnf;
}

}  // namespace qpa
