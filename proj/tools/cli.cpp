#include "cli.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "qpa/analysis.hpp"
#include "qpa/cfg.hpp"
#include "qpa/errors.hpp"
#include "qpa/oracle.hpp"
#include "qpa/program.hpp"
#include "qpa/report.hpp"
#include "qpa/solver.hpp"

namespace qpa::cli {

int oracle_verdict(const WeightDistribution& computed, const WeightDistribution& truth, std::ostream& err) {
  if (computed == truth) return kOk;
  std::set<std::int64_t> keys;
  for (const auto& [w, c] : computed.counts) keys.insert(w);
  for (const auto& [w, c] : truth.counts) keys.insert(w);
  for (std::int64_t w : keys) {
    auto ia = computed.counts.find(w);
    auto ib = truth.counts.find(w);
    BigInt ca = ia == computed.counts.end() ? BigInt(0) : ia->second;
    BigInt cb = ib == truth.counts.end() ? BigInt(0) : ib->second;
    if (ca != cb) err << "  weight " << w << ": analysis " << ca.get_str() << ", oracle " << cb.get_str() << '\n';
  }
  if (computed.input_bits != truth.input_bits)
    err << "  input bits: analysis " << computed.input_bits << ", oracle " << truth.input_bits << '\n';
  return kMismatch;
}

int oracle_verdict(const ValueSet& computed, const WeightDistribution& truth, std::ostream& err) {
  if (computed.values == truth.weights()) return kOk;
  err << "  analysis has " << computed.values.size() << " values, oracle " << truth.counts.size() << '\n';
  return kMismatch;
}

namespace {

struct Flags {
  std::string file;
  std::string cost_file;
  std::string export_cfg;
  std::string dimacs_dir;
  std::string format = "csv";
  unsigned jobs = 1;
  std::uint64_t max_paths = std::uint64_t{1} << 24;
  std::size_t max_dependent_group = 16;
  std::size_t max_inputs = 20;
  std::size_t max_statements = UnrollLimits{}.max_statements;
  std::int64_t hist_bin = 1;
  bool oracle = false;
  bool dependent_groups = false;
  bool size_only = false;
  bool paths = false;
};

struct Loaded {
  SourceProgram source;
  CostModel cost;
  WeightedCfg graph;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Loaded load(const Flags& f) {
  SourceProgram source = parse(read_file(f.file));
  CostModel cost = f.cost_file.empty() ? CostModel{} : CostModel::from_json(read_file(f.cost_file));
  UnrollLimits limits;
  limits.max_statements = f.max_statements;
  WeightedCfg g = build_cfg(unroll(source, limits), cost);
  if (!f.export_cfg.empty()) {
    std::ofstream out(f.export_cfg);
    if (!out) throw IoError("cannot write '" + f.export_cfg + "'");
    out << cfg_to_json(g) << '\n';
  }
  return Loaded{std::move(source), std::move(cost), std::move(g)};
}

AnalysisOptions analysis_options(const Flags& f) {
  AnalysisOptions o;
  o.max_paths = f.max_paths;
  o.dependent_groups = f.dependent_groups;
  o.max_dependent_group = f.max_dependent_group;
  o.jobs = f.jobs;
  if (const char* seed = std::getenv("QPA_SEED")) o.solver.seed = std::strtoull(seed, nullptr, 10);
  return o;
}

OracleOptions oracle_options(const Flags& f) {
  OracleOptions o;
  o.max_input_bits = f.max_inputs;
  o.max_paths = f.max_paths;
  o.jobs = f.jobs;
  o.solver = analysis_options(f).solver;
  return o;
}

void report_failure(const Failure& fail, std::ostream& out) {
  out << "FAILURE (" << failure_reason_name(fail.reason) << "): " << fail.message << '\n';
  out << "witness: branches";
  for (std::size_t b : fail.witness) out << " b" << b;
  if (!fail.variable.empty()) out << ", variable " << fail.variable;
  out << '\n';
}

std::string bit_list(const InputSpace& space, const std::vector<InputBit>& bits) {
  if (bits.empty()) return "(none)";
  std::string s;
  for (InputBit b : bits) s += (s.empty() ? "" : " ") + space.bit_name(b);
  return s;
}

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void report_stats(const AnalysisStats& st, const Timer& t, std::ostream& err) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", t.seconds());
  err << "counter calls: " << st.counter_calls << ", equivalence checks: " << st.equiv_calls
      << ", sat checks: " << st.sat_calls << ", paths: " << st.paths << ", time: " << buf << " s\n";
}

void write_distribution(const WeightDistribution& d, const Flags& f, std::ostream& out) {
  if (f.format == "json") write_json(d, out);
  else if (f.format == "hist") write_histogram(d, out, f.hist_bin);
  else write_csv(d, out);
}

// Key-by-key comparison; prints differences to err.
int cmd_supports(const Flags& f, std::ostream& out, std::ostream& err) {
  Loaded in = load(f);
  const WeightedCfg& g = in.graph;
  AnalysisOptions opts = analysis_options(f);
  AnalysisStats st;
  Timer timer;
  const InputSpace& space = g.inputs();

  out << "inputs:";
  for (const InputVar& v : space.vars()) out << ' ' << v.name << ':' << v.width;
  out << " (" << space.total_bits() << " bits)\n";
  out << "branch points: " << g.branch_points().size() << '\n';

  Outcome<BranchProfile> prof = find_condition_supports(g, opts, &st);
  if (!prof) {
    report_failure(prof.failure(), out);
    report_stats(st, timer, err);
    return kFailure;
  }
  BranchProfile p = true_counts(prof.value(), opts, &st);
  if (!f.dimacs_dir.empty()) std::filesystem::create_directories(f.dimacs_dir);
  for (std::size_t b = 0; b < p.branches.size(); ++b) {
    const BranchInfo& info = p.branches[b];
    out << "  b" << b << "  block " << info.block << "  if " << to_string(*g.blocks()[info.block].cond) << '\n';
    out << "      support: " << bit_list(space, info.support) << '\n';
    out << "      true count: " << info.true_count->get_str() << " of " << pow2(info.support.size()).get_str()
        << '\n';
    if (!f.dimacs_dir.empty())
      export_dimacs(bit_blast(info.cond),
                    (std::filesystem::path(f.dimacs_dir) / ("branch_" + std::to_string(b) + ".cnf")).string());
  }
  out << "residual: " << bit_list(space, p.residual) << '\n';
  Independence ind = check_independence(p);
  out << "independence: " << (ind.pairwise_independent ? "pairwise independent" : "dependent groups present")
      << '\n';
  out << "groups:";
  for (const auto& grp : ind.groups) {
    out << " {";
    for (std::size_t k = 0; k < grp.size(); ++k) out << (k ? "," : "") << 'b' << grp[k];
    out << '}';
  }
  out << '\n';
  Elimination el = eliminate_trivial(g, p, opts, &st);
  out << "trivial:";
  if (el.forced.empty()) out << " none";
  for (const auto& [b, v] : el.forced) out << " b" << b << (v ? "=true" : "=false");
  out << '\n';
  report_stats(st, timer, err);
  return kOk;
}

int cmd_dist(const Flags& f, std::ostream& out, std::ostream& err) {
  Loaded in = load(f);
  AnalysisStats st;
  Timer timer;
  Outcome<WeightDistribution> d = find_weight_distribution(in.graph, analysis_options(f), &st);
  if (!d) {
    report_failure(d.failure(), out);
    report_stats(st, timer, err);
    return kFailure;
  }
  write_distribution(d.value(), f, out);
  char entropy[32];
  std::snprintf(entropy, sizeof entropy, "%.4f", shannon_entropy(d.value()));
  err << "entropy: " << entropy << " bits\n";
  report_stats(st, timer, err);
  if (f.oracle) {
    OracleStats os;
    WeightDistribution truth = brute_force_distribution(in.graph, oracle_options(f), &os);
    if (oracle_verdict(d.value(), truth, err) != kOk) {
      err << "oracle: MISMATCH\n";
      return kMismatch;
    }
    err << "oracle: MATCH (" << os.executions << " executions)\n";
  }
  return kOk;
}

int cmd_values(const Flags& f, bool capacity, std::ostream& out, std::ostream& err) {
  Loaded in = load(f);
  AnalysisStats st;
  Timer timer;
  AnalysisOptions opts = analysis_options(f);
  std::size_t count = 0;
  std::optional<ValueSet> values;
  if (f.size_only) {
    Outcome<std::size_t> n = count_possible_weights(in.graph, opts, &st);
    if (!n) {
      report_failure(n.failure(), out);
      report_stats(st, timer, err);
      return kFailure;
    }
    count = n.value();
  } else {
    Outcome<ValueSet> v = find_possible_weights(in.graph, opts, &st);
    if (!v) {
      report_failure(v.failure(), out);
      report_stats(st, timer, err);
      return kFailure;
    }
    values = v.value();
    count = values->values.size();
  }

  if (capacity) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", channel_capacity(count));
    out << "values: " << count << '\n' << "capacity: " << buf << " bits\n";
  } else if (values) {
    if (f.format == "json") write_values_json(*values, out);
    else write_values_text(*values, out);
  } else {
    out << count << '\n';
  }
  report_stats(st, timer, err);

  if (f.oracle) {
    OracleStats os;
    WeightDistribution truth = brute_force_distribution(in.graph, oracle_options(f), &os);
    bool match = values ? oracle_verdict(*values, truth, err) == kOk : count == truth.counts.size();
    if (!match) {
      err << "oracle: MISMATCH (oracle has " << truth.counts.size() << " values)\n";
      return kMismatch;
    }
    err << "oracle: MATCH (" << os.executions << " executions)\n";
  }
  return kOk;
}

int cmd_oracle(const Flags& f, std::ostream& out, std::ostream& err) {
  Loaded in = load(f);
  OracleStats os;
  Timer timer;
  WeightDistribution d;
  if (f.paths) {
    if (auto w = check_unnested(in.graph)) {
      report_failure(Failure{FailureReason::Nested, "path enumeration needs unnested conditionals",
                             {w->outer, w->inner}, ""},
                     out);
      return kFailure;
    }
    try {
      d = path_enumeration_distribution(in.graph, oracle_options(f), &os);
    } catch (const UnsupportedStructure& e) {
      report_failure(Failure{FailureReason::Unsupported, e.what(), {e.branch()}, e.variable()}, out);
      return kFailure;
    }
  } else {
    d = brute_force_distribution(in.source, in.cost, oracle_options(f), &os);
    WeightDistribution via_cfg = brute_force_distribution(in.graph, oracle_options(f));
    if (oracle_verdict(via_cfg, d, err) != kOk) {
      err << "oracle: source and CFG interpreters disagree\n";
      return kMismatch;
    }
  }
  write_distribution(d, f, out);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", timer.seconds());
  err << "executions: " << os.executions << ", counter calls: " << os.counter_calls << ", time: " << buf
      << " s\n";
  return kOk;
}

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("file", f.file, "program (.qp)")->required();
  cmd->add_option("--cost", f.cost_file, "file with a JSON cost table");
  cmd->add_option("--jobs", f.jobs, "worker threads")->capture_default_str()->check(CLI::Range(1u, 256u));
  cmd->add_option("--max-paths", f.max_paths, "limit on enumerated paths or joint assignments")
      ->capture_default_str();
  cmd->add_flag("--dependent-groups", f.dependent_groups,
                "analyse branches with shared support bits by joint enumeration");
  cmd->add_option("--max-dependent-group", f.max_dependent_group, "largest dependent group")
      ->capture_default_str();
  cmd->add_option("--max-inputs", f.max_inputs, "input-bit limit for brute force")->capture_default_str();
  cmd->add_option("--max-statements", f.max_statements, "unrolling budget")->capture_default_str();
  cmd->add_option("--export-cfg", f.export_cfg, "write the CFG as JSON");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Exact path-weight distributions and value sets of loop-bounded programs", "qpa"};
  app.require_subcommand(1);
  Flags f;

  auto* supports = app.add_subcommand("supports", "branch supports, true counts, independence");
  add_common(supports, f);
  supports->add_option("--dimacs-dir", f.dimacs_dir, "write each branch condition as DIMACS");

  auto* dist = app.add_subcommand("dist", "distribution of total path weight");
  add_common(dist, f);
  dist->add_flag("--oracle", f.oracle, "compare against brute-force enumeration");
  dist->add_option("--format", f.format, "csv, json, or hist")
      ->capture_default_str()
      ->check(CLI::IsMember({"csv", "json", "hist"}));
  dist->add_option("--hist-bin", f.hist_bin, "histogram bin width")->capture_default_str()->check(CLI::PositiveNumber);

  auto* values = app.add_subcommand("values", "set of possible total weights");
  add_common(values, f);
  values->add_flag("--oracle", f.oracle, "compare against brute-force enumeration");
  values->add_flag("--size-only", f.size_only, "only count the values");
  values->add_option("--format", f.format, "text or json")->check(CLI::IsMember({"csv", "text", "json"}));

  auto* capacity = app.add_subcommand("capacity", "channel capacity in bits");
  add_common(capacity, f);
  capacity->add_flag("--oracle", f.oracle, "compare against brute-force enumeration");
  capacity->add_flag("--size-only", f.size_only, "count values through absolute differences");

  auto* oracle = app.add_subcommand("oracle", "distribution by brute force");
  add_common(oracle, f);
  oracle->add_flag("--paths", f.paths, "enumerate paths and model-count each one");
  oracle->add_option("--format", f.format, "csv, json, or hist")
      ->capture_default_str()
      ->check(CLI::IsMember({"csv", "json", "hist"}));
  oracle->add_option("--hist-bin", f.hist_bin, "histogram bin width")->capture_default_str()->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (supports->parsed()) return cmd_supports(f, out, err);
    if (dist->parsed()) return cmd_dist(f, out, err);
    if (values->parsed()) return cmd_values(f, false, out, err);
    if (capacity->parsed()) return cmd_values(f, true, out, err);
    if (oracle->parsed()) return cmd_oracle(f, out, err);
  } catch (const ParseError& e) {
    err << f.file << ':' << e.what() << '\n';
    return kUsage;
  } catch (const BudgetError& e) {
    err << "budget exceeded: " << e.what() << '\n';
    return kBudget;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}

}  // namespace qpa::cli
