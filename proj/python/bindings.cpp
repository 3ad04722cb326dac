// Python module qpa._core: compile programs, run the analyses and oracles.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "qpa/analysis.hpp"
#include "qpa/cfg.hpp"
#include "qpa/errors.hpp"
#include "qpa/oracle.hpp"
#include "qpa/program.hpp"
#include "qpa/report.hpp"
#include "qpa/sums.hpp"

namespace py = pybind11;
using namespace qpa;

namespace {

struct Program {
  SourceProgram source;
  CostModel cost;
  WeightedCfg graph;
};

Program compile(const std::string& text, const std::string& cost_json, std::size_t max_statements) {
  SourceProgram source = parse(text);
  CostModel cost = cost_json.empty() ? CostModel{} : CostModel::from_json(cost_json);
  UnrollLimits limits;
  limits.max_statements = max_statements;
  WeightedCfg g = build_cfg(unroll(source, limits), cost);
  return Program{std::move(source), std::move(cost), std::move(g)};
}

py::int_ to_py(const BigInt& v) {
  return py::reinterpret_steal<py::int_>(PyLong_FromString(v.get_str().c_str(), nullptr, 10));
}

py::dict to_py(const WeightDistribution& d) {
  py::dict counts;
  for (const auto& [w, c] : d.counts) counts[py::int_(w)] = to_py(c);
  py::dict out;
  out["counts"] = counts;
  out["input_bits"] = d.input_bits;
  return out;
}

AnalysisOptions options(bool dependent_groups, std::uint64_t max_paths, std::size_t max_group, unsigned jobs,
                        std::uint64_t seed) {
  AnalysisOptions o;
  o.dependent_groups = dependent_groups;
  o.max_paths = max_paths;
  o.max_dependent_group = max_group;
  o.jobs = jobs;
  o.solver.seed = seed;
  return o;
}

// Set by the Python package; deliberately leaked so no destructor runs after finalization.
py::object* failure_type = new py::object();

template <class T>
const T& unwrap(const Outcome<T>& r) {
  if (r.ok()) return r.value();
  const Failure& f = r.failure();
  if (!*failure_type) throw StructuralError("FAILURE: " + f.message);
  py::object exc = (*failure_type)(f.message, std::string(failure_reason_name(f.reason)), f.witness, f.variable);
  PyErr_SetObject(failure_type->ptr(), exc.ptr());
  throw py::error_already_set();
}

py::dict stats_dict(const AnalysisStats& st) {
  py::dict d;
  d["counter_calls"] = st.counter_calls;
  d["equiv_calls"] = st.equiv_calls;
  d["sat_calls"] = st.sat_calls;
  d["paths"] = st.paths;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Exact path-weight distributions and value sets of loop-bounded programs";

  static auto* parse_error = new py::exception<ParseError>(m, "ParseError", PyExc_ValueError);
  static auto* budget_error = new py::exception<BudgetError>(m, "BudgetError", PyExc_RuntimeError);
  static auto* qpa_error = new py::exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ParseError& e) {
      PyErr_SetString(parse_error->ptr(), e.what());
    } catch (const BudgetError& e) {
      PyErr_SetString(budget_error->ptr(), e.what());
    } catch (const Error& e) {
      PyErr_SetString(qpa_error->ptr(), e.what());
    }
  });
  // Filled in by the Python package with its AnalysisFailure class.
  m.def("_set_failure_type", [](py::object t) { *failure_type = std::move(t); });

  py::class_<Program>(m, "Program")
      .def_static("compile", &compile, py::arg("text"), py::arg("cost_json") = "",
                  py::arg("max_statements") = UnrollLimits{}.max_statements)
      .def_property_readonly("input_bits", [](const Program& p) { return p.graph.inputs().total_bits(); })
      .def_property_readonly("inputs",
                             [](const Program& p) {
                               std::vector<std::pair<std::string, unsigned>> v;
                               for (const InputVar& x : p.graph.inputs().vars()) v.emplace_back(x.name, x.width);
                               return v;
                             })
      .def_property_readonly("branch_count", [](const Program& p) { return p.graph.branch_points().size(); })
      .def_property_readonly("block_weights",
                             [](const Program& p) {
                               std::vector<std::int64_t> w;
                               for (const Block& b : p.graph.blocks()) w.push_back(b.weight);
                               return w;
                             })
      .def("cfg_json", [](const Program& p) { return cfg_to_json(p.graph); })
      .def("nesting", [](const Program& p) -> py::object {
        if (auto w = check_unnested(p.graph)) return py::make_tuple(w->outer, w->inner);
        return py::none();
      });

  m.def(
      "supports",
      [](const Program& p, std::uint64_t seed) {
        AnalysisOptions o;
        o.solver.seed = seed;
        const BranchProfile prof = true_counts(unwrap(find_condition_supports(p.graph, o)), o);
        py::list branches;
        for (const BranchInfo& b : prof.branches) {
          py::dict d;
          d["block"] = b.block;
          d["condition"] = to_string(b.cond.expr());
          std::vector<std::string> names;
          for (InputBit bit : b.support) names.push_back(prof.inputs->bit_name(bit));
          d["support"] = names;
          d["true_count"] = to_py(*b.true_count);
          branches.append(d);
        }
        Independence ind = check_independence(prof);
        py::dict out;
        out["branches"] = branches;
        out["residual_bits"] = prof.residual.size();
        out["groups"] = ind.groups;
        out["pairwise_independent"] = ind.pairwise_independent;
        return out;
      },
      py::arg("program"), py::arg("seed") = 0);

  m.def(
      "distribution",
      [](const Program& p, bool dependent_groups, std::uint64_t max_paths, std::size_t max_group, unsigned jobs,
         std::uint64_t seed) {
        AnalysisStats st;
        std::optional<Outcome<WeightDistribution>> r;
        {
          py::gil_scoped_release release;
          r.emplace(find_weight_distribution(p.graph, options(dependent_groups, max_paths, max_group, jobs, seed), &st));
        }
        return py::make_tuple(to_py(unwrap(*r)), stats_dict(st));
      },
      py::arg("program"), py::arg("dependent_groups") = false, py::arg("max_paths") = std::uint64_t{1} << 24,
      py::arg("max_dependent_group") = 16, py::arg("jobs") = 1, py::arg("seed") = 0);

  m.def(
      "values",
      [](const Program& p, bool dependent_groups, std::uint64_t max_paths, std::size_t max_group,
         std::uint64_t seed) {
        AnalysisStats st;
        ValueSet v = unwrap(find_possible_weights(p.graph, options(dependent_groups, max_paths, max_group, 1, seed), &st));
        return py::make_tuple(v.values, v.provenance == ValueProvenance::Exact, stats_dict(st));
      },
      py::arg("program"), py::arg("dependent_groups") = false, py::arg("max_paths") = std::uint64_t{1} << 24,
      py::arg("max_dependent_group") = 16, py::arg("seed") = 0);

  m.def(
      "value_count",
      [](const Program& p, bool dependent_groups, std::uint64_t max_paths, std::size_t max_group) {
        return unwrap(count_possible_weights(p.graph, options(dependent_groups, max_paths, max_group, 1, 0)));
      },
      py::arg("program"), py::arg("dependent_groups") = false, py::arg("max_paths") = std::uint64_t{1} << 24,
      py::arg("max_dependent_group") = 16);

  m.def(
      "brute_force",
      [](const Program& p, std::size_t max_input_bits, unsigned jobs, bool source_level) {
        OracleOptions o;
        o.max_input_bits = max_input_bits;
        o.jobs = jobs;
        OracleStats st;
        WeightDistribution d;
        {
          py::gil_scoped_release release;
          d = source_level ? brute_force_distribution(p.source, p.cost, o, &st)
                           : brute_force_distribution(p.graph, o, &st);
        }
        return py::make_tuple(to_py(d), st.executions);
      },
      py::arg("program"), py::arg("max_input_bits") = 20, py::arg("jobs") = 1, py::arg("source_level") = false);

  m.def(
      "path_enumeration",
      [](const Program& p, std::uint64_t max_paths) {
        OracleOptions o;
        o.max_paths = max_paths;
        OracleStats st;
        WeightDistribution d = path_enumeration_distribution(p.graph, o, &st);
        return py::make_tuple(to_py(d), st.counter_calls);
      },
      py::arg("program"), py::arg("max_paths") = std::uint64_t{1} << 24);

  m.def(
      "execute",
      [](const Program& p, const InputAssignment& input) {
        ExecutionTrace t = execute_cfg(p.graph, input);
        py::dict d;
        d["blocks"] = t.blocks;
        d["taken"] = t.taken;
        d["weight"] = t.weight;
        d["result"] = t.result ? py::object(py::int_(*t.result)) : py::none();
        return d;
      },
      py::arg("program"), py::arg("input"));

  m.def(
      "submultiset_sums",
      [](const std::vector<std::int64_t>& d, std::optional<std::size_t> max_output) {
        SumsOptions o;
        o.max_output = max_output;
        return submultiset_sums(d, o);
      },
      py::arg("d"), py::arg("max_output") = py::none());
  m.def("abs_transform", [](const std::vector<std::int64_t>& d) { return abs_transform(d); }, py::arg("d"));
  m.def("sumset_size_bound", [](const std::vector<std::int64_t>& d) { return to_py(sumset_size_bound(d)); },
        py::arg("d"));
  m.def("exact_probability", [](const std::string& count, std::size_t k) { return exact_probability(BigInt(count), k); },
        py::arg("count"), py::arg("k"));
}
