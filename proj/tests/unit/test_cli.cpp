#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "cli.hpp"
#include "qpa/solver.hpp"

using namespace qpa;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run qpa_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "qpa");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string program(const std::string& name) { return std::string(QPA_PROGRAMS_DIR) + "/" + name; }

fs::path scratch() {
  fs::path dir = fs::temp_directory_path() / ("qpa_cli_test_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

std::string write_temp(const std::string& name, const std::string& text) {
  fs::path p = scratch() / name;
  std::ofstream(p) << text;
  return p.string();
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

}  // namespace

TEST_CASE("supports: modexp2 program") {
  Run r = qpa_cli({"supports", program("modexp2.qp")});
  CHECK(r.code == cli::kOk);
  CHECK(contains(r.out, "support: e[0]"));
  CHECK(contains(r.out, "support: e[1]"));
  CHECK(contains(r.out, "independence: pairwise independent"));
}

TEST_CASE("supports: nested program fails with a witness") {
  Run r = qpa_cli({"supports", program("nested.qp")});
  CHECK(r.code == cli::kFailure);
  CHECK(contains(r.out, "FAILURE (nested)"));
  CHECK(contains(r.out, "witness: branches b0 b1"));

  Run m = qpa_cli({"dist", program("merge_dependent.qp")});
  CHECK(m.code == cli::kFailure);
  CHECK(contains(m.out, "variable r"));
}

TEST_CASE("usage, parse and I/O errors exit 1") {
  CHECK(qpa_cli({"supports", write_temp("bad.qp", "input x : 4;\nif (x == ) {}\n")}).code == cli::kUsage);
  Run parse_err = qpa_cli({"dist", write_temp("bad2.qp", "input x : 4;\ny = 1;\n")});
  CHECK(parse_err.code == cli::kUsage);
  CHECK(contains(parse_err.err, ":2:"));
  CHECK(qpa_cli({"dist", (scratch() / "missing.qp").string()}).code == cli::kUsage);
  CHECK(qpa_cli({"frobnicate"}).code == cli::kUsage);
  CHECK(qpa_cli({}).code == cli::kUsage);
  CHECK(qpa_cli({"dist", program("modexp2.qp"), "--format", "xml"}).code == cli::kUsage);
  CHECK(qpa_cli({"--help"}).code == cli::kOk);
}

TEST_CASE("dist: 8-bit modexp gives a 9-row binomial CSV") {
  Run r = qpa_cli({"dist", program("modexp8.qp"), "--oracle"});
  CHECK(r.code == cli::kOk);
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  CHECK(line == "weight,count,probability,probability_decimal");
  std::vector<std::string> rows;
  while (std::getline(in, line)) rows.push_back(line);
  REQUIRE(rows.size() == 9);
  const std::vector<std::string> counts{"1", "8", "28", "56", "70", "56", "28", "8", "1"};
  for (std::size_t k = 0; k < 9; ++k) CHECK(contains(rows[k], "," + counts[k] + ","));
  CHECK(rows[4] == "48,70,35/2^7,0.2734375");
  CHECK(contains(r.err, "oracle: MATCH"));
  CHECK(contains(r.err, "counter calls: 8"));
  CHECK(contains(r.err, "entropy: 2.5442 bits"));
}

TEST_CASE("budget errors exit 3") {
  CHECK(qpa_cli({"dist", program("modexp8.qp"), "--max-paths", "100"}).code == cli::kBudget);
  CHECK(qpa_cli({"dist", program("modexp8.qp"), "--oracle", "--max-inputs", "4"}).code == cli::kBudget);
  CHECK(qpa_cli({"dist", program("modexp8.qp"), "--max-statements", "10"}).code == cli::kBudget);
  CHECK(qpa_cli({"dist", program("mt_step.qp"), "--dependent-groups", "--max-dependent-group", "1"}).code ==
        cli::kBudget);
}

TEST_CASE("oracle mismatch exits 4") {
  WeightDistribution a{{{1, 2}, {2, 2}}, 2};
  WeightDistribution b{{{1, 3}, {2, 1}}, 2};
  std::ostringstream err;
  CHECK(cli::oracle_verdict(a, b, err) == cli::kMismatch);
  CHECK(contains(err.str(), "weight 1: analysis 2, oracle 3"));
  CHECK(cli::oracle_verdict(a, a, err) == cli::kOk);
  CHECK(cli::oracle_verdict(ValueSet{{1}, ValueProvenance::Exact}, b, err) == cli::kMismatch);
  CHECK(cli::oracle_verdict(ValueSet{{1, 2}, ValueProvenance::Exact}, b, err) == cli::kOk);
}

TEST_CASE("dependent pair: FAILURE by default, oracle match with the flag") {
  Run off = qpa_cli({"dist", program("mt_step.qp")});
  CHECK(off.code == cli::kFailure);
  CHECK(contains(off.out, "FAILURE (dependent)"));
  Run on = qpa_cli({"dist", program("mt_step.qp"), "--dependent-groups", "--oracle"});
  CHECK(on.code == cli::kOk);
  CHECK(contains(on.err, "oracle: MATCH"));
  Run values = qpa_cli({"values", program("mt_step.qp"), "--dependent-groups", "--oracle"});
  CHECK(values.code == cli::kOk);
  CHECK(contains(values.err, "oracle: MATCH"));
}

TEST_CASE("values and capacity") {
  std::string line = write_temp("line.qp", "input x : 3;\nvar y : 3;\ny = x + 1;\nreturn y;\n");
  Run v = qpa_cli({"values", line});
  CHECK(v.code == cli::kOk);
  CHECK(v.out == "2\n");
  CHECK(qpa_cli({"capacity", line}).out == "values: 1\ncapacity: 0.0000 bits\n");

  Run c = qpa_cli({"capacity", program("modexp8.qp"), "--oracle"});
  CHECK(c.code == cli::kOk);
  CHECK(c.out == "values: 9\ncapacity: 3.1699 bits\n");
  CHECK(qpa_cli({"capacity", program("modexp8.qp"), "--size-only"}).out == c.out);
  CHECK(qpa_cli({"values", program("modexp8.qp"), "--size-only"}).out == "9\n");

  Run t = qpa_cli({"values", program("trivial.qp"), "--oracle", "--format", "json"});
  CHECK(t.code == cli::kOk);
  auto j = nlohmann::json::parse(t.out);
  CHECK(j["count"] == 4);
}

TEST_CASE("oracle command and path enumeration") {
  Run brute = qpa_cli({"oracle", program("modexp2.qp")});
  CHECK(brute.code == cli::kOk);
  CHECK(contains(brute.err, "executions: 4"));
  Run paths = qpa_cli({"oracle", program("modexp2.qp"), "--paths"});
  CHECK(paths.code == cli::kOk);
  CHECK(paths.out == brute.out);
  CHECK(contains(paths.err, "counter calls: 4"));
  CHECK(qpa_cli({"oracle", program("nested.qp"), "--paths"}).code == cli::kFailure);
  CHECK(qpa_cli({"oracle", program("nested.qp")}).code == cli::kOk);
}

TEST_CASE("output is byte-stable") {
  for (const char* cmd : {"supports", "dist", "values", "capacity"}) {
    Run a = qpa_cli({cmd, program("mt_step.qp"), "--dependent-groups"});
    Run b = qpa_cli({cmd, program("mt_step.qp"), "--dependent-groups", "--jobs", "3"});
    CHECK(a.out == b.out);
  }
  ::setenv("QPA_SEED", "17", 1);
  Run seeded = qpa_cli({"dist", program("modexp8.qp"), "--format", "json"});
  ::unsetenv("QPA_SEED");
  CHECK(seeded.out == qpa_cli({"dist", program("modexp8.qp"), "--format", "json"}).out);
}

TEST_CASE("exports: CFG JSON, DIMACS, cost table, histogram") {
  fs::path cfg = scratch() / "cfg.json";
  CHECK(qpa_cli({"supports", program("modexp2.qp"), "--export-cfg", cfg.string()}).code == cli::kOk);
  std::ifstream cfg_in(cfg);
  auto j = nlohmann::json::parse(cfg_in);
  CHECK(j["edges"].size() == 9);

  fs::path dir = scratch() / "dimacs";
  fs::create_directories(dir);
  CHECK(qpa_cli({"supports", program("modexp8.qp"), "--dimacs-dir", dir.string()}).code == cli::kOk);
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::ifstream in(entry.path());
    CnfFormula c = read_dimacs(in);
    CHECK(count_projected(c).count == BigInt(1));
    ++files;
  }
  CHECK(files == 8);

  std::string cost = write_temp("cost.json", R"({"statement": 2, "ops": {"*": 3}})");
  Run costed = qpa_cli({"dist", program("modexp2.qp"), "--cost", cost, "--oracle"});
  CHECK(costed.code == cli::kOk);
  CHECK(costed.out != qpa_cli({"dist", program("modexp2.qp")}).out);
  CHECK(qpa_cli({"dist", program("modexp2.qp"), "--cost", write_temp("badcost.json", "{")}).code == cli::kUsage);

  Run hist = qpa_cli({"dist", program("modexp8.qp"), "--format", "hist", "--hist-bin", "10"});
  CHECK(hist.code == cli::kOk);
  CHECK(contains(hist.out, "40..49 | "));
}
