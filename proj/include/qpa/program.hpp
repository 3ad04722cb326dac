#pragma once

// Source language: declarations, assignments, if/else, `repeat N` loops,
// `weight k` annotations and a final `return`.
//
//   input e : 8;
//   var r : 8 = 1;
//   repeat 8 {
//     if ((e & 1) == 1) { r = r * 3 % 7; weight 4; }
//     e = e >> 1;
//   }
//   return r;

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "qpa/expr.hpp"

namespace qpa {

struct VarDecl {
  std::string name;
  unsigned width = 0;
  bool is_input = false;
  std::size_t slot = 0;  // index into SourceProgram::vars
  std::optional<std::size_t> input_index;
  int line = 0;
};

struct Stmt;

struct AssignStmt {
  std::size_t slot;
  std::string name;
  BVExpr rhs;
};

struct IfStmt {
  BVExpr cond;  // width 1
  std::vector<Stmt> then_body;
  std::vector<Stmt> else_body;
};

struct RepeatStmt {
  std::uint64_t count;
  std::vector<Stmt> body;
};

struct WeightStmt {
  std::int64_t amount;
};

struct ReturnStmt {
  BVExpr value;
};

struct Stmt {
  std::variant<AssignStmt, IfStmt, RepeatStmt, WeightStmt, ReturnStmt> node;
  int line = 0;
};

struct SourceProgram {
  std::vector<VarDecl> vars;  // in slot order; inputs are ordinary, reassignable variables
  std::shared_ptr<const InputSpace> inputs;
  std::vector<Stmt> body;

  const VarDecl* find(std::string_view name) const;
  bool is_loop_free() const;
};

// Throws ParseError (with line/column) on syntax errors, duplicate or
// undeclared identifiers, width mismatches and non-literal repeat bounds.
SourceProgram parse(std::string_view text);

// Parses one expression against the declarations of `scope`.
BVExpr parse_expression(std::string_view text, const SourceProgram& scope);

struct UnrollLimits {
  std::size_t max_statements = 2'000'000;
  std::size_t max_depth = 64;
};

// Replaces every `repeat N { body }` by N copies of body. Throws BudgetError
// when the limits are exceeded.
SourceProgram unroll(const SourceProgram& program, const UnrollLimits& limits = {});

// Default block weight: number of statements (a branch test counts as one),
// plus the per-operator costs of their expressions. Blocks carrying `weight k`
// annotations use the sum of the annotations instead.
struct CostModel {
  std::int64_t statement_cost = 1;
  std::map<Op, std::int64_t> op_costs;

  std::int64_t expression_cost(const BVExpr& e) const;
  std::int64_t statement(const BVExpr& e) const { return statement_cost + expression_cost(e); }

  // {"statement": 1, "ops": {"*": 3, "%": 10}}
  static CostModel from_json(std::string_view text);
};

}  // namespace qpa
