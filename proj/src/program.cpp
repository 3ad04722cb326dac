#include "qpa/program.hpp"

#include <nlohmann/json.hpp>

#include "qpa/errors.hpp"

namespace qpa {

const VarDecl* SourceProgram::find(std::string_view name) const {
  for (const VarDecl& d : vars)
    if (d.name == name) return &d;
  return nullptr;
}

namespace {

bool loop_free(const std::vector<Stmt>& body) {
  for (const Stmt& s : body) {
    if (std::holds_alternative<RepeatStmt>(s.node)) return false;
    if (const auto* i = std::get_if<IfStmt>(&s.node))
      if (!loop_free(i->then_body) || !loop_free(i->else_body)) return false;
  }
  return true;
}

class Unroller {
 public:
  explicit Unroller(const UnrollLimits& limits) : limits_(limits) {}

  std::vector<Stmt> run(const std::vector<Stmt>& body, std::size_t depth) {
    if (depth > limits_.max_depth)
      throw BudgetError("unroll: nesting depth exceeds " + std::to_string(limits_.max_depth));
    std::vector<Stmt> out;
    for (const Stmt& s : body) {
      if (const auto* r = std::get_if<RepeatStmt>(&s.node)) {
        std::vector<Stmt> once = run(r->body, depth + 1);
        for (std::uint64_t k = 0; k < r->count; ++k) {
          charge(once.size());
          out.insert(out.end(), once.begin(), once.end());
        }
      } else if (const auto* i = std::get_if<IfStmt>(&s.node)) {
        charge(1);
        IfStmt copy{i->cond, run(i->then_body, depth + 1), run(i->else_body, depth + 1)};
        out.push_back(Stmt{std::move(copy), s.line});
      } else {
        charge(1);
        out.push_back(s);
      }
    }
    return out;
  }

 private:
  void charge(std::size_t n) {
    produced_ += n;
    if (produced_ > limits_.max_statements)
      throw BudgetError("unroll: more than " + std::to_string(limits_.max_statements) +
                        " statements");
  }

  const UnrollLimits& limits_;
  std::size_t produced_ = 0;
};

}  // namespace

bool SourceProgram::is_loop_free() const { return loop_free(body); }

SourceProgram unroll(const SourceProgram& program, const UnrollLimits& limits) {
  SourceProgram out;
  out.vars = program.vars;
  out.inputs = program.inputs;
  out.body = Unroller(limits).run(program.body, 0);
  return out;
}

std::int64_t CostModel::expression_cost(const BVExpr& e) const {
  if (op_costs.empty()) return 0;
  std::int64_t total = 0;
  if (auto it = op_costs.find(e.op()); it != op_costs.end()) total += it->second;
  for (const BVExpr& k : e.children()) total += expression_cost(k);
  return total;
}

CostModel CostModel::from_json(std::string_view text) {
  static const std::map<std::string, Op> ops = {
      {"~", Op::Not},  {"&", Op::And},  {"|", Op::Or},   {"^", Op::Xor},   {"+", Op::Add},
      {"-", Op::Sub},  {"*", Op::Mul},  {"<<", Op::Shl}, {">>", Op::Lshr}, {"%", Op::Urem},
      {"==", Op::Eq},  {"!=", Op::Ne},  {"<", Op::Ult},  {"&&", Op::LAnd}, {"||", Op::LOr},
      {"!", Op::LNot}};
  CostModel model;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw StructuralError(std::string("cost table: ") + e.what());
  }
  if (!j.is_object()) throw StructuralError("cost table must be a JSON object");
  if (j.contains("statement")) model.statement_cost = j.at("statement").get<std::int64_t>();
  if (model.statement_cost < 0) throw StructuralError("cost table: negative statement cost");
  if (j.contains("ops")) {
    for (const auto& [name, cost] : j.at("ops").items()) {
      auto it = ops.find(name);
      if (it == ops.end()) throw StructuralError("cost table: unknown operator '" + name + "'");
      std::int64_t c = cost.get<std::int64_t>();
      if (c < 0) throw StructuralError("cost table: negative cost for '" + name + "'");
      model.op_costs[it->second] = c;
    }
  }
  return model;
}

}  // namespace qpa
