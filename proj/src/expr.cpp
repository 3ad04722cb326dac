#include "qpa/expr.hpp"

#include <algorithm>
#include <iterator>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "qpa/errors.hpp"

namespace qpa {

std::size_t InputSpace::add(std::string name, unsigned width) {
  if (width == 0 || width > kMaxWidth)
    throw StructuralError("input '" + name + "' has unsupported width " + std::to_string(width));
  if (find(name)) throw StructuralError("duplicate input '" + name + "'");
  vars_.push_back({std::move(name), width, static_cast<InputBit>(total_bits_)});
  total_bits_ += width;
  return vars_.size() - 1;
}

std::optional<std::size_t> InputSpace::find(std::string_view name) const {
  for (std::size_t i = 0; i < vars_.size(); ++i)
    if (vars_[i].name == name) return i;
  return std::nullopt;
}

std::pair<std::size_t, unsigned> InputSpace::locate(InputBit bit) const {
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    const InputVar& v = vars_[i];
    if (bit >= v.offset && bit < v.offset + v.width) return {i, bit - v.offset};
  }
  throw StructuralError("input bit " + std::to_string(bit) + " out of range");
}

std::string InputSpace::bit_name(InputBit bit) const {
  auto [var, k] = locate(bit);
  return vars_[var].name + "[" + std::to_string(k) + "]";
}

InputAssignment unpack_assignment(const InputSpace& space, std::uint64_t packed) {
  InputAssignment a(space.vars().size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const InputVar& v = space.vars()[i];
    a[i] = v.offset >= 64 ? 0 : (packed >> v.offset) & width_mask(v.width);
  }
  return a;
}

bool input_bit_value(const InputSpace& space, const InputAssignment& a, InputBit bit) {
  auto [var, k] = space.locate(bit);
  return (a.at(var) >> k) & 1U;
}

void set_input_bit(const InputSpace& space, InputAssignment& a, InputBit bit, bool value) {
  auto [var, k] = space.locate(bit);
  std::uint64_t m = std::uint64_t{1} << k;
  a.at(var) = value ? (a.at(var) | m) : (a.at(var) & ~m);
}

std::string_view op_symbol(Op op) {
  switch (op) {
    case Op::Not: return "~";
    case Op::And: return "&";
    case Op::Or: return "|";
    case Op::Xor: return "^";
    case Op::Add: return "+";
    case Op::Sub: return "-";
    case Op::Mul: return "*";
    case Op::Shl: return "<<";
    case Op::Lshr: return ">>";
    case Op::Urem: return "%";
    case Op::Eq: return "==";
    case Op::Ne: return "!=";
    case Op::Ult: return "<";
    case Op::LAnd: return "&&";
    case Op::LOr: return "||";
    case Op::LNot: return "!";
    case Op::Input: return "input";
    case Op::Local: return "local";
    case Op::Const: return "const";
  }
  return "?";
}

bool is_comparison(Op op) { return op == Op::Eq || op == Op::Ne || op == Op::Ult; }

namespace {

bool is_unary(Op op) { return op == Op::Not || op == Op::LNot; }

bool is_boolean_connective(Op op) { return op == Op::LAnd || op == Op::LOr || op == Op::LNot; }

void check_width(unsigned width) {
  if (width == 0 || width > kMaxWidth)
    throw StructuralError("unsupported bitvector width " + std::to_string(width));
}

}  // namespace

std::uint64_t apply_op(Op op, unsigned w, std::uint64_t a, std::uint64_t b) {
  const std::uint64_t m = width_mask(w);
  switch (op) {
    case Op::Not: return ~a & m;
    case Op::LNot: return a ? 0 : 1;
    case Op::And:
    case Op::LAnd: return a & b;
    case Op::Or:
    case Op::LOr: return a | b;
    case Op::Xor: return a ^ b;
    case Op::Add: return (a + b) & m;
    case Op::Sub: return (a - b) & m;
    case Op::Mul: return (a * b) & m;
    case Op::Shl: return b >= w ? 0 : (a << b) & m;
    case Op::Lshr: return b >= w ? 0 : a >> b;
    case Op::Urem: return b == 0 ? a : a % b;
    case Op::Eq: return a == b ? 1 : 0;
    case Op::Ne: return a != b ? 1 : 0;
    case Op::Ult: return a < b ? 1 : 0;
    default: break;
  }
  throw StructuralError("apply_op: not an operator");
}

BVExpr BVExpr::input(std::size_t var, std::string name, unsigned width) {
  check_width(width);
  auto n = std::make_shared<Node>(Node{Op::Input, width, 0, var, std::move(name), {}});
  return BVExpr(std::move(n));
}

BVExpr BVExpr::local(std::size_t slot, std::string name, unsigned width) {
  check_width(width);
  auto n = std::make_shared<Node>(Node{Op::Local, width, 0, slot, std::move(name), {}});
  return BVExpr(std::move(n));
}

BVExpr BVExpr::constant(std::uint64_t value, unsigned width) {
  check_width(width);
  auto n = std::make_shared<Node>(Node{Op::Const, width, value & width_mask(width), 0, {}, {}});
  return BVExpr(std::move(n));
}

BVExpr BVExpr::unary(Op op, BVExpr operand) {
  if (!is_unary(op)) throw StructuralError("not a unary operator: " + std::string(op_symbol(op)));
  if (op == Op::LNot && operand.width() != 1)
    throw StructuralError("'!' needs a boolean operand");
  unsigned w = operand.width();
  if (operand.is_constant()) return constant(apply_op(op, w, operand.value(), 0), w);
  auto n = std::make_shared<Node>(Node{op, w, 0, 0, {}, {std::move(operand)}});
  return BVExpr(std::move(n));
}

BVExpr BVExpr::binary(Op op, BVExpr lhs, BVExpr rhs) {
  if (is_unary(op) || op == Op::Input || op == Op::Local || op == Op::Const)
    throw StructuralError("not a binary operator: " + std::string(op_symbol(op)));
  if (lhs.width() != rhs.width())
    throw StructuralError("operand widths differ for '" + std::string(op_symbol(op)) +
                          "': " + std::to_string(lhs.width()) + " vs " +
                          std::to_string(rhs.width()));
  if (is_boolean_connective(op) && lhs.width() != 1)
    throw StructuralError("'" + std::string(op_symbol(op)) + "' needs boolean operands");
  unsigned operand_width = lhs.width();
  unsigned w = is_comparison(op) ? 1 : operand_width;
  if (lhs.is_constant() && rhs.is_constant())
    return constant(apply_op(op, operand_width, lhs.value(), rhs.value()), w);
  auto n = std::make_shared<Node>(Node{op, w, 0, 0, {}, {std::move(lhs), std::move(rhs)}});
  return BVExpr(std::move(n));
}

Op BVExpr::op() const { return node_->op; }
unsigned BVExpr::width() const { return node_->width; }
std::uint64_t BVExpr::value() const { return node_->value; }
std::size_t BVExpr::index() const { return node_->index; }
const std::string& BVExpr::name() const { return node_->name; }
std::span<const BVExpr> BVExpr::children() const { return node_->kids; }

namespace {

class Evaluator {
 public:
  Evaluator(const Env& env, bool memoize) : env_(env), memoize_(memoize) {}

  std::uint64_t run(const BVExpr& e) {
    if (memoize_) {
      if (auto it = memo_.find(e.id()); it != memo_.end()) return it->second;
    }
    std::uint64_t v = compute(e);
    if (memoize_) memo_.emplace(e.id(), v);
    return v;
  }

 private:
  std::uint64_t compute(const BVExpr& e) {
    switch (e.op()) {
      case Op::Const: return e.value();
      case Op::Input:
        if (!env_.inputs || e.index() >= env_.inputs->size())
          throw EvalError("unbound input variable '" + e.name() + "'");
        return (*env_.inputs)[e.index()] & width_mask(e.width());
      case Op::Local: {
        if (!env_.locals || e.index() >= env_.locals->size() || !(*env_.locals)[e.index()])
          throw EvalError("unbound variable '" + e.name() + "'");
        return *(*env_.locals)[e.index()] & width_mask(e.width());
      }
      default: break;
    }
    auto kids = e.children();
    std::uint64_t a = run(kids[0]);
    if (kids.size() == 1) return apply_op(e.op(), kids[0].width(), a, 0);
    // Short-circuit is only an optimisation; both sides are total.
    std::uint64_t b = run(kids[1]);
    return apply_op(e.op(), kids[0].width(), a, b);
  }

  const Env& env_;
  bool memoize_;
  std::unordered_map<const BVExpr::Node*, std::uint64_t> memo_;
};

}  // namespace

std::uint64_t eval(const BVExpr& e, const Env& env) { return Evaluator(env, false).run(e); }

bool mentions_locals(const BVExpr& e) {
  std::unordered_set<const BVExpr::Node*> seen;
  std::vector<BVExpr> stack{e};
  while (!stack.empty()) {
    BVExpr x = stack.back();
    stack.pop_back();
    if (!seen.insert(x.id()).second) continue;
    if (x.op() == Op::Local) return true;
    for (const BVExpr& k : x.children()) stack.push_back(k);
  }
  return false;
}

std::size_t dag_size(const BVExpr& e) {
  std::unordered_set<const BVExpr::Node*> seen;
  std::vector<BVExpr> stack{e};
  while (!stack.empty()) {
    BVExpr x = stack.back();
    stack.pop_back();
    if (!seen.insert(x.id()).second) continue;
    for (const BVExpr& k : x.children()) stack.push_back(k);
  }
  return seen.size();
}

namespace {

// Abstract value of one result bit: a known constant, or the input bits it may read.
struct BitDep {
  int known = -1;
  std::vector<InputBit> deps;
};

using Deps = std::vector<BitDep>;

std::vector<InputBit> merge(const std::vector<InputBit>& a, const std::vector<InputBit>& b) {
  std::vector<InputBit> out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

BitDep known_bit(bool v) { return BitDep{v ? 1 : 0, {}}; }

bool all_known(const Deps& d) {
  return std::all_of(d.begin(), d.end(), [](const BitDep& b) { return b.known >= 0; });
}

std::uint64_t known_value(const Deps& d, std::size_t upto) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < upto; ++i)
    if (d[i].known == 1) v |= std::uint64_t{1} << i;
  return v;
}

std::size_t known_prefix(const Deps& d) {
  std::size_t i = 0;
  while (i < d.size() && d[i].known >= 0) ++i;
  return i;
}

std::vector<InputBit> union_all(const Deps& a, const Deps& b) {
  std::vector<InputBit> out;
  for (const BitDep& x : a) out = merge(out, x.deps);
  for (const BitDep& x : b) out = merge(out, x.deps);
  return out;
}

Deps from_value(std::uint64_t v, unsigned w) {
  Deps d(w);
  for (unsigned i = 0; i < w; ++i) d[i] = known_bit((v >> i) & 1U);
  return d;
}

Deps all_unknown(unsigned w, const std::vector<InputBit>& deps) {
  Deps d(w);
  for (auto& b : d) b.deps = deps;
  return d;
}

// Add/Sub/Mul: result bit i reads operand bits 0..i. A known prefix of both
// operands gives a known result prefix.
Deps prefix_arith(Op op, const Deps& a, const Deps& b) {
  unsigned w = static_cast<unsigned>(a.size());
  std::size_t known = std::min(known_prefix(a), known_prefix(b));
  Deps out(w);
  if (known > 0) {
    std::uint64_t r = apply_op(op, w, known_value(a, known), known_value(b, known));
    for (std::size_t i = 0; i < known; ++i) out[i] = known_bit((r >> i) & 1U);
  }
  std::vector<InputBit> acc;
  for (std::size_t i = 0; i < w; ++i) {
    acc = merge(acc, a[i].deps);
    acc = merge(acc, b[i].deps);
    if (i >= known) out[i].deps = acc;
  }
  return out;
}

class DepAnalysis {
 public:
  explicit DepAnalysis(const InputSpace& space) : space_(space) {}

  const Deps& run(const BVExpr& e) {
    if (auto it = memo_.find(e.id()); it != memo_.end()) return it->second;
    Deps d = compute(e);
    return memo_.emplace(e.id(), std::move(d)).first->second;
  }

 private:
  Deps compute(const BVExpr& e) {
    const unsigned w = e.width();
    switch (e.op()) {
      case Op::Const: return from_value(e.value(), w);
      case Op::Input: {
        if (e.index() >= space_.vars().size())
          throw StructuralError("input '" + e.name() + "' not in input space");
        Deps d(w);
        for (unsigned i = 0; i < w; ++i) d[i].deps = {space_.bit(e.index(), i)};
        return d;
      }
      case Op::Local:
        throw StructuralError("expression still reads local '" + e.name() + "'");
      default: break;
    }
    auto kids = e.children();
    const Deps& a = run(kids[0]);
    if (e.op() == Op::Not || e.op() == Op::LNot) {
      Deps d = a;
      for (auto& b : d)
        if (b.known >= 0) b.known ^= 1;
      return d;
    }
    const Deps& b = run(kids[1]);
    const unsigned ow = kids[0].width();
    if (all_known(a) && all_known(b))
      return from_value(apply_op(e.op(), ow, known_value(a, ow), known_value(b, ow)), w);

    switch (e.op()) {
      case Op::And:
      case Op::LAnd:
      case Op::Or:
      case Op::LOr: {
        const int absorbing = (e.op() == Op::And || e.op() == Op::LAnd) ? 0 : 1;
        Deps d(w);
        for (unsigned i = 0; i < w; ++i) {
          if (a[i].known == absorbing || b[i].known == absorbing) d[i] = known_bit(absorbing);
          else if (a[i].known >= 0) d[i] = b[i];
          else if (b[i].known >= 0) d[i] = a[i];
          else d[i].deps = merge(a[i].deps, b[i].deps);
        }
        return d;
      }
      case Op::Xor: {
        Deps d(w);
        for (unsigned i = 0; i < w; ++i) {
          if (a[i].known >= 0 && b[i].known >= 0) d[i] = known_bit(a[i].known ^ b[i].known);
          else if (a[i].known >= 0) d[i].deps = b[i].deps;
          else if (b[i].known >= 0) d[i].deps = a[i].deps;
          else d[i].deps = merge(a[i].deps, b[i].deps);
        }
        return d;
      }
      case Op::Add:
      case Op::Sub:
      case Op::Mul:
        return prefix_arith(e.op(), a, b);
      case Op::Shl:
      case Op::Lshr: {
        if (!all_known(b)) return all_unknown(w, union_all(a, b));
        std::uint64_t k = known_value(b, ow);
        if (k >= w) return from_value(0, w);
        Deps d(w);
        for (unsigned i = 0; i < w; ++i) {
          if (e.op() == Op::Shl) d[i] = i >= k ? a[i - k] : known_bit(false);
          else d[i] = i + k < w ? a[i + k] : known_bit(false);
        }
        return d;
      }
      case Op::Eq:
      case Op::Ne: {
        bool differs = false;
        std::vector<InputBit> deps;
        for (unsigned i = 0; i < ow; ++i) {
          if (a[i].known >= 0 && b[i].known >= 0) {
            differs = differs || a[i].known != b[i].known;
          } else {
            deps = merge(deps, merge(a[i].deps, b[i].deps));
          }
        }
        if (differs) return {known_bit(e.op() == Op::Ne)};
        return {BitDep{-1, std::move(deps)}};
      }
      default:  // Urem, Ult
        return all_unknown(w, union_all(a, b));
    }
  }

  const InputSpace& space_;
  std::unordered_map<const BVExpr::Node*, Deps> memo_;
};

}  // namespace

std::vector<InputBit> syntactic_bits(const BVExpr& e, const InputSpace& space) {
  DepAnalysis analysis(space);
  std::vector<InputBit> out;
  for (const BitDep& b : analysis.run(e)) out = merge(out, b.deps);
  return out;
}

namespace {

void render(const BVExpr& e, std::ostream& os) {
  switch (e.op()) {
    case Op::Const: os << e.value(); return;
    case Op::Input:
    case Op::Local: os << e.name(); return;
    default: break;
  }
  auto kids = e.children();
  if (kids.size() == 1) {
    os << op_symbol(e.op()) << '(';
    render(kids[0], os);
    os << ')';
    return;
  }
  os << '(';
  render(kids[0], os);
  os << ' ' << op_symbol(e.op()) << ' ';
  render(kids[1], os);
  os << ')';
}

}  // namespace

std::string to_string(const BVExpr& e) {
  std::ostringstream os;
  render(e, os);
  return os.str();
}

BoolFunc::BoolFunc(BVExpr expr, std::shared_ptr<const InputSpace> inputs)
    : expr_(std::move(expr)), inputs_(std::move(inputs)) {
  if (!inputs_) throw StructuralError("BoolFunc needs an input space");
  if (expr_.width() != 1)
    throw StructuralError("condition has width " + std::to_string(expr_.width()) + ", expected 1");
  if (mentions_locals(expr_)) throw StructuralError("condition is not closed over inputs");
  bits_ = syntactic_bits(expr_, *inputs_);
}

bool BoolFunc::eval(const InputAssignment& a) const {
  Env env;
  InputAssignment patched;
  if (fixed_.empty()) {
    env.inputs = &a;
  } else {
    patched = a;
    for (auto [bit, v] : fixed_) set_input_bit(*inputs_, patched, bit, v);
    env.inputs = &patched;
  }
  return Evaluator(env, true).run(expr_) != 0;
}

std::optional<bool> BoolFunc::constant_value() const {
  if (!bits_.empty()) return std::nullopt;
  return eval(InputAssignment(inputs_->vars().size(), 0));
}

BoolFunc cofactor(const BoolFunc& f, InputBit bit, bool value) {
  BoolFunc g = f;
  if (g.fixed_.count(bit)) return g;
  g.fixed_[bit] = value;
  auto it = std::lower_bound(g.bits_.begin(), g.bits_.end(), bit);
  if (it != g.bits_.end() && *it == bit) g.bits_.erase(it);
  return g;
}

BVExpr close_expr(const BVExpr& e, const std::map<std::string, BVExpr>& bindings) {
  std::map<std::string, BVExpr> closed;
  std::vector<std::string> in_progress;

  auto close_name = [&](auto& self, const std::string& name) -> BVExpr {
    if (auto it = closed.find(name); it != closed.end()) return it->second;
    if (std::find(in_progress.begin(), in_progress.end(), name) != in_progress.end())
      throw StructuralError("cyclic binding through '" + name + "'");
    auto it = bindings.find(name);
    if (it == bindings.end()) throw StructuralError("no binding for local '" + name + "'");
    in_progress.push_back(name);
    BVExpr out = substitute(it->second, [&](std::size_t, const std::string& n) {
      return std::optional<BVExpr>(self(self, n));
    });
    in_progress.pop_back();
    closed.emplace(name, out);
    return out;
  };

  return substitute(e, [&](std::size_t, const std::string& n) {
    return std::optional<BVExpr>(close_name(close_name, n));
  });
}

BoolFunc close_over_inputs(const BVExpr& e, const std::map<std::string, BVExpr>& bindings,
                           std::shared_ptr<const InputSpace> inputs) {
  return BoolFunc(close_expr(e, bindings), std::move(inputs));
}

}  // namespace qpa
