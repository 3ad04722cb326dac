#pragma once

// Fixed-width bitvector expressions: the language of branch conditions and
// assignments. Nodes are immutable and shared; substitution produces DAGs.

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qpa {

// Global index of one input bit in I.
using InputBit = std::uint32_t;

inline constexpr unsigned kMaxWidth = 64;

struct InputVar {
  std::string name;
  unsigned width = 0;
  InputBit offset = 0;
};

// The input bits I, grouped into named variables laid out contiguously.
class InputSpace {
 public:
  std::size_t add(std::string name, unsigned width);

  const std::vector<InputVar>& vars() const { return vars_; }
  std::size_t total_bits() const { return total_bits_; }
  std::optional<std::size_t> find(std::string_view name) const;

  InputBit bit(std::size_t var, unsigned k) const { return vars_[var].offset + k; }
  // (variable index, bit position) of a global bit.
  std::pair<std::size_t, unsigned> locate(InputBit bit) const;
  std::string bit_name(InputBit bit) const;

 private:
  std::vector<InputVar> vars_;
  std::size_t total_bits_ = 0;
};

// Values of every input variable, indexed like InputSpace::vars().
using InputAssignment = std::vector<std::uint64_t>;

// Unpacks the low |I| bits of `packed` into per-variable values (|I| <= 64).
InputAssignment unpack_assignment(const InputSpace& space, std::uint64_t packed);
bool input_bit_value(const InputSpace& space, const InputAssignment& a, InputBit bit);
void set_input_bit(const InputSpace& space, InputAssignment& a, InputBit bit, bool value);

enum class Op : std::uint8_t {
  Input,  // whole input variable, by index into InputSpace
  Local,  // program variable, by slot
  Const,
  Not,    // bitwise ~
  And,
  Or,
  Xor,
  Add,
  Sub,
  Mul,
  Shl,
  Lshr,
  Urem,
  Eq,
  Ne,
  Ult,
  LAnd,
  LOr,
  LNot,
};

std::string_view op_symbol(Op op);
bool is_comparison(Op op);

class BVExpr {
 public:
  struct Node;

  static BVExpr input(std::size_t var, std::string name, unsigned width);
  static BVExpr local(std::size_t slot, std::string name, unsigned width);
  static BVExpr constant(std::uint64_t value, unsigned width);
  // Width-checked constructors; all-constant operands are folded.
  static BVExpr unary(Op op, BVExpr operand);
  static BVExpr binary(Op op, BVExpr lhs, BVExpr rhs);

  static BVExpr truth(bool value) { return constant(value ? 1 : 0, 1); }

  Op op() const;
  unsigned width() const;
  std::uint64_t value() const;  // Const only
  std::size_t index() const;    // Input var or Local slot
  const std::string& name() const;
  std::span<const BVExpr> children() const;

  bool is_constant() const { return op() == Op::Const; }
  const Node* id() const { return node_.get(); }

 private:
  explicit BVExpr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

struct BVExpr::Node {
  Op op;
  unsigned width;
  std::uint64_t value = 0;
  std::size_t index = 0;
  std::string name;
  std::vector<BVExpr> kids;
};

inline std::uint64_t width_mask(unsigned width) {
  return width >= 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << width) - 1);
}

// Concrete semantics of a single operator on masked operands.
std::uint64_t apply_op(Op op, unsigned operand_width, std::uint64_t a, std::uint64_t b);

struct Env {
  const InputAssignment* inputs = nullptr;
  const std::vector<std::optional<std::uint64_t>>* locals = nullptr;  // by slot
};

// Throws EvalError naming any variable the environment leaves unbound.
std::uint64_t eval(const BVExpr& e, const Env& env);

bool mentions_locals(const BVExpr& e);
std::size_t dag_size(const BVExpr& e);

// Replaces locals via `resolve(slot, name)`; the resolver returns nullopt to keep a local.
// Shared subterms are rewritten once.
template <class Resolver>
BVExpr substitute(const BVExpr& e, Resolver&& resolve);

// Input bits each result bit may depend on, by a bit-level dependency pass
// (a superset of the semantic support). Sorted, unique.
std::vector<InputBit> syntactic_bits(const BVExpr& e, const InputSpace& space);

// Source-syntax rendering; inputs and locals print by name.
std::string to_string(const BVExpr& e);

// A width-1 expression over input bits only, with some bits possibly fixed by
// cofactoring.
class BoolFunc {
 public:
  BoolFunc(BVExpr expr, std::shared_ptr<const InputSpace> inputs);

  const BVExpr& expr() const { return expr_; }
  const InputSpace& inputs() const { return *inputs_; }
  const std::shared_ptr<const InputSpace>& input_space() const { return inputs_; }
  const std::map<InputBit, bool>& fixed() const { return fixed_; }

  // Syntactically occurring input bits, excluding fixed ones.
  const std::vector<InputBit>& bits() const { return bits_; }

  bool eval(const InputAssignment& a) const;

  // Value when no free bit remains.
  std::optional<bool> constant_value() const;

  friend BoolFunc cofactor(const BoolFunc& f, InputBit bit, bool value);

 private:
  BVExpr expr_;
  std::shared_ptr<const InputSpace> inputs_;
  std::map<InputBit, bool> fixed_;
  std::vector<InputBit> bits_;
};

// f with `bit` fixed to `value`; the bit no longer occurs in the result.
BoolFunc cofactor(const BoolFunc& f, InputBit bit, bool value);

// Rewrites every local of `e` through `bindings` (transitively) and wraps the
// result. Throws StructuralError on a missing or cyclic binding, or when the
// result is not width 1.
BoolFunc close_over_inputs(const BVExpr& e, const std::map<std::string, BVExpr>& bindings,
                           std::shared_ptr<const InputSpace> inputs);

// Same rewriting for an arbitrary-width expression.
BVExpr close_expr(const BVExpr& e, const std::map<std::string, BVExpr>& bindings);

}  // namespace qpa

#include "qpa/expr_inl.hpp"
