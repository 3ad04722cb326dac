#pragma once

// Definitional (Tseitin) bit-blasting of closed conditions to CNF.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "qpa/expr.hpp"

namespace qpa {

// DIMACS-style literal: +v / -v for variable v >= 1.
using Lit = int;

struct CnfFormula {
  int num_vars = 0;
  std::vector<std::vector<Lit>> clauses;
  // CNF variable of every input bit that occurs; all other variables are
  // auxiliary and functionally determined by these.
  std::map<InputBit, int> input_vars;
  std::map<int, std::string> names;  // CNF variable -> human-readable name

  bool is_input_var(int v) const;
  std::vector<int> input_var_list() const;
};

// Incremental encoder sharing structurally equal gates across functions.
class CnfBuilder {
 public:
  static constexpr Lit kTrue = 1 << 30;
  static constexpr Lit kFalse = -kTrue;

  explicit CnfBuilder(std::shared_ptr<const InputSpace> inputs);

  // Literal equivalent to f (may be a constant).
  Lit encode(const BoolFunc& f);
  // Adds the unit clause; asserting kFalse adds the empty clause.
  void require(Lit l);

  Lit input_lit(InputBit bit);
  Lit make_and(Lit a, Lit b);
  Lit make_or(Lit a, Lit b) { return -make_and(-a, -b); }
  Lit make_xor(Lit a, Lit b);
  Lit make_mux(Lit sel, Lit then_lit, Lit else_lit);

  // Required clauses plus the definitions of the gates they reach.
  CnfFormula finish() &&;

 private:
  using Bits = std::vector<Lit>;

  Bits blast(const BVExpr& e, const std::map<InputBit, bool>& fixed,
             std::unordered_map<const BVExpr::Node*, Bits>& memo);
  Bits add(const Bits& a, const Bits& b, Lit carry_in);
  Bits mul(const Bits& a, const Bits& b);
  Bits shift(const Bits& a, const Bits& amount, bool left);
  Bits urem(const Bits& a, const Bits& b);
  Lit equal(const Bits& a, const Bits& b);
  Lit less_than(const Bits& a, const Bits& b);
  int fresh();
  void define(int gate, std::vector<std::vector<Lit>> clauses);

  std::shared_ptr<const InputSpace> inputs_;
  CnfFormula cnf_;
  std::map<std::pair<Lit, Lit>, Lit> and_cache_;
  std::map<std::pair<Lit, Lit>, Lit> xor_cache_;
  std::vector<std::vector<std::vector<Lit>>> defs_;  // by gate variable
};

// CNF whose models, projected on the input-bit variables, are exactly the
// assignments satisfying f. A constant-true f gives no clauses; constant
// false gives one empty clause.
CnfFormula bit_blast(const BoolFunc& f);

}  // namespace qpa
