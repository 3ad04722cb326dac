#include "qpa/cnf.hpp"

#include <algorithm>
#include <cstdlib>
#include <utility>

#include "qpa/errors.hpp"

namespace qpa {

bool CnfFormula::is_input_var(int v) const {
  for (const auto& [bit, var] : input_vars)
    if (var == v) return true;
  return false;
}

std::vector<int> CnfFormula::input_var_list() const {
  std::vector<int> out;
  out.reserve(input_vars.size());
  for (const auto& [bit, var] : input_vars) out.push_back(var);
  return out;
}

CnfBuilder::CnfBuilder(std::shared_ptr<const InputSpace> inputs) : inputs_(std::move(inputs)) {}

int CnfBuilder::fresh() {
  int v = ++cnf_.num_vars;
  cnf_.names[v] = "t" + std::to_string(v);
  return v;
}

void CnfBuilder::define(int gate, std::vector<std::vector<Lit>> clauses) {
  if (defs_.size() <= static_cast<std::size_t>(gate)) defs_.resize(static_cast<std::size_t>(gate) + 1);
  defs_[static_cast<std::size_t>(gate)] = std::move(clauses);
}

Lit CnfBuilder::input_lit(InputBit bit) {
  if (auto it = cnf_.input_vars.find(bit); it != cnf_.input_vars.end()) return it->second;
  int v = ++cnf_.num_vars;
  cnf_.input_vars.emplace(bit, v);
  cnf_.names[v] = inputs_->bit_name(bit);
  return v;
}

void CnfBuilder::require(Lit l) {
  if (l == kTrue) return;
  if (l == kFalse) {
    cnf_.clauses.push_back({});
    return;
  }
  cnf_.clauses.push_back({l});
}

Lit CnfBuilder::make_and(Lit a, Lit b) {
  if (a == kFalse || b == kFalse) return kFalse;
  if (a == kTrue) return b;
  if (b == kTrue) return a;
  if (a == b) return a;
  if (a == -b) return kFalse;
  auto key = std::minmax(a, b);
  if (auto it = and_cache_.find(key); it != and_cache_.end()) return it->second;
  Lit g = fresh();
  define(g, {{-g, a}, {-g, b}, {g, -a, -b}});
  and_cache_.emplace(key, g);
  return g;
}

Lit CnfBuilder::make_xor(Lit a, Lit b) {
  if (a == kFalse) return b;
  if (b == kFalse) return a;
  if (a == kTrue) return -b;
  if (b == kTrue) return -a;
  if (a == b) return kFalse;
  if (a == -b) return kTrue;
  // Canonicalise polarity: xor(-a, b) = -xor(a, b).
  bool flip = false;
  if (a < 0) { a = -a; flip = !flip; }
  if (b < 0) { b = -b; flip = !flip; }
  auto key = std::minmax(a, b);
  Lit g;
  if (auto it = xor_cache_.find(key); it != xor_cache_.end()) {
    g = it->second;
  } else {
    g = fresh();
    define(g, {{-g, a, b}, {-g, -a, -b}, {g, -a, b}, {g, a, -b}});
    xor_cache_.emplace(key, g);
  }
  return flip ? -g : g;
}

Lit CnfBuilder::make_mux(Lit sel, Lit then_lit, Lit else_lit) {
  if (then_lit == else_lit) return then_lit;
  return make_or(make_and(sel, then_lit), make_and(-sel, else_lit));
}

CnfBuilder::Bits CnfBuilder::add(const Bits& a, const Bits& b, Lit carry) {
  Bits out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    Lit axb = make_xor(a[i], b[i]);
    out[i] = make_xor(axb, carry);
    if (i + 1 < a.size()) carry = make_or(make_and(a[i], b[i]), make_and(carry, axb));
  }
  return out;
}

CnfBuilder::Bits CnfBuilder::mul(const Bits& a, const Bits& b) {
  const std::size_t w = a.size();
  Bits acc(w, kFalse);
  for (std::size_t i = 0; i < w; ++i) {
    if (b[i] == kFalse) continue;
    Bits partial(w, kFalse);
    for (std::size_t j = i; j < w; ++j) partial[j] = make_and(a[j - i], b[i]);
    acc = add(acc, partial, kFalse);
  }
  return acc;
}

CnfBuilder::Bits CnfBuilder::shift(const Bits& a, const Bits& amount, bool left) {
  const std::size_t w = a.size();
  Bits cur = a;
  for (std::size_t k = 0; k < amount.size(); ++k) {
    const Lit s = amount[k];
    if (s == kFalse) continue;
    Bits next(w);
    const bool out_of_range = k >= 7 || (std::size_t{1} << k) >= w;
    for (std::size_t i = 0; i < w; ++i) {
      Lit moved = kFalse;
      if (!out_of_range) {
        std::size_t d = std::size_t{1} << k;
        if (left && i >= d) moved = cur[i - d];
        if (!left && i + d < w) moved = cur[i + d];
      }
      next[i] = make_mux(s, moved, cur[i]);
    }
    cur = std::move(next);
  }
  return cur;
}

Lit CnfBuilder::equal(const Bits& a, const Bits& b) {
  Lit acc = kTrue;
  for (std::size_t i = 0; i < a.size(); ++i) acc = make_and(acc, -make_xor(a[i], b[i]));
  return acc;
}

Lit CnfBuilder::less_than(const Bits& a, const Bits& b) {
  Lit lt = kFalse;
  for (std::size_t i = 0; i < a.size(); ++i) {
    Lit bit_lt = make_and(-a[i], b[i]);
    Lit bit_eq = -make_xor(a[i], b[i]);
    lt = make_or(bit_lt, make_and(bit_eq, lt));
  }
  return lt;
}

// Restoring division on w+1 bits; divisor 0 leaves the dividend, matching apply_op.
CnfBuilder::Bits CnfBuilder::urem(const Bits& a, const Bits& b) {
  const std::size_t w = a.size();
  Bits divisor = b;
  divisor.push_back(kFalse);
  Bits neg_divisor(w + 1);
  for (std::size_t i = 0; i <= w; ++i) neg_divisor[i] = -divisor[i];
  Bits rem(w + 1, kFalse);
  for (std::size_t step = 0; step < w; ++step) {
    const std::size_t bit = w - 1 - step;
    Bits shifted(w + 1);
    shifted[0] = a[bit];
    for (std::size_t i = 1; i <= w; ++i) shifted[i] = rem[i - 1];
    Lit fits = -less_than(shifted, divisor);
    Bits diff = add(shifted, neg_divisor, kTrue);
    for (std::size_t i = 0; i <= w; ++i) rem[i] = make_mux(fits, diff[i], shifted[i]);
  }
  rem.pop_back();
  return rem;
}

CnfBuilder::Bits CnfBuilder::blast(const BVExpr& e, const std::map<InputBit, bool>& fixed,
                                   std::unordered_map<const BVExpr::Node*, Bits>& memo) {
  if (auto it = memo.find(e.id()); it != memo.end()) return it->second;
  const unsigned w = e.width();
  Bits out(w);
  switch (e.op()) {
    case Op::Const:
      for (unsigned i = 0; i < w; ++i) out[i] = ((e.value() >> i) & 1U) ? kTrue : kFalse;
      break;
    case Op::Input:
      for (unsigned i = 0; i < w; ++i) {
        InputBit bit = inputs_->bit(e.index(), i);
        auto f = fixed.find(bit);
        out[i] = f != fixed.end() ? (f->second ? kTrue : kFalse) : input_lit(bit);
      }
      break;
    case Op::Local:
      throw StructuralError("cannot bit-blast local '" + e.name() + "'");
    default: {
      auto kids = e.children();
      Bits a = blast(kids[0], fixed, memo);
      if (kids.size() == 1) {
        for (unsigned i = 0; i < w; ++i) out[i] = -a[i];
        break;
      }
      Bits b = blast(kids[1], fixed, memo);
      switch (e.op()) {
        case Op::And:
        case Op::LAnd:
          for (unsigned i = 0; i < w; ++i) out[i] = make_and(a[i], b[i]);
          break;
        case Op::Or:
        case Op::LOr:
          for (unsigned i = 0; i < w; ++i) out[i] = make_or(a[i], b[i]);
          break;
        case Op::Xor:
          for (unsigned i = 0; i < w; ++i) out[i] = make_xor(a[i], b[i]);
          break;
        case Op::Add: out = add(a, b, kFalse); break;
        case Op::Sub: {
          Bits nb(b.size());
          for (std::size_t i = 0; i < b.size(); ++i) nb[i] = -b[i];
          out = add(a, nb, kTrue);
          break;
        }
        case Op::Mul: out = mul(a, b); break;
        case Op::Shl: out = shift(a, b, true); break;
        case Op::Lshr: out = shift(a, b, false); break;
        case Op::Urem: out = urem(a, b); break;
        case Op::Eq: out = {equal(a, b)}; break;
        case Op::Ne: out = {-equal(a, b)}; break;
        case Op::Ult: out = {less_than(a, b)}; break;
        default: throw StructuralError("bit_blast: unexpected operator");
      }
    }
  }
  memo.emplace(e.id(), out);
  return out;
}

Lit CnfBuilder::encode(const BoolFunc& f) {
  if (f.input_space().get() != inputs_.get() && f.inputs().total_bits() != inputs_->total_bits())
    throw StructuralError("condition belongs to a different input space");
  std::unordered_map<const BVExpr::Node*, Bits> memo;
  return blast(f.expr(), f.fixed(), memo).at(0);
}

CnfFormula CnfBuilder::finish() && {
  // Keep only the gates in the cone of the required literals. Dropped gates
  // and the input bits reachable only through them do not constrain inputs.
  const std::size_t n = static_cast<std::size_t>(cnf_.num_vars) + 1;
  std::vector<bool> used(n, false);
  std::vector<int> stack;
  auto visit = [&](Lit l) {
    std::size_t v = static_cast<std::size_t>(std::abs(l));
    if (!used[v]) {
      used[v] = true;
      stack.push_back(static_cast<int>(v));
    }
  };
  for (const auto& cl : cnf_.clauses)
    for (Lit l : cl) visit(l);
  while (!stack.empty()) {
    std::size_t v = static_cast<std::size_t>(stack.back());
    stack.pop_back();
    if (v < defs_.size())
      for (const auto& cl : defs_[v])
        for (Lit l : cl) visit(l);
  }
  std::vector<std::vector<Lit>> clauses;
  for (std::size_t v = 0; v < defs_.size(); ++v)
    if (used[v])
      for (auto& cl : defs_[v]) clauses.push_back(std::move(cl));
  for (auto& cl : cnf_.clauses) clauses.push_back(std::move(cl));
  cnf_.clauses = std::move(clauses);
  for (auto it = cnf_.input_vars.begin(); it != cnf_.input_vars.end();) {
    if (used[static_cast<std::size_t>(it->second)]) {
      ++it;
    } else {
      cnf_.names.erase(it->second);
      it = cnf_.input_vars.erase(it);
    }
  }
  defs_.clear();
  return std::move(cnf_);
}

CnfFormula bit_blast(const BoolFunc& f) {
  CnfBuilder builder(f.input_space());
  builder.require(builder.encode(f));
  return std::move(builder).finish();
}

}  // namespace qpa
