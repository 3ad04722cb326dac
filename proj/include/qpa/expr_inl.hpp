#pragma once

#include <unordered_map>

#include "qpa/errors.hpp"

namespace qpa {

template <class Resolver>
BVExpr substitute(const BVExpr& e, Resolver&& resolve) {
  std::unordered_map<const BVExpr::Node*, BVExpr> memo;
  auto go = [&](auto& self, const BVExpr& x) -> BVExpr {
    if (auto it = memo.find(x.id()); it != memo.end()) return it->second;
    BVExpr out = x;
    switch (x.op()) {
      case Op::Input:
      case Op::Const:
        break;
      case Op::Local:
        if (std::optional<BVExpr> r = resolve(x.index(), x.name())) {
          if (r->width() != x.width())
            throw StructuralError("binding for '" + x.name() + "' has width " +
                                  std::to_string(r->width()) + ", expected " +
                                  std::to_string(x.width()));
          out = *r;
        }
        break;
      default: {
        auto kids = x.children();
        if (kids.size() == 1) {
          BVExpr a = self(self, kids[0]);
          if (a.id() != kids[0].id()) out = BVExpr::unary(x.op(), a);
        } else {
          BVExpr a = self(self, kids[0]);
          BVExpr b = self(self, kids[1]);
          if (a.id() != kids[0].id() || b.id() != kids[1].id()) out = BVExpr::binary(x.op(), a, b);
        }
      }
    }
    memo.emplace(x.id(), out);
    return out;
  };
  return go(go, e);
}

}  // namespace qpa
