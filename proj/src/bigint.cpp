#include "qpa/bigint.hpp"

#include <cmath>

#include "qpa/errors.hpp"

namespace qpa {

BigInt pow2(std::size_t k) {
  BigInt r;
  mpz_ui_pow_ui(r.get_mpz_t(), 2, k);
  return r;
}

double log2_big(const BigInt& x) {
  if (sgn(x) <= 0) throw StructuralError("log2 of a non-positive integer");
  long exp = 0;
  double mant = mpz_get_d_2exp(&exp, x.get_mpz_t());
  return std::log2(mant) + static_cast<double>(exp);
}

double ratio_pow2(const BigInt& x, std::size_t k) {
  if (sgn(x) == 0) return 0.0;
  long exp = 0;
  double mant = mpz_get_d_2exp(&exp, x.get_mpz_t());
  return std::ldexp(mant, static_cast<int>(exp - static_cast<long>(k)));
}

}  // namespace qpa
