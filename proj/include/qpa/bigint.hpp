#pragma once

#include <cstddef>
#include <string>

#include <gmpxx.h>

namespace qpa {

// Exact counts and probability numerators.
using BigInt = mpz_class;

BigInt pow2(std::size_t k);

// log2(x) for x > 0, accurate for values far beyond double range.
double log2_big(const BigInt& x);

// x / 2^k as a double, without overflow for large k.
double ratio_pow2(const BigInt& x, std::size_t k);

inline std::string to_string(const BigInt& x) { return x.get_str(); }

}  // namespace qpa
