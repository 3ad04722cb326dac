#pragma once

// Achievable sums of submultisets of a multiset of integers.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "qpa/bigint.hpp"

namespace qpa {

struct SumsOptions {
  // Largest admissible output length; unset means the size bound below
  // (computed on the zero-free multiset when it has at least two elements).
  std::optional<std::size_t> max_output;
};

struct SumsStats {
  std::uint64_t merge_steps = 0;  // elements emitted or skipped while merging
};

// Every sum of a submultiset of d, strictly ascending (always contains 0).
// Zeros are dropped first; negative elements merge right to left.
// Throws BudgetError past max_output, StructuralError on int64 overflow.
std::vector<std::int64_t> submultiset_sums(std::span<const std::int64_t> d,
                                           const SumsOptions& opts = {},
                                           SumsStats* stats = nullptr);

// Elementwise |x| with zeros removed. Has the same number of submultiset sums.
std::vector<std::int64_t> abs_transform(std::span<const std::int64_t> d);

// (n+1)((n-1)V+1), n = |d|, V = max d - min d. Requires |d| >= 2.
BigInt sumset_size_bound(std::span<const std::int64_t> d);

}  // namespace qpa
