#include "qpa/sums.hpp"

#include <algorithm>
#include <cstdlib>
#include <limits>

#include "qpa/errors.hpp"

namespace qpa {

namespace {

std::int64_t checked_add(std::int64_t a, std::int64_t b) {
  std::int64_t r;
  if (__builtin_add_overflow(a, b, &r)) throw StructuralError("submultiset sum overflows int64");
  return r;
}

// Merges sorted `a` with `a + x` into `out`, dropping duplicates. For x < 0
// the merge runs from the back.
void merge_shifted(const std::vector<std::int64_t>& a, std::int64_t x, std::vector<std::int64_t>& out,
                   std::uint64_t& steps) {
  out.clear();
  out.reserve(a.size() * 2);
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(a.size());
  auto emit = [&](std::int64_t v) {
    ++steps;
    if (out.empty() || out.back() != v) out.push_back(v);
  };
  if (x > 0) {
    std::ptrdiff_t i = 0, j = 0;
    while (i < n || j < n) {
      if (j >= n || (i < n && a[i] <= checked_add(a[j], x))) emit(a[i++]);
      else emit(checked_add(a[j++], x));
    }
  } else {
    // Descending merge, then reverse.
    std::ptrdiff_t i = n - 1, j = n - 1;
    while (i >= 0 || j >= 0) {
      if (j < 0 || (i >= 0 && a[i] >= checked_add(a[j], x))) emit(a[i--]);
      else emit(checked_add(a[j--], x));
    }
    std::reverse(out.begin(), out.end());
  }
}

}  // namespace

std::vector<std::int64_t> submultiset_sums(std::span<const std::int64_t> d, const SumsOptions& opts,
                                           SumsStats* stats) {
  std::vector<std::int64_t> nonzero;
  for (std::int64_t x : d)
    if (x != 0) nonzero.push_back(x);

  std::size_t limit = std::numeric_limits<std::size_t>::max();
  if (opts.max_output) {
    limit = *opts.max_output;
  } else if (nonzero.size() >= 2) {
    BigInt bound = sumset_size_bound(nonzero);
    if (bound.fits_ulong_p()) limit = bound.get_ui();
  }

  std::uint64_t steps = 0;
  std::vector<std::int64_t> sums{0}, next;
  if (limit < 1) throw BudgetError("submultiset sums: output budget " + std::to_string(limit) + " exceeded");
  for (std::int64_t x : nonzero) {
    merge_shifted(sums, x, next, steps);
    sums.swap(next);
    if (sums.size() > limit)
      throw BudgetError("submultiset sums: more than " + std::to_string(limit) + " distinct sums");
  }
  if (stats) stats->merge_steps += steps;
  return sums;
}

std::vector<std::int64_t> abs_transform(std::span<const std::int64_t> d) {
  std::vector<std::int64_t> out;
  for (std::int64_t x : d) {
    if (x == std::numeric_limits<std::int64_t>::min()) throw StructuralError("abs_transform: |INT64_MIN| overflows");
    if (x != 0) out.push_back(std::abs(x));
  }
  return out;
}

BigInt sumset_size_bound(std::span<const std::int64_t> d) {
  if (d.size() < 2) throw StructuralError("sumset_size_bound needs at least two elements");
  auto [lo, hi] = std::minmax_element(d.begin(), d.end());
  BigInt v = BigInt(std::to_string(*hi)) - BigInt(std::to_string(*lo));
  BigInt n = static_cast<unsigned long>(d.size());
  return (n + 1) * ((n - 1) * v + 1);
}

}  // namespace qpa
