#pragma once

// Distribution and value-set renderings: CSV, JSON, text histogram.

#include <cstdint>
#include <iosfwd>
#include <string>

#include "qpa/analysis.hpp"

namespace qpa {

// count / 2^k reduced to lowest terms, e.g. "7/2^3" or "1/2^0".
std::string exact_probability(const BigInt& count, std::size_t k);

// weight,count,probability,probability_decimal
void write_csv(const WeightDistribution& d, std::ostream& os);
void write_json(const WeightDistribution& d, std::ostream& os);
// One row per bin [lo, lo + bin), including empty bins between the extremes.
void write_histogram(const WeightDistribution& d, std::ostream& os, std::int64_t bin = 1,
                     unsigned bar_width = 50);

void write_values_text(const ValueSet& v, std::ostream& os);
void write_values_json(const ValueSet& v, std::ostream& os);

}  // namespace qpa
