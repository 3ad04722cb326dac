#pragma once

#include <iosfwd>

#include "qpa/analysis.hpp"

namespace qpa::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;        // parse, usage, or I/O error
inline constexpr int kFailure = 2;      // nested or unsupported structure, dependence
inline constexpr int kBudget = 3;
inline constexpr int kMismatch = 4;     // --oracle disagreement

// kOk when the analysis result equals the brute-force distribution (or its
// support), else kMismatch with the differing entries written to err.
int oracle_verdict(const WeightDistribution& computed, const WeightDistribution& truth, std::ostream& err);
int oracle_verdict(const ValueSet& computed, const WeightDistribution& truth, std::ostream& err);

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qpa::cli
