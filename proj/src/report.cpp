#include "qpa/report.hpp"

#include <cinttypes>
#include <cstdio>
#include <ostream>

#include <nlohmann/json.hpp>

namespace qpa {

namespace {

std::string decimal(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace

std::string exact_probability(const BigInt& count, std::size_t k) {
  if (count == 0) return "0/2^0";
  std::size_t twos = mpz_scan1(count.get_mpz_t(), 0);
  std::size_t t = std::min(twos, k);
  BigInt num = count >> t;
  return num.get_str() + "/2^" + std::to_string(k - t);
}

void write_csv(const WeightDistribution& d, std::ostream& os) {
  os << "weight,count,probability,probability_decimal\n";
  for (const auto& [w, c] : d.counts)
    os << w << ',' << c.get_str() << ',' << exact_probability(c, d.input_bits) << ','
       << decimal(ratio_pow2(c, d.input_bits)) << '\n';
}

void write_json(const WeightDistribution& d, std::ostream& os) {
  using nlohmann::json;
  json rows = json::array();
  for (const auto& [w, c] : d.counts)
    rows.push_back({{"weight", w},
                    {"count", c.get_str()},
                    {"probability", exact_probability(c, d.input_bits)},
                    {"probability_decimal", ratio_pow2(c, d.input_bits)}});
  json j = {{"input_bits", d.input_bits}, {"total", d.total().get_str()}, {"distribution", rows}};
  os << j.dump(2) << '\n';
}

void write_histogram(const WeightDistribution& d, std::ostream& os, std::int64_t bin, unsigned bar_width) {
  if (bin <= 0) throw StructuralError("histogram bin width must be positive");
  if (d.counts.empty()) return;
  const std::int64_t first = floor_div(d.counts.begin()->first, bin);
  const std::int64_t last = floor_div(d.counts.rbegin()->first, bin);
  const std::int64_t nbins = last - first + 1;
  if (nbins > 100000) throw StructuralError("histogram would have " + std::to_string(nbins) + " bins; use a wider bin");
  std::vector<BigInt> bins(static_cast<std::size_t>(nbins));
  for (const auto& [w, c] : d.counts) bins[static_cast<std::size_t>(floor_div(w, bin) - first)] += c;
  BigInt peak = 0;
  for (const BigInt& c : bins)
    if (c > peak) peak = c;
  const std::string lo_label = std::to_string(first * bin);
  const std::string hi_label = std::to_string(last * bin);
  const int label_width = static_cast<int>(std::max(lo_label.size(), hi_label.size()));
  for (std::int64_t i = 0; i < nbins; ++i) {
    const BigInt& c = bins[static_cast<std::size_t>(i)];
    const std::int64_t lo = (first + i) * bin;
    unsigned len = 0;
    if (c > 0) {
      BigInt scaled = c * bar_width / peak;
      len = std::max<unsigned>(1, static_cast<unsigned>(scaled.get_ui()));
    }
    char head[96];
    if (bin == 1) std::snprintf(head, sizeof head, "%*" PRId64, label_width, lo);
    else std::snprintf(head, sizeof head, "%*" PRId64 "..%*" PRId64, label_width, lo, label_width, lo + bin - 1);
    os << head << " | " << std::string(len, '#') << std::string(bar_width - len, ' ') << ' '
       << decimal(ratio_pow2(c, d.input_bits)) << '\n';
  }
}

void write_values_text(const ValueSet& v, std::ostream& os) {
  for (std::int64_t x : v.values) os << x << '\n';
}

void write_values_json(const ValueSet& v, std::ostream& os) {
  nlohmann::json j = {{"values", v.values},
                      {"count", v.values.size()},
                      {"exact", v.provenance == ValueProvenance::Exact}};
  os << j.dump(2) << '\n';
}

}  // namespace qpa
