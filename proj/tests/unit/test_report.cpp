#include <doctest.h>

#include <nlohmann/json.hpp>
#include <sstream>

#include "qpa/errors.hpp"
#include "qpa/report.hpp"

using namespace qpa;

namespace {

WeightDistribution modexp2() { return WeightDistribution{{{10, 1}, {11, 2}, {12, 1}}, 2}; }

}  // namespace

TEST_CASE("exact probabilities are reduced") {
  CHECK(exact_probability(BigInt(2), 2) == "1/2^1");
  CHECK(exact_probability(BigInt(4), 2) == "1/2^0");
  CHECK(exact_probability(BigInt(7), 3) == "7/2^3");
  CHECK(exact_probability(BigInt(12), 5) == "3/2^3");
  CHECK(exact_probability(BigInt(1) << 100, 200) == "1/2^100");
}

TEST_CASE("CSV rows") {
  std::ostringstream os;
  write_csv(modexp2(), os);
  CHECK(os.str() ==
        "weight,count,probability,probability_decimal\n"
        "10,1,1/2^2,0.25\n"
        "11,2,1/2^1,0.5\n"
        "12,1,1/2^2,0.25\n");
}

TEST_CASE("JSON carries counts as strings") {
  std::ostringstream os;
  WeightDistribution d{{{5, BigInt(1) << 70}}, 70};
  write_json(d, os);
  auto j = nlohmann::json::parse(os.str());
  CHECK(j["input_bits"] == 70);
  CHECK(j["total"] == BigInt(BigInt(1) << 70).get_str());
  CHECK(j["distribution"][0]["probability"] == "1/2^0");
  CHECK(j["distribution"][0]["weight"] == 5);
}

TEST_CASE("histogram rows and empty bins") {
  std::ostringstream os;
  write_histogram(modexp2(), os, 1, 10);
  CHECK(os.str() ==
        "10 | #####      0.25\n"
        "11 | ########## 0.5\n"
        "12 | #####      0.25\n");

  std::ostringstream gap;
  write_histogram(WeightDistribution{{{0, 1}, {25, 3}}, 2}, gap, 10, 4);
  CHECK(gap.str() ==
        " 0.. 9 | #    0.25\n"
        "10..19 |      0\n"
        "20..29 | #### 0.75\n");
  std::ostringstream bad;
  CHECK_THROWS_AS(write_histogram(modexp2(), bad, 0), StructuralError);
}

TEST_CASE("value sets") {
  ValueSet v{{3, 8, 9}, ValueProvenance::Exact};
  std::ostringstream t;
  write_values_text(v, t);
  CHECK(t.str() == "3\n8\n9\n");
  std::ostringstream j;
  write_values_json(v, j);
  auto parsed = nlohmann::json::parse(j.str());
  CHECK(parsed["count"] == 3);
  CHECK(parsed["exact"] == true);
  CHECK(parsed["values"] == nlohmann::json::array({3, 8, 9}));
}
