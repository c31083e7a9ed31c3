#include <doctest.h>

#include <cmath>

#include "emseg/logspace.hpp"

using namespace emseg;

TEST_CASE("log_sum_exp basics") {
  CHECK(log_sum_exp({3.25}) == 3.25);  // singleton is exact
  CHECK(log_sum_exp({std::log(0.2), std::log(0.5)}) ==
        doctest::Approx(std::log(0.7)).epsilon(1e-12));
  CHECK(log_sum_exp({0.0, 0.0}) == doctest::Approx(std::log(2.0)));
  CHECK_THROWS(log_sum_exp(std::span<const double>{}));
}

TEST_CASE("log_sum_exp handles extreme magnitudes") {
  CHECK(log_sum_exp({-1000.0, -1000.0}) == doctest::Approx(-1000.0 + std::log(2.0)));
  CHECK(log_sum_exp({700.0, -700.0}) == doctest::Approx(700.0));
  CHECK(log_sum_exp({kNegInf, 1.0}) == doctest::Approx(1.0));
  CHECK(log_sum_exp({kNegInf, kNegInf}) == kNegInf);
}
