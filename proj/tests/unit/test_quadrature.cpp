#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "rsdec/quadrature.hpp"

using namespace rsdec;

TEST_CASE("adaptive Simpson on smooth integrands") {
  auto r = adaptive_simpson([](double x) { return std::exp(x); }, 0.0, 1.0);
  CHECK(r.converged);
  CHECK(r.value == doctest::Approx(std::numbers::e - 1.0).epsilon(1e-11));
  r = adaptive_simpson([](double x) { return std::sin(x); }, 0.0, std::numbers::pi);
  CHECK(r.value == doctest::Approx(2.0).epsilon(1e-11));
}

TEST_CASE("split integration handles kinks at break points") {
  const std::vector<double> breaks{-1.0, 0.0, 2.0};
  const auto r = adaptive_simpson_split([](double x) { return std::abs(x); }, breaks);
  CHECK(r.converged);
  CHECK(r.value == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("integrable endpoint singularity is not reported as converged silently") {
  SimpsonOptions o;
  o.max_depth = 8;
  const auto r = adaptive_simpson([](double x) { return x > 0 ? 1.0 / std::sqrt(x) : 0.0; }, 0.0, 1.0, o);
  CHECK_FALSE(r.converged);
}
