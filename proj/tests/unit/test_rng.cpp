#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "rsdec/rng.hpp"

using namespace rsdec;

TEST_CASE("streams are reproducible and distinct") {
  CounterRng a(42, 0), b(42, 0), c(42, 1), d(43, 0);
  std::vector<std::uint64_t> va, vc, vd;
  for (int i = 0; i < 16; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    va.push_back(x);
    vc.push_back(c.next_u64());
    vd.push_back(d.next_u64());
  }
  CHECK(va != vc);
  CHECK(va != vd);
}

TEST_CASE("uniform stays in the open unit interval") {
  CounterRng r(1, 2);
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("normal moments") {
  CounterRng r(2024, 7);
  const int n = 200000;
  double s1 = 0, s2 = 0, s4 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s1 += z;
    s2 += z * z;
    s4 += z * z * z * z;
  }
  CHECK(std::abs(s1 / n) < 4.0 / std::sqrt(n));
  CHECK(std::abs(s2 / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(s4 / n - 3.0) < 4.0 * std::sqrt(96.0 / n));
}

TEST_CASE("stream ids are unique per replica and purpose") {
  std::set<std::uint64_t> ids;
  for (std::uint64_t r = 0; r < 100; ++r) {
    for (auto p : {StreamPurpose::Noise, StreamPurpose::Coupling, StreamPurpose::SampleX, StreamPurpose::SampleY}) {
      CHECK(ids.insert(stream_id(r, p)).second);
    }
  }
}
