#include <cmath>
#include <limits>
#include <numeric>

#include "doctest.h"
#include "helpers.hpp"
#include "rsdec/error.hpp"
#include "rsdec/parallel.hpp"
#include "rsdec/rsde.hpp"

using namespace rsdec;

namespace {

DriftFn zero_drift() {
  return [](std::span<const double>, std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); };
}

DriftFn linear_drift(double k) {
  return [k](std::span<const double> x, std::span<double> out) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = -k * x[i];
  };
}

SimConfig config(double step, double horizon, std::uint64_t seed) {
  SimConfig c;
  c.step = step;
  c.horizon = horizon;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("unconstrained single step adds the Brownian increment exactly") {
  RsdeSystem sys(zero_drift(), Mat::identity(2), ConvexSet::whole_space(2));
  const SimConfig c = config(0.01, 0.01, 77);
  const Vec x0{0.3, -0.2};
  const Trajectory tr = simulate(sys, x0, c);
  REQUIRE(tr.states.size() == 2);
  BrownianIncrements noise(77, stream_id(0, StreamPurpose::Noise), 0.01, 0);
  Vec dw(2);
  noise.next(dw.span());
  CHECK(tr.states[1] == x0 + dw);
  CHECK(tr.times[1] == 0.01);
}

TEST_CASE("projected Euler step reports the reflection increment") {
  RsdeSystem sys(zero_drift(), Mat::identity(1), ConvexSet::box(Vec{0.0}, Vec{1.0}));
  const StepResult r = projected_euler_step(sys, Vec{0.1}, Vec{-0.5}, 0.01);
  CHECK(r.next[0] == 0.0);
  CHECK(r.reflection[0] == doctest::Approx(0.4));
}

TEST_CASE("trajectories are deterministic and stay in the domain") {
  RsdeSystem sys(linear_drift(-0.5), Mat{{1.0, 0.3}, {0.0, 0.8}}, ConvexSet::ball(Vec{0.0, 0.0}, 1.0));
  SimConfig c = config(0.01, 5.0, 3);
  c.record_stride = 7;
  const Trajectory a = simulate(sys, Vec{0.2, 0.1}, c, 4);
  const Trajectory b = simulate(sys, Vec{0.2, 0.1}, c, 4);
  CHECK(a.states == b.states);
  CHECK(a.times == b.times);
  for (std::size_t i = 0; i < a.states.size(); ++i) {
    CHECK(sys.domain().contains(a.states[i], 1e-9));
    if (i > 0) CHECK(a.times[i] > a.times[i - 1]);
  }
  // Stride rule: every 7th step plus the final step.
  CHECK(a.times.back() == doctest::Approx(5.0));
  CHECK(a.states.size() == 1 + 500 / 7 + 1);
  const Trajectory other = simulate(sys, Vec{0.2, 0.1}, c, 5);
  CHECK(other.states != a.states);
}

TEST_CASE("horizon 0 records only the initial state") {
  RsdeSystem sys(zero_drift(), Mat::identity(1), ConvexSet::whole_space(1));
  const Trajectory tr = simulate(sys, Vec{1.5}, config(0.1, 0.0, 1));
  CHECK(tr.states.size() == 1);
  CHECK(tr.states[0] == Vec{1.5});
}

TEST_CASE("50 / 0.001 gives exactly 50000 steps") { CHECK(config(0.001, 50.0, 0).step_count() == 50000); }

TEST_CASE("errors: initial state outside the domain and explosions") {
  RsdeSystem sys(zero_drift(), Mat::identity(1), ConvexSet::box(Vec{0.0}, Vec{1.0}));
  try {
    simulate(sys, Vec{2.0}, config(0.1, 1.0, 1));
    FAIL("expected InitialStateOutsideDomain");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InitialStateOutsideDomain);
  }
  RsdeSystem blowup([](std::span<const double> x, std::span<double> out) { out[0] = x[0] * x[0]; },
                    Mat::identity(1), ConvexSet::whole_space(1));
  try {
    simulate(blowup, Vec{10.0}, config(0.1, 10.0, 1));
    FAIL("expected DriftNaN");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DriftNaN);
  }
  CHECK_THROWS_AS(RsdeSystem(zero_drift(), Mat{{1, 0}, {0, 0}}, ConvexSet::whole_space(2)), Error);
}

TEST_CASE("OU variance matches the exact law of the Euler recursion") {
  // x_{k+1} = (1 - eta) x_k + dw: stationary variance eta / (1 - (1 - eta)^2).
  RsdeSystem sys(linear_drift(1.0), Mat::identity(1), ConvexSet::whole_space(1));
  const SimConfig c = config(0.01, 10.0, 8);
  const std::size_t n = 20000;
  std::vector<double> xs(n);
  parallel_for(n, 0, [&](std::size_t i) {
    EulerRun run(sys, Vec{1.0}, c, i);
    for (std::size_t k = 0; k < c.step_count(); ++k) run.advance();
    xs[i] = run.state()[0];
  });
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= n - 1;
  const double eta = c.step;
  const double decay = std::pow(1.0 - eta, 1000.0);
  const double exact_var = eta * (1.0 - decay * decay) / (1.0 - (1.0 - eta) * (1.0 - eta));
  CHECK(std::abs(mean - decay) < 4.0 * std::sqrt(exact_var / n));
  CHECK(std::abs(var - exact_var) < 4.0 * exact_var * std::sqrt(2.0 / n));
  // Continuous-time value, for scale.
  CHECK(std::abs(var - 0.5) < 0.02);
}

TEST_CASE("coupled run: identical starts couple at time 0") {
  RsdeSystem sys(zero_drift(), Mat::identity(2), ConvexSet::whole_space(2));
  const CoupledTrajectory ct =
      simulate_coupled(sys, Vec{0.5, 0.5}, Vec{0.5, 0.5}, config(0.01, 1.0, 2), InnerProduct::euclidean(2));
  REQUIRE(ct.coupling_time.has_value());
  CHECK(*ct.coupling_time == 0.0);
  CHECK(ct.x_states == ct.y_states);
}

TEST_CASE("coupled run: 1-D reflection flips the increment sign before coupling") {
  RsdeSystem sys(zero_drift(), Mat::identity(1), ConvexSet::whole_space(1));
  SimConfig c = config(0.001, 0.2, 6);
  c.bridge_crossing = false;
  const CoupledTrajectory ct = simulate_coupled(sys, Vec{0.0}, Vec{5.0}, c, InnerProduct::euclidean(1));
  CHECK_FALSE(ct.coupling_time.has_value());
  for (std::size_t k = 1; k < ct.times.size(); ++k) {
    const double dx = ct.x_states[k][0] - ct.x_states[k - 1][0];
    const double dy = ct.y_states[k][0] - ct.y_states[k - 1][0];
    CHECK(dy == doctest::Approx(-dx).epsilon(1e-12));
  }
}

TEST_CASE("coupled run: paths are glued after coupling and the metric is recorded") {
  RsdeSystem sys(linear_drift(1.0), Mat::identity(2), ConvexSet::box(Vec{-1.0, -1.0}, Vec{1.0, 1.0}));
  const PairMetric metric = [](const Vec& x, const Vec& y) { return norm2(x - y); };
  int coupled = 0;
  for (std::uint64_t rep = 0; rep < 20; ++rep) {
    const CoupledTrajectory ct = simulate_coupled(sys, Vec{-0.5, 0.2}, Vec{0.5, -0.2}, config(0.01, 5.0, 12),
                                                  InnerProduct::euclidean(2), metric, rep);
    REQUIRE(ct.metric_values.size() == ct.times.size());
    if (!ct.coupling_time) continue;
    ++coupled;
    for (std::size_t k = 0; k < ct.times.size(); ++k) {
      CHECK(ct.metric_values[k] >= 0.0);
      if (ct.times[k] >= *ct.coupling_time) {
        CHECK(ct.x_states[k] == ct.y_states[k]);
        CHECK(ct.metric_values[k] == 0.0);
      }
    }
  }
  CHECK(coupled > 10);
}

TEST_CASE("coupled y-marginal has the law of an uncoupled path") {
  // Drift 0, G = I, whole plane: y_T ~ N(y0, T I) whatever the coupling does.
  RsdeSystem sys(zero_drift(), Mat::identity(2), ConvexSet::whole_space(2));
  SimConfig c = config(0.01, 1.0, 31);
  c.coupling_tolerance = 0.0;
  c.bridge_crossing = false;
  const std::size_t n = 10000;
  std::vector<Vec> ys(n);
  parallel_for(n, 0, [&](std::size_t i) {
    CoupledRun run(sys, Vec{0.0, 0.0}, Vec{3.0, 0.0}, c, InnerProduct::euclidean(2), i);
    for (std::size_t k = 0; k < c.step_count(); ++k) run.advance();
    ys[i] = run.y();
  });
  // Hotelling-type statistic for the mean, chi^2 with 2 dof; 1% critical value 9.21.
  double m0 = 0, m1 = 0;
  for (const Vec& y : ys) {
    m0 += y[0] - 3.0;
    m1 += y[1];
  }
  m0 /= n;
  m1 /= n;
  CHECK(n * (m0 * m0 + m1 * m1) < 9.21);
  // Sample covariance against the identity.
  double s00 = 0, s01 = 0, s11 = 0;
  for (const Vec& y : ys) {
    s00 += (y[0] - 3.0 - m0) * (y[0] - 3.0 - m0);
    s01 += (y[0] - 3.0 - m0) * (y[1] - m1);
    s11 += (y[1] - m1) * (y[1] - m1);
  }
  s00 /= n - 1;
  s01 /= n - 1;
  s11 /= n - 1;
  const double se = std::sqrt(2.0 / n);
  CHECK(std::abs(s00 - 1.0) < 4.0 * se);
  CHECK(std::abs(s11 - 1.0) < 4.0 * se);
  CHECK(std::abs(s01) < 4.0 / std::sqrt(n));
}

TEST_CASE("Brownian refinement: a coarse step is the sum of two fine steps") {
  BrownianIncrements coarse(5, 9, 0.02, 1);
  BrownianIncrements fine(5, 9, 0.01, 0);
  for (int k = 0; k < 50; ++k) {
    Vec c(3), f1(3), f2(3);
    coarse.next(c.span());
    fine.next(f1.span());
    fine.next(f2.span());
    for (int i = 0; i < 3; ++i) CHECK(c[i] == doctest::Approx(f1[i] + f2[i]).epsilon(1e-12));
  }
}

TEST_CASE("parallel_for reports the smallest failing index") {
  try {
    parallel_for(100, 4, [](std::size_t i) {
      if (i % 10 == 7) throw Error(ErrorKind::InvalidArgument, "item " + std::to_string(i));
    });
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("item 7") != std::string::npos);
  }
}
