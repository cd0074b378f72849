#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "rsdec/error.hpp"
#include "rsdec/mrac.hpp"

using namespace rsdec;

namespace {

// n = ell = 1, Lambda(x) = x.
MracSpec scalar_spec(double A, double Q, double theta_bar, double half_width = 5.0) {
  return MracSpec{Mat{{A}},
                  Mat{{1.0}},
                  Mat{{Q}},
                  FeatureMap::linear(1),
                  1.0,
                  ConvexSet::box(Vec{-half_width}, Vec{half_width}),
                  Vec{theta_bar},
                  Mat::identity(1),
                  Mat::identity(1)};
}

// n = 2, ell = 1, linear features (L = 2), K a ball of diameter 1.
MracSpec planar_spec() {
  return MracSpec{-1.0 * Mat::identity(2),
                  Mat{{1.0}, {0.0}},
                  2.0 * Mat::identity(2),
                  FeatureMap::linear(2),
                  1.0,
                  ConvexSet::ball(Vec{0.0, 0.0}, 0.5),
                  Vec{0.1, -0.2},
                  Mat::identity(2),
                  Mat::identity(2)};
}

// n = 2, ell = 1 with a tanh block: L = 3.
MracSpec tanh_spec() {
  const FeatureMap fm = FeatureMap::tanh_layer(Mat{{0.8, -0.5}}, Vec{0.1});
  return MracSpec{Mat{{0.0, 1.0}, {-2.0, -3.0}},
                  Mat{{0.0}, {1.0}},
                  Mat::identity(2),
                  fm,
                  fm.lipschitz_bound(),
                  ConvexSet::box(Vec{-1.0, -1.0, -1.0}, Vec{1.0, 1.0, 1.0}),
                  Vec{0.3, -0.4, 0.5},
                  0.5 * Mat::identity(2),
                  0.3 * Mat::identity(3)};
}

}  // namespace

TEST_CASE("reshape is row-major and norm preserving") {
  const Mat t = reshape_S(Vec{1.0, 2.0, 3.0, 4.0}, 2, 2);
  CHECK(t == Mat{{1.0, 2.0}, {3.0, 4.0}});
  std::mt19937_64 gen(1);
  const Vec v = test::random_vec(gen, 12);
  const Mat m = reshape_S(v, 4, 3);
  CHECK(unreshape_S(m) == v);
  CHECK(m.frobenius_norm() == doctest::Approx(norm2(v)).epsilon(1e-14));
  CHECK_THROWS_AS(reshape_S(v, 5, 3), Error);
}

TEST_CASE("control input block convention") {
  const MracSpec s = scalar_spec(-1.0, 2.0, 0.0);
  CHECK(control_input(s, Vec{0.0}, Vec{3.0}) == Vec{0.0});
  // Theta = [-K] with K = 2: u = K x = 6.
  CHECK(control_input(s, Vec{-2.0}, Vec{3.0})[0] == doctest::Approx(6.0));
}

TEST_CASE("adaptation drift examples and trace identity") {
  const MracSpec s = scalar_spec(-0.5, 1.0, 0.0);
  CHECK(adaptation_drift(s, Mat{{1.0}}, Vec{2.0})[0] == doctest::Approx(4.0));
  CHECK(adaptation_drift(s, Mat{{1.0}}, Vec{0.0})[0] == 0.0);

  const MracSpec t = tanh_spec();
  const Mat P = solve_lyapunov(t.A, t.Q);
  std::mt19937_64 gen(5);
  for (int i = 0; i < 50; ++i) {
    const Vec x = test::random_vec(gen, 2);
    const Vec dtheta = test::random_vec(gen, 3);
    const Vec r = adaptation_drift(t, P, x);
    const double lhs = dot(dtheta, r);  // tr((Theta - Theta_bar)^T S(r))
    const Vec lam = t.features(x);
    const Mat PB = P * t.B;
    const double rhs = dot(x, PB * (reshape_S(dtheta, 3, 1).transpose() * lam));
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
  }
}

TEST_CASE("closed loop drift examples") {
  const MracSpec s = scalar_spec(-1.0, 2.0, 0.0);
  const ClosedLoop cl = closed_loop_system(s);
  const Vec d = cl.system.drift(Vec{1.0, 1.0});
  CHECK(d[0] == doctest::Approx(-2.0));
  const MracSpec t = tanh_spec();
  const ClosedLoop tl = closed_loop_system(t);
  const Vec z = concat(Vec{0.7, -0.3}, t.theta_bar);
  const Vec dz = tl.system.drift(z);
  const Vec ax = t.A * Vec{0.7, -0.3};
  CHECK(dz[0] == doctest::Approx(ax[0]).epsilon(1e-14));
  CHECK(dz[1] == doctest::Approx(ax[1]).epsilon(1e-14));
  const ClosedLoop pl = closed_loop_system(planar_spec());
  const Vec d0 = pl.system.drift(Vec{0.0, 0.0, 0.2, 0.2});
  for (double v : d0) CHECK(v == 0.0);
  CHECK(tl.system.dim() == 5);
  CHECK(std::isinf(tl.system.domain().diameter()));
}

TEST_CASE("derived constants by hand") {
  const MracDerived d = derive_constants(planar_spec());
  CHECK(d.lambda == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(d.C == doctest::Approx(8.0).epsilon(1e-12));
  CHECK(d.alpha == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(d.diameter == doctest::Approx(1.0));

  MracSpec scaled = planar_spec();
  scaled.Q *= 5.0;
  const MracDerived ds = derive_constants(scaled);
  CHECK(ds.lambda == doctest::Approx(d.lambda).epsilon(1e-12));
  CHECK((ds.P - 5.0 * d.P).frobenius_norm() < 1e-10);
}

TEST_CASE("singleton parameter set removes the cross term") {
  MracSpec s = planar_spec();
  s.theta_bar = Vec{0.0, 0.0};
  s.parameter_set = ConvexSet::box(Vec{0.0, 0.0}, Vec{0.0, 0.0});
  CHECK(derive_constants(s).alpha == 0.0);
}

TEST_CASE("non-Hurwitz reference model is rejected") {
  MracSpec s = planar_spec();
  s.A = Mat{{0.0, 1.0}, {0.0, 0.0}};
  try {
    derive_constants(s);
    FAIL("expected NotHurwitz");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NotHurwitz);
  }
}

TEST_CASE("understated Lipschitz bound fails the audit") {
  MracSpec s = tanh_spec();
  s.lipschitz = 0.5;
  try {
    s.validate();
    FAIL("expected LipschitzViolation");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::LipschitzViolation);
  }
}

TEST_CASE("feature map Lipschitz bounds hold on random pairs") {
  std::mt19937_64 gen(8);
  const std::vector<FeatureMap> maps{
      FeatureMap::linear(3), FeatureMap::tanh_layer(Mat{{1.0, -2.0, 0.5}, {0.3, 0.3, 0.3}}, Vec{0.0, 1.0}),
      FeatureMap::rbf({Vec{0.0, 0.0, 0.0}, Vec{1.0, -1.0, 0.5}}, 0.7)};
  for (const FeatureMap& fm : maps) {
    for (int i = 0; i < 2000; ++i) {
      const Vec x = test::random_vec(gen, 3, 2.0);
      const Vec y = x + test::random_vec(gen, 3, i % 2 ? 1e-3 : 1.0);
      CHECK(norm2(fm(x) - fm(y)) <= fm.lipschitz_bound() * norm2(x - y) * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("Lyapunov value examples") {
  MracSpec s = planar_spec();
  s.Q = 2.0 * Mat::identity(2);  // P = I
  const MracDerived d = derive_constants(s);
  CHECK(lyapunov_value(d, s, concat(Vec{0.0, 0.0}, s.theta_bar)) == doctest::Approx(1.0));
  CHECK(lyapunov_value(d, s, concat(Vec{1.0, 1.0}, s.theta_bar)) == doctest::Approx(3.0));
  const MracSpec t = tanh_spec();
  const MracDerived dt = derive_constants(t);
  std::mt19937_64 gen(2);
  for (int i = 0; i < 100; ++i) {
    const Vec z = test::random_vec(gen, 5);
    CHECK(lyapunov_value(dt, t, z) == doctest::Approx(dt.lyap.value(z)).epsilon(1e-12));
  }
}

TEST_CASE("one-sided growth bound holds on random pairs") {
  const MracSpec t = tanh_spec();
  const ClosedLoop cl = closed_loop_system(t);
  const MracDerived& d = cl.derived;
  const InnerProduct& ip = d.lyap.norm();
  std::mt19937_64 gen(44);
  for (int i = 0; i < 10000; ++i) {
    Vec z = test::random_vec(gen, 5, 3.0);
    Vec w = (i % 3 == 0) ? z + test::random_vec(gen, 5, 1e-3) : test::random_vec(gen, 5, 3.0);
    z = cl.system.domain().project(z);
    w = cl.system.domain().project(w);
    const Vec dz = z - w;
    const double r = ip.norm(dz);
    const double lhs = ip.inner(dz, cl.system.drift(z) - cl.system.drift(w));
    const double rhs = d.growth.kappa(r) * r * r +
                       d.growth.alpha * r * (d.lyap.norm_from_center(z) + d.lyap.norm_from_center(w));
    CHECK(lhs <= rhs + 1e-8);
  }
}
