#include <cmath>
#include <limits>
#include <numbers>

#include "doctest.h"
#include "helpers.hpp"
#include "rsdec/contraction.hpp"
#include "rsdec/error.hpp"
#include "json.hpp"

using namespace rsdec;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

CertificateOptions radii(double R1, double M, double R2) {
  CertificateOptions o;
  o.R1 = R1;
  o.M = M;
  o.R2 = R2;
  return o;
}

ContractionCertificate trivial(double sigma = 1.0, double C = 1.0, double lambda = 10.0) {
  return build_certificate(GrowthCondition::constant(0.0, 0.0),
                           LyapunovSpec::quadratic(C, lambda, InnerProduct::euclidean(1)),
                           sigma * Mat::identity(1), kInf, radii(1.0, 1.0, 2.0));
}

// 1-D reflected OU on [-2, 2]: drift -x, G = 1.
struct Ou {
  CertificateInputs in = linear_certificate_inputs(Mat{{-1.0}}, Mat::identity(1), InnerProduct::euclidean(1));
  ContractionCertificate cert = build_certificate(in.growth, in.lyap, Mat::identity(1), 4.0);
};

}  // namespace

TEST_CASE("R1 examples") {
  const InnerProduct e = InnerProduct::euclidean(1);
  CHECK(compute_R1(LyapunovSpec::quadratic(1.0, 2.0, e), kInf) == 0.0);
  CHECK(compute_R1(LyapunovSpec::quadratic(1.0, 1.0, e), kInf) == doctest::Approx(2.0));
  CHECK(compute_R1(LyapunovSpec::quadratic(1.0, 1.0, e), 1.0) == 1.0);
}

TEST_CASE("R1 general path agrees with the quadratic formula") {
  const InnerProduct e = InnerProduct::euclidean(1);
  const LyapunovSpec generic([](double r) { return r * r + 1.0; }, [](double v) { return std::sqrt(v - 1.0); }, 3.0,
                             1.0, e);
  // 2 phi^{-1}(4C/lambda - 1) = 2 sqrt(10) bounds sqrt(2 (12 - 2)) = sqrt(20).
  CHECK(compute_R1(generic, kInf) == doctest::Approx(2.0 * std::sqrt(10.0)));
  CHECK(compute_R1(generic, kInf) >= compute_R1(LyapunovSpec::quadratic(3.0, 1.0, e), kInf));
}

TEST_CASE("M examples") {
  const InnerProduct e = InnerProduct::euclidean(1);
  const LyapunovSpec lyap = LyapunovSpec::quadratic(1.0, 1.0, e);
  const double M = compute_M(lyap, GrowthCondition::constant(0.0, 0.0), 2.0);
  CHECK(M == doctest::Approx(4.0 + std::sqrt(19.0)).epsilon(1e-10));
  // Grid oracle at 1e-4 resolution.
  double scan = 0.0;
  for (double r = 30.0; r >= 0.0; r -= 1e-4) {
    if (r * r + 1.0 < 4.0 * (2.0 * r + 1.0)) {
      scan = r;
      break;
    }
  }
  CHECK(std::abs(M - scan) < 2e-4);
  const LyapunovSpec tiny = LyapunovSpec::quadratic(1e-12, 1.0, e);
  CHECK(compute_M(tiny, GrowthCondition::constant(0.0, 0.0), 0.5) == 0.5);
}

TEST_CASE("M generic path matches the closed form") {
  const InnerProduct e = InnerProduct::euclidean(1);
  const LyapunovSpec generic([](double r) { return r * r + 1.0; }, [](double v) { return std::sqrt(v - 1.0); }, 1.0,
                             1.0, e);
  const double M = compute_M(generic, GrowthCondition::constant(0.0, 3.0), 2.0);
  const double closed = compute_M(LyapunovSpec::quadratic(1.0, 1.0, e), GrowthCondition::constant(0.0, 3.0), 2.0);
  CHECK(M == doctest::Approx(closed).epsilon(1e-8));
}

TEST_CASE("sub-linear phi has no finite M") {
  const LyapunovSpec slow = LyapunovSpec::power(0.5, 1.0, 1.0, InnerProduct::euclidean(1));
  try {
    compute_M(slow, GrowthCondition::constant(0.0, 0.0), 0.0);
    FAIL("expected NoFiniteM");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NoFiniteM);
  }
}

TEST_CASE("trivial profile closed forms") {
  const ContractionCertificate c = trivial();
  CHECK(c.xi == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c.beta == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(c.gamma == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(c.rate_a == doctest::Approx(0.25).epsilon(1e-12));
  const auto f = [](double r) {
    const double rr = std::min(r, 2.0);
    const double a = std::min(rr, 1.0);
    // f' = 1 - (r^1)/4 - (r^2)^2/16, integrated piecewise.
    return rr - a * a / 8.0 - (rr - a) / 4.0 - rr * rr * rr / 48.0;
  };
  for (double r : {0.0, 0.1, 0.5, 0.99, 1.0, 1.5, 2.0, 3.0}) {
    CHECK(eval_f(c, r) == doctest::Approx(f(r)).epsilon(1e-9));
    CHECK(c.profile->eval_by_quadrature(r) == doctest::Approx(f(r)).epsilon(1e-9));
  }
  CHECK(eval_f(c, 0.5) == doctest::Approx(0.46614583333333333).epsilon(1e-10));
  CHECK(eval_f(c, 2.0) == eval_f(c, 4.0));
}

TEST_CASE("sigma scaling of the trivial profile") {
  const ContractionCertificate c = trivial(2.0, 1.0, 10.0);
  CHECK(c.sigma_min == doctest::Approx(2.0));
  CHECK(c.xi == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c.gamma == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c.rate_a == doctest::Approx(std::min({10.0, 4.0, 2.0}) / 2.0).epsilon(1e-12));
}

TEST_CASE("cubic exponent matches a midpoint oracle") {
  GrowthCondition g;
  g.kappa = [](double s) { return s; };
  const ContractionCertificate c = build_certificate(
      g, LyapunovSpec::quadratic(1.0, 10.0, InnerProduct::euclidean(1)), Mat::identity(1), kInf, radii(1.0, 1.0, 2.0));
  const int n = 1000000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double s = (i + 0.5) / n;
    sum += std::exp(s * s * s / 6.0);
  }
  CHECK(1.0 / c.xi == doctest::Approx(sum / n).epsilon(1e-8));
}

TEST_CASE("OU certificate constants") {
  const Ou ou;
  CHECK(ou.in.lyap.C() == doctest::Approx(3.0));
  CHECK(ou.in.lyap.lambda() == doctest::Approx(2.0));
  CHECK(ou.cert.R1 == doctest::Approx(std::sqrt(8.0)));
  CHECK(ou.cert.R2 == 4.0);
  CHECK(ou.cert.has_flag("R2-clipped"));
  CHECK(ou.cert.rate_a <= ou.cert.lambda / 2.0 + 1e-15);
  CHECK(ou.cert.rate_a <= ou.cert.beta * ou.cert.sigma_min * ou.cert.sigma_min / 2.0 + 1e-15);
}

TEST_CASE("f and g properties on a curved profile") {
  GrowthCondition g = GrowthCondition::constant(0.3, 0.05);
  const ContractionCertificate c = build_certificate(
      g, LyapunovSpec::quadratic(2.0, 1.0, InnerProduct::euclidean(2)), Mat{{1.0, 0.2}, {0.0, 0.9}}, 6.0);
  const DistanceProfile& p = *c.profile;
  const double R2 = c.R2;
  double min_w = kInf;
  const int n = 400;
  for (int i = 0; i <= n; ++i) min_w = std::min(min_w, p.weight(R2 * i / n));
  CHECK(eval_f(c, 0.0) == 0.0);
  for (int i = 0; i <= n; ++i) {
    const double r = 2.0 * R2 * i / n;
    const double fr = eval_f(c, r);
    const double gr = p.slope_factor(r);
    CHECK(gr >= 0.5 - 1e-12);
    CHECK(gr <= 1.0 + 1e-12);
    if (r >= R2) CHECK(gr == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(fr <= p.cumulative_weight(std::min(r, R2)) + 1e-12);
    CHECK(p.cumulative_weight(r) <= r + 1e-12);
    if (r <= R2) CHECK(fr >= 0.5 * r * min_w - 1e-12);
    if (i > 0) CHECK(fr >= eval_f(c, 2.0 * R2 * (i - 1) / n) - 1e-12);
    for (int j = 0; j <= n; j += 37) {
      const double s = 2.0 * R2 * j / n;
      CHECK(eval_f(c, 0.5 * (r + s)) >= 0.5 * (fr + eval_f(c, s)) - 1e-9);
      CHECK(eval_f(c, r + s) <= fr + eval_f(c, s) + 1e-9);
    }
  }
  for (double r : {0.01, 0.5, c.R1, 0.5 * (c.R1 + R2), R2}) {
    CHECK(eval_f(c, r) == doctest::Approx(p.eval_by_quadrature(r)).epsilon(1e-8));
  }
}

TEST_CASE("metric examples and axioms") {
  const Ou ou;
  const LyapunovSpec& V = ou.in.lyap;
  CHECK(eval_rho(ou.cert, V, Vec{0.3}, Vec{0.3}) == 0.0);
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 2000; ++i) {
    const Vec x{u(gen)}, y{u(gen)}, z{u(gen)};
    const double xy = eval_rho(ou.cert, V, x, y);
    CHECK(xy >= 2.0 * ou.cert.phi_M);
    CHECK(xy == eval_rho(ou.cert, V, y, x));
    CHECK(eval_rho(ou.cert, V, x, z) <= xy + eval_rho(ou.cert, V, y, z) + 1e-9);
  }
}

TEST_CASE("certificate monotonicity in R1 and R2") {
  const GrowthCondition g = GrowthCondition::constant(0.2, 0.1);
  const LyapunovSpec V = LyapunovSpec::quadratic(1.0, 1.0, InnerProduct::euclidean(1));
  double prev_xi = kInf, prev_beta = kInf;
  for (double R : {0.5, 1.0, 2.0, 3.0}) {
    const auto c = build_certificate(g, V, Mat::identity(1), kInf, radii(R, 4.0, 2.0 * R));
    CHECK(c.xi <= prev_xi);
    CHECK(c.beta <= prev_beta);
    prev_xi = c.xi;
    prev_beta = c.beta;
  }
}

TEST_CASE("degenerate R1 is capped and flagged") {
  const auto c = build_certificate(GrowthCondition::constant(0.0, 0.0),
                                   LyapunovSpec::quadratic(1.0, 2.0, InnerProduct::euclidean(1)), Mat::identity(1),
                                   kInf, radii(0.0, 1.0, 2.0));
  CHECK(c.has_flag("R1-degenerate"));
  CHECK(c.xi == doctest::Approx(1e6));
  CHECK(std::isfinite(c.rate_a));
}

TEST_CASE("unbounded domain without finite M is rejected") {
  const LyapunovSpec slow = LyapunovSpec::power(0.5, 1.0, 1.0, InnerProduct::euclidean(1));
  CHECK_THROWS_AS(build_certificate(GrowthCondition::constant(0.0, 0.0), slow, Mat::identity(1), kInf), Error);
}

TEST_CASE("decay bound examples") {
  ContractionCertificate c = trivial();
  CHECK(decay_bound(c, 3.0, 0.0) == doctest::Approx(3.0 / c.gamma));
  CHECK(decay_bound(c, 3.0, std::numbers::ln2 / c.rate_a) == doctest::Approx(1.5 / c.gamma));
  c.gamma = 1.0;
  c.log_gamma = 0.0;
  CHECK(decay_bound(c, 4.0, 0.0, 2.0) == doctest::Approx(2.0 * std::sqrt(2.0)));
  try {
    decay_bound(c, 1.0, 0.0, 1.0);
    FAIL("expected InvalidQ");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidQ);
  }
}

TEST_CASE("W_rho estimate: equal point masses give zero") {
  const Ou ou;
  RsdeSystem sys(
      [](std::span<const double> x, std::span<double> out) { out[0] = -x[0]; }, Mat::identity(1),
      ConvexSet::box(Vec{-2.0}, Vec{2.0}));
  SimConfig cfg;
  cfg.step = 0.01;
  cfg.horizon = 1.0;
  cfg.seed = 4;
  const std::vector<double> probes{0.0, 0.5, 1.0};
  const auto pts = estimate_W_rho(sys, ou.cert, ou.in.lyap, point_mass(Vec{0.5}), point_mass(Vec{0.5}), cfg, 50,
                                  probes);
  for (const auto& p : pts) CHECK(p.mean == 0.0);
  const auto a = estimate_W_rho(sys, ou.cert, ou.in.lyap, point_mass(Vec{-1.0}), point_mass(Vec{1.0}), cfg, 64,
                                probes, 1);
  const auto b = estimate_W_rho(sys, ou.cert, ou.in.lyap, point_mass(Vec{-1.0}), point_mass(Vec{1.0}), cfg, 64,
                                probes, 3);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].mean == b[i].mean);
    CHECK(a[i].stderr_ == b[i].stderr_);
  }
  CHECK(a[0].mean > a[2].mean);
}

TEST_CASE("report JSON carries the stable keys") {
  const auto j = nlohmann::json::parse(certificate_report_json(trivial()));
  for (const char* key : {"sigma_min", "R1", "M", "R2", "xi", "beta", "gamma", "rate_a", "flags", "profile_grid"}) {
    CHECK(j.contains(key));
  }
  CHECK(j["profile_grid"]["r"].size() == j["profile_grid"]["f"].size());
  CHECK(j["rate_a"].get<double>() == doctest::Approx(0.25));
}
