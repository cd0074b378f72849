#include <benchmark/benchmark.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "rsdec/contraction.hpp"
#include "rsdec/convex.hpp"
#include "rsdec/mrac.hpp"
#include "rsdec/rsde.hpp"

using namespace rsdec;

namespace {

ConvexSet hexagon_product(int count) {
  std::vector<std::array<double, 2>> hex;
  for (int k = 0; k < 6; ++k) hex.push_back({2.0 * std::cos(k * std::numbers::pi / 3), 2.0 * std::sin(k * std::numbers::pi / 3)});
  return ConvexSet::product(std::vector<ConvexSet>(count, ConvexSet::polygon(hex)));
}

MracSpec four_state_spec() {
  const FeatureMap fm = FeatureMap::tanh_layer(
      Mat{{0.5, -0.3, 0.2, 0.1}, {0.1, 0.4, -0.2, 0.3}, {-0.3, 0.2, 0.1, 0.5}}, Vec{0.1, -0.2, 0.05});
  Vec theta_bar(14);
  for (int i = 0; i < 14; ++i) theta_bar[i] = 0.5 * std::sin(i + 1.0);
  return MracSpec{Mat{{0, 1, 0, 0}, {-2, -3, 0, 0}, {0, 0, 0, 1}, {0, 0, -1, -2}},
                  Mat{{0, 0}, {1, 0}, {0, 0}, {0, 1}},
                  Mat::identity(4),
                  fm,
                  fm.lipschitz_bound(),
                  hexagon_product(7),
                  theta_bar,
                  Mat::identity(4),
                  Mat::identity(14)};
}

ContractionCertificate ou_certificate(CertificateInputs& in) {
  in = linear_certificate_inputs(Mat{{-1.0}}, Mat::identity(1), InnerProduct::euclidean(1));
  return build_certificate(in.growth, in.lyap, Mat::identity(1), 4.0);
}

void BM_ProjectHexagonProduct(benchmark::State& state) {
  const ConvexSet k = hexagon_product(7);
  Vec y(14);
  for (int i = 0; i < 14; ++i) y[i] = 3.0 * std::sin(1.7 * i);
  for (auto _ : state) {
    Vec p = k.project(y);
    benchmark::DoNotOptimize(p);
  }
}
BENCHMARK(BM_ProjectHexagonProduct);

void BM_MracEulerStep(benchmark::State& state) {
  const ClosedLoop cl = closed_loop_system(four_state_spec());
  SimConfig cfg;
  cfg.step = 1e-3;
  cfg.horizon = 1e5;
  Vec z0(18);
  z0[0] = 1.0;
  z0[2] = -1.0;
  EulerRun run(cl.system, z0, cfg);
  for (auto _ : state) {
    run.advance();
    benchmark::DoNotOptimize(run.state().data());
  }
}
BENCHMARK(BM_MracEulerStep);

void BM_CoupledStepOu(benchmark::State& state) {
  RsdeSystem sys([](std::span<const double> x, std::span<double> out) { out[0] = -x[0]; }, Mat::identity(1),
                 ConvexSet::box(Vec{-2.0}, Vec{2.0}));
  SimConfig cfg;
  cfg.step = 1e-3;
  cfg.horizon = 1e5;
  cfg.bridge_crossing = false;
  cfg.coupling_tolerance = 0.0;
  const InnerProduct ip = InnerProduct::euclidean(1);
  CoupledRun run(sys, Vec{-1.5}, Vec{1.5}, cfg, ip);
  for (auto _ : state) {
    run.advance();
    benchmark::DoNotOptimize(run.x().data());
  }
}
BENCHMARK(BM_CoupledStepOu);

void BM_EvalRho(benchmark::State& state) {
  CertificateInputs in{GrowthCondition::constant(0, 0), LyapunovSpec::quadratic(1, 1, InnerProduct::euclidean(1))};
  const ContractionCertificate cert = ou_certificate(in);
  double x = -1.9;
  for (auto _ : state) {
    x = x > 1.9 ? -1.9 : x + 0.0137;
    benchmark::DoNotOptimize(eval_rho(cert, in.lyap, Vec{x}, Vec{0.3}));
  }
}
BENCHMARK(BM_EvalRho);

void BM_BuildCertificateOu(benchmark::State& state) {
  for (auto _ : state) {
    CertificateInputs in{GrowthCondition::constant(0, 0), LyapunovSpec::quadratic(1, 1, InnerProduct::euclidean(1))};
    benchmark::DoNotOptimize(ou_certificate(in).rate_a);
  }
}
BENCHMARK(BM_BuildCertificateOu)->Unit(benchmark::kMillisecond);

void BM_BuildCertificateMrac(benchmark::State& state) {
  const ClosedLoop cl = closed_loop_system(four_state_spec());
  const MracDerived& d = cl.derived;
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_certificate(d.growth, d.lyap, d.G, d.domain.diameter()).log_rate_a);
  }
}
BENCHMARK(BM_BuildCertificateMrac)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
