#include "rsdec/rsde.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "rsdec/error.hpp"

namespace rsdec {

namespace {

constexpr double kDomainTol = 1e-9;
constexpr double kExplosionNorm = 1e12;

void check_initial(const RsdeSystem& system, const Vec& x0, const char* which) {
  if (x0.dim() != system.dim()) {
    throw Error(ErrorKind::DimensionMismatch, std::string(which) + " has dimension " + std::to_string(x0.dim()) +
                                                  ", system has " + std::to_string(system.dim()));
  }
  if (!system.domain().contains(x0, kDomainTol)) {
    throw Error(ErrorKind::InitialStateOutsideDomain, std::string(which) + " is outside the domain");
  }
}

void check_state(std::span<const double> x, double time) {
  double n2 = 0.0;
  for (double v : x) {
    if (!std::isfinite(v)) n2 = std::numeric_limits<double>::infinity();
    else n2 += v * v;
  }
  if (!(n2 <= kExplosionNorm * kExplosionNorm)) {
    std::ostringstream msg;
    msg << "state left the finite range at t = " << time;
    throw Error(ErrorKind::DriftNaN, msg.str());
  }
}

// x <- Proj(x + step * H(x) + G dw); `drift` is scratch of the same size.
void euler_update(const RsdeSystem& system, std::span<double> x, std::span<const double> dw, double step,
                  std::span<double> drift) {
  system.drift(x, drift);
  const Mat& g = system.diffusion();
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = g.row_span(i);
    double noise = 0.0;
    for (std::size_t j = 0; j < n; ++j) noise += row[j] * dw[j];
    x[i] += step * drift[i] + noise;
  }
  system.domain().project_in_place(x);
}

}  // namespace

DriftFn make_drift(std::function<Vec(const Vec&)> drift) {
  return [drift = std::move(drift)](std::span<const double> x, std::span<double> out) {
    const Vec v = drift(Vec(x));
    if (v.dim() != out.size()) throw Error(ErrorKind::DimensionMismatch, "drift returned wrong dimension");
    std::copy(v.begin(), v.end(), out.begin());
  };
}

// ---------------------------------------------------------------- RsdeSystem

RsdeSystem::RsdeSystem(DriftFn drift, Mat diffusion, ConvexSet domain)
    : drift_(std::move(drift)), diffusion_(std::move(diffusion)), domain_(std::move(domain)) {
  if (!drift_) throw Error(ErrorKind::InvalidArgument, "drift callable is empty");
  if (!diffusion_.is_square() || diffusion_.rows() != domain_.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "diffusion must be dim x dim of the domain");
  }
  if (!diffusion_.all_finite()) throw Error(ErrorKind::InvalidArgument, "diffusion has non-finite entries");
  // Raises SingularG when sigma_min < 1e-12 sigma_max.
  noise_sigma_min(diffusion_, InnerProduct::euclidean(diffusion_.rows()));
  diffusion_inverse_ = inverse(diffusion_);
}

Vec RsdeSystem::drift(const Vec& x) const {
  Vec out(dim());
  drift_(x.span(), out.span());
  return out;
}

// ---------------------------------------------------------------- SimConfig

void SimConfig::validate() const {
  if (!(step > 0.0) || !std::isfinite(step)) throw Error(ErrorKind::InvalidArgument, "step must be positive");
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) {
    throw Error(ErrorKind::InvalidArgument, "horizon must be non-negative");
  }
  if (horizon > 0.0 && step > horizon * (1.0 + 1e-12)) {
    throw Error(ErrorKind::InvalidArgument, "step must not exceed the horizon");
  }
  if (horizon / step > 1e8) throw Error(ErrorKind::InvalidArgument, "horizon / step exceeds 1e8");
  if (record_stride == 0) throw Error(ErrorKind::InvalidArgument, "record stride must be positive");
  if (brownian_refinement < 0 || brownian_refinement > 8) {
    throw Error(ErrorKind::InvalidArgument, "brownian refinement must be in [0, 8]");
  }
}

std::size_t SimConfig::step_count() const {
  return static_cast<std::size_t>(std::floor(horizon / step * (1.0 + 1e-12) + 1e-9));
}

// ---------------------------------------------------------------- stepping

StepResult projected_euler_step(const RsdeSystem& system, const Vec& x, const Vec& dw, double step) {
  if (x.dim() != system.dim() || dw.dim() != system.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "projected_euler_step: dimension mismatch");
  }
  Vec proposal = x + step * system.drift(x) + system.diffusion() * dw;
  Vec next = system.domain().project(proposal);
  Vec reflection = next - proposal;
  return {std::move(next), std::move(reflection)};
}

BrownianIncrements::BrownianIncrements(std::uint64_t seed, std::uint64_t stream, double step, int refinement)
    : rng_(seed, stream), draws_(1 << refinement) {
  scale_ = std::sqrt(step / draws_);
}

void BrownianIncrements::next(std::span<double> dw) {
  if (draws_ == 1) {
    for (double& v : dw) v = scale_ * rng_.normal();
    return;
  }
  for (double& v : dw) v = 0.0;
  for (int k = 0; k < draws_; ++k)
    for (double& v : dw) v += scale_ * rng_.normal();
}

EulerRun::EulerRun(const RsdeSystem& system, const Vec& x0, const SimConfig& config, std::uint64_t index)
    : system_(system),
      step_(config.step),
      noise_(config.seed, stream_id(index, StreamPurpose::Noise), config.step, config.brownian_refinement),
      state_(x0),
      dw_(system.dim()),
      scratch_(system.dim()) {
  config.validate();
  check_initial(system, x0, "initial state");
}

void EulerRun::advance() {
  noise_.next(dw_.span());
  euler_update(system_, state_.span(), dw_.span(), step_, scratch_.span());
  ++steps_;
  check_state(state_.span(), time());
}

double EulerRun::time() const noexcept { return static_cast<double>(steps_) * step_; }

// ---------------------------------------------------------------- coupling

CoupledRun::CoupledRun(const RsdeSystem& system, const Vec& x0, const Vec& y0, const SimConfig& config,
                       const InnerProduct& ip, std::uint64_t index)
    : system_(system),
      ip_(ip),
      step_(config.step),
      bridge_(config.bridge_crossing),
      noise_(config.seed, stream_id(index, StreamPurpose::Noise), config.step, config.brownian_refinement),
      coupling_rng_(config.seed, stream_id(index, StreamPurpose::Coupling)),
      x_(x0),
      y_(y0),
      dw_(system.dim()),
      dw_reflected_(system.dim()),
      drift_(system.dim()),
      diff_(system.dim()),
      prev_diff_(system.dim()),
      whitened_(system.dim()) {
  config.validate();
  check_initial(system, x0, "initial state x0");
  check_initial(system, y0, "initial state y0");
  if (ip.dim() != system.dim()) throw Error(ErrorKind::DimensionMismatch, "inner product dimension mismatch");
  diff_ = x_ - y_;
  const double r0 = ip_.norm(diff_);
  tolerance_ = config.coupling_tolerance >= 0.0 ? config.coupling_tolerance : 1e-8 * (1.0 + r0);
  if (r0 <= tolerance_) {
    y_ = x_;
    coupling_time_ = 0.0;
  }
}

double CoupledRun::time() const noexcept { return static_cast<double>(steps_) * step_; }

void CoupledRun::advance() {
  noise_.next(dw_.span());
  const std::size_t n = system_.dim();

  if (coupled()) {
    euler_update(system_, x_.span(), dw_.span(), step_, drift_.span());
    ++steps_;
    check_state(x_.span(), time());
    y_ = x_;
    return;
  }

  // Mirror direction in whitened noise coordinates.
  for (std::size_t i = 0; i < n; ++i) diff_[i] = x_[i] - y_[i];
  multiply_into(system_.diffusion_inverse(), diff_.span(), whitened_.span());
  const double whitened_norm = norm2(whitened_);
  const double prev_r = ip_.norm(diff_);
  double proj = 0.0;
  for (std::size_t i = 0; i < n; ++i) proj += whitened_[i] * dw_[i];
  proj /= whitened_norm * whitened_norm;
  for (std::size_t i = 0; i < n; ++i) dw_reflected_[i] = dw_[i] - 2.0 * proj * whitened_[i];
  // Rate of the separation's quadratic variation, 4 |d|_W^2 / |G^{-1} d|^2.
  const double qv_rate = 4.0 * prev_r * prev_r / (whitened_norm * whitened_norm);

  std::swap(prev_diff_, diff_);
  euler_update(system_, x_.span(), dw_.span(), step_, drift_.span());
  euler_update(system_, y_.span(), dw_reflected_.span(), step_, drift_.span());
  ++steps_;
  check_state(x_.span(), time());
  check_state(y_.span(), time());

  const double u = coupling_rng_.uniform();
  for (std::size_t i = 0; i < n; ++i) diff_[i] = x_[i] - y_[i];
  const double r = ip_.norm(diff_);
  bool fire = r <= tolerance_ || ip_.inner(diff_, prev_diff_) <= 0.0;
  if (!fire && bridge_) {
    fire = u < std::exp(-2.0 * prev_r * r / (qv_rate * step_));
  }
  if (fire) {
    y_ = x_;
    coupling_time_ = time();
  }
}

// ---------------------------------------------------------------- drivers

Trajectory simulate(const RsdeSystem& system, const Vec& x0, const SimConfig& config, std::uint64_t index) {
  EulerRun run(system, x0, config, index);
  const std::size_t steps = config.step_count();
  Trajectory out;
  out.times.push_back(0.0);
  out.states.push_back(x0);
  for (std::size_t k = 1; k <= steps; ++k) {
    run.advance();
    if (k % config.record_stride == 0 || k == steps) {
      out.times.push_back(run.time());
      out.states.push_back(run.state());
    }
  }
  return out;
}

CoupledTrajectory simulate_coupled(const RsdeSystem& system, const Vec& x0, const Vec& y0, const SimConfig& config,
                                   const InnerProduct& ip, const PairMetric& metric, std::uint64_t index) {
  CoupledRun run(system, x0, y0, config, ip, index);
  const std::size_t steps = config.step_count();
  CoupledTrajectory out;
  auto record = [&] {
    out.times.push_back(run.time());
    out.x_states.push_back(run.x());
    out.y_states.push_back(run.y());
    if (metric) out.metric_values.push_back(metric(run.x(), run.y()));
  };
  record();
  for (std::size_t k = 1; k <= steps; ++k) {
    run.advance();
    if (k % config.record_stride == 0 || k == steps) record();
  }
  out.coupling_time = run.coupling_time();
  return out;
}

}  // namespace rsdec
