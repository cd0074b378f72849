#pragma once

// Reflected SDEs  dx = H(x) dt + G dw - v dmu  on a closed convex domain,
// discretised by projected Euler-Maruyama:
//
//   x_{k+1} = Proj_X( x_k + eta H(x_k) + G dw_k ),  dw_k ~ N(0, eta I).
//
// The reflection process is never stored; it is the gap between the Euler
// proposal and its projection, which projected_euler_step reports.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "rsdec/convex.hpp"
#include "rsdec/linalg.hpp"
#include "rsdec/rng.hpp"

namespace rsdec {

// drift(x, out): writes H(x) into out. Must be pure and thread-safe.
using DriftFn = std::function<void(std::span<const double>, std::span<double>)>;

// Adapts a value-returning drift.
DriftFn make_drift(std::function<Vec(const Vec&)> drift);

class RsdeSystem {
 public:
  // Throws SingularG for a non-invertible diffusion and DimensionMismatch if
  // the pieces disagree on dimension.
  RsdeSystem(DriftFn drift, Mat diffusion, ConvexSet domain);

  std::size_t dim() const noexcept { return domain_.dim(); }
  const Mat& diffusion() const noexcept { return diffusion_; }
  const Mat& diffusion_inverse() const noexcept { return diffusion_inverse_; }
  const ConvexSet& domain() const noexcept { return domain_; }

  void drift(std::span<const double> x, std::span<double> out) const { drift_(x, out); }
  Vec drift(const Vec& x) const;

 private:
  DriftFn drift_;
  Mat diffusion_;
  Mat diffusion_inverse_;
  ConvexSet domain_;
};

struct SimConfig {
  double step = 1e-3;
  double horizon = 1.0;
  std::uint64_t seed = 0;
  std::size_t record_stride = 1;
  // Each step's Brownian increment is the normalised sum of 2^refinement
  // standard draws. A run at step eta with refinement 1 and a run at eta/2
  // with refinement 0 then share one Brownian path.
  int brownian_refinement = 0;
  // Coupling fires once the separation falls to this ip-norm; a negative
  // value selects 1e-8 * (1 + ||x0 - y0||).
  double coupling_tolerance = -1.0;
  // Also couple when the separation's Brownian bridge crosses zero between
  // grid points (see CoupledRun).
  bool bridge_crossing = true;

  // Throws InvalidArgument on inconsistent settings.
  void validate() const;
  // floor(horizon / step), with a relative slack so 50 / 0.001 is 50000.
  std::size_t step_count() const;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> states;
};

struct CoupledTrajectory {
  std::vector<double> times;
  std::vector<Vec> x_states;
  std::vector<Vec> y_states;
  std::optional<double> coupling_time;  // nullopt: not coupled within the horizon
  std::vector<double> metric_values;    // empty unless a metric was supplied
};

struct StepResult {
  Vec next;
  Vec reflection;  // next - proposal: the discrete reflection increment
};

// One projected Euler step with a caller-supplied Brownian increment.
StepResult projected_euler_step(const RsdeSystem& system, const Vec& x, const Vec& dw, double step);

// Source of Brownian increments N(0, step I) for one trajectory.
class BrownianIncrements {
 public:
  BrownianIncrements(std::uint64_t seed, std::uint64_t stream, double step, int refinement);
  void next(std::span<double> dw);

 private:
  CounterRng rng_;
  double scale_;
  int draws_;
};

// Single projected Euler path, advanced one step at a time.
class EulerRun {
 public:
  EulerRun(const RsdeSystem& system, const Vec& x0, const SimConfig& config, std::uint64_t index = 0);

  // Throws DriftNaN if the state leaves the finite range.
  void advance();
  double time() const noexcept;
  std::size_t steps_taken() const noexcept { return steps_; }
  const Vec& state() const noexcept { return state_; }

 private:
  const RsdeSystem& system_;
  double step_;
  BrownianIncrements noise_;
  Vec state_;
  Vec dw_;
  Vec scratch_;
  std::size_t steps_ = 0;
};

// Reflection coupling of two projected Euler paths.
//
// Before coupling, y is driven by the Brownian increment mirrored across the
// hyperplane orthogonal to e = G^{-1}(x - y) / |G^{-1}(x - y)|, so
// y's noise is G (I - 2 e e^T) dw. In the ip norm this is I - 2 u u* applied
// to G dw with u the unit separation, and it preserves y's marginal law for
// any invertible G. Coupling is declared at the first grid time where
//   * the ip-separation is at most the coupling tolerance, or
//   * the separation has reversed direction (<x'-y', x-y> <= 0), or
//   * (bridge_crossing) a uniform draw falls below exp(-2 r r' / (q eta)),
//     the probability that the separation's Brownian bridge between two
//     grid points touches zero; q is its quadratic-variation rate.
// From then on y is set to x and both evolve identically.
class CoupledRun {
 public:
  CoupledRun(const RsdeSystem& system, const Vec& x0, const Vec& y0, const SimConfig& config,
             const InnerProduct& ip, std::uint64_t index = 0);

  void advance();
  double time() const noexcept;
  std::size_t steps_taken() const noexcept { return steps_; }
  bool coupled() const noexcept { return coupling_time_.has_value(); }
  std::optional<double> coupling_time() const noexcept { return coupling_time_; }
  const Vec& x() const noexcept { return x_; }
  const Vec& y() const noexcept { return y_; }

 private:
  const RsdeSystem& system_;
  const InnerProduct& ip_;
  double step_;
  double tolerance_;
  bool bridge_;
  BrownianIncrements noise_;
  CounterRng coupling_rng_;
  Vec x_, y_;
  Vec dw_, dw_reflected_, drift_, diff_, prev_diff_, whitened_;
  std::size_t steps_ = 0;
  std::optional<double> coupling_time_;
};

// Throws InitialStateOutsideDomain or DriftNaN.
Trajectory simulate(const RsdeSystem& system, const Vec& x0, const SimConfig& config, std::uint64_t index = 0);

using PairMetric = std::function<double(const Vec&, const Vec&)>;

CoupledTrajectory simulate_coupled(const RsdeSystem& system, const Vec& x0, const Vec& y0, const SimConfig& config,
                                   const InnerProduct& ip, const PairMetric& metric = {}, std::uint64_t index = 0);

}  // namespace rsdec
