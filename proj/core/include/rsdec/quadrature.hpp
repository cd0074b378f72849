#pragma once

#include <functional>
#include <span>

namespace rsdec {

struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;
  bool converged = true;
  long evaluations = 0;
};

struct SimpsonOptions {
  double rel_tol = 1e-10;
  double abs_tol = 1e-300;
  int max_depth = 40;
  // Panels in the preliminary sweep that sets the scale of the relative
  // tolerance. Small cells of a smooth integrand can use 1.
  int coarse_panels = 16;
};

// Adaptive Simpson on [a, b]. Accepts a panel once |S_left + S_right - S| <=
// 15 * tol, where tol is max(rel_tol * |estimate|, abs_tol) split in half
// at each level. `converged` is false if any panel hit the depth cap.
QuadratureResult adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                                  const SimpsonOptions& options = {});

// Integrates across each [breaks[i], breaks[i+1]] separately so that kinks at
// the break points never sit inside a panel.
QuadratureResult adaptive_simpson_split(const std::function<double(double)>& f, std::span<const double> breaks,
                                        const SimpsonOptions& options = {});

}  // namespace rsdec
