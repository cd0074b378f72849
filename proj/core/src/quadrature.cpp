#include "rsdec/quadrature.hpp"

#include <algorithm>
#include <cmath>

namespace rsdec {

namespace {

struct Panel {
  const std::function<double(double)>& f;
  const SimpsonOptions& options;
  QuadratureResult& result;

  double recurse(double a, double b, double fa, double fm, double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    result.evaluations += 2;
    const double h = b - a;
    const double left = h / 12.0 * (fa + 4.0 * flm + fm);
    const double right = h / 12.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (std::abs(delta) <= 15.0 * tol || !std::isfinite(delta)) {
      if (!std::isfinite(delta)) result.converged = false;
      result.error_estimate += std::abs(delta) / 15.0;
      return left + right + delta / 15.0;
    }
    if (depth >= options.max_depth) {
      result.converged = false;
      result.error_estimate += std::abs(delta) / 15.0;
      return left + right + delta / 15.0;
    }
    return recurse(a, m, fa, flm, fm, left, 0.5 * tol, depth + 1) +
           recurse(m, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
  }
};

}  // namespace

QuadratureResult adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                                  const SimpsonOptions& options) {
  QuadratureResult result;
  if (a == b) return result;
  const double fa = f(a);
  const double fb = f(b);
  const double m = 0.5 * (a + b);
  const double fm = f(m);
  result.evaluations = 3;
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);

  // A coarse multi-panel sweep gives a scale for the relative tolerance that is
  // not fooled by a lucky three-point estimate.
  double coarse = 0.0;
  {
    const int n = std::max(options.coarse_panels, 1);
    const double h = (b - a) / n;
    double prev = fa;
    for (int i = 0; i < n; ++i) {
      const double x1 = a + (i + 0.5) * h;
      const double x2 = (i + 1 == n) ? b : a + (i + 1) * h;
      const double f1 = f(x1);
      const double f2 = f(x2);
      coarse += h / 6.0 * (prev + 4.0 * f1 + f2);
      prev = f2;
    }
    result.evaluations += 2 * n;
  }
  const double tol = std::max(options.rel_tol * std::abs(coarse), options.abs_tol);
  Panel panel{f, options, result};
  result.value = panel.recurse(a, b, fa, fm, fb, whole, tol, 0);
  return result;
}

QuadratureResult adaptive_simpson_split(const std::function<double(double)>& f, std::span<const double> breaks,
                                        const SimpsonOptions& options) {
  QuadratureResult total;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const QuadratureResult part = adaptive_simpson(f, breaks[i], breaks[i + 1], options);
    total.value += part.value;
    total.error_estimate += part.error_estimate;
    total.converged = total.converged && part.converged;
    total.evaluations += part.evaluations;
  }
  return total;
}

}  // namespace rsdec
