#include "rsdec/contraction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "rsdec/error.hpp"
#include "rsdec/parallel.hpp"
#include "rsdec/quadrature.hpp"

namespace rsdec {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Profile grid: cells are bisected while h changes by more than kCellDh
// across them, unless every integrand on the cell is below exp(-kNegligible)
// of its peak.
constexpr double kCellDh = 0.05;
constexpr double kNegligible = 60.0;
constexpr std::size_t kMaxNodes = 200000;
constexpr int kMaxRefineDepth = 60;

void require_quadrature(const QuadratureResult& q, const char* what) {
  if (!q.converged || !std::isfinite(q.value)) {
    std::ostringstream msg;
    msg << what << " did not reach the requested tolerance (error estimate " << q.error_estimate << ")";
    throw Error(ErrorKind::QuadratureFailure, msg.str());
  }
}

SimpsonOptions cell_options(double rel_tol) {
  SimpsonOptions o;
  o.rel_tol = rel_tol;
  o.coarse_panels = 1;
  return o;
}

// int_a^b f over a small cell. The absolute floor is relative to `peak`, an
// upper bound on |f| there, so cells where f is tiny do not recurse forever.
double cell_integral(const std::function<double(double)>& f, double a, double b, double peak, double rel_tol,
                     const char* what) {
  if (a == b) return 0.0;
  SimpsonOptions o = cell_options(rel_tol);
  o.abs_tol = std::max(1e-3 * rel_tol * peak * (b - a), 1e-300);
  const QuadratureResult q = adaptive_simpson(f, a, b, o);
  require_quadrature(q, what);
  return q.value;
}

// Cumulative integral r -> int_0^r s kappa(s) ds by quadrature on a uniform
// table, for growth conditions without a closed-form moment.
class MomentTable {
 public:
  MomentTable(std::function<double(double)> kappa, double top, double rel_tol)
      : kappa_(std::move(kappa)), rel_tol_(rel_tol) {
    top = std::max(top, 1e-12);
    step_ = top / kCells;
    cumulative_.assign(kCells + 1, 0.0);
    for (std::size_t i = 0; i < kCells; ++i) {
      cumulative_[i + 1] = cumulative_[i] + piece(i * step_, (i + 1) * step_);
    }
  }

  double operator()(double r) const {
    if (!(r > 0.0)) return 0.0;
    const auto i = std::min<std::size_t>(static_cast<std::size_t>(r / step_), kCells);
    return cumulative_[i] + piece(i * step_, r);
  }

 private:
  static constexpr std::size_t kCells = 1024;

  double piece(double a, double b) const {
    if (a == b) return 0.0;
    SimpsonOptions o;
    o.rel_tol = rel_tol_;
    o.coarse_panels = 2;
    o.abs_tol = 1e-300;
    const QuadratureResult q = adaptive_simpson([this](double s) { return s * kappa_(s); }, a, b, o);
    require_quadrature(q, "growth moment integral");
    return q.value;
  }

  std::function<double(double)> kappa_;
  double rel_tol_;
  double step_ = 1.0;
  std::vector<double> cumulative_;
};

double positive_root(double b_half, double c) {
  // Larger root of r^2 - 2 b_half r + c = 0, or 0 when r^2 - 2 b_half r + c
  // never goes negative.
  const double disc = b_half * b_half - c;
  if (disc < 0.0) return 0.0;
  return std::max(0.0, b_half + std::sqrt(disc));
}

}  // namespace

// ---------------------------------------------------------------- inputs

GrowthCondition GrowthCondition::constant(double kappa, double alpha) {
  GrowthCondition g;
  g.kappa = [kappa](double) { return kappa; };
  g.kappa_moment = [kappa](double r) { return 0.5 * kappa * r * r; };
  g.alpha = alpha;
  return g;
}

void GrowthCondition::validate() const {
  if (!kappa) throw Error(ErrorKind::InvalidArgument, "growth condition has no kappa");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw Error(ErrorKind::InvalidArgument, "growth condition needs a finite alpha >= 0");
  }
  for (double r = 1e-6; r <= 1e6; r *= 10.0) {
    const double k = kappa(r);
    if (!(k >= 0.0) || !std::isfinite(k)) {
      std::ostringstream msg;
      msg << "kappa(" << r << ") = " << k << " is not a finite non-negative value";
      throw Error(ErrorKind::InvalidArgument, msg.str());
    }
  }
}

LyapunovSpec::LyapunovSpec(std::function<double(double)> phi, std::function<double(double)> phi_inverse, double C,
                           double lambda, InnerProduct norm, Vec center)
    : phi_(std::move(phi)),
      phi_inverse_(std::move(phi_inverse)),
      C_(C),
      lambda_(lambda),
      norm_(std::move(norm)),
      center_(std::move(center)) {
  if (!phi_ || !phi_inverse_) throw Error(ErrorKind::InvalidArgument, "phi and its inverse are required");
  if (center_.dim() == 0) center_ = Vec(norm_.dim());
  if (center_.dim() != norm_.dim()) throw Error(ErrorKind::DimensionMismatch, "Lyapunov center dimension");
}

LyapunovSpec LyapunovSpec::quadratic(double C, double lambda, InnerProduct norm, Vec center) {
  return power(2.0, C, lambda, std::move(norm), std::move(center));
}

LyapunovSpec LyapunovSpec::power(double exponent, double C, double lambda, InnerProduct norm, Vec center) {
  if (!(exponent > 0.0) || !std::isfinite(exponent)) {
    throw Error(ErrorKind::InvalidArgument, "power Lyapunov profile needs a positive exponent");
  }
  std::function<double(double)> phi, inv;
  if (exponent == 2.0) {
    phi = [](double r) { return r * r + 1.0; };
    inv = [](double v) { return std::sqrt(std::max(0.0, v - 1.0)); };
  } else {
    phi = [exponent](double r) { return std::pow(r, exponent) + 1.0; };
    inv = [exponent](double v) { return std::pow(std::max(0.0, v - 1.0), 1.0 / exponent); };
  }
  LyapunovSpec spec(std::move(phi), std::move(inv), C, lambda, std::move(norm), std::move(center));
  spec.exponent_ = exponent;
  return spec;
}

double LyapunovSpec::norm_from_center(const Vec& x) const {
  if (x.dim() != center_.dim()) throw Error(ErrorKind::DimensionMismatch, "Lyapunov argument dimension");
  return norm_.norm(x - center_);
}

double LyapunovSpec::value(const Vec& x) const { return phi_(norm_from_center(x)); }

void LyapunovSpec::validate() const {
  if (!(C_ > 0.0) || !std::isfinite(C_)) throw Error(ErrorKind::InvalidArgument, "Lyapunov constant C must be > 0");
  if (!(lambda_ > 0.0) || !std::isfinite(lambda_)) {
    throw Error(ErrorKind::InvalidArgument, "Lyapunov rate lambda must be > 0");
  }
  double prev = phi_(0.0);
  if (!(prev >= 1.0)) throw Error(ErrorKind::InvalidArgument, "phi(0) must be at least 1");
  for (double r = 1e-3; r <= 1e6; r *= 1.5) {
    const double v = phi_(r);
    if (!(v > prev) || !std::isfinite(v)) {
      std::ostringstream msg;
      msg << "phi is not strictly increasing near r = " << r;
      throw Error(ErrorKind::InvalidArgument, msg.str());
    }
    const double back = phi_(phi_inverse_(v));
    if (!(std::abs(back - v) <= 1e-10 * std::abs(v))) {
      std::ostringstream msg;
      msg << "phi_inverse does not invert phi at v = " << v;
      throw Error(ErrorKind::InvalidArgument, msg.str());
    }
    prev = v;
  }
}

// ---------------------------------------------------------------- radii

double compute_R1(const LyapunovSpec& lyap, double domain_diameter) {
  const double level = 4.0 * lyap.C() / lyap.lambda();
  double bound;
  if (lyap.power_exponent() == 2.0) {
    // |x - y|^2 <= 2(|x|^2 + |y|^2) <= 2(level - 2).
    bound = std::sqrt(2.0 * std::max(0.0, level - 2.0));
  } else {
    const double phi0 = lyap.phi(0.0);
    bound = 2.0 * lyap.phi_inverse(std::max(phi0, level - phi0));
  }
  return std::min(bound, domain_diameter);
}

double compute_M(const LyapunovSpec& lyap, const GrowthCondition& growth, double R1) {
  if (!(R1 >= 0.0)) throw Error(ErrorKind::InvalidArgument, "R1 must be non-negative");
  const double lam = lyap.lambda();
  const double C = lyap.C();
  const double alpha = growth.alpha;
  auto deficit = [&](double r) {
    const double p = lyap.phi(r);
    return std::min(p - 2.0 / lam * (alpha * r + C), p - 4.0 * C / lam * (2.0 * r + 1.0));
  };
  const double scale = 1.0 + R1 + alpha / lam + C / lam;

  double M;
  if (lyap.power_exponent() == 2.0) {
    const double a = alpha / lam;
    const double b = 4.0 * C / lam;
    M = std::max({R1, positive_root(a, 1.0 - 2.0 * C / lam), positive_root(b, 1.0 - b)});
  } else {
    const double top = 1e6 * scale;
    if (deficit(top) < 0.0 || deficit(100.0 * top) < 0.0) {
      throw Error(ErrorKind::NoFiniteM, "phi grows too slowly: the linear-growth radius M does not exist");
    }
    // Walk down from far out to the last point where a condition fails.
    double good = top;
    double bad = -1.0;
    const double floor = std::max(R1, 1e-12 * scale);
    for (double r = top / 1.25; r > floor; r /= 1.25) {
      if (deficit(r) < 0.0) {
        bad = r;
        break;
      }
      good = r;
    }
    if (bad < 0.0 && deficit(floor) < 0.0) bad = floor;
    if (bad < 0.0) {
      M = R1;
    } else {
      for (int it = 0; it < 200 && good - bad > 1e-14 * good; ++it) {
        const double mid = 0.5 * (good + bad);
        (deficit(mid) < 0.0 ? bad : good) = mid;
      }
      M = std::max(R1, good);
    }
  }

  // A posteriori check on [M, 10 M]; a dip past M moves M out to it.
  for (int pass = 0; pass < 8; ++pass) {
    const double lo = M;
    const double hi = M > 0.0 ? 10.0 * M : scale;
    double worst = -1.0;
    constexpr int n = 2000;
    for (int i = 0; i <= n; ++i) {
      const double r = lo + (hi - lo) * i / n;
      if (deficit(r) < -1e-12 * lyap.phi(r)) worst = r;
    }
    if (worst < 0.0) return M;
    M = worst + (hi - lo) / n;
  }
  throw Error(ErrorKind::NoFiniteM, "could not find a radius M beyond which both growth conditions hold");
}

// ---------------------------------------------------------------- profile

DistanceProfile::DistanceProfile(Inputs inputs)
    : h_(std::move(inputs.exponent)),
      R1_(inputs.R1),
      R2_(inputs.R2),
      rel_tol_(inputs.rel_tol),
      cell_tol_(inputs.rel_tol) {
  if (!h_) throw Error(ErrorKind::InvalidArgument, "profile exponent h is required");
  if (!(R1_ >= 0.0) || !(R2_ >= R1_) || !std::isfinite(R2_)) {
    throw Error(ErrorKind::InvalidArgument, "profile radii must satisfy 0 <= R1 <= R2 < inf");
  }
  h_at_R1_ = h_(R1_);
  h_at_R2_ = h_(R2_);
  // exp(h(s) - h(R)) cannot be evaluated to better than about |h| ulps.
  cell_tol_ = std::max(rel_tol_, 64.0 * std::numeric_limits<double>::epsilon() *
                                     std::max({std::abs(h_(0.0)), std::abs(h_at_R2_), 1.0}));
  log_inv_xi_ = -kInf;
  log_inv_beta_ = -kInf;

  if (R2_ == 0.0) {
    nodes_ = {0.0};
    cum_weight_ = inv_ = inv_phi_ = ratio_ = ratio_phi_ = f_ = {0.0};
    slope_ = {weight(0.0)};
    return;
  }

  // Base grid: uniform on [0, R1] and [R1, R2] plus a geometric run into 0.
  std::vector<double> breaks{0.0};
  if (R1_ > 0.0) breaks.push_back(R1_);
  if (R2_ > R1_) breaks.push_back(R2_);
  const std::size_t segments = breaks.size() - 1;
  const std::size_t per_segment = std::max<std::size_t>(16, inputs.min_nodes / segments);
  std::vector<double> base;
  for (std::size_t s = 0; s < segments; ++s) {
    const double a = breaks[s], b = breaks[s + 1];
    for (std::size_t i = 0; i < per_segment; ++i) base.push_back(a + (b - a) * i / per_segment);
    if (s == 0) {
      const double first = (b - a) / per_segment;
      for (int k = 12; k >= 1; --k) base.push_back(first * std::ldexp(1.0, -k));
    }
  }
  base.push_back(R2_);
  std::sort(base.begin(), base.end());
  base.erase(std::unique(base.begin(), base.end()), base.end());

  const double h0 = h_(0.0);
  auto relevant = [&](double a, double b, double ha, double hb) {
    if (std::min(ha, hb) < h0 + kNegligible) return true;
    if (b <= R1_ && std::max(ha, hb) > h_at_R1_ - kNegligible) return true;
    return std::max(ha, hb) > h_at_R2_ - kNegligible && a < R2_;
  };
  std::vector<double> hs;
  nodes_.reserve(base.size());
  std::function<void(double, double, double, double, int)> refine = [&](double a, double b, double ha, double hb,
                                                                        int depth) {
    if (depth < kMaxRefineDepth && nodes_.size() < kMaxNodes && std::abs(hb - ha) > kCellDh &&
        relevant(a, b, ha, hb)) {
      const double m = 0.5 * (a + b);
      const double hm = h_(m);
      refine(a, m, ha, hm, depth + 1);
      refine(m, b, hm, hb, depth + 1);
      return;
    }
    nodes_.push_back(b);
    hs.push_back(hb);
  };
  nodes_.push_back(base.front());
  hs.push_back(h_(base.front()));
  for (std::size_t i = 0; i + 1 < base.size(); ++i) refine(base[i], base[i + 1], hs.back(), h_(base[i + 1]), 0);
  r1_index_ = static_cast<std::size_t>(std::find(nodes_.begin(), nodes_.end(), R1_) - nodes_.begin());

  const std::size_t n = nodes_.size();
  cum_weight_.assign(n, 0.0);
  inv_.assign(n, 0.0);
  inv_phi_.assign(n, 0.0);
  ratio_.assign(n, 0.0);
  ratio_phi_.assign(n, 0.0);

  auto w = [this](double s) { return std::exp(-h_(s)); };
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double a = nodes_[i], b = nodes_[i + 1];
    const double ha = hs[i], hb = hs[i + 1];
    const double lo_h = std::min(ha, hb), hi_h = std::max(ha, hb);
    const double phi_a = cum_weight_[i];
    cum_weight_[i + 1] = phi_a + cell_integral(w, a, b, std::exp(-lo_h), cell_tol_, "Phi");
    const double phi_b = cum_weight_[i + 1];

    // Phi inside the cell, for the Phi-weighted integrands.
    auto phi_at = [&](double s) {
      if (s == a) return phi_a;
      SimpsonOptions o = cell_options(cell_tol_);
      o.abs_tol = std::max(1e-3 * cell_tol_ * std::max(phi_b, 1e-300), 1e-300);
      const QuadratureResult q = adaptive_simpson(w, a, s, o);
      require_quadrature(q, "Phi");
      return phi_a + q.value;
    };

    if (b <= R1_) {
      const double peak = std::exp(hi_h - h_at_R1_);
      if (hi_h - h_at_R1_ < -kNegligible) {
        inv_[i + 1] = inv_[i];
        inv_phi_[i + 1] = inv_phi_[i];
      } else {
        inv_[i + 1] = inv_[i] + cell_integral([&](double s) { return std::exp(h_(s) - h_at_R1_); }, a, b, peak,
                                              cell_tol_, "1/xi");
        inv_phi_[i + 1] =
            inv_phi_[i] + cell_integral([&](double s) { return phi_at(s) * std::exp(h_(s) - h_at_R1_); }, a, b,
                                        peak * phi_b, cell_tol_, "1/xi moment");
      }
    } else {
      inv_[i + 1] = inv_[i];
      inv_phi_[i + 1] = inv_phi_[i];
    }

    if (hi_h - h_at_R2_ < -kNegligible) {
      ratio_[i + 1] = ratio_[i];
      ratio_phi_[i + 1] = ratio_phi_[i];
    } else {
      const double peak = std::exp(hi_h - h_at_R2_) * phi_b;
      ratio_[i + 1] = ratio_[i] + cell_integral([&](double s) { return phi_at(s) * std::exp(h_(s) - h_at_R2_); },
                                                a, b, peak, cell_tol_, "1/beta");
      ratio_phi_[i + 1] =
          ratio_phi_[i] + cell_integral(
                              [&](double s) {
                                const double p = phi_at(s);
                                return p * p * std::exp(h_(s) - h_at_R2_);
                              },
                              a, b, peak * phi_b, cell_tol_, "1/beta moment");
    }
  }

  const double inv_total = R1_ > 0.0 ? inv_[r1_index_] : 0.0;
  const double ratio_total = ratio_.back();
  if (R1_ > 0.0) {
    if (!(inv_total > 0.0)) throw Error(ErrorKind::QuadratureFailure, "1/xi integral vanished");
    log_inv_xi_ = h_at_R1_ + std::log(inv_total);
  }
  if (!(ratio_total > 0.0)) throw Error(ErrorKind::QuadratureFailure, "1/beta integral vanished");
  log_inv_beta_ = h_at_R2_ + std::log(ratio_total);

  // f = Phi - A/4 - B/4 with
  //   A(r) = int_0^r w J1(s ^ R1) / J1(R1),  B(r) = int_0^r w J2(s) / J2(R2),
  // both integrated by parts against Phi' = w.
  f_.assign(n, 0.0);
  slope_.assign(n, 0.0);
  const double phi_R1 = cum_weight_[r1_index_];
  double a_R1 = 0.0;
  if (R1_ > 0.0) a_R1 = (phi_R1 * inv_total - inv_phi_[r1_index_]) / inv_total;
  for (std::size_t j = 0; j < n; ++j) {
    const double r = nodes_[j];
    const double phi = cum_weight_[j];
    double a_term, inv_ratio;
    if (R1_ > 0.0 && r <= R1_) {
      a_term = (phi * inv_[j] - inv_phi_[j]) / inv_total;
      inv_ratio = inv_[j] / inv_total;
    } else {
      a_term = a_R1 + phi - phi_R1;
      inv_ratio = 1.0;
    }
    const double b_term = (phi * ratio_[j] - ratio_phi_[j]) / ratio_total;
    double f = phi - 0.25 * a_term - 0.25 * b_term;
    if (j > 0) f = std::max(f, f_[j - 1]);
    f_[j] = std::max(f, 0.0);
    const double g = 1.0 - 0.25 * inv_ratio - 0.25 * ratio_[j] / ratio_total;
    slope_[j] = std::exp(-hs[j]) * g;
  }
  f_.front() = 0.0;
}

std::size_t DistanceProfile::cell(double r) const {
  const auto it = std::upper_bound(nodes_.begin(), nodes_.end(), r);
  const std::size_t i = it == nodes_.begin() ? 0 : static_cast<std::size_t>(it - nodes_.begin()) - 1;
  return std::min(i, nodes_.size() >= 2 ? nodes_.size() - 2 : 0);
}

double DistanceProfile::weight(double r) const { return std::exp(-h_(r)); }

double DistanceProfile::local_cumulative_weight(std::size_t i, double r) const {
  SimpsonOptions o;
  o.rel_tol = cell_tol_;
  o.abs_tol = 1e-3 * cell_tol_ * std::max(cum_weight_.back(), 1e-300);
  const QuadratureResult q = adaptive_simpson([this](double s) { return weight(s); }, nodes_[i], r, o);
  require_quadrature(q, "Phi");
  return cum_weight_[i] + q.value;
}

double DistanceProfile::local_inv_integral(std::size_t i, double r) const {
  SimpsonOptions o = cell_options(cell_tol_);
  o.abs_tol = 1e-3 * cell_tol_ * std::max(inv_[r1_index_], 1e-300);
  const QuadratureResult q =
      adaptive_simpson([this](double s) { return std::exp(h_(s) - h_at_R1_); }, nodes_[i], r, o);
  require_quadrature(q, "1/xi");
  return inv_[i] + q.value;
}

double DistanceProfile::local_ratio_integral(std::size_t i, double r) const {
  SimpsonOptions o = cell_options(cell_tol_);
  o.abs_tol = 1e-3 * cell_tol_ * std::max(ratio_.back(), 1e-300);
  const QuadratureResult q = adaptive_simpson(
      [this, i](double s) { return local_cumulative_weight(i, s) * std::exp(h_(s) - h_at_R2_); }, nodes_[i], r, o);
  require_quadrature(q, "1/beta");
  return ratio_[i] + q.value;
}

double DistanceProfile::cumulative_weight(double r) const {
  if (!(r > 0.0)) return 0.0;
  if (r >= R2_) return local_cumulative_weight(nodes_.size() - 1, r);
  return local_cumulative_weight(cell(r), r);
}

double DistanceProfile::slope_factor(double r) const {
  if (!(r > 0.0)) return R1_ > 0.0 ? 1.0 : 0.75;
  if (r >= R2_) return 0.5;
  const std::size_t i = cell(r);
  const double inv_ratio = r >= R1_ ? 1.0 : local_inv_integral(i, r) / inv_[r1_index_];
  return 1.0 - 0.25 * inv_ratio - 0.25 * local_ratio_integral(i, r) / ratio_.back();
}

double DistanceProfile::eval(double r) const {
  if (!(r > 0.0)) return 0.0;
  if (r >= R2_) return f_.back();
  const std::size_t i = cell(r);
  const double x0 = nodes_[i], x1 = nodes_[i + 1];
  const double dx = x1 - x0;
  const double f0 = f_[i], f1 = f_[i + 1];
  const double secant = (f1 - f0) / dx;
  if (secant <= 0.0) return f0;
  double m0 = slope_[i], m1 = slope_[i + 1];
  // Fritsch-Carlson limiter keeps the interpolant monotone.
  const double a = m0 / secant, b = m1 / secant;
  const double s = a * a + b * b;
  if (s > 9.0) {
    const double tau = 3.0 / std::sqrt(s);
    m0 *= tau;
    m1 *= tau;
  }
  const double t = (r - x0) / dx;
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * f0 + (t3 - 2 * t2 + t) * dx * m0 + (-2 * t3 + 3 * t2) * f1 +
         (t3 - t2) * dx * m1;
}

double DistanceProfile::eval_by_quadrature(double r) const {
  const double top = std::min(r, R2_);
  if (!(top > 0.0)) return 0.0;
  SimpsonOptions o;
  o.rel_tol = rel_tol_;
  o.coarse_panels = 4;
  auto integrate = [&](const std::function<double(double)>& fn, double a, double b) {
    if (a >= b) return 0.0;
    const QuadratureResult q = adaptive_simpson(fn, a, b, o);
    require_quadrature(q, "profile check");
    return q.value;
  };
  auto w = [this](double s) { return std::exp(-h_(s)); };
  auto inv_w = [this](double s) { return std::exp(h_(s) - h_at_R1_); };
  auto phi = [&](double s) { return integrate(w, 0.0, s); };
  auto ratio = [&](double s) { return phi(s) * std::exp(h_(s) - h_at_R2_); };
  const double inv_total = R1_ > 0.0 ? integrate(inv_w, 0.0, R1_) : 0.0;
  const double ratio_total = integrate(ratio, 0.0, R1_) + integrate(ratio, R1_, R2_);
  auto g = [&](double s) {
    const double first = R1_ > 0.0 ? integrate(inv_w, 0.0, std::min(s, R1_)) / inv_total : 1.0;
    const double second = (integrate(ratio, 0.0, std::min(s, R1_)) + integrate(ratio, R1_, s)) / ratio_total;
    return 1.0 - 0.25 * first - 0.25 * second;
  };
  auto integrand = [&](double s) { return w(s) * g(s); };
  return integrate(integrand, 0.0, std::min(top, R1_)) + integrate(integrand, std::min(top, R1_), top);
}

// ---------------------------------------------------------------- certificate

bool ContractionCertificate::has_flag(const std::string& flag) const {
  return std::find(flags.begin(), flags.end(), flag) != flags.end();
}

ContractionCertificate build_certificate(const GrowthCondition& growth, const LyapunovSpec& lyap, const Mat& G,
                                         double domain_diameter, const CertificateOptions& options) {
  growth.validate();
  lyap.validate();
  if (!(domain_diameter >= 0.0)) throw Error(ErrorKind::InvalidArgument, "domain diameter must be >= 0");
  if (!(options.degenerate_eps > 0.0)) throw Error(ErrorKind::InvalidArgument, "degenerate_eps must be > 0");

  ContractionCertificate cert;
  cert.C = lyap.C();
  cert.lambda = lyap.lambda();
  cert.alpha = growth.alpha;

  if (options.sigma_min) {
    if (!(*options.sigma_min > 0.0) || !std::isfinite(*options.sigma_min)) {
      throw Error(ErrorKind::InvalidArgument, "sigma_min override must be positive");
    }
    cert.sigma_min = *options.sigma_min;
    cert.flags.push_back("sigma-override");
  } else {
    cert.sigma_min = noise_sigma_min(G, lyap.norm());
  }
  const double sigma2 = cert.sigma_min * cert.sigma_min;

  if (options.R1) {
    cert.R1 = *options.R1;
    cert.flags.push_back("R1-override");
  } else {
    cert.R1 = compute_R1(lyap, domain_diameter);
    if (cert.R1 < compute_R1(lyap, kInf)) cert.flags.push_back("R1-clipped");
  }
  if (!(cert.R1 >= 0.0) || !std::isfinite(cert.R1)) throw Error(ErrorKind::InvalidArgument, "R1 must be finite");

  if (options.M) {
    cert.M = *options.M;
    cert.flags.push_back("M-override");
    if (!(cert.M >= cert.R1)) throw Error(ErrorKind::InvalidArgument, "M must be at least R1");
  } else {
    cert.M = compute_M(lyap, growth, cert.R1);
  }

  if (options.R2) {
    cert.R2 = *options.R2;
    cert.flags.push_back("R2-override");
  } else {
    cert.R2 = std::min(2.0 * cert.M, domain_diameter);
    if (domain_diameter < 2.0 * cert.M) cert.flags.push_back("R2-clipped");
  }
  if (!std::isfinite(cert.R2)) {
    throw Error(ErrorKind::InfiniteR2, "R2 is infinite: M is unbounded and the domain is unbounded");
  }
  if (!(cert.R2 >= cert.R1)) throw Error(ErrorKind::InvalidArgument, "R2 must be at least R1");

  std::function<double(double)> moment = growth.kappa_moment;
  if (!moment) {
    auto table = std::make_shared<const MomentTable>(growth.kappa, cert.R2, options.rel_tol);
    moment = [table](double r) { return (*table)(r); };
  }
  const double alpha_M = growth.alpha * cert.M;
  DistanceProfile::Inputs in;
  in.exponent = [moment, alpha_M, sigma2](double r) { return (0.5 * moment(r) + alpha_M * r) / sigma2; };
  in.R1 = cert.R1;
  in.R2 = cert.R2;
  in.rel_tol = options.rel_tol;
  in.min_nodes = options.min_nodes;
  cert.profile = std::make_shared<const DistanceProfile>(std::move(in));
  if (cert.profile->working_tolerance() > options.rel_tol) cert.flags.push_back("tolerance-limited");

  const double log_cap = -std::log(options.degenerate_eps);
  if (cert.R1 > 0.0) {
    cert.log_xi = -cert.profile->log_inv_xi();
  } else {
    cert.log_xi = log_cap;
    cert.flags.push_back("R1-degenerate");
  }
  if (cert.R2 > 0.0) {
    cert.log_beta = -cert.profile->log_inv_beta();
  } else {
    cert.log_beta = log_cap;
    cert.flags.push_back("R2-degenerate");
  }
  const double log_sigma2 = std::log(sigma2);
  cert.log_gamma = cert.log_xi + log_sigma2 - std::log(4.0 * cert.C);
  cert.log_rate_a =
      std::min({std::log(cert.lambda), cert.log_xi + log_sigma2, cert.log_beta + log_sigma2}) - std::log(2.0);
  cert.xi = std::exp(cert.log_xi);
  cert.beta = std::exp(cert.log_beta);
  cert.gamma = std::exp(cert.log_gamma);
  cert.rate_a = std::exp(cert.log_rate_a);
  if (!(cert.rate_a >= std::numeric_limits<double>::min())) cert.flags.push_back("rate-underflow");
  cert.phi_M = lyap.phi(cert.M);
  return cert;
}

double eval_f(const ContractionCertificate& cert, double r) {
  if (!cert.profile) throw Error(ErrorKind::InvalidArgument, "certificate has no profile");
  return cert.profile->eval(r);
}

double eval_rho(const ContractionCertificate& cert, const LyapunovSpec& lyap, const Vec& x, const Vec& y) {
  if (x == y) return 0.0;
  const double vx = lyap.value(x);
  const double vy = lyap.value(y);
  const double r = lyap.norm().norm(x - y);
  return eval_f(cert, r) + cert.gamma * (vx + vy) + std::max(vx, cert.phi_M) + std::max(vy, cert.phi_M);
}

double decay_bound(const ContractionCertificate& cert, double w_rho_0, double t, std::optional<double> q) {
  if (!(w_rho_0 >= 0.0) || !(t >= 0.0)) throw Error(ErrorKind::InvalidArgument, "need W_rho(0) >= 0 and t >= 0");
  if (q && !(*q > 1.0)) throw Error(ErrorKind::InvalidQ, "q must exceed 1");
  if (w_rho_0 == 0.0) return 0.0;
  // log(W_rho(0) / gamma) - a t, in logs so an underflowed gamma still works.
  const double log_tv = std::log(w_rho_0) - cert.log_gamma - cert.rate_a * t;
  if (!q) return std::exp(log_tv);
  const double inv_p = 1.0 - 1.0 / *q;
  return std::exp(inv_p * std::log(2.0) + log_tv / *q);
}

CertificateInputs linear_certificate_inputs(const Mat& A, const Mat& G, const InnerProduct& norm) {
  if (!A.is_square() || A.rows() != norm.dim() || G.rows() != norm.dim() || !G.is_square()) {
    throw Error(ErrorKind::DimensionMismatch, "linear drift, diffusion and norm must agree in dimension");
  }
  const Mat& W = norm.weight();
  const Mat S = norm.inv_sqrt_weight() * (A.transpose() * W + W * A) * norm.inv_sqrt_weight();
  const double mu = -sym_eig_bounds(0.5 * (S + S.transpose())).max;
  if (!(mu > 0.0)) throw Error(ErrorKind::NotHurwitz, "A^T W + W A is not negative definite in this norm");
  const double noise = (G.transpose() * W * G).trace();
  return {GrowthCondition::constant(std::max(0.0, -0.5 * mu), 0.0),
          LyapunovSpec::quadratic(noise + mu, mu, norm)};
}

InitialSampler point_mass(Vec x) {
  return [x = std::move(x)](CounterRng&) { return x; };
}

// ---------------------------------------------------------------- Monte Carlo

std::vector<WRhoPoint> estimate_W_rho(const RsdeSystem& system, const ContractionCertificate& cert,
                                      const LyapunovSpec& lyap, const InitialSampler& x0_sampler,
                                      const InitialSampler& y0_sampler, const SimConfig& cfg,
                                      std::size_t n_replicas, std::span<const double> probe_times,
                                      unsigned threads) {
  cfg.validate();
  if (n_replicas < 2) throw Error(ErrorKind::InvalidArgument, "estimate_W_rho needs at least 2 replicas");
  if (!x0_sampler || !y0_sampler) throw Error(ErrorKind::InvalidArgument, "initial samplers are required");
  const std::size_t probes = probe_times.size();
  std::vector<std::size_t> probe_step(probes);
  for (std::size_t p = 0; p < probes; ++p) {
    const double t = probe_times[p];
    const double k = std::round(t / cfg.step);
    if (!(t >= 0.0) || std::abs(k * cfg.step - t) > 1e-9 * std::max(1.0, t)) {
      throw Error(ErrorKind::InvalidArgument, "probe times must be non-negative multiples of the step");
    }
    probe_step[p] = static_cast<std::size_t>(k);
  }
  std::vector<std::size_t> order(probes);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return probe_step[a] < probe_step[b]; });

  std::vector<double> values(n_replicas * probes, 0.0);
  std::vector<double> tau(n_replicas, kInf);
  parallel_for(n_replicas, threads, [&](std::size_t i) {
    CounterRng sx(cfg.seed, stream_id(i, StreamPurpose::SampleX));
    CounterRng sy(cfg.seed, stream_id(i, StreamPurpose::SampleY));
    const Vec x0 = x0_sampler(sx);
    const Vec y0 = y0_sampler(sy);
    CoupledRun run(system, x0, y0, cfg, lyap.norm(), i);
    double* row = values.data() + i * probes;
    for (std::size_t p : order) {
      if (run.coupled()) break;
      while (run.steps_taken() < probe_step[p] && !run.coupled()) run.advance();
      if (!run.coupled()) row[p] = eval_rho(cert, lyap, run.x(), run.y());
    }
    if (run.coupled()) tau[i] = *run.coupling_time();
  });

  std::vector<WRhoPoint> out(probes);
  const double n = static_cast<double>(n_replicas);
  for (std::size_t p = 0; p < probes; ++p) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n_replicas; ++i) sum += values[i * probes + p];
    const double mean = sum / n;
    double ss = 0.0;
    for (std::size_t i = 0; i < n_replicas; ++i) {
      const double d = values[i * probes + p] - mean;
      ss += d * d;
    }
    std::size_t coupled = 0;
    const double t = static_cast<double>(probe_step[p]) * cfg.step;
    for (double c : tau) coupled += c <= t * (1.0 + 1e-12) ? 1 : 0;
    out[p] = {probe_times[p], mean, std::sqrt(ss / (n - 1.0) / n), coupled};
  }
  return out;
}

ConvergenceReport check_convergence(const RsdeSystem& system, const ContractionCertificate& cert,
                                    const LyapunovSpec& lyap, const InitialSampler& x0_sampler,
                                    const InitialSampler& y0_sampler, const SimConfig& cfg, std::size_t n_replicas,
                                    std::span<const double> probe_times, const ConvergenceOptions& options) {
  if (!(options.rate_scale > 0.0)) throw Error(ErrorKind::InvalidArgument, "rate_scale must be positive");
  std::vector<double> times{0.0};
  times.insert(times.end(), probe_times.begin(), probe_times.end());

  SimConfig coarse = cfg;
  if (options.estimate_bias) coarse.brownian_refinement = cfg.brownian_refinement + 1;
  const auto main = estimate_W_rho(system, cert, lyap, x0_sampler, y0_sampler, coarse, n_replicas, times,
                                   options.threads);

  ConvergenceReport report;
  report.certified_rate = cert.rate_a;
  report.rate = cert.rate_a * options.rate_scale;
  report.replicas = n_replicas;
  if (options.estimate_bias) {
    SimConfig fine = cfg;
    fine.step = 0.5 * cfg.step;
    const auto half = estimate_W_rho(system, cert, lyap, x0_sampler, y0_sampler, fine, n_replicas, times,
                                     options.threads);
    double diff = 0.0;
    for (std::size_t p = 0; p < times.size(); ++p) diff = std::max(diff, std::abs(main[p].mean - half[p].mean));
    const double root = std::sqrt(cfg.step);
    report.bias_constant = diff / (root - std::sqrt(0.5 * cfg.step));
    report.bias_allowance = report.bias_constant * root;
  }

  const double initial = main.front().mean;
  for (std::size_t p = 1; p < times.size(); ++p) {
    ConvergenceRow row;
    row.time = main[p].time;
    row.mean = main[p].mean;
    row.stderr_ = main[p].stderr_;
    row.bound = std::exp(-report.rate * row.time) * initial;
    row.pass = row.mean <= row.bound + 3.0 * row.stderr_ + report.bias_allowance;
    report.rows.push_back(row);
  }
  return report;
}

// ---------------------------------------------------------------- report

std::string certificate_report_json(const ContractionCertificate& cert, std::size_t max_profile_points) {
  using nlohmann::ordered_json;
  auto num = [](double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); };
  ordered_json j;
  j["sigma_min"] = num(cert.sigma_min);
  j["R1"] = num(cert.R1);
  j["M"] = num(cert.M);
  j["R2"] = num(cert.R2);
  j["xi"] = num(cert.xi);
  j["beta"] = num(cert.beta);
  j["gamma"] = num(cert.gamma);
  j["rate_a"] = num(cert.rate_a);
  j["flags"] = cert.flags;
  ordered_json grid;
  grid["r"] = ordered_json::array();
  grid["f"] = ordered_json::array();
  if (cert.profile) {
    const auto nodes = cert.profile->nodes();
    const auto f = cert.profile->f_values();
    const std::size_t n = nodes.size();
    const std::size_t keep = std::max<std::size_t>(2, max_profile_points);
    if (n <= keep) {
      for (std::size_t i = 0; i < n; ++i) {
        grid["r"].push_back(nodes[i]);
        grid["f"].push_back(f[i]);
      }
    } else {
      for (std::size_t k = 0; k < keep; ++k) {
        const std::size_t i = k * (n - 1) / (keep - 1);
        grid["r"].push_back(nodes[i]);
        grid["f"].push_back(f[i]);
      }
    }
  }
  j["profile_grid"] = grid;
  j["log_xi"] = num(cert.log_xi);
  j["log_beta"] = num(cert.log_beta);
  j["log_gamma"] = num(cert.log_gamma);
  j["log_rate_a"] = num(cert.log_rate_a);
  j["C"] = num(cert.C);
  j["lambda"] = num(cert.lambda);
  j["alpha"] = num(cert.alpha);
  j["phi_M"] = num(cert.phi_M);
  return j.dump(2) + "\n";
}

}  // namespace rsdec
