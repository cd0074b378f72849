#include "rsdec/mrac.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "rsdec/error.hpp"
#include "rsdec/rng.hpp"

namespace rsdec {

namespace {

void require_shape(const Mat& m, std::size_t rows, std::size_t cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream msg;
    msg << what << " is " << m.rows() << " x " << m.cols() << ", expected " << rows << " x " << cols;
    throw Error(ErrorKind::DimensionMismatch, msg.str());
  }
}

}  // namespace

void MracSpec::validate(std::uint64_t audit_seed, std::size_t audit_pairs) const {
  const std::size_t n = state_dim();
  const std::size_t ell = input_dim();
  if (n == 0 || ell == 0) throw Error(ErrorKind::DimensionMismatch, "empty state or input dimension");
  require_shape(A, n, n, "A");
  require_shape(B, n, ell, "B");
  require_shape(Q, n, n, "Q");
  require_shape(G_x, n, n, "G_x");
  if (features.state_dim() != n) throw Error(ErrorKind::DimensionMismatch, "feature map state dimension");
  const std::size_t m = parameter_dim();
  require_shape(G_theta, m, m, "G_theta");
  if (parameter_set.dim() != m) throw Error(ErrorKind::DimensionMismatch, "parameter set dimension");
  if (theta_bar.dim() != m) throw Error(ErrorKind::DimensionMismatch, "theta_bar dimension");
  if (!parameter_set.contains(theta_bar, 1e-9)) {
    throw Error(ErrorKind::InvalidArgument, "theta_bar lies outside the parameter set");
  }
  if (!std::isfinite(parameter_set.diameter())) {
    throw Error(ErrorKind::InvalidArgument, "the parameter set must be bounded");
  }
  if (!(lipschitz > 0.0) || !std::isfinite(lipschitz)) {
    throw Error(ErrorKind::InvalidArgument, "Lipschitz bound must be positive");
  }

  // Half the pairs are far apart, half are close to probe local slopes.
  CounterRng rng(audit_seed, 0);
  Vec x(n), y(n);
  for (std::size_t k = 0; k < audit_pairs; ++k) {
    const double spread = k % 2 == 0 ? 5.0 : 1e-3;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = 4.0 * (2.0 * rng.uniform() - 1.0);
      y[i] = x[i] + spread * (2.0 * rng.uniform() - 1.0);
    }
    const double lhs = norm2(features(x) - features(y));
    const double rhs = lipschitz * norm2(x - y);
    if (lhs > rhs * (1.0 + 1e-3)) {
      std::ostringstream msg;
      msg << "feature map '" << features.name() << "' violates the Lipschitz bound " << lipschitz << ": ratio "
          << lhs / norm2(x - y);
      throw Error(ErrorKind::LipschitzViolation, msg.str());
    }
  }
}

Mat reshape_S(const Vec& v, std::size_t rows, std::size_t cols) {
  if (v.dim() != rows * cols) throw Error(ErrorKind::DimensionMismatch, "reshape_S: length is not rows * cols");
  return Mat(rows, cols, v.values());
}

Vec unreshape_S(const Mat& theta) {
  const auto e = theta.entries();
  return Vec(std::vector<double>(e.begin(), e.end()));
}

Vec control_input(const MracSpec& spec, const Vec& theta, const Vec& x) {
  if (x.dim() != spec.state_dim()) throw Error(ErrorKind::DimensionMismatch, "control_input: state dimension");
  const Mat Theta = reshape_S(theta, spec.feature_dim(), spec.input_dim());
  return -(Theta.transpose() * spec.features(x));
}

Vec adaptation_drift(const MracSpec& spec, const Mat& P, const Vec& x) {
  if (x.dim() != spec.state_dim()) throw Error(ErrorKind::DimensionMismatch, "adaptation_drift: state dimension");
  const Vec lam = spec.features(x);
  const Vec c = spec.B.transpose() * (P * x);  // (x^T P B)^T
  const std::size_t ell = spec.input_dim();
  Vec out(lam.dim() * ell);
  for (std::size_t k = 0; k < lam.dim(); ++k)
    for (std::size_t j = 0; j < ell; ++j) out[k * ell + j] = lam[k] * c[j];
  return out;
}

MracDerived derive_constants(const MracSpec& spec) {
  spec.validate();
  const std::size_t n = spec.state_dim();
  const std::size_t m = spec.parameter_dim();
  Mat P = solve_lyapunov(spec.A, spec.Q);
  const EigenBounds p_eig = sym_eig_bounds(P);
  const double lambda = sym_eig_bounds(spec.Q).min / p_eig.max;
  const double D = spec.parameter_set.diameter();
  const double C =
      (spec.G_x.transpose() * P * spec.G_x).trace() + (spec.G_theta.transpose() * spec.G_theta).trace() +
      lambda * (D * D + 1.0);
  const double alpha = spectral_norm(P * spec.B) * D * spec.lipschitz / p_eig.min;

  InnerProduct norm(block_diag(P, Mat::identity(m)));
  Vec center = concat(Vec(n), spec.theta_bar);
  return MracDerived{std::move(P),
                     lambda,
                     C,
                     alpha,
                     D,
                     GrowthCondition::constant(alpha, alpha),
                     LyapunovSpec::quadratic(C, lambda, std::move(norm), std::move(center)),
                     block_diag(spec.G_x, spec.G_theta),
                     ConvexSet::product({ConvexSet::whole_space(n), spec.parameter_set})};
}

ClosedLoop closed_loop_system(const MracSpec& spec) {
  MracDerived derived = derive_constants(spec);
  const std::size_t n = spec.state_dim();
  const std::size_t ell = spec.input_dim();
  const std::size_t L = spec.feature_dim();
  const Mat A = spec.A;
  const Mat B = spec.B;
  const Mat P = derived.P;
  const FeatureMap features = spec.features;
  const Vec theta_bar = spec.theta_bar;

  DriftFn drift = [=](std::span<const double> z, std::span<double> out) {
    thread_local std::vector<double> lam, err, pbx;
    lam.resize(L);
    err.resize(ell);
    pbx.resize(ell);
    const auto x = z.first(n);
    const auto theta = z.subspan(n);
    features.eval(x, lam);
    // err = (Theta_bar - Theta)^T Lambda(x)
    for (std::size_t j = 0; j < ell; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < L; ++k) s += (theta_bar[k * ell + j] - theta[k * ell + j]) * lam[k];
      err[j] = s;
    }
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      const auto a_row = A.row_span(i);
      for (std::size_t j = 0; j < n; ++j) s += a_row[j] * x[j];
      const auto b_row = B.row_span(i);
      for (std::size_t j = 0; j < ell; ++j) s += b_row[j] * err[j];
      out[i] = s;
    }
    // pbx = B^T P x
    for (std::size_t j = 0; j < ell; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double px = 0.0;
        const auto p_row = P.row_span(i);
        for (std::size_t k = 0; k < n; ++k) px += p_row[k] * x[k];
        s += B(i, j) * px;
      }
      pbx[j] = s;
    }
    for (std::size_t k = 0; k < L; ++k)
      for (std::size_t j = 0; j < ell; ++j) out[n + k * ell + j] = lam[k] * pbx[j];
  };

  RsdeSystem system(std::move(drift), derived.G, derived.domain);
  return ClosedLoop{std::move(system), std::move(derived)};
}

double lyapunov_value(const MracDerived& derived, const MracSpec& spec, const Vec& z) {
  const std::size_t n = spec.state_dim();
  const std::size_t m = spec.parameter_dim();
  if (z.dim() != n + m) throw Error(ErrorKind::DimensionMismatch, "lyapunov_value: z dimension");
  const Vec x = z.segment(0, n);
  const Vec dtheta = z.segment(n, m) - spec.theta_bar;
  return quadratic_form(x, derived.P, x) + dot(dtheta, dtheta) + 1.0;
}

}  // namespace rsdec
