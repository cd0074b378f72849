#pragma once

// Stochastic model-reference adaptive regulation.
//
// Plant and reference share A = A_bar + B K_bar. With regressor
// Lambda(x) = [x; Psi(x)] and stacked parameters Theta = [-K^T; Omega]
// (L x ell, stored row-major as theta in R^m, m = L ell), the controller is
//   u = K x - Omega^T Psi(x) = -Theta^T Lambda(x)
// and the closed loop in z = (x, theta) is the reflected SDE
//   dx     = (A x + B (Theta_bar - Theta)^T Lambda(x)) dt + G_x dw
//   dtheta = vec(Lambda(x) x^T P B) dt + G_theta dw - reflection into K,
// where A^T P + P A = -Q. The controller never reads Theta_bar; only the
// simulation and the certificate do.

#include <cstdint>

#include "rsdec/contraction.hpp"
#include "rsdec/convex.hpp"
#include "rsdec/features.hpp"
#include "rsdec/linalg.hpp"
#include "rsdec/rsde.hpp"

namespace rsdec {

struct MracSpec {
  Mat A;  // n x n, Hurwitz
  Mat B;  // n x ell
  Mat Q;  // n x n, symmetric positive definite
  FeatureMap features;
  double lipschitz = 0.0;  // bound on the Lipschitz constant of Lambda
  ConvexSet parameter_set;  // K in R^m, bounded
  Vec theta_bar;
  Mat G_x;
  Mat G_theta;

  std::size_t state_dim() const noexcept { return A.rows(); }
  std::size_t input_dim() const noexcept { return B.cols(); }
  std::size_t feature_dim() const noexcept { return features.feature_dim(); }
  std::size_t parameter_dim() const noexcept { return feature_dim() * input_dim(); }

  // Checks dimensions, theta_bar in K, finite diameter of K and audits the
  // Lipschitz bound on random pairs. Throws DimensionMismatch,
  // InvalidArgument or LipschitzViolation. Hurwitz-ness is checked by
  // derive_constants.
  void validate(std::uint64_t audit_seed = 0x5eed, std::size_t audit_pairs = 4000) const;
};

struct MracDerived {
  Mat P;
  double lambda = 0.0;
  double C = 0.0;
  double alpha = 0.0;     // kappa = alpha = ||P B||_2 D Lip / lambda_min(P)
  double diameter = 0.0;  // D = diam K
  GrowthCondition growth;
  // phi(r) = r^2 + 1 in the norm blockdiag(P, I), centred at (0, theta_bar).
  LyapunovSpec lyap;
  Mat G;               // blockdiag(G_x, G_theta)
  ConvexSet domain;    // R^n x K
};

// Row-major reshape S: R^m -> R^{L x ell}, S(v)_{ij} = v_{i ell + j}.
Mat reshape_S(const Vec& v, std::size_t rows, std::size_t cols);
Vec unreshape_S(const Mat& theta);

Vec control_input(const MracSpec& spec, const Vec& theta, const Vec& x);
// vec(Lambda(x) x^T P B).
Vec adaptation_drift(const MracSpec& spec, const Mat& P, const Vec& x);

// Throws NotHurwitz (from the Lyapunov solve) and the validate() errors.
MracDerived derive_constants(const MracSpec& spec);

struct ClosedLoop {
  RsdeSystem system;
  MracDerived derived;
};

ClosedLoop closed_loop_system(const MracSpec& spec);

// x^T P x + |theta - theta_bar|^2 + 1 for z = (x, theta).
double lyapunov_value(const MracDerived& derived, const MracSpec& spec, const Vec& z);

}  // namespace rsdec
