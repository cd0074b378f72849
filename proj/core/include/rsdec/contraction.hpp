#pragma once

// Explicit Wasserstein contraction certificates for reflected SDEs.
//
// Inputs are a one-sided growth bound
//   <x - y, H(x) - H(y)> <= kappa(r) r^2 + alpha r (|x| + |y|),   r = |x - y|,
// and a Foster-Lyapunov bound  (A V)(x) <= C - lambda V(x)  with
// V(x) = phi(|x - center|). From these the certificate derives the radii
// R1, M, R2, the concave distance profile f, the constants xi, beta, gamma
// and a rate a such that
//   rho(x, y) = [ f(|x-y|) + gamma V(x) + gamma V(y)
//                 + max(V(x), phi(M)) + max(V(y), phi(M)) ] 1(x != y)
// contracts: W_rho(P_t, Q_t) <= exp(-a t) W_rho(P_0, Q_0).
//
// The profile is built from h(r) = (0.5 int_0^r s kappa(s) ds + alpha M r) / sigma^2
// and w(r) = exp(-h(r)):
//   Phi(r)   = int_0^r w
//   1/xi     = int_0^R1 1/w
//   1/beta   = int_0^R2 Phi/w
//   g(r)     = 1 - (xi/4) int_0^{r^R1} 1/w - (beta/4) int_0^{r^R2} Phi/w
//   f(r)     = int_0^{r^R2} w g
//   gamma    = xi sigma^2 / (4 C),   a = min(lambda, xi sigma^2, beta sigma^2) / 2.

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rsdec/linalg.hpp"
#include "rsdec/rng.hpp"
#include "rsdec/rsde.hpp"

namespace rsdec {

struct GrowthCondition {
  std::function<double(double)> kappa;
  double alpha = 0.0;
  // Optional closed form of r -> int_0^r s kappa(s) ds. When absent the
  // integral is computed by quadrature, which needs s kappa(s) bounded near 0.
  std::function<double(double)> kappa_moment;

  // kappa(r) = k for all r, with the exact moment k r^2 / 2.
  static GrowthCondition constant(double kappa, double alpha);

  // Throws InvalidArgument if alpha < 0 or kappa is negative on a sample grid.
  void validate() const;
};

class LyapunovSpec {
 public:
  LyapunovSpec(std::function<double(double)> phi, std::function<double(double)> phi_inverse, double C,
               double lambda, InnerProduct norm, Vec center = {});

  // phi(r) = r^2 + 1, the form used for quadratic Lyapunov functions.
  static LyapunovSpec quadratic(double C, double lambda, InnerProduct norm, Vec center = {});
  // phi(r) = r^p + 1.
  static LyapunovSpec power(double exponent, double C, double lambda, InnerProduct norm, Vec center = {});

  double phi(double r) const { return phi_(r); }
  double phi_inverse(double v) const { return phi_inverse_(v); }
  // V(x) = phi(|x - center|) in the spec's norm.
  double value(const Vec& x) const;
  double norm_from_center(const Vec& x) const;

  double C() const noexcept { return C_; }
  double lambda() const noexcept { return lambda_; }
  const InnerProduct& norm() const noexcept { return norm_; }
  const Vec& center() const noexcept { return center_; }
  // Exponent when built by power()/quadratic(); enables closed-form radii.
  std::optional<double> power_exponent() const noexcept { return exponent_; }

  // Checks C, lambda > 0, strict monotonicity of phi and phi(phi^{-1}(v)) = v
  // on a sample grid. Throws InvalidArgument.
  void validate() const;

 private:
  std::function<double(double)> phi_;
  std::function<double(double)> phi_inverse_;
  double C_;
  double lambda_;
  InnerProduct norm_;
  Vec center_;
  std::optional<double> exponent_;
};

// Upper bound on the diameter of {(x, y) : V(x) + V(y) <= 4C/lambda},
// clipped to the domain diameter.
double compute_R1(const LyapunovSpec& lyap, double domain_diameter);

// Smallest M >= R1 with phi(r) >= (2/lambda)(alpha r + C) and
// phi(r) >= (4C/lambda)(2r + 1) for every r >= M. Throws NoFiniteM when phi
// grows too slowly for any M to exist.
double compute_M(const LyapunovSpec& lyap, const GrowthCondition& growth, double R1);

// Tabulated distance profile f together with h, w, Phi and g. Immutable and
// safe to evaluate concurrently.
class DistanceProfile {
 public:
  struct Inputs {
    std::function<double(double)> exponent;  // h
    double R1 = 0.0;
    double R2 = 0.0;
    double rel_tol = 1e-10;
    std::size_t min_nodes = 512;
  };

  explicit DistanceProfile(Inputs inputs);

  double R1() const noexcept { return R1_; }
  double R2() const noexcept { return R2_; }
  // log(1/xi) and log(1/beta); -inf when the corresponding radius is zero.
  double log_inv_xi() const noexcept { return log_inv_xi_; }
  double log_inv_beta() const noexcept { return log_inv_beta_; }
  // Relative tolerance actually requested from the cell quadratures; above
  // rel_tol when h is so large that exp(h) carries rounding noise.
  double working_tolerance() const noexcept { return cell_tol_; }

  double exponent(double r) const { return h_(r); }
  double weight(double r) const;
  double cumulative_weight(double r) const;  // Phi
  double slope_factor(double r) const;       // g, in [1/2, 1]
  // f by monotone cubic Hermite interpolation of the tabulated values.
  double eval(double r) const;
  // f by direct nested quadrature; slow, kept as an independent check.
  double eval_by_quadrature(double r) const;

  std::span<const double> nodes() const noexcept { return nodes_; }
  std::span<const double> f_values() const noexcept { return f_; }

 private:
  std::size_t cell(double r) const;
  double local_cumulative_weight(std::size_t i, double r) const;
  double local_inv_integral(std::size_t i, double r) const;     // J1
  double local_ratio_integral(std::size_t i, double r) const;   // J2

  std::function<double(double)> h_;
  double R1_, R2_;
  double rel_tol_;
  // rel_tol_ raised to the rounding floor of exp(h) when h is large.
  double cell_tol_;
  double h_at_R1_ = 0.0, h_at_R2_ = 0.0;
  std::size_t r1_index_ = 0;
  double log_inv_xi_ = 0.0, log_inv_beta_ = 0.0;
  std::vector<double> nodes_;
  // Cumulative integrals at nodes. inv_ and inv_phi_ are scaled by
  // exp(-h(R1)), ratio_ and ratio_phi_ by exp(-h(R2)).
  std::vector<double> cum_weight_;  // Phi
  std::vector<double> inv_;         // int 1/w            on [0, R1]
  std::vector<double> inv_phi_;     // int Phi/w          on [0, R1]
  std::vector<double> ratio_;       // int Phi/w          on [0, R2]
  std::vector<double> ratio_phi_;   // int Phi^2/w        on [0, R2]
  std::vector<double> f_;
  std::vector<double> slope_;       // f' = w g
};

struct CertificateOptions {
  // Explicit radii replace the computed ones (flagged in the certificate).
  std::optional<double> R1;
  std::optional<double> M;
  std::optional<double> R2;
  // Overrides the noise gain sigma_min.
  std::optional<double> sigma_min;
  double rel_tol = 1e-10;
  std::size_t min_nodes = 512;
  // xi (or beta) is capped at 1 / degenerate_eps when R1 (or R2) is zero.
  double degenerate_eps = 1e-6;
};

struct ContractionCertificate {
  double sigma_min = 0.0;
  double R1 = 0.0;
  double M = 0.0;
  double R2 = 0.0;
  double xi = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double rate_a = 0.0;
  // Logs survive when xi, beta or the rate underflow double precision.
  double log_xi = 0.0;
  double log_beta = 0.0;
  double log_gamma = 0.0;
  double log_rate_a = 0.0;
  double C = 0.0;
  double lambda = 0.0;
  double alpha = 0.0;
  double phi_M = 0.0;  // phi(M), the floor of the Lyapunov terms in rho
  std::vector<std::string> flags;
  std::shared_ptr<const DistanceProfile> profile;

  bool has_flag(const std::string& flag) const;
};

// sigma_min is the smallest gain of G from Euclidean white noise into the
// certificate norm (noise_sigma_min). Throws NoFiniteM, InfiniteR2,
// QuadratureFailure, SingularG or InvalidArgument.
ContractionCertificate build_certificate(const GrowthCondition& growth, const LyapunovSpec& lyap, const Mat& G,
                                         double domain_diameter, const CertificateOptions& options = {});

double eval_f(const ContractionCertificate& cert, double r);
double eval_rho(const ContractionCertificate& cert, const LyapunovSpec& lyap, const Vec& x, const Vec& y);

// Total-variation bound (q = nullopt) or W^q bound for q > 1 on the distance
// to equilibrium after time t. The W^q form assumes V(x) >= |x|^q.
double decay_bound(const ContractionCertificate& cert, double w_rho_0, double t,
                   std::optional<double> q = std::nullopt);

// Growth and Lyapunov data for a linear drift H(x) = A x with V = |x|_W^2 + 1:
// lambda = mu, C = tr(G^T W G) + mu, kappa = max(0, -mu / 2), alpha = 0, where
// -mu is the largest eigenvalue of W^{-1/2}(A^T W + W A)W^{-1/2}. Throws
// NotHurwitz if mu <= 0.
struct CertificateInputs {
  GrowthCondition growth;
  LyapunovSpec lyap;
};
CertificateInputs linear_certificate_inputs(const Mat& A, const Mat& G, const InnerProduct& norm);

// Initial-law samplers for Monte Carlo estimates.
using InitialSampler = std::function<Vec(CounterRng&)>;
InitialSampler point_mass(Vec x);

struct WRhoPoint {
  double time = 0.0;
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t coupled = 0;  // replicas coupled by this time
};

// E[rho(x_t, y_t)] under the reflection coupling, an upper bound on
// W_rho(P_t, Q_t). probe_times must be non-negative multiples of cfg.step.
std::vector<WRhoPoint> estimate_W_rho(const RsdeSystem& system, const ContractionCertificate& cert,
                                      const LyapunovSpec& lyap, const InitialSampler& x0_sampler,
                                      const InitialSampler& y0_sampler, const SimConfig& cfg,
                                      std::size_t n_replicas, std::span<const double> probe_times,
                                      unsigned threads = 1);

struct ConvergenceRow {
  double time = 0.0;
  double mean = 0.0;
  double stderr_ = 0.0;
  double bound = 0.0;  // exp(-a t) E[rho(0)]
  bool pass = false;
};

struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;
  double rate = 0.0;            // rate used for the bound (certified rate times rate_scale)
  double certified_rate = 0.0;
  double bias_constant = 0.0;   // c in c sqrt(eta)
  double bias_allowance = 0.0;
  std::size_t replicas = 0;
};

struct ConvergenceOptions {
  double rate_scale = 1.0;
  bool estimate_bias = true;
  unsigned threads = 1;
};

// Compares E[rho(t)] with exp(-a t) E[rho(0)] at each probe time. A probe
// passes when E[rho(t)] <= bound + 3 stderr + bias_allowance, where the bias
// allowance c sqrt(eta) comes from a Richardson comparison against a run at
// eta / 2 on the same Brownian paths.
ConvergenceReport check_convergence(const RsdeSystem& system, const ContractionCertificate& cert,
                                    const LyapunovSpec& lyap, const InitialSampler& x0_sampler,
                                    const InitialSampler& y0_sampler, const SimConfig& cfg, std::size_t n_replicas,
                                    std::span<const double> probe_times, const ConvergenceOptions& options = {});

// Certificate report JSON: sigma_min, R1, M, R2, xi, beta, gamma, rate_a,
// flags, profile_grid {r, f}, plus log-scale companions. The profile grid is
// subsampled to at most max_profile_points nodes.
std::string certificate_report_json(const ContractionCertificate& cert, std::size_t max_profile_points = 513);

}  // namespace rsdec
