#pragma once

// Regressor maps Lambda(x) = [x; Psi(x)] for adaptive control. Each map
// carries a Lipschitz bound for Lambda in Euclidean norms.

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rsdec/linalg.hpp"

namespace rsdec {

class FeatureMap {
 public:
  // Lambda(x) = x. Lipschitz 1.
  static FeatureMap linear(std::size_t state_dim);
  // Psi(x) = tanh(W x + b). Lipschitz sqrt(1 + ||W||_2^2).
  static FeatureMap tanh_layer(Mat weights, Vec bias);
  // Psi_k(x) = exp(-|x - c_k|^2 / (2 s^2)). Lipschitz sqrt(1 + k / (e s^2)).
  static FeatureMap rbf(std::vector<Vec> centers, double width);

  const std::string& name() const noexcept { return name_; }
  std::size_t state_dim() const noexcept { return state_dim_; }
  // L: length of Lambda, state included.
  std::size_t feature_dim() const noexcept { return feature_dim_; }
  double lipschitz_bound() const noexcept { return lipschitz_; }

  // out has length feature_dim().
  void eval(std::span<const double> x, std::span<double> out) const;
  Vec operator()(const Vec& x) const;

 private:
  struct Impl;
  FeatureMap(std::string name, std::size_t state_dim, std::size_t feature_dim, double lipschitz,
             std::shared_ptr<const Impl> impl);

  std::string name_;
  std::size_t state_dim_ = 0;
  std::size_t feature_dim_ = 0;
  double lipschitz_ = 1.0;
  std::shared_ptr<const Impl> impl_;
};

}  // namespace rsdec
