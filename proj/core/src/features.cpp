#include "rsdec/features.hpp"

#include <algorithm>
#include <cmath>
#include <type_traits>
#include <variant>

#include "rsdec/error.hpp"

namespace rsdec {

namespace {

struct Linear {};

struct TanhLayer {
  Mat weights;
  Vec bias;
};

struct Rbf {
  std::vector<Vec> centers;
  double inv_two_s2;
};

}  // namespace

struct FeatureMap::Impl {
  std::variant<Linear, TanhLayer, Rbf> kind;
};

FeatureMap::FeatureMap(std::string name, std::size_t state_dim, std::size_t feature_dim, double lipschitz,
                       std::shared_ptr<const Impl> impl)
    : name_(std::move(name)),
      state_dim_(state_dim),
      feature_dim_(feature_dim),
      lipschitz_(lipschitz),
      impl_(std::move(impl)) {}

FeatureMap FeatureMap::linear(std::size_t state_dim) {
  if (state_dim == 0) throw Error(ErrorKind::InvalidArgument, "feature map needs a positive state dimension");
  return FeatureMap("linear", state_dim, state_dim, 1.0, std::make_shared<const Impl>(Impl{Linear{}}));
}

FeatureMap FeatureMap::tanh_layer(Mat weights, Vec bias) {
  if (weights.rows() == 0 || weights.cols() == 0 || bias.dim() != weights.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "tanh features: weights must be k x n with a length-k bias");
  }
  if (!weights.all_finite() || !bias.all_finite()) {
    throw Error(ErrorKind::InvalidArgument, "tanh features: non-finite parameters");
  }
  const double w = spectral_norm(weights);
  const std::size_t n = weights.cols();
  const std::size_t k = weights.rows();
  return FeatureMap("tanh", n, n + k, std::sqrt(1.0 + w * w),
                    std::make_shared<const Impl>(Impl{TanhLayer{std::move(weights), std::move(bias)}}));
}

FeatureMap FeatureMap::rbf(std::vector<Vec> centers, double width) {
  if (centers.empty()) throw Error(ErrorKind::InvalidArgument, "rbf features need at least one center");
  if (!(width > 0.0) || !std::isfinite(width)) throw Error(ErrorKind::InvalidArgument, "rbf width must be > 0");
  const std::size_t n = centers.front().dim();
  for (const Vec& c : centers) {
    if (c.dim() != n || n == 0) throw Error(ErrorKind::DimensionMismatch, "rbf centers differ in dimension");
  }
  const std::size_t k = centers.size();
  const double lip = std::sqrt(1.0 + static_cast<double>(k) * std::exp(-1.0) / (width * width));
  return FeatureMap("rbf", n, n + k, lip,
                    std::make_shared<const Impl>(Impl{Rbf{std::move(centers), 0.5 / (width * width)}}));
}

void FeatureMap::eval(std::span<const double> x, std::span<double> out) const {
  if (x.size() != state_dim_ || out.size() != feature_dim_) {
    throw Error(ErrorKind::DimensionMismatch, "feature map argument has the wrong dimension");
  }
  std::copy(x.begin(), x.end(), out.begin());
  const std::size_t n = state_dim_;
  std::visit(
      [&](const auto& kind) {
        using T = std::decay_t<decltype(kind)>;
        if constexpr (std::is_same_v<T, TanhLayer>) {
          for (std::size_t i = 0; i < kind.weights.rows(); ++i) {
            const auto row = kind.weights.row_span(i);
            double s = kind.bias[i];
            for (std::size_t j = 0; j < n; ++j) s += row[j] * x[j];
            out[n + i] = std::tanh(s);
          }
        } else if constexpr (std::is_same_v<T, Rbf>) {
          for (std::size_t i = 0; i < kind.centers.size(); ++i) {
            double d2 = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              const double d = x[j] - kind.centers[i][j];
              d2 += d * d;
            }
            out[n + i] = std::exp(-d2 * kind.inv_two_s2);
          }
        }
      },
      impl_->kind);
}

Vec FeatureMap::operator()(const Vec& x) const {
  Vec out(feature_dim_);
  eval(x.span(), out.span());
  return out;
}

}  // namespace rsdec
