#include "rsdec/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>

#include "rsdec/error.hpp"

namespace rsdec {

namespace {

void require_same_dim(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw Error(ErrorKind::DimensionMismatch,
                std::string(what) + ": " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

void require_square(const Mat& m, const char* what) {
  if (!m.is_square()) {
    throw Error(ErrorKind::DimensionMismatch,
                std::string(what) + ": expected square matrix, got " + std::to_string(m.rows()) +
                    "x" + std::to_string(m.cols()));
  }
}

// Gaussian elimination with partial pivoting; nullopt when singular.
std::optional<Vec> try_solve(Mat a, Vec b, double singular_tol) {
  const std::size_t n = a.rows();
  double scale = 0.0;
  for (double v : a.entries()) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) return std::nullopt;
  const double threshold = singular_tol * scale;

  for (std::size_t k = 0; k < n; ++k) {
    std::size_t pivot = k;
    for (std::size_t i = k + 1; i < n; ++i) {
      if (std::abs(a(i, k)) > std::abs(a(pivot, k))) pivot = i;
    }
    if (std::abs(a(pivot, k)) <= threshold) return std::nullopt;
    if (pivot != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(pivot, j));
      std::swap(b[k], b[pivot]);
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double factor = a(i, k) / a(k, k);
      if (factor == 0.0) continue;
      for (std::size_t j = k; j < n; ++j) a(i, j) -= factor * a(k, j);
      b[i] -= factor * b[k];
    }
  }
  Vec x(n);
  for (std::size_t k = n; k-- > 0;) {
    double acc = b[k];
    for (std::size_t j = k + 1; j < n; ++j) acc -= a(k, j) * x[j];
    x[k] = acc / a(k, k);
  }
  return x;
}

template <typename F>
Mat spd_function(const Mat& s, F&& f) {
  const SymmetricEigen eig = sym_eigen(s);
  const std::size_t n = s.rows();
  for (double v : eig.values) {
    if (!(v > 0.0)) throw Error(ErrorKind::NotPositiveDefinite, "matrix is not positive definite");
  }
  Mat out(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const double fv = f(eig.values[k]);
    for (std::size_t i = 0; i < n; ++i) {
      const double vik = eig.vectors(i, k) * fv;
      for (std::size_t j = 0; j < n; ++j) out(i, j) += vik * eig.vectors(j, k);
    }
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------- Vec

Vec& Vec::operator+=(const Vec& other) {
  require_same_dim(dim(), other.dim(), "Vec +=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Vec& Vec::operator-=(const Vec& other) {
  require_same_dim(dim(), other.dim(), "Vec -=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Vec& Vec::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Vec Vec::segment(std::size_t offset, std::size_t count) const {
  if (offset + count > dim()) {
    throw Error(ErrorKind::DimensionMismatch, "Vec::segment out of range");
  }
  return Vec(std::span<const double>(data_.data() + offset, count));
}

bool Vec::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Vec operator+(Vec a, const Vec& b) { return a += b; }
Vec operator-(Vec a, const Vec& b) { return a -= b; }
Vec operator*(double s, Vec v) { return v *= s; }
Vec operator-(Vec v) { return v *= -1.0; }

double dot(const Vec& a, const Vec& b) {
  require_same_dim(a.dim(), b.dim(), "dot");
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double norm2(const Vec& v) { return std::sqrt(dot(v, v)); }

Vec concat(const Vec& a, const Vec& b) {
  std::vector<double> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return Vec(std::move(out));
}

// ---------------------------------------------------------------- Mat

Mat::Mat(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Mat::Mat(std::size_t rows, std::size_t cols, std::vector<double> row_major)
    : rows_(rows), cols_(cols), data_(std::move(row_major)) {
  if (data_.size() != rows_ * cols_) {
    throw Error(ErrorKind::DimensionMismatch, "Mat: entries length != rows * cols");
  }
}

Mat::Mat(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw Error(ErrorKind::DimensionMismatch, "Mat: ragged rows");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Mat Mat::identity(std::size_t n) {
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Mat Mat::diagonal(const Vec& d) {
  Mat m(d.dim(), d.dim());
  for (std::size_t i = 0; i < d.dim(); ++i) m(i, i) = d[i];
  return m;
}

Mat Mat::from_rows(const std::vector<std::vector<double>>& rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.front().size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw Error(ErrorKind::DimensionMismatch, "Mat: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Mat(r, c, std::move(data));
}

Mat Mat::column(const Vec& v) { return Mat(v.dim(), 1, v.values()); }
Mat Mat::row(const Vec& v) { return Mat(1, v.dim(), v.values()); }

Mat Mat::transpose() const {
  Mat t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

double Mat::trace() const {
  require_square(*this, "trace");
  double t = 0.0;
  for (std::size_t i = 0; i < rows_; ++i) t += (*this)(i, i);
  return t;
}

double Mat::frobenius_norm() const {
  return std::sqrt(std::inner_product(data_.begin(), data_.end(), data_.begin(), 0.0));
}

bool Mat::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Mat& Mat::operator+=(const Mat& other) {
  require_same_dim(rows_, other.rows_, "Mat += rows");
  require_same_dim(cols_, other.cols_, "Mat += cols");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Mat& Mat::operator-=(const Mat& other) {
  require_same_dim(rows_, other.rows_, "Mat -= rows");
  require_same_dim(cols_, other.cols_, "Mat -= cols");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Mat& Mat::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Mat operator+(Mat a, const Mat& b) { return a += b; }
Mat operator-(Mat a, const Mat& b) { return a -= b; }
Mat operator*(double s, Mat m) { return m *= s; }

Mat operator*(const Mat& a, const Mat& b) {
  require_same_dim(a.cols(), b.rows(), "Mat * Mat");
  Mat c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

Vec operator*(const Mat& a, const Vec& v) {
  Vec out(a.rows());
  multiply_into(a, v.span(), out.span());
  return out;
}

void multiply_into(const Mat& a, std::span<const double> x, std::span<double> y) {
  require_same_dim(a.cols(), x.size(), "Mat * Vec");
  require_same_dim(a.rows(), y.size(), "Mat * Vec output");
  const std::size_t cols = a.cols();
  const double* row = a.entries().data();
  for (std::size_t i = 0; i < a.rows(); ++i, row += cols) {
    double acc = 0.0;
    for (std::size_t j = 0; j < cols; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
}

Mat block_diag(const Mat& a, const Mat& b) {
  Mat m(a.rows() + b.rows(), a.cols() + b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) m(i, j) = a(i, j);
  for (std::size_t i = 0; i < b.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) m(a.rows() + i, a.cols() + j) = b(i, j);
  return m;
}

Mat kron(const Mat& a, const Mat& b) {
  Mat m(a.rows() * b.rows(), a.cols() * b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      for (std::size_t k = 0; k < b.rows(); ++k)
        for (std::size_t l = 0; l < b.cols(); ++l)
          m(i * b.rows() + k, j * b.cols() + l) = a(i, j) * b(k, l);
  return m;
}

double quadratic_form(const Vec& x, const Mat& s, const Vec& y) {
  require_same_dim(x.dim(), s.rows(), "quadratic_form");
  require_same_dim(y.dim(), s.cols(), "quadratic_form");
  double acc = 0.0;
  for (std::size_t i = 0; i < s.rows(); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < s.cols(); ++j) row += s(i, j) * y[j];
    acc += x[i] * row;
  }
  return acc;
}

Vec solve(Mat a, Vec b, double singular_tol) {
  require_square(a, "solve");
  require_same_dim(a.rows(), b.dim(), "solve rhs");
  auto x = try_solve(std::move(a), std::move(b), singular_tol);
  if (!x) throw Error(ErrorKind::InvalidArgument, "solve: matrix is singular");
  return *std::move(x);
}

Mat inverse(const Mat& a) {
  require_square(a, "inverse");
  const std::size_t n = a.rows();
  Mat inv(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    Vec e(n);
    e[j] = 1.0;
    const Vec col = solve(a, e);
    for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
  }
  return inv;
}

bool is_symmetric(const Mat& s, double rel_tol) {
  if (!s.is_square()) return false;
  const double scale = std::max(s.frobenius_norm(), 1e-300);
  for (std::size_t i = 0; i < s.rows(); ++i)
    for (std::size_t j = i + 1; j < s.cols(); ++j)
      if (std::abs(s(i, j) - s(j, i)) > rel_tol * scale) return false;
  return true;
}

SymmetricEigen sym_eigen(const Mat& s) {
  require_square(s, "sym_eigen");
  if (!is_symmetric(s)) throw Error(ErrorKind::NotSymmetric, "sym_eigen: matrix is not symmetric");
  const std::size_t n = s.rows();
  Mat a = s;
  // Exact symmetrisation so rotations act on a truly symmetric matrix.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = 0.5 * (a(i, j) + a(j, i));
  Mat v = Mat::identity(n);
  const double target = 1e-12 * a.frobenius_norm();

  auto off_norm = [&] {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) acc += a(i, j) * a(i, j);
    return std::sqrt(acc);
  };

  for (int sweep = 0; sweep < 100 && off_norm() > target; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - sn * vkq;
          v(k, q) = sn * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto i, auto j) { return a(i, i) < a(j, j); });
  SymmetricEigen out{Vec(n), Mat(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  return out;
}

EigenBounds sym_eig_bounds(const Mat& s) {
  const SymmetricEigen eig = sym_eigen(s);
  if (eig.values.dim() == 0) throw Error(ErrorKind::DimensionMismatch, "sym_eig_bounds: empty matrix");
  return {eig.values[0], eig.values[eig.values.dim() - 1]};
}

Mat solve_lyapunov(const Mat& a, const Mat& q) {
  require_square(a, "solve_lyapunov A");
  require_square(q, "solve_lyapunov Q");
  require_same_dim(a.rows(), q.rows(), "solve_lyapunov");
  if (!is_symmetric(q)) throw Error(ErrorKind::NotSymmetric, "solve_lyapunov: Q is not symmetric");
  if (sym_eig_bounds(q).min <= 0.0) {
    throw Error(ErrorKind::NotPositiveDefinite, "solve_lyapunov: Q is not positive definite");
  }
  const std::size_t n = a.rows();
  const Mat at = a.transpose();
  const Mat id = Mat::identity(n);
  // Column-stacked vec: vec(A^T P) = (I (x) A^T) vec P, vec(P A) = (A^T (x) I) vec P.
  const Mat system = kron(id, at) + kron(at, id);
  Vec rhs(n * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) rhs[j * n + i] = -q(i, j);

  auto solution = try_solve(system, rhs, 1e-12);
  if (!solution) {
    throw Error(ErrorKind::NotHurwitz, "solve_lyapunov: Kronecker system is singular "
                                       "(eigenvalue pair of A sums to zero)");
  }
  Mat p(n, n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) p(i, j) = (*solution)[j * n + i];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) p(i, j) = p(j, i) = 0.5 * (p(i, j) + p(j, i));

  // For Q > 0 the solution is positive definite exactly when A is Hurwitz.
  if (sym_eig_bounds(p).min <= 0.0) {
    throw Error(ErrorKind::NotHurwitz, "solve_lyapunov: A is not Hurwitz (P is not positive definite)");
  }
  return p;
}

Mat spd_sqrt(const Mat& s) {
  return spd_function(s, [](double v) { return std::sqrt(v); });
}

Mat spd_inv_sqrt(const Mat& s) {
  return spd_function(s, [](double v) { return 1.0 / std::sqrt(v); });
}

double spectral_norm(const Mat& a) {
  const EigenBounds b = sym_eig_bounds(a.transpose() * a);
  return std::sqrt(std::max(b.max, 0.0));
}

// ---------------------------------------------------------------- InnerProduct

InnerProduct::InnerProduct(Mat weight) : weight_(std::move(weight)) {
  require_square(weight_, "InnerProduct weight");
  if (!weight_.all_finite()) throw Error(ErrorKind::InvalidArgument, "InnerProduct: non-finite weight");
  if (!is_symmetric(weight_)) throw Error(ErrorKind::NotSymmetric, "InnerProduct: weight is not symmetric");
  sqrt_weight_ = spd_sqrt(weight_);
  inv_sqrt_weight_ = spd_inv_sqrt(weight_);
  identity_ = weight_ == Mat::identity(weight_.rows());
}

InnerProduct InnerProduct::euclidean(std::size_t dim) { return InnerProduct(Mat::identity(dim)); }

double InnerProduct::inner(std::span<const double> x, std::span<const double> y) const {
  require_same_dim(x.size(), dim(), "InnerProduct::inner");
  require_same_dim(y.size(), dim(), "InnerProduct::inner");
  const std::size_t n = dim();
  if (identity_) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = weight_.row_span(i);
    double r = 0.0;
    for (std::size_t j = 0; j < n; ++j) r += row[j] * y[j];
    acc += x[i] * r;
  }
  return acc;
}

double InnerProduct::norm(std::span<const double> x) const { return std::sqrt(std::max(inner(x, x), 0.0)); }

double weighted_sigma_min(const Mat& g, const InnerProduct& ip) {
  require_square(g, "weighted_sigma_min");
  require_same_dim(g.rows(), ip.dim(), "weighted_sigma_min");
  const Mat m = ip.sqrt_weight() * g * ip.inv_sqrt_weight();
  const EigenBounds b = sym_eig_bounds(m.transpose() * m);
  const double smin = std::sqrt(std::max(b.min, 0.0));
  const double smax = std::sqrt(std::max(b.max, 0.0));
  if (!(smin >= 1e-12 * smax) || smax == 0.0) {
    throw Error(ErrorKind::SingularG, "diffusion matrix is numerically singular");
  }
  return smin;
}

double noise_sigma_min(const Mat& g, const InnerProduct& ip) {
  require_square(g, "noise_sigma_min");
  require_same_dim(g.rows(), ip.dim(), "noise_sigma_min");
  const Mat m = ip.sqrt_weight() * g;
  const EigenBounds b = sym_eig_bounds(m.transpose() * m);
  const double smin = std::sqrt(std::max(b.min, 0.0));
  const double smax = std::sqrt(std::max(b.max, 0.0));
  if (!(smin >= 1e-12 * smax) || smax == 0.0) {
    throw Error(ErrorKind::SingularG, "diffusion matrix is numerically singular");
  }
  return smin;
}

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NotSymmetric: return "NotSymmetric";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::NotHurwitz: return "NotHurwitz";
    case ErrorKind::SingularG: return "SingularG";
    case ErrorKind::InvalidSet: return "InvalidSet";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::InitialStateOutsideDomain: return "InitialStateOutsideDomain";
    case ErrorKind::DriftNaN: return "DriftNaN";
    case ErrorKind::NoFiniteM: return "NoFiniteM";
    case ErrorKind::InfiniteR2: return "InfiniteR2";
    case ErrorKind::MissingLyapunov: return "MissingLyapunov";
    case ErrorKind::QuadratureFailure: return "QuadratureFailure";
    case ErrorKind::InvalidQ: return "InvalidQ";
    case ErrorKind::LipschitzViolation: return "LipschitzViolation";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace rsdec
