#pragma once

// Small dense real linear algebra. Matrices here are at most a few tens of
// rows, so everything is row-major std::vector storage and O(n^3) (or worse)
// algorithms are fine.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

namespace rsdec {

class Vec {
 public:
  Vec() = default;
  explicit Vec(std::size_t dim, double fill = 0.0) : data_(dim, fill) {}
  Vec(std::initializer_list<double> values) : data_(values) {}
  explicit Vec(std::vector<double> values) : data_(std::move(values)) {}
  explicit Vec(std::span<const double> values) : data_(values.begin(), values.end()) {}

  std::size_t dim() const noexcept { return data_.size(); }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> span() noexcept { return data_; }
  std::span<const double> span() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  Vec& operator+=(const Vec& other);
  Vec& operator-=(const Vec& other);
  Vec& operator*=(double s);

  // Sub-vector [offset, offset + count).
  Vec segment(std::size_t offset, std::size_t count) const;

  bool all_finite() const noexcept;

  friend bool operator==(const Vec&, const Vec&) = default;

 private:
  std::vector<double> data_;
};

Vec operator+(Vec a, const Vec& b);
Vec operator-(Vec a, const Vec& b);
Vec operator*(double s, Vec v);
Vec operator-(Vec v);

double dot(const Vec& a, const Vec& b);
double norm2(const Vec& v);
Vec concat(const Vec& a, const Vec& b);

class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0);
  Mat(std::size_t rows, std::size_t cols, std::vector<double> row_major);
  // Nested initializer: Mat{{1, 2}, {3, 4}}.
  Mat(std::initializer_list<std::initializer_list<double>> rows);

  static Mat identity(std::size_t n);
  static Mat diagonal(const Vec& d);
  static Mat from_rows(const std::vector<std::vector<double>>& rows);
  // Column vector (n x 1) or row vector (1 x n) views of a Vec.
  static Mat column(const Vec& v);
  static Mat row(const Vec& v);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool is_square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<const double> entries() const noexcept { return data_; }
  std::span<const double> row_span(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }

  Mat transpose() const;
  double trace() const;
  double frobenius_norm() const;
  bool all_finite() const noexcept;

  Mat& operator+=(const Mat& other);
  Mat& operator-=(const Mat& other);
  Mat& operator*=(double s);

  friend bool operator==(const Mat&, const Mat&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Mat operator+(Mat a, const Mat& b);
Mat operator-(Mat a, const Mat& b);
Mat operator*(double s, Mat m);
Mat operator*(const Mat& a, const Mat& b);
Vec operator*(const Mat& a, const Vec& v);

// y = A x without allocation; y must not alias x.
void multiply_into(const Mat& a, std::span<const double> x, std::span<double> y);

Mat block_diag(const Mat& a, const Mat& b);
Mat kron(const Mat& a, const Mat& b);

// x^T S y for square S.
double quadratic_form(const Vec& x, const Mat& s, const Vec& y);

// Dense solve with partial pivoting. Throws InvalidArgument when a pivot
// falls below `singular_tol` times the largest absolute entry.
Vec solve(Mat a, Vec b, double singular_tol = 1e-13);
Mat inverse(const Mat& a);

bool is_symmetric(const Mat& s, double rel_tol = 1e-12);

struct SymmetricEigen {
  Vec values;    // ascending
  Mat vectors;   // column k is the eigenvector of values[k]
};

// Cyclic Jacobi; stops when the off-diagonal Frobenius norm drops below
// 1e-12 * ||S||_F.
SymmetricEigen sym_eigen(const Mat& s);

struct EigenBounds {
  double min;
  double max;
};

EigenBounds sym_eig_bounds(const Mat& s);

// Unique P with A^T P + P A = -Q, solved through the Kronecker system.
Mat solve_lyapunov(const Mat& a, const Mat& q);

// Matrix function f(S) = V f(D) V^T of a symmetric positive definite S.
Mat spd_sqrt(const Mat& s);
Mat spd_inv_sqrt(const Mat& s);

// Induced Euclidean 2-norm (largest singular value).
double spectral_norm(const Mat& a);

// <x, y> = x^T W y for a symmetric positive definite weight W.
class InnerProduct {
 public:
  explicit InnerProduct(Mat weight);
  static InnerProduct euclidean(std::size_t dim);

  std::size_t dim() const noexcept { return weight_.rows(); }
  const Mat& weight() const noexcept { return weight_; }
  const Mat& sqrt_weight() const noexcept { return sqrt_weight_; }
  const Mat& inv_sqrt_weight() const noexcept { return inv_sqrt_weight_; }
  bool is_identity() const noexcept { return identity_; }

  double inner(std::span<const double> x, std::span<const double> y) const;
  double norm(std::span<const double> x) const;
  double inner(const Vec& x, const Vec& y) const { return inner(x.span(), y.span()); }
  double norm(const Vec& x) const { return norm(x.span()); }

 private:
  Mat weight_;
  Mat sqrt_weight_;
  Mat inv_sqrt_weight_;
  bool identity_ = false;
};

// Smallest singular value of W^{1/2} G W^{-1/2}, i.e. of G as an operator on
// (R^n, ip). Throws SingularG when sigma_min < 1e-12 sigma_max.
double weighted_sigma_min(const Mat& g, const InnerProduct& ip);

// Smallest gain min ||G w||_W / ||w||_2: G driven by Euclidean white noise,
// measured in the ip norm. This is what the reflection coupling's separation
// process sees.
double noise_sigma_min(const Mat& g, const InnerProduct& ip);

}  // namespace rsdec
