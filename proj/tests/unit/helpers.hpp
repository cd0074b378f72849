#pragma once

#include <Eigen/Dense>
#include <random>

#include "rsdec/linalg.hpp"

namespace test {

inline Eigen::MatrixXd to_eigen(const rsdec::Mat& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  return e;
}

inline rsdec::Mat random_mat(std::mt19937_64& gen, std::size_t r, std::size_t c, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  rsdec::Mat m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = n(gen);
  return m;
}

inline rsdec::Vec random_vec(std::mt19937_64& gen, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  rsdec::Vec v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = d(gen);
  return v;
}

inline rsdec::Mat random_spd(std::mt19937_64& gen, std::size_t n) {
  const rsdec::Mat a = random_mat(gen, n, n);
  return a.transpose() * a + static_cast<double>(n) * rsdec::Mat::identity(n);
}

inline double max_abs_diff(const rsdec::Mat& a, const Eigen::MatrixXd& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) d = std::max(d, std::abs(a(i, j) - b(i, j)));
  return d;
}

}  // namespace test
