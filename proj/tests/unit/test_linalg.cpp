#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "rsdec/error.hpp"

using namespace rsdec;

TEST_CASE("lyapunov solve: diagonal case") {
  const Mat P = solve_lyapunov(-1.0 * Mat::identity(2), 2.0 * Mat::identity(2));
  CHECK(test::max_abs_diff(P, Eigen::MatrixXd::Identity(2, 2)) < 1e-12);
}

TEST_CASE("lyapunov solve matches a dense Kronecker solve") {
  const Mat A{{0, 1}, {-2, -3}};
  const Mat Q = Mat::identity(2);
  const Mat P = solve_lyapunov(A, Q);
  const Eigen::MatrixXd a = test::to_eigen(A);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(2, 2);
  Eigen::MatrixXd K(4, 4);
  // vec(A^T P + P A) = (I kron A^T + A^T kron I) vec(P), column-major vec.
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      K.block(2 * i, 2 * j, 2, 2) = I(i, j) * a.transpose() + a(j, i) * I;
    }
  Eigen::VectorXd q(4);
  q << -1, 0, 0, -1;
  const Eigen::VectorXd p = K.fullPivLu().solve(q);
  const Eigen::MatrixXd P_ref = Eigen::Map<const Eigen::MatrixXd>(p.data(), 2, 2);
  CHECK(test::max_abs_diff(P, P_ref) < 1e-12);
}

TEST_CASE("lyapunov solve: residual and definiteness on random stable matrices") {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + trial % 5;
    Mat A = test::random_mat(gen, n, n);
    const double shift = Eigen::EigenSolver<Eigen::MatrixXd>(test::to_eigen(A)).eigenvalues().real().maxCoeff();
    A -= (shift + 0.5) * Mat::identity(n);
    const Mat Q = test::random_spd(gen, n);
    const Mat P = solve_lyapunov(A, Q);
    const Mat R = A.transpose() * P + P * A + Q;
    CHECK(R.frobenius_norm() / Q.frobenius_norm() <= 1e-10);
    CHECK(sym_eig_bounds(P).min > 0.0);
  }
}

TEST_CASE("lyapunov solve rejects non-Hurwitz A") {
  try {
    solve_lyapunov(Mat{{0, 1}, {0, 0}}, Mat::identity(2));
    FAIL("expected NotHurwitz");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NotHurwitz);
  }
}

TEST_CASE("symmetric eigenvalue bounds") {
  auto b = sym_eig_bounds(Mat{{1, 0}, {0, 4}});
  CHECK(b.min == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(b.max == doctest::Approx(4.0).epsilon(1e-12));
  b = sym_eig_bounds(Mat{{2, 1}, {1, 2}});
  CHECK(b.min == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(b.max == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("Jacobi eigen-solver agrees with Eigen and satisfies Rayleigh bounds") {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 10; ++trial) {
    const Mat a = test::random_mat(gen, 5, 5);
    const Mat s = a + a.transpose();
    const SymmetricEigen se = sym_eigen(s);
    const Eigen::VectorXd ref = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(test::to_eigen(s)).eigenvalues();
    for (int k = 0; k < 5; ++k) CHECK(std::abs(se.values[k] - ref(k)) <= 1e-10 * std::max(1.0, std::abs(ref(k))));
    const auto b = sym_eig_bounds(s);
    for (int v = 0; v < 100; ++v) {
      Vec u = test::random_vec(gen, 5);
      u *= 1.0 / norm2(u);
      const double q = quadratic_form(u, s, u);
      CHECK(q >= b.min - 1e-12);
      CHECK(q <= b.max + 1e-12);
    }
  }
}

TEST_CASE("weighted sigma_min examples") {
  CHECK(weighted_sigma_min(2.0 * Mat::identity(3), InnerProduct::euclidean(3)) == doctest::Approx(2.0));
  CHECK(weighted_sigma_min(Mat{{1, 0}, {0, 3}}, InnerProduct::euclidean(2)) == doctest::Approx(1.0));
  CHECK(weighted_sigma_min(Mat::identity(2), InnerProduct(Mat{{4, 0}, {0, 1}})) == doctest::Approx(1.0));
}

TEST_CASE("weighted sigma_min with W = I matches the Euclidean smallest singular value") {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Mat g = test::random_mat(gen, 4, 4) + 3.0 * Mat::identity(4);
    const double ref = Eigen::JacobiSVD<Eigen::MatrixXd>(test::to_eigen(g)).singularValues().minCoeff();
    CHECK(weighted_sigma_min(g, InnerProduct::euclidean(4)) == doctest::Approx(ref).epsilon(1e-10));
  }
}

TEST_CASE("weighted sigma_min with a general weight") {
  std::mt19937_64 gen(5);
  const Mat w = test::random_spd(gen, 3);
  const Mat g = test::random_mat(gen, 3, 3) + 3.0 * Mat::identity(3);
  const Eigen::MatrixXd W = test::to_eigen(w);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(W);
  const Eigen::MatrixXd sw = es.operatorSqrt();
  const Eigen::MatrixXd isw = es.operatorInverseSqrt();
  const double ref = Eigen::JacobiSVD<Eigen::MatrixXd>(sw * test::to_eigen(g) * isw).singularValues().minCoeff();
  CHECK(weighted_sigma_min(g, InnerProduct(w)) == doctest::Approx(ref).epsilon(1e-10));
  const double noise_ref = Eigen::JacobiSVD<Eigen::MatrixXd>(sw * test::to_eigen(g)).singularValues().minCoeff();
  CHECK(noise_sigma_min(g, InnerProduct(w)) == doctest::Approx(noise_ref).epsilon(1e-10));
}

TEST_CASE("singular diffusion is rejected") {
  try {
    weighted_sigma_min(Mat{{1, 0}, {0, 0}}, InnerProduct::euclidean(2));
    FAIL("expected SingularG");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SingularG);
  }
}

TEST_CASE("spd square roots and inner products") {
  std::mt19937_64 gen(9);
  const Mat w = test::random_spd(gen, 4);
  const Mat r = spd_sqrt(w);
  CHECK((r * r - w).frobenius_norm() < 1e-10 * w.frobenius_norm());
  CHECK((spd_inv_sqrt(w) * r - Mat::identity(4)).frobenius_norm() < 1e-10);
  const InnerProduct ip(w);
  const Vec x = test::random_vec(gen, 4);
  const Vec y = test::random_vec(gen, 4);
  CHECK(ip.inner(x, y) == doctest::Approx(quadratic_form(x, w, y)).epsilon(1e-12));
  CHECK(ip.norm(x) == doctest::Approx(std::sqrt(quadratic_form(x, w, x))).epsilon(1e-12));
}

TEST_CASE("dense solve, inverse and spectral norm agree with Eigen") {
  std::mt19937_64 gen(13);
  const Mat a = test::random_mat(gen, 5, 5) + 4.0 * Mat::identity(5);
  const Vec b = test::random_vec(gen, 5);
  const Vec x = solve(a, b);
  CHECK(norm2(a * x - b) < 1e-12 * (1.0 + norm2(b)));
  CHECK(test::max_abs_diff(inverse(a), test::to_eigen(a).inverse()) < 1e-10);
  const Mat rect = test::random_mat(gen, 3, 5);
  const double ref = Eigen::JacobiSVD<Eigen::MatrixXd>(test::to_eigen(rect)).singularValues().maxCoeff();
  CHECK(spectral_norm(rect) == doctest::Approx(ref).epsilon(1e-10));
}

TEST_CASE("kron and block_diag shapes") {
  const Mat k = kron(Mat{{1, 2}, {3, 4}}, Mat::identity(2));
  CHECK(k.rows() == 4);
  CHECK(k(3, 1) == 3.0);
  CHECK(k(2, 1) == 0.0);
  const Mat bd = block_diag(Mat{{2}}, Mat::identity(2));
  CHECK(bd.rows() == 3);
  CHECK(bd(0, 0) == 2.0);
  CHECK(bd(0, 1) == 0.0);
  CHECK(bd(2, 2) == 1.0);
}
