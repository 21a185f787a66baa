#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <sstream>

#include "lodre/lowrank.hpp"
#include "oracles.hpp"

using namespace lodre;

namespace {

double dense_error(const LowRankFactor& a, const Matrix& b) {
  return oracle::spectral_norm(a.to_dense() - b);
}

// (I + t X K)^{-1} X with K = B Rw^{-1} B^T, straight from the definition.
Matrix dense_exp_G(double t, const Matrix& x, const Matrix& b, const Matrix& rw) {
  const Matrix k = b * rw.llt().solve(b.transpose());
  const Eigen::Index n = x.rows();
  return (Matrix::Identity(n, n) + t * x * k).lu().solve(x);
}

}  // namespace

TEST_CASE("compression") {
  std::mt19937_64 rng(1);

  SUBCASE("exact for a random factor at tol = 0") {
    const auto f = oracle::random_factor(50, 8, rng, false);
    const auto c = compress(f, 0.0);
    CHECK(c.rank() == 8);
    CHECK(dense_error(c, f.to_dense()) <= 1e-12 * oracle::spectral_norm(f.to_dense()));
    // Orthonormal columns.
    const Matrix g = c.L.transpose() * c.L;
    CHECK((g - Matrix::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-13);
  }
  SUBCASE("idempotent") {
    const auto f = oracle::random_factor(40, 6, rng, true);
    const auto c1 = compress(f, 1e-10);
    const auto c2 = compress(c1, 1e-10);
    CHECK(c2.rank() == c1.rank());
    CHECK(dense_error(c2, c1.to_dense()) <= 1e-12 * oracle::spectral_norm(c1.to_dense()));
  }
  SUBCASE("duplicate columns collapse") {
    const auto f = oracle::random_factor(30, 4, rng, true);
    LowRankFactor dup(Matrix(30, 8), Matrix::Zero(8, 8));
    dup.L << f.L, f.L;
    dup.D.topLeftCorner(4, 4) = 0.5 * f.D;
    dup.D.bottomRightCorner(4, 4) = 0.5 * f.D;
    const auto c = compress(dup, 1e-10);
    CHECK(c.rank() == 4);
    CHECK(dense_error(c, f.to_dense()) <= 1e-11 * oracle::spectral_norm(f.to_dense()));
  }
  SUBCASE("error bounded by the dropped eigenvalues") {
    // Orthonormal L with a graded spectrum; dropping is then exact truncation.
    const Matrix q = oracle::random_matrix(60, 10, rng).householderQr().householderQ() *
                     Matrix::Identity(60, 10);
    Vector lambda(10);
    for (int i = 0; i < 10; ++i) lambda(i) = std::pow(10.0, -i);
    const LowRankFactor f(q, lambda.asDiagonal());
    const double tol = 3e-5;
    const auto c = compress(f, tol);
    double dropped = 0.0;
    for (int i = 0; i < 10; ++i)
      if (lambda(i) < tol) dropped += lambda(i);
    CHECK(c.rank() == 5);
    CHECK(dense_error(c, f.to_dense()) <= 1.01 * dropped);
  }
  SUBCASE("zero operator") {
    const auto c = compress(LowRankFactor::zero(10), 1e-10);
    CHECK(c.rank() == 0);
    CHECK(c.n() == 10);
    const auto z = compress(LowRankFactor(Matrix::Zero(10, 3), Matrix::Identity(3, 3)), 1e-10);
    CHECK(z.rank() == 0);
  }
}

TEST_CASE("quadratic flow") {
  std::mt19937_64 rng(2);

  SUBCASE("t = 0 is the identity") {
    const auto f = oracle::random_factor(20, 5, rng, true);
    const Matrix b = oracle::random_matrix(20, 2, rng);
    const auto g = apply_exp_G(0.0, f, b, Matrix::Identity(2, 2));
    CHECK(dense_error(g, f.to_dense()) < 1e-13 * oracle::spectral_norm(f.to_dense()));
  }
  SUBCASE("scalar closed form") {
    const double x = 0.7, b = 1.3, r = 2.0, t = 0.4;
    const LowRankFactor f(Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, x));
    const auto g = apply_exp_G(t, f, Matrix::Constant(1, 1, b), Matrix::Constant(1, 1, r));
    CHECK(g.to_dense()(0, 0) == doctest::Approx(x / (1.0 + t * x * b * b / r)).epsilon(1e-14));
  }
  SUBCASE("matches the dense formula") {
    const auto f = oracle::random_factor(20, 5, rng, true);
    const Matrix b = oracle::random_matrix(20, 3, rng);
    Matrix rw = oracle::random_matrix(3, 3, rng);
    rw = rw * rw.transpose() + Matrix::Identity(3, 3);
    const double t = 0.3;
    const Matrix ref = dense_exp_G(t, f.to_dense(), b, rw);
    const auto g = apply_exp_G(t, f, b, rw);
    CHECK(dense_error(g, ref) <= 1e-10 * oracle::spectral_norm(ref));
  }
  SUBCASE("preserves positive semidefiniteness") {
    for (int trial = 0; trial < 10; ++trial) {
      const auto f = oracle::random_factor(25, 4, rng, true);
      const Matrix b = oracle::random_matrix(25, 2, rng);
      const auto g = apply_exp_G(1.5, f, b, Matrix::Identity(2, 2));
      Eigen::SelfAdjointEigenSolver<Matrix> eig(g.to_dense());
      CHECK(eig.eigenvalues().minCoeff() >= -1e-10 * eig.eigenvalues().cwiseAbs().maxCoeff());
      // The flow only removes energy: 0 <= G(t)X <= X.
      Eigen::SelfAdjointEigenSolver<Matrix> diff(f.to_dense() - g.to_dense());
      CHECK(diff.eigenvalues().minCoeff() >= -1e-10 * eig.eigenvalues().cwiseAbs().maxCoeff());
    }
  }
  SUBCASE("indefinite core") {
    const auto f = oracle::random_factor(15, 4, rng, false);
    const Matrix b = 0.2 * oracle::random_matrix(15, 2, rng);
    const double t = 0.05;
    const Matrix ref = dense_exp_G(t, f.to_dense(), b, Matrix::Identity(2, 2));
    const auto g = apply_exp_G(t, f, b, Matrix::Identity(2, 2));
    CHECK(dense_error(g, ref) <= 1e-10 * oracle::spectral_norm(ref));
    CHECK((g.D - g.D.transpose()).cwiseAbs().maxCoeff() < 1e-13 * g.D.cwiseAbs().maxCoeff());
  }
  SUBCASE("rank zero stays rank zero") {
    const auto g = apply_exp_G(1.0, LowRankFactor::zero(9), Matrix::Ones(9, 1),
                               Matrix::Identity(1, 1));
    CHECK(g.rank() == 0);
  }
}

TEST_CASE("sum, scaling and core eigenvalues") {
  std::mt19937_64 rng(3);
  const auto a = oracle::random_factor(12, 3, rng, true);
  const auto b = oracle::random_factor(12, 2, rng, false);
  const auto s = add(a, b);
  CHECK(s.rank() == 5);
  CHECK(dense_error(s, a.to_dense() + b.to_dense()) < 1e-13 * oracle::spectral_norm(s.to_dense()));
  CHECK(dense_error(scaled(a, -2.0), -2.0 * a.to_dense()) <
        1e-13 * oracle::spectral_norm(a.to_dense()));
  CHECK(min_core_eigenvalue(a) >= 0.0);
  CHECK(min_core_eigenvalue(LowRankFactor::zero(4)) == 0.0);
  CHECK_THROWS(add(a, oracle::random_factor(13, 1, rng, true)));
}

TEST_CASE("factor dump round trip") {
  std::mt19937_64 rng(4);
  const auto f = oracle::random_factor(17, 3, rng, false);
  std::stringstream ss;
  write_factor(ss, f);
  CHECK(ss.str().substr(0, 4) == "LRF1");
  CHECK(ss.str().size() == 4 + 16 + 8 * (17 * 3 + 9));
  const auto back = read_factor(ss);
  CHECK(back.L == f.L);
  CHECK(back.D == f.D);

  std::stringstream bad("XXXX");
  CHECK_THROWS(read_factor(bad));
}
