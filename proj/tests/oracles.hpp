#pragma once

// Dense reference computations used only by the tests.

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "lodre/assembly.hpp"
#include "lodre/lowrank.hpp"

namespace oracle {

using lodre::Matrix;
using lodre::Vector;

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix a(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) a(i, j) = g(rng);
  return a;
}

inline lodre::LowRankFactor random_factor(Eigen::Index n, Eigen::Index r,
                                          std::mt19937_64& rng, bool psd) {
  Matrix d = random_matrix(r, r, rng);
  d = psd ? Matrix(d * d.transpose()) : Matrix(0.5 * (d + d.transpose()));
  return {random_matrix(n, r, rng), d};
}

inline double spectral_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues()(0);
}

inline double symmetric_spectral_norm(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (a + a.transpose()));
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

/// exp(-t M^{-1} S) for small dense SPD pairs via the generalized eigenproblem.
inline Matrix dense_propagator(const Matrix& M, const Matrix& S, double t) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ges(S, M);
  const Matrix& v = ges.eigenvectors();  // v^T M v = I, S v = M v diag(l)
  const Vector decay = (-t * ges.eigenvalues().array()).exp().matrix();
  return v * decay.asDiagonal() * v.transpose() * M;
}

/// Right-hand side of X' = -X S M^{-1} - M^{-1} S X + M^{-1} C^T Q C M^{-1}
///                         - X B Rw^{-1} B^T X.
struct RiccatiRhs {
  Matrix minv_s;  // M^{-1} S
  Matrix w;       // M^{-1} C^T Q C M^{-1}
  Matrix k;       // B Rw^{-1} B^T

  explicit RiccatiRhs(const lodre::LqrSystem& sys) {
    const Matrix m(sys.M);
    const Matrix s(sys.S);
    Eigen::LLT<Matrix> llt(m);
    minv_s = llt.solve(s);
    const Matrix z = llt.solve(Matrix(sys.C.transpose()));
    w = z * sys.Q * z.transpose();
    k = sys.B * sys.Rw.llt().solve(sys.B.transpose());
  }

  Matrix operator()(const Matrix& x) const {
    const Matrix xs = x * minv_s.transpose();
    return -xs - xs.transpose() + w - x * k * x;
  }
};

/// Classical four-stage Runge-Kutta on the vectorized Riccati equation.
inline Matrix dense_riccati_rk4(const lodre::LqrSystem& sys, const Matrix& x0, double T,
                                int steps) {
  const RiccatiRhs f(sys);
  const double h = T / steps;
  Matrix x = x0;
  for (int i = 0; i < steps; ++i) {
    const Matrix k1 = f(x);
    const Matrix k2 = f(x + 0.5 * h * k1);
    const Matrix k3 = f(x + 0.5 * h * k2);
    const Matrix k4 = f(x + h * k3);
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return x;
}

}  // namespace oracle
