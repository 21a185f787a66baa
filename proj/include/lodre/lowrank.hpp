#pragma once

#include <iosfwd>

#include "lodre/types.hpp"

namespace lodre {

/// Symmetric operator X = L * D * L^T with tall-skinny L (n x r) and small
/// symmetric D (r x r). r == 0 is the zero operator.
struct LowRankFactor {
  Matrix L;
  Matrix D;

  LowRankFactor() = default;
  LowRankFactor(Matrix l, Matrix d);

  static LowRankFactor zero(Eigen::Index n);

  Eigen::Index n() const { return L.rows(); }
  Eigen::Index rank() const { return L.cols(); }
  Matrix to_dense() const;
};

/// Column compression: L = QR, R D R^T = W diag(lambda) W^T, drop eigenvalues
/// with |lambda| < tol * max|lambda|. The result has orthonormal L and diagonal
/// D ordered by decreasing |lambda|.
LowRankFactor compress(const LowRankFactor& f, double tol);

/// Solution operator of X' = -X K X with K = B Rw^{-1} B^T:
/// (I + t X K)^{-1} X, evaluated in rank-r arithmetic.
LowRankFactor apply_exp_G(double t, const LowRankFactor& f, const Matrix& B,
                          const Matrix& Rw);

/// X1 + X2 by concatenation; no compression.
LowRankFactor add(const LowRankFactor& a, const LowRankFactor& b);

LowRankFactor scaled(const LowRankFactor& f, double c);

/// Smallest eigenvalue of the symmetric D slot (0 for r == 0).
double min_core_eigenvalue(const LowRankFactor& f);

/// Binary dump: "LRF1", uint64 n, uint64 r, then L and D as little-endian
/// column-major float64.
void write_factor(std::ostream& os, const LowRankFactor& f);
LowRankFactor read_factor(std::istream& is);

}  // namespace lodre
