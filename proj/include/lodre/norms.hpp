#pragma once

#include <memory>

#include "lodre/lowrank.hpp"
#include "lodre/types.hpp"

namespace lodre {

/// Fine-space mass and stiffness matrices with their sparse Cholesky factors.
///
/// With a fill-reducing permutation P, P A P^T = L L^T, so A = (P^T L)(P^T L)^T;
/// the helpers below apply the factor W = P^T L (W^T x = L^T P x and
/// W^{-1} x = L^{-1} P x).
class OperatorNormContext {
 public:
  OperatorNormContext(SparseMatrix M, SparseMatrix S);
  ~OperatorNormContext();
  OperatorNormContext(OperatorNormContext&&) noexcept;
  OperatorNormContext& operator=(OperatorNormContext&&) noexcept;

  const SparseMatrix& mass() const { return M_; }
  const SparseMatrix& stiffness() const { return S_; }
  Eigen::Index n() const { return M_.rows(); }

  /// W_M^T x
  Matrix mass_factor_transpose_times(const Matrix& x) const;
  /// W_S^T x
  Matrix stiffness_factor_transpose_times(const Matrix& x) const;
  /// W_S^{-1} x
  Matrix stiffness_factor_solve(const Matrix& x) const;

 private:
  struct Factors;
  SparseMatrix M_;
  SparseMatrix S_;
  std::unique_ptr<Factors> factors_;
};

/// Fine factor X_h and coarse (or LOD) factor X_c with the lifting matrix
/// (prolongation or corrected basis) mapping coarse to fine coefficients.
struct LiftedPair {
  const LowRankFactor& fine;
  const LowRankFactor& coarse;
  const SparseMatrix& lift;
  const OperatorNormContext& context;
};

/// || W_M^T (X_h - P X_c P^T) W_M ||_2
double l2_operator_error(const LiftedPair& pair);

/// || W_S^T (X_h - P X_c P^T) M W_S^{-T} ||_2
double v_operator_error(const LiftedPair& pair);

}  // namespace lodre
