#include "lodre/norms.hpp"

#include <Eigen/SparseCholesky>
#include <stdexcept>

namespace lodre {

struct OperatorNormContext::Factors {
  Eigen::SimplicialLLT<SparseMatrix> mass;
  Eigen::SimplicialLLT<SparseMatrix> stiffness;
  SparseMatrix mass_l;
  SparseMatrix stiffness_l;
};

OperatorNormContext::OperatorNormContext(SparseMatrix M, SparseMatrix S)
    : M_(std::move(M)), S_(std::move(S)), factors_(std::make_unique<Factors>()) {
  factors_->mass.compute(M_);
  if (factors_->mass.info() != Eigen::Success)
    throw std::runtime_error("OperatorNormContext: mass matrix is not SPD");
  factors_->stiffness.compute(S_);
  if (factors_->stiffness.info() != Eigen::Success)
    throw std::runtime_error("OperatorNormContext: stiffness matrix is not SPD");
  factors_->mass_l = factors_->mass.matrixL();
  factors_->stiffness_l = factors_->stiffness.matrixL();
}

OperatorNormContext::~OperatorNormContext() = default;
OperatorNormContext::OperatorNormContext(OperatorNormContext&&) noexcept = default;
OperatorNormContext& OperatorNormContext::operator=(OperatorNormContext&&) noexcept =
    default;

Matrix OperatorNormContext::mass_factor_transpose_times(const Matrix& x) const {
  const Matrix px = factors_->mass.permutationP() * x;
  return factors_->mass_l.transpose() * px;
}

Matrix OperatorNormContext::stiffness_factor_transpose_times(const Matrix& x) const {
  const Matrix px = factors_->stiffness.permutationP() * x;
  return factors_->stiffness_l.transpose() * px;
}

Matrix OperatorNormContext::stiffness_factor_solve(const Matrix& x) const {
  Matrix px = factors_->stiffness.permutationP() * x;
  factors_->stiffness_l.triangularView<Eigen::Lower>().solveInPlace(px);
  return px;
}

namespace {

void check(const LiftedPair& pair) {
  const Eigen::Index n = pair.context.n();
  if (pair.fine.n() != n || pair.lift.rows() != n || pair.lift.cols() != pair.coarse.n())
    throw std::invalid_argument("LiftedPair: inconsistent dimensions");
}

// [A_h, A_c] columns and blockdiag(D_h, -D_c).
Matrix stacked(const Matrix& a, const Matrix& b) {
  Matrix v(a.rows(), a.cols() + b.cols());
  v << a, b;
  return v;
}

Matrix difference_core(const LowRankFactor& fine, const LowRankFactor& coarse) {
  const Eigen::Index rh = fine.rank();
  const Eigen::Index rc = coarse.rank();
  Matrix d = Matrix::Zero(rh + rc, rh + rc);
  d.topLeftCorner(rh, rh) = fine.D;
  d.bottomRightCorner(rc, rc) = -coarse.D;
  return d;
}

// Upper-triangular R of a thin QR factorization.
Matrix thin_r(const Matrix& a) {
  Eigen::HouseholderQR<Matrix> qr(a);
  const Eigen::Index k = std::min(a.rows(), a.cols());
  return qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
}

}  // namespace

double l2_operator_error(const LiftedPair& pair) {
  check(pair);
  const Matrix lifted = pair.lift * pair.coarse.L;
  const Matrix v = stacked(pair.context.mass_factor_transpose_times(pair.fine.L),
                           pair.context.mass_factor_transpose_times(lifted));
  if (v.cols() == 0) return 0.0;
  const Matrix r = thin_r(v);
  Matrix core = r * difference_core(pair.fine, pair.coarse) * r.transpose();
  core = 0.5 * (core + core.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(core, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

double v_operator_error(const LiftedPair& pair) {
  check(pair);
  const Matrix lifted = pair.lift * pair.coarse.L;
  const auto& ctx = pair.context;
  const Matrix g1 = stacked(ctx.stiffness_factor_transpose_times(pair.fine.L),
                            ctx.stiffness_factor_transpose_times(lifted));
  if (g1.cols() == 0) return 0.0;
  const Matrix g2 = stacked(ctx.stiffness_factor_solve(ctx.mass() * pair.fine.L),
                            ctx.stiffness_factor_solve(ctx.mass() * lifted));
  const Matrix core =
      thin_r(g1) * difference_core(pair.fine, pair.coarse) * thin_r(g2).transpose();
  Eigen::JacobiSVD<Matrix> svd(core);
  return svd.singularValues()(0);
}

}  // namespace lodre
