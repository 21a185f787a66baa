#include <doctest.h>

#include <Eigen/Dense>
#include <random>

#include "lodre/assembly.hpp"
#include "lodre/norms.hpp"
#include "oracles.hpp"

using namespace lodre;

namespace {

struct Fixture {
  MeshPtr coarse;
  MeshPtr fine;
  SparseMatrix M;
  SparseMatrix S;
  SparseMatrix P;

  Fixture() {
    const auto meshes = build_hierarchy(Domain::unit_square(), 2);
    coarse = meshes[1];
    fine = meshes[2];
    const DofMap dofs(*fine, BoundaryTreatment::EliminateDirichlet);
    const auto kappa = kappa_random_grid(Domain::unit_square(), 1.0 / 8.0, 0.05, 1.0, 9);
    M = assemble_mass(*fine, dofs);
    S = assemble_stiffness(*fine, kappa, dofs);
    P = prolongation(*coarse, *fine, BoundaryTreatment::EliminateDirichlet).matrix;
  }
};

Matrix lifted_difference(const LowRankFactor& xh, const LowRankFactor& xc,
                         const SparseMatrix& p) {
  const Matrix pd(p);
  return xh.to_dense() - pd * xc.to_dense() * pd.transpose();
}

// ||L_M^T E L_M||_2 with dense Cholesky M = L_M L_M^T.
double dense_l2(const Matrix& e, const Matrix& m) {
  const Matrix l = Eigen::LLT<Matrix>(m).matrixL();
  return oracle::symmetric_spectral_norm(l.transpose() * e * l);
}

// ||L_S^T E M L_S^{-T}||_2 with dense Cholesky S = L_S L_S^T.
double dense_v(const Matrix& e, const Matrix& m, const Matrix& s) {
  const Eigen::LLT<Matrix> llt(s);
  const Matrix l = llt.matrixL();
  const Matrix right = llt.matrixU().solve(Matrix::Identity(s.rows(), s.cols()));
  return oracle::spectral_norm(l.transpose() * e * m * right);
}

}  // namespace

TEST_CASE("fixture sizes") {
  const Fixture fx;
  CHECK(fx.M.rows() == 49);
  CHECK(fx.P.rows() == 49);
  CHECK(fx.P.cols() == 9);
}

TEST_CASE("norms against dense oracles") {
  const Fixture fx;
  const OperatorNormContext ctx(fx.M, fx.S);
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const bool psd = trial % 2 == 0;
    const auto xh = oracle::random_factor(49, 4, rng, psd);
    const auto xc = oracle::random_factor(9, 3, rng, psd);
    const Matrix e = lifted_difference(xh, xc, fx.P);
    const LiftedPair pair{xh, xc, fx.P, ctx};
    const double l2 = l2_operator_error(pair);
    const double v = v_operator_error(pair);
    const Matrix m(fx.M), s(fx.S);
    CHECK(l2 == doctest::Approx(dense_l2(e, m)).epsilon(1e-11));
    CHECK(v == doctest::Approx(dense_v(e, m, s)).epsilon(1e-10));
  }
}

TEST_CASE("degenerate arguments") {
  const Fixture fx;
  const OperatorNormContext ctx(fx.M, fx.S);
  std::mt19937_64 rng(6);

  SUBCASE("identical operators give zero") {
    const auto xc = oracle::random_factor(9, 3, rng, true);
    const LowRankFactor xh(Matrix(fx.P * xc.L), xc.D);
    const LiftedPair pair{xh, xc, fx.P, ctx};
    const double scale = dense_l2(xh.to_dense(), Matrix(fx.M));
    CHECK(l2_operator_error(pair) <= 1e-13 * scale);
    CHECK(v_operator_error(pair) <= 1e-12 * scale);
  }
  SUBCASE("zero coarse factor measures the fine one") {
    const auto xh = oracle::random_factor(49, 2, rng, true);
    const auto xc = LowRankFactor::zero(9);
    const LiftedPair pair{xh, xc, fx.P, ctx};
    CHECK(l2_operator_error(pair) ==
          doctest::Approx(dense_l2(xh.to_dense(), Matrix(fx.M))).epsilon(1e-11));
  }
  SUBCASE("both zero") {
    const auto xh = LowRankFactor::zero(49);
    const auto xc = LowRankFactor::zero(9);
    const LiftedPair pair{xh, xc, fx.P, ctx};
    CHECK(l2_operator_error(pair) == 0.0);
    CHECK(v_operator_error(pair) == 0.0);
  }
}

TEST_CASE("norm axioms") {
  const Fixture fx;
  const OperatorNormContext ctx(fx.M, fx.S);
  std::mt19937_64 rng(7);
  const auto a = oracle::random_factor(49, 3, rng, false);
  const auto b = oracle::random_factor(49, 2, rng, false);
  const auto zero = LowRankFactor::zero(9);
  auto l2 = [&](const LowRankFactor& x) {
    return l2_operator_error({x, zero, fx.P, ctx});
  };
  auto v = [&](const LowRankFactor& x) { return v_operator_error({x, zero, fx.P, ctx}); };

  CHECK(l2(scaled(a, -1.0)) == doctest::Approx(l2(a)).epsilon(1e-12));
  CHECK(v(scaled(a, -1.0)) == doctest::Approx(v(a)).epsilon(1e-12));
  CHECK(l2(scaled(a, 3.0)) == doctest::Approx(3.0 * l2(a)).epsilon(1e-12));
  CHECK(v(scaled(a, 3.0)) == doctest::Approx(3.0 * v(a)).epsilon(1e-12));
  CHECK(l2(add(a, b)) <= (l2(a) + l2(b)) * (1.0 + 1e-12));
  CHECK(v(add(a, b)) <= (v(a) + v(b)) * (1.0 + 1e-12));
}
