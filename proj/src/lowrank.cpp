#include "lodre/lowrank.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace lodre {

static_assert(std::endian::native == std::endian::little,
              "factor dumps assume a little-endian host");

LowRankFactor::LowRankFactor(Matrix l, Matrix d) : L(std::move(l)), D(std::move(d)) {
  if (D.rows() != L.cols() || D.cols() != L.cols())
    throw std::invalid_argument("LowRankFactor: D must be r x r");
}

LowRankFactor LowRankFactor::zero(Eigen::Index n) {
  return {Matrix(n, 0), Matrix(0, 0)};
}

Matrix LowRankFactor::to_dense() const {
  if (rank() == 0) return Matrix::Zero(n(), n());
  return L * D * L.transpose();
}

namespace {

Matrix symmetrized(const Matrix& a) { return 0.5 * (a + a.transpose()); }

}  // namespace

LowRankFactor compress(const LowRankFactor& f, double tol) {
  const Eigen::Index n = f.n();
  const Eigen::Index r = f.rank();
  if (r == 0) return LowRankFactor::zero(n);

  Eigen::HouseholderQR<Matrix> qr(f.L);
  const Eigen::Index k = std::min(n, r);
  const Matrix q = qr.householderQ() * Matrix::Identity(n, k);
  const Matrix rfac = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  const Matrix core = symmetrized(rfac * f.D * rfac.transpose());

  Eigen::SelfAdjointEigenSolver<Matrix> eig(core);
  const Vector& lambda = eig.eigenvalues();
  const double largest = lambda.cwiseAbs().maxCoeff();
  if (largest == 0.0) return LowRankFactor::zero(n);

  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < k; ++i) {
    if (std::abs(lambda(i)) >= tol * largest && lambda(i) != 0.0) keep.push_back(i);
  }
  std::stable_sort(keep.begin(), keep.end(), [&](Eigen::Index a, Eigen::Index b) {
    return std::abs(lambda(a)) > std::abs(lambda(b));
  });

  const auto kept = static_cast<Eigen::Index>(keep.size());
  Matrix w(k, kept);
  Matrix d = Matrix::Zero(kept, kept);
  for (Eigen::Index j = 0; j < kept; ++j) {
    w.col(j) = eig.eigenvectors().col(keep[j]);
    d(j, j) = lambda(keep[j]);
  }
  return {q * w, std::move(d)};
}

LowRankFactor apply_exp_G(double t, const LowRankFactor& f, const Matrix& B,
                          const Matrix& Rw) {
  if (t < 0.0) throw std::invalid_argument("apply_exp_G: t must be non-negative");
  const Eigen::Index r = f.rank();
  if (r == 0 || t == 0.0 || B.cols() == 0) return f;

  Eigen::LLT<Matrix> rw_llt(Rw);
  if (rw_llt.info() != Eigen::Success)
    throw std::invalid_argument("apply_exp_G: Rw must be symmetric positive definite");
  // G = L^T B Rw^{-1} B^T L = W^T W with W = chol(Rw)^{-1} B^T L.
  const Matrix w = rw_llt.matrixL().solve(B.transpose() * f.L);
  const Matrix g = w.transpose() * w;

  // Congruent symmetric form D^{1/2} (I + t D^{1/2} G D^{1/2})^{-1} D^{1/2}
  // whenever D is positive semidefinite.
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrized(f.D));
  const Vector& lambda = eig.eigenvalues();
  const double scale = std::max(lambda.cwiseAbs().maxCoeff(), 1e-300);
  if (lambda.minCoeff() >= -1e-14 * scale) {
    const Matrix root = eig.eigenvectors() *
                        lambda.cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                        eig.eigenvectors().transpose();
    const Matrix inner = Matrix::Identity(r, r) + t * root * g * root;
    Eigen::LLT<Matrix> inner_llt(symmetrized(inner));
    if (inner_llt.info() != Eigen::Success)
      throw std::runtime_error("apply_exp_G: singular inner system");
    return {f.L, symmetrized(root * inner_llt.solve(root))};
  }

  const Matrix inner = Matrix::Identity(r, r) + t * f.D * g;
  Eigen::PartialPivLU<Matrix> lu(inner);
  if (!(std::abs(lu.determinant()) > 0.0))
    throw std::runtime_error("apply_exp_G: singular inner system");
  return {f.L, symmetrized(lu.solve(f.D))};
}

LowRankFactor add(const LowRankFactor& a, const LowRankFactor& b) {
  if (a.n() != b.n()) throw std::invalid_argument("add: dimension mismatch");
  const Eigen::Index ra = a.rank();
  const Eigen::Index rb = b.rank();
  Matrix l(a.n(), ra + rb);
  l << a.L, b.L;
  Matrix d = Matrix::Zero(ra + rb, ra + rb);
  d.topLeftCorner(ra, ra) = a.D;
  d.bottomRightCorner(rb, rb) = b.D;
  return {std::move(l), std::move(d)};
}

LowRankFactor scaled(const LowRankFactor& f, double c) { return {f.L, c * f.D}; }

double min_core_eigenvalue(const LowRankFactor& f) {
  if (f.rank() == 0) return 0.0;
  return Eigen::SelfAdjointEigenSolver<Matrix>(symmetrized(f.D), Eigen::EigenvaluesOnly)
      .eigenvalues()
      .minCoeff();
}

namespace {

constexpr std::array<char, 4> kMagic{'L', 'R', 'F', '1'};

void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

}  // namespace

void write_factor(std::ostream& os, const LowRankFactor& f) {
  os.write(kMagic.data(), kMagic.size());
  write_u64(os, static_cast<std::uint64_t>(f.n()));
  write_u64(os, static_cast<std::uint64_t>(f.rank()));
  os.write(reinterpret_cast<const char*>(f.L.data()),
           static_cast<std::streamsize>(f.L.size() * sizeof(double)));
  os.write(reinterpret_cast<const char*>(f.D.data()),
           static_cast<std::streamsize>(f.D.size() * sizeof(double)));
}

LowRankFactor read_factor(std::istream& is) {
  std::array<char, 4> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kMagic) throw std::runtime_error("read_factor: bad magic");
  const auto n = static_cast<Eigen::Index>(read_u64(is));
  const auto r = static_cast<Eigen::Index>(read_u64(is));
  Matrix l(n, r);
  Matrix d(r, r);
  is.read(reinterpret_cast<char*>(l.data()), static_cast<std::streamsize>(l.size() * sizeof(double)));
  is.read(reinterpret_cast<char*>(d.data()), static_cast<std::streamsize>(d.size() * sizeof(double)));
  if (!is) throw std::runtime_error("read_factor: truncated data");
  return {std::move(l), std::move(d)};
}

}  // namespace lodre
