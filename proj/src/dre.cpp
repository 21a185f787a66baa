#include "lodre/dre.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace lodre {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Two-stage, second order, L-stable SDIRK.
const double kGamma = 1.0 - std::sqrt(0.5);

// Columns per Lanczos block and shift relative to t.
constexpr Eigen::Index kBlock = 16;
constexpr double kShiftRatio = 0.1;
// Ratio 2 leaves the top panel too coarse for moderately stiff modes.
constexpr double kPanelRatio = 1.5;

}  // namespace

void SolverConfig::validate() const {
  if (!(T > 0.0)) throw std::invalid_argument("SolverConfig: T must be positive");
  if (N_t < 1) throw std::invalid_argument("SolverConfig: N_t must be >= 1");
  if (substeps < 1) throw std::invalid_argument("SolverConfig: substeps must be >= 1");
  if (quad_nodes < 1) throw std::invalid_argument("SolverConfig: quad_nodes must be >= 1");
  if (quad_panels < 1) throw std::invalid_argument("SolverConfig: quad_panels must be >= 1");
  if (!(expm_tol > 0.0)) throw std::invalid_argument("SolverConfig: expm_tol must be positive");
  if (compress_tol < 0.0)
    throw std::invalid_argument("SolverConfig: compress_tol must be non-negative");
}

void gauss_legendre(int n, double a, double b, std::vector<double>& nodes,
                    std::vector<double>& weights) {
  // Golub-Welsch on the Jacobi matrix of the Legendre recurrence.
  Matrix jacobi = Matrix::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double beta = k / std::sqrt(4.0 * k * k - 1.0);
    jacobi(k, k - 1) = jacobi(k - 1, k) = beta;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(jacobi);
  nodes.resize(n);
  weights.resize(n);
  for (int k = 0; k < n; ++k) {
    const double v0 = eig.eigenvectors()(0, k);
    nodes[k] = 0.5 * (a + b) + 0.5 * (b - a) * eig.eigenvalues()(k);
    weights[k] = (b - a) * v0 * v0;
  }
}

struct ExponentialAction::Factor {
  Eigen::SimplicialLLT<SparseMatrix> llt;
};

ExponentialAction::ExponentialAction(SparseMatrix M, SparseMatrix S, double tol,
                                     int max_iterations)
    : M_(std::move(M)), S_(std::move(S)), tol_(tol), max_iterations_(max_iterations) {
  if (!(tol_ > 0.0)) throw std::invalid_argument("ExponentialAction: tol must be positive");
  if (max_iterations_ < 2)
    throw std::invalid_argument("ExponentialAction: max_iterations must be >= 2");
}

ExponentialAction::~ExponentialAction() = default;
ExponentialAction::ExponentialAction(ExponentialAction&&) noexcept = default;
ExponentialAction& ExponentialAction::operator=(ExponentialAction&&) noexcept = default;

ExponentialAction::Factor& ExponentialAction::factor(double c) {
  auto it = cache_.find(c);
  if (it != cache_.end()) return *it->second;
  // Shifted factors are only reused while t stays fixed; keep the mass factor
  // and the most recent shift.
  for (auto i = cache_.begin(); i != cache_.end();) {
    if (i->first != 0.0 && i->first != last_shift_) i = cache_.erase(i);
    else ++i;
  }
  auto f = std::make_unique<Factor>();
  const SparseMatrix a = c == 0.0 ? M_ : SparseMatrix(M_ + c * S_);
  f->llt.compute(a);
  if (f->llt.info() != Eigen::Success)
    throw std::runtime_error("ExponentialAction: factorization of M + c S failed");
  if (c != 0.0) last_shift_ = c;
  return *cache_.emplace(c, std::move(f)).first->second;
}

Matrix ExponentialAction::solve_mass(const Matrix& v) {
  if (v.cols() == 0) return v;
  return factor(0.0).llt.solve(v);
}

Matrix ExponentialAction::step(double h, const Matrix& v, const Matrix& g) {
  auto& f = factor(kGamma * h);
  Matrix rhs = M_ * v;
  if (g.size() != 0) rhs += kGamma * h * g;
  const Matrix y1 = f.llt.solve(rhs);
  rhs = M_ * v - h * (1.0 - kGamma) * (S_ * y1);
  if (g.size() != 0) rhs += h * g;
  return f.llt.solve(rhs);
}

Matrix ExponentialAction::apply(double t, const Matrix& v) {
  if (t < 0.0) throw std::invalid_argument("ExponentialAction: t must be non-negative");
  if (t == 0.0 || v.cols() == 0) return v;
  Matrix out(v.rows(), v.cols());
  last_iterations_ = 0;
  for (Eigen::Index c0 = 0; c0 < v.cols(); c0 += kBlock) {
    const Eigen::Index w = std::min<Eigen::Index>(kBlock, v.cols() - c0);
    out.middleCols(c0, w) = lanczos(t, v.middleCols(c0, w));
  }
  return out;
}

// Shift-and-invert Lanczos: the operator (M + g S)^{-1} M is self-adjoint in
// the M inner product with spectrum mu = 1 / (1 + g lambda) in (0, 1], and
// exp(-t lambda) = f(mu) = exp(-(t / g) (1 / mu - 1)). Each column runs its
// own recurrence; the solves are shared.
Matrix ExponentialAction::lanczos(double t, const Matrix& v) {
  const Eigen::Index n = v.rows();
  const Eigen::Index r = v.cols();
  const double g = kShiftRatio * t;
  auto& f = factor(g);

  std::vector<Matrix> basis;
  std::vector<Matrix> mass_basis;
  Matrix alpha = Matrix::Zero(max_iterations_, r);
  Matrix beta = Matrix::Zero(max_iterations_, r);
  Vector beta0(r);
  std::vector<bool> done(r, false);
  std::vector<int> size(r, 0);
  std::vector<int> streak(r, 0);
  std::vector<Vector> coeffs(r);

  Matrix mv = M_ * v;
  Matrix q(n, r);
  for (Eigen::Index c = 0; c < r; ++c) {
    beta0(c) = std::sqrt(std::max(0.0, v.col(c).dot(mv.col(c))));
    if (beta0(c) == 0.0) {
      done[c] = true;
      q.col(c).setZero();
      mv.col(c).setZero();
    } else {
      q.col(c) = v.col(c) / beta0(c);
      mv.col(c) /= beta0(c);
    }
  }
  basis.push_back(q);
  mass_basis.push_back(mv);

  auto evaluate = [&](Eigen::Index c, int m) {
    Matrix tri = Matrix::Zero(m, m);
    for (int i = 0; i < m; ++i) {
      tri(i, i) = alpha(i, c);
      if (i + 1 < m) tri(i, i + 1) = tri(i + 1, i) = beta(i, c);
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(tri);
    Vector fx(m);
    for (int i = 0; i < m; ++i) {
      const double mu = eig.eigenvalues()(i);
      fx(i) = mu > 0.0 ? std::exp(-(t / g) * (1.0 / mu - 1.0)) : 0.0;
    }
    const Matrix& z = eig.eigenvectors();
    return Vector(z * fx.cwiseProduct(z.row(0).transpose()));
  };

  int j = 0;
  for (; j < max_iterations_; ++j) {
    if (std::all_of(done.begin(), done.end(), [](bool d) { return d; })) break;
    Matrix w = f.llt.solve(mass_basis[j]);
    Matrix mw = M_ * w;
    for (Eigen::Index c = 0; c < r; ++c) {
      if (done[c]) continue;
      alpha(j, c) = w.col(c).dot(mass_basis[j].col(c));
      // Plain three-term recurrence; the function approximation tolerates the
      // loss of orthogonality.
      w.col(c) -= alpha(j, c) * basis[j].col(c);
      mw.col(c) -= alpha(j, c) * mass_basis[j].col(c);
      if (j > 0) {
        w.col(c) -= beta(j - 1, c) * basis[j - 1].col(c);
        mw.col(c) -= beta(j - 1, c) * mass_basis[j - 1].col(c);
      }
      const double b = std::sqrt(std::max(0.0, w.col(c).dot(mw.col(c))));
      beta(j, c) = b;
      const int m = j + 1;
      Vector y = evaluate(c, m);
      const double change =
          (y.head(m - 1) - (m > 1 ? coeffs[c] : Vector::Zero(0))).squaredNorm() +
          y(m - 1) * y(m - 1);
      coeffs[c] = y;
      size[c] = m;
      // A single small update can be a plateau; ask for three in a row.
      streak[c] = m > 1 && std::sqrt(change) <= tol_ * y.norm() ? streak[c] + 1 : 0;
      if (b <= 1e-14 || streak[c] >= 3) {
        done[c] = true;
        w.col(c).setZero();
        mw.col(c).setZero();
      } else {
        w.col(c) /= b;
        mw.col(c) /= b;
      }
    }
    basis.push_back(std::move(w));
    mass_basis.push_back(std::move(mw));
  }
  last_iterations_ = std::max(last_iterations_, j);
  for (Eigen::Index c = 0; c < r; ++c)
    if (!done[c] && beta0(c) > 0.0)
      throw std::runtime_error("ExponentialAction: Lanczos did not converge");

  Matrix out = Matrix::Zero(n, r);
  for (Eigen::Index c = 0; c < r; ++c) {
    if (beta0(c) == 0.0) continue;
    for (int i = 0; i < size[c]; ++i) out.col(c) += coeffs[c](i) * basis[i].col(c);
    out.col(c) *= beta0(c);
  }
  return out;
}

RiccatiSplitting::RiccatiSplitting(const LqrSystem& system, SolverConfig cfg)
    : system_(system), cfg_(cfg), expm_(system.M, system.S, cfg.expm_tol) {
  system_.validate();
  cfg_.validate();
  z_ = expm_.solve_mass(system_.C.transpose());
}

const LowRankFactor& RiccatiSplitting::integral_term(double t) {
  auto it = integral_cache_.find(t);
  if (it != integral_cache_.end()) return it->second;

  const Eigen::Index p = system_.p();
  const int panels = cfg_.quad_panels;
  const int q = cfg_.quad_nodes;
  LowRankFactor result = LowRankFactor::zero(system_.n());
  if (t > 0.0 && p > 0) {
    Matrix l(system_.n(), static_cast<Eigen::Index>(panels) * q * p);
    Matrix d = Matrix::Zero(l.cols(), l.cols());
    std::vector<double> nodes, weights;
    Eigen::Index col = 0;
    for (int k = 0; k < panels; ++k) {
      const double a = k == 0 ? 0.0 : t * std::pow(kPanelRatio, k - panels);
      const double b = t * std::pow(kPanelRatio, k + 1 - panels);
      gauss_legendre(q, a, b, nodes, weights);
      for (int i = 0; i < q; ++i) {
        l.middleCols(col, p) = expm_.apply(nodes[i], z_);
        d.block(col, col, p, p) = weights[i] * system_.Q;
        col += p;
      }
    }
    result = compress(LowRankFactor(std::move(l), std::move(d)), cfg_.compress_tol);
  }
  return integral_cache_.emplace(t, std::move(result)).first->second;
}

LowRankFactor RiccatiSplitting::exp_F(double t, const LowRankFactor& x) {
  if (t < 0.0) throw std::invalid_argument("exp_F: t must be non-negative");
  if (t == 0.0) return x;
  const auto start = Clock::now();
  LowRankFactor propagated{expm_.apply(t, x.L), x.D};
  LowRankFactor result =
      compress(add(propagated, integral_term(t)), cfg_.compress_tol);
  timings_.exp_F += seconds_since(start);
  return result;
}

LowRankFactor RiccatiSplitting::exp_G(double t, const LowRankFactor& x) const {
  return compress(apply_exp_G(t, x, system_.B, system_.Rw), cfg_.compress_tol);
}

LowRankFactor RiccatiSplitting::step(double tau, const LowRankFactor& x) {
  if (!(tau > 0.0)) throw std::invalid_argument("strang step: tau must be positive");
  LowRankFactor y = exp_F(0.5 * tau, x);
  const auto start = Clock::now();
  y = exp_G(tau, y);
  timings_.exp_G += seconds_since(start);
  return exp_F(0.5 * tau, y);
}

LowRankFactor apply_exp_F(double t, const LowRankFactor& x, const LqrSystem& system,
                          const SolverConfig& cfg) {
  RiccatiSplitting splitting(system, cfg);
  return splitting.exp_F(t, x);
}

LowRankFactor strang_step(double tau, const LowRankFactor& x, const LqrSystem& system,
                          const SolverConfig& cfg) {
  RiccatiSplitting splitting(system, cfg);
  return splitting.step(tau, x);
}

DreSolution solve_dre(const LqrSystem& system, const LowRankFactor& x0,
                      const SolverConfig& cfg) {
  if (x0.n() != system.n())
    throw std::invalid_argument("solve_dre: initial factor has wrong dimension");
  const auto start = Clock::now();
  RiccatiSplitting splitting(system, cfg);
  const double tau = cfg.tau();

  DreSolution sol;
  sol.final = x0;
  if (cfg.store_checkpoints) sol.checkpoints.push_back(x0);
  sol.rank_history.reserve(cfg.N_t);
  for (int j = 0; j < cfg.N_t; ++j) {
    sol.final = splitting.step(tau, sol.final);
    sol.rank_history.push_back(static_cast<int>(sol.final.rank()));
    double rel = 0.0;
    if (sol.final.rank() > 0) {
      const double largest = sol.final.D.cwiseAbs().maxCoeff();
      rel = min_core_eigenvalue(sol.final) / largest;
    }
    sol.min_relative_eigenvalue.push_back(rel);
    if (cfg.store_checkpoints) sol.checkpoints.push_back(sol.final);
    if (cfg.log) {
      *cfg.log << (j + 1) << '\t' << (j + 1) * tau << '\t' << sol.final.rank() << '\t'
               << seconds_since(start) << '\n';
    }
  }
  sol.timings = splitting.timings();
  sol.timings.total = seconds_since(start);
  return sol;
}

ClosedLoopResult simulate_closed_loop(const LqrSystem& system, const DreSolution& solution,
                                      const Vector& x0, const SolverConfig& cfg,
                                      bool zero_input) {
  system.validate();
  const int nt = cfg.N_t;
  if (!zero_input && static_cast<int>(solution.checkpoints.size()) != nt + 1)
    throw std::invalid_argument("simulate_closed_loop: missing checkpoints");
  if (x0.size() != system.n())
    throw std::invalid_argument("simulate_closed_loop: x0 has wrong dimension");

  const double tau = cfg.tau();
  ExponentialAction expm(system.M, system.S);
  Eigen::LLT<Matrix> rw_llt(system.Rw);

  auto feedback = [&](int j, const Vector& x) -> Vector {
    if (zero_input) return Vector::Zero(system.m());
    const LowRankFactor& f = solution.checkpoints[nt - j];
    if (f.rank() == 0) return Vector::Zero(system.m());
    const Vector xm = system.M * x;
    const Vector v = f.L * (f.D * (f.L.transpose() * xm));
    return -rw_llt.solve(system.B.transpose() * v);
  };
  auto running_cost = [&](const Vector& x, const Vector& u) {
    const Vector y = system.C * x;
    return y.dot(system.Q * y) + u.dot(system.Rw * u);
  };

  ClosedLoopResult out;
  Vector x = x0;
  double prev = 0.0;
  for (int j = 0; j <= nt; ++j) {
    const Vector u = feedback(j, x);
    out.times.push_back(j * tau);
    out.states.push_back(x);
    out.inputs.push_back(u);
    const double current = running_cost(x, u);
    if (j > 0) out.cost += 0.5 * tau * (prev + current);
    prev = current;
    if (j < nt) {
      const Vector g = system.B * u;
      for (int k = 0; k < cfg.substeps; ++k) x = expm.step(tau / cfg.substeps, x, g);
    }
  }
  return out;
}

}  // namespace lodre
