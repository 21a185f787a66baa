#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <vector>

#include "lodre/assembly.hpp"
#include "lodre/lowrank.hpp"

namespace lodre {

struct SolverConfig {
  double T = 1.0;
  int N_t = 256;
  /// SDIRK2 steps per time step in the closed-loop simulation.
  int substeps = 4;
  /// Relative stopping tolerance of the Lanczos exponential action.
  double expm_tol = 1e-12;
  /// Gauss-Legendre nodes per panel for the integral term.
  int quad_nodes = 3;
  /// Panels [0, t/1.5^(P-1)], ..., [t/1.5, t] graded toward 0; 1 = plain Gauss.
  int quad_panels = 24;
  double compress_tol = 1e-10;
  bool store_checkpoints = false;
  /// Per-step log lines (step, time, rank, wall seconds; tab separated).
  std::ostream* log = nullptr;

  double tau() const { return T / N_t; }
  void validate() const;
};

/// Nodes and weights of the n-point Gauss-Legendre rule on [a, b].
void gauss_legendre(int n, double a, double b, std::vector<double>& nodes,
                    std::vector<double>& weights);

/// Action of exp(-t M^{-1} S) on tall matrices by shift-and-invert Lanczos in
/// the M inner product; the accuracy does not depend on the stiffness of
/// M^{-1} S. Also provides single steps of the L-stable two-stage SDIRK method
/// for M v' = -S v + g.
class ExponentialAction {
 public:
  explicit ExponentialAction(SparseMatrix M, SparseMatrix S, double tol = 1e-12,
                             int max_iterations = 100);
  ~ExponentialAction();
  ExponentialAction(ExponentialAction&&) noexcept;
  ExponentialAction& operator=(ExponentialAction&&) noexcept;

  Matrix apply(double t, const Matrix& v);
  /// One SDIRK step of size h for M v' = -S v + g with g constant.
  Matrix step(double h, const Matrix& v, const Matrix& g);
  /// M^{-1} v.
  Matrix solve_mass(const Matrix& v);
  /// Lanczos iterations of the last apply (largest over its column blocks).
  int last_iterations() const { return last_iterations_; }

 private:
  struct Factor;
  Factor& factor(double c);
  Matrix lanczos(double t, const Matrix& v);

  SparseMatrix M_;
  SparseMatrix S_;
  double tol_;
  int max_iterations_;
  int last_iterations_ = 0;
  double last_shift_ = 0.0;
  std::map<double, std::unique_ptr<Factor>> cache_;
};

struct PhaseTimings {
  double exp_F = 0.0;
  double exp_G = 0.0;
  double total = 0.0;
};

/// Low-rank Strang splitting for M X' M = -M X S - S X M + C^T Q C - M X B Rw^{-1} B^T X M,
/// written as X' = F(X) + G(X) with the affine part F and the quadratic part G.
class RiccatiSplitting {
 public:
  RiccatiSplitting(const LqrSystem& system, SolverConfig cfg);

  /// exp(tF) X = E(t) X E(t)^T + int_0^t E(s) Z Q Z^T E(s)^T ds with
  /// E(s) = exp(-s M^{-1} S) and Z = M^{-1} C^T.
  LowRankFactor exp_F(double t, const LowRankFactor& x);
  LowRankFactor exp_G(double t, const LowRankFactor& x) const;
  LowRankFactor step(double tau, const LowRankFactor& x);
  /// Compressed factor of the integral term of exp(tF), cached per t.
  const LowRankFactor& integral_term(double t);

  const SolverConfig& config() const { return cfg_; }
  const PhaseTimings& timings() const { return timings_; }

 private:
  const LqrSystem& system_;
  SolverConfig cfg_;
  ExponentialAction expm_;
  Matrix z_;
  std::map<double, LowRankFactor> integral_cache_;
  PhaseTimings timings_;
};

LowRankFactor apply_exp_F(double t, const LowRankFactor& x, const LqrSystem& system,
                          const SolverConfig& cfg);
LowRankFactor strang_step(double tau, const LowRankFactor& x, const LqrSystem& system,
                          const SolverConfig& cfg);

struct DreSolution {
  LowRankFactor final;
  /// X at t_j = j tau for j = 0..N_t when checkpoints are stored.
  std::vector<LowRankFactor> checkpoints;
  /// Rank after each step.
  std::vector<int> rank_history;
  /// Smallest D-slot eigenvalue over max |eigenvalue| after each step.
  std::vector<double> min_relative_eigenvalue;
  PhaseTimings timings;
};

DreSolution solve_dre(const LqrSystem& system, const LowRankFactor& x0,
                      const SolverConfig& cfg);

struct ClosedLoopResult {
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<Vector> inputs;
  double cost = 0.0;
};

/// Integrates M x' = -S x + B u with u(t) = -Rw^{-1} B^T X(T - t_j) M x(t_j)
/// held constant on [t_j, t_{j+1}); the cost integrates <Q C x, C x> + <Rw u, u>
/// by the trapezoidal rule. With `zero_input` the feedback is switched off.
ClosedLoopResult simulate_closed_loop(const LqrSystem& system, const DreSolution& solution,
                                      const Vector& x0, const SolverConfig& cfg,
                                      bool zero_input = false);

}  // namespace lodre
