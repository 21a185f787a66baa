#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "lodre/mesh.hpp"
#include "lodre/types.hpp"

namespace lodre {

/// Scalar piecewise-constant diffusion coefficient.
///
/// Either a grid of square cells of size epsilon anchored at the origin
/// (half-open cells, points on the far edge clamp to the last cell), or a
/// background value with horizontal stripes centered at heights
/// j / (n_stripes + 1).
class CoefficientField {
 public:
  static CoefficientField constant(double value);
  static CoefficientField grid(double epsilon, int nx, int ny,
                               std::vector<double> values);
  static CoefficientField stripes(int n_stripes, double width, double background,
                                  double stripe_value);

  double value(const Point& p) const;
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }

  bool is_grid() const { return kind_ == Kind::Grid; }
  double epsilon() const { return epsilon_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  const std::vector<double>& cell_values() const { return values_; }

  /// `epsilon` on the first line, then one line of cell values per grid row
  /// (bottom row first). Only grid fields can be written.
  void write(std::ostream& os) const;
  static CoefficientField read(std::istream& is);

 private:
  enum class Kind { Grid, Stripes };
  Kind kind_ = Kind::Grid;
  double epsilon_ = 1.0;
  int nx_ = 1;
  int ny_ = 1;
  std::vector<double> values_{1.0};
  int n_stripes_ = 0;
  double width_ = 0.0;
  double background_ = 1.0;
  double stripe_value_ = 1.0;
  double alpha_ = 1.0;
  double beta_ = 1.0;
};

/// I.i.d. values uniform on [lo, hi] over the cells of the domain's bounding box.
/// Uses std::mt19937_64 with a manual 53-bit conversion so the field is
/// identical on every platform.
CoefficientField kappa_random_grid(const Domain& domain, double epsilon, double lo,
                                   double hi, std::uint64_t seed);

CoefficientField kappa_stripes(int n_stripes, double width, double background,
                               double stripe_value);

/// Axis-aligned square [x0, x0 + side] x [y0, y0 + side].
struct Square {
  double x0 = 0.0;
  double y0 = 0.0;
  double side = 0.0;
};

/// Matrices of M x' = -S x + B u, y = C x with cost weights Q and Rw.
struct LqrSystem {
  SparseMatrix M;
  SparseMatrix S;
  Matrix B;
  Matrix C;
  Matrix Q;
  Matrix Rw;

  int n() const { return static_cast<int>(M.rows()); }
  int m() const { return static_cast<int>(B.cols()); }
  int p() const { return static_cast<int>(C.rows()); }
  /// Throws std::invalid_argument on inconsistent dimensions.
  void validate() const;
};

SparseMatrix assemble_mass(const TriMesh& mesh, const DofMap& dofs);
SparseMatrix assemble_mass(const TriMesh& mesh);

/// kappa is sampled at triangle centroids.
SparseMatrix assemble_stiffness(const TriMesh& mesh, const CoefficientField& kappa,
                                const DofMap& dofs);
SparseMatrix assemble_stiffness(const TriMesh& mesh, const CoefficientField& kappa);

/// Stiffness contributions of the triangles of `mesh` listed in `triangles` only.
SparseMatrix assemble_stiffness_subset(const TriMesh& mesh,
                                       const CoefficientField& kappa,
                                       const DofMap& dofs,
                                       const std::vector<int>& triangles);

/// Column j holds the integrals of the hats over square j, computed exactly by
/// clipping each triangle against the square.
Matrix assemble_input_squares(const TriMesh& mesh, const std::vector<Square>& squares,
                              const DofMap& dofs);
Matrix assemble_input_squares(const TriMesh& mesh, const std::vector<Square>& squares);

/// 1 x n row of hat integrals over Omega.
Matrix assemble_output_mean(const TriMesh& mesh, const DofMap& dofs);
Matrix assemble_output_mean(const TriMesh& mesh);
/// 1 x n row of hat integrals over the square divided by its area.
Matrix assemble_output_square_mean(const TriMesh& mesh, const Square& square,
                                   const DofMap& dofs);

}  // namespace lodre
