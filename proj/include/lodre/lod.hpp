#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "lodre/assembly.hpp"
#include "lodre/mesh.hpp"

namespace lodre {

/// Weighted Clement interpolant: (I_H v)(z) = <v, phi_z> / <1, phi_z> for each
/// coarse unknown z, as a sparse N_H x N_h matrix on fine unknowns.
struct ClementInterpolant {
  SparseMatrix matrix;
};

ClementInterpolant clement_interpolation(
    const TriMesh& fine, const TriMesh& coarse,
    BoundaryTreatment treatment = BoundaryTreatment::EliminateDirichlet);

/// omega_0 = {K}; omega_k = coarse elements sharing a vertex with omega_{k-1}.
/// Sorted element ids.
std::vector<int> patch_elements(const TriMesh& coarse, int element, int k);

/// ceil(log2(1/H)) with H the coarse mesh width, at least 1.
int default_patch_radius(const TriMesh& coarse);

struct CorrectorStats {
  int element = 0;
  int patch_elements = 0;
  int free_dofs = 0;
  int constraints = 0;
};

/// Columns Q_h^K phi_z for the coarse hats z of one element.
struct ElementCorrector {
  std::vector<Triplet> entries;  // (fine dof, coarse dof, value)
  CorrectorStats stats;
};

/// Shared data for corrector computations on a nested coarse/fine pair.
class LodProblem {
 public:
  LodProblem(MeshPtr fine, MeshPtr coarse, const CoefficientField& kappa);

  const TriMesh& fine() const { return *fine_; }
  const TriMesh& coarse() const { return *coarse_; }
  const DofMap& fine_dofs() const { return fine_dofs_; }
  const DofMap& coarse_dofs() const { return coarse_dofs_; }
  const SparseMatrix& fine_stiffness() const { return stiffness_; }
  const SparseMatrix& prolongation() const { return prolongation_; }
  const ClementInterpolant& interpolant() const { return interpolant_; }
  /// CRC-32 of the fine mesh and the sampled coefficient.
  std::uint32_t input_checksum() const { return checksum_; }

  /// Solves, for each coarse hat phi_z with z a vertex of `element`:
  /// q in V_f restricted to omega_k(element) with
  /// a(q, w) = int_element kappa grad phi_z . grad w for all such w.
  /// Nodes on the patch boundary are held at zero.
  ElementCorrector element_corrector(int element, int k) const;

  /// Sum over elements of the localized correctors, N_h x N_H. Elements are
  /// split across `threads` workers; summation order is fixed.
  SparseMatrix corrector(int k, int threads = 1,
                         std::vector<CorrectorStats>* stats = nullptr) const;

  /// Global correction: a(Qv, w) = a(v, w) for all w in ker I_H, v coarse.
  Matrix global_corrector() const;

  /// Energy errors of the k-patch element correctors against the
  /// full-domain ones, k = 1..k_max (root-sum-square over the element's hats).
  std::vector<double> decay_profile(int element, int k_max) const;

  /// Coarse elements reached when patches cover the whole mesh.
  int saturation_radius(int element) const;

 private:
  std::vector<double> element_rhs(int element, int coarse_vertex,
                                  const std::vector<int>& local_of) const;

  MeshPtr fine_;
  MeshPtr coarse_;
  CoefficientField kappa_;
  DofMap fine_dofs_;
  DofMap coarse_dofs_;
  SparseMatrix stiffness_;
  SparseMatrix prolongation_;
  ClementInterpolant interpolant_;
  std::vector<std::vector<int>> fine_triangles_of_element_;
  std::vector<std::vector<int>> fine_nodes_of_element_;
  std::vector<std::vector<int>> elements_of_fine_node_;
  std::uint32_t checksum_ = 0;
};

/// Corrected basis R_h = prolongation - Q_h and the corrected system matrices.
struct LodBasis {
  int k = 1;
  SparseMatrix Rh;
  LqrSystem system;  // M_ms, S_ms, B_ms, C_ms with Q and Rw copied
  std::vector<CorrectorStats> stats;
  std::uint32_t input_checksum = 0;
  double setup_seconds = 0.0;
};

/// `fine_system` must be assembled on the fine unknowns of `problem`.
LodBasis build_lod_basis(const LodProblem& problem, int k, const LqrSystem& fine_system,
                         int threads = 1);

/// R^T A R for sparse symmetric A.
SparseMatrix galerkin_product(const SparseMatrix& r, const SparseMatrix& a);

/// Binary dump: "LODB", uint32 k, uint32 checksum, uint64 rows, cols, nnz, then
/// (int64 row, int64 col, float64 value) triplets.
void write_lod_basis(std::ostream& os, const LodBasis& basis);
/// Reads k, checksum and Rh; the corrected matrices are not stored.
LodBasis read_lod_basis(std::istream& is);

}  // namespace lodre
