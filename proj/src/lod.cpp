#include "lodre/lod.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <array>
#include <atomic>
#include <boost/crc.hpp>
#include <chrono>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace lodre {

ClementInterpolant clement_interpolation(const TriMesh& fine, const TriMesh& coarse,
                                         BoundaryTreatment treatment) {
  if (!fine.descends_from(coarse))
    throw std::invalid_argument("clement_interpolation: meshes are not nested");
  const DofMap fine_all(fine, BoundaryTreatment::KeepAll);
  const SparseMatrix p = prolongation(coarse, fine, BoundaryTreatment::KeepAll).matrix;
  const SparseMatrix mass = assemble_mass(fine, fine_all);
  const Vector hat_integrals = assemble_output_mean(fine, fine_all).row(0).transpose();
  const Vector denominators = p.transpose() * hat_integrals;
  // Row z: <phi_i^h, phi_z^H> / <1, phi_z^H>.
  const SparseMatrix weighted = SparseMatrix(p.transpose() * mass).pruned();

  const DofMap fine_dofs(fine, treatment);
  const DofMap coarse_dofs(coarse, treatment);
  std::vector<Triplet> entries;
  for (int col = 0; col < weighted.outerSize(); ++col) {
    const int fdof = fine_dofs.dof(col);
    if (fdof < 0) continue;
    for (SparseMatrix::InnerIterator it(weighted, col); it; ++it) {
      const int cdof = coarse_dofs.dof(static_cast<int>(it.row()));
      if (cdof < 0) continue;
      entries.emplace_back(cdof, fdof, it.value() / denominators(it.row()));
    }
  }
  ClementInterpolant result;
  result.matrix.resize(coarse_dofs.size(), fine_dofs.size());
  result.matrix.setFromTriplets(entries.begin(), entries.end());
  return result;
}

namespace {

std::vector<std::vector<int>> elements_of_vertex(const TriMesh& mesh) {
  std::vector<std::vector<int>> result(mesh.num_vertices());
  for (int t = 0; t < mesh.num_triangles(); ++t)
    for (int v : mesh.triangle(t)) result[v].push_back(t);
  return result;
}

std::vector<int> grow_patch(const TriMesh& coarse,
                            const std::vector<std::vector<int>>& adjacency, int element,
                            int k) {
  std::vector<char> in(coarse.num_triangles(), 0);
  std::vector<int> layer{element};
  in[element] = 1;
  for (int step = 0; step < k && !layer.empty(); ++step) {
    std::vector<int> next;
    for (int t : layer) {
      for (int v : coarse.triangle(t)) {
        for (int nb : adjacency[v]) {
          if (in[nb]) continue;
          in[nb] = 1;
          next.push_back(nb);
        }
      }
    }
    layer = std::move(next);
  }
  std::vector<int> result;
  for (int t = 0; t < coarse.num_triangles(); ++t)
    if (in[t]) result.push_back(t);
  return result;
}

}  // namespace

std::vector<int> patch_elements(const TriMesh& coarse, int element, int k) {
  if (k < 0) throw std::invalid_argument("patch_elements: k must be non-negative");
  if (element < 0 || element >= coarse.num_triangles())
    throw std::out_of_range("patch_elements: invalid element");
  return grow_patch(coarse, elements_of_vertex(coarse), element, k);
}

int default_patch_radius(const TriMesh& coarse) {
  const double h = coarse.mesh_width();
  return std::max(1, static_cast<int>(std::ceil(std::log2(1.0 / h) - 1e-12)));
}

LodProblem::LodProblem(MeshPtr fine, MeshPtr coarse, const CoefficientField& kappa)
    : fine_(std::move(fine)),
      coarse_(std::move(coarse)),
      kappa_(kappa),
      fine_dofs_(*fine_, BoundaryTreatment::EliminateDirichlet),
      coarse_dofs_(*coarse_, BoundaryTreatment::EliminateDirichlet) {
  if (!fine_->descends_from(*coarse_))
    throw std::invalid_argument("LodProblem: meshes are not nested");
  stiffness_ = assemble_stiffness(*fine_, kappa_, fine_dofs_);
  prolongation_ = lodre::prolongation(*coarse_, *fine_).matrix;
  interpolant_ = clement_interpolation(*fine_, *coarse_);

  fine_triangles_of_element_.resize(coarse_->num_triangles());
  fine_nodes_of_element_.resize(coarse_->num_triangles());
  elements_of_fine_node_.resize(fine_->num_vertices());
  for (int t = 0; t < fine_->num_triangles(); ++t) {
    const int parent = fine_->ancestor_triangle(t, *coarse_);
    fine_triangles_of_element_[parent].push_back(t);
    for (int v : fine_->triangle(t)) {
      auto& elems = elements_of_fine_node_[v];
      if (std::find(elems.begin(), elems.end(), parent) == elems.end()) {
        elems.push_back(parent);
        fine_nodes_of_element_[parent].push_back(v);
      }
    }
  }

  boost::crc_32_type crc;
  for (const auto& p : fine_->vertices()) crc.process_bytes(&p, sizeof p);
  for (const auto& t : fine_->triangles()) crc.process_bytes(t.data(), sizeof t);
  for (int t = 0; t < fine_->num_triangles(); ++t) {
    const double k = kappa_.value(fine_->centroid(t));
    crc.process_bytes(&k, sizeof k);
  }
  checksum_ = crc.checksum();
}

std::vector<double> LodProblem::element_rhs(int element, int coarse_vertex,
                                            const std::vector<int>& local_of) const {
  // phi_z restricted to the coarse element is the barycentric coordinate of z;
  // its gradient is constant there.
  const auto& ctri = coarse_->triangle(element);
  const Point& a = coarse_->vertex(ctri[0]);
  const Point& b = coarse_->vertex(ctri[1]);
  const Point& c = coarse_->vertex(ctri[2]);
  const double det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
  const std::array<Point, 3> corners{a, b, c};
  const Point& p1 = corners[(coarse_vertex + 1) % 3];
  const Point& p2 = corners[(coarse_vertex + 2) % 3];
  const double cgx = (p1.y - p2.y) / det;
  const double cgy = (p2.x - p1.x) / det;

  std::size_t n_local = 0;
  for (int v : local_of) n_local += v >= 0;
  std::vector<double> rhs(n_local, 0.0);
  for (int t : fine_triangles_of_element_[element]) {
    const auto& tri = fine_->triangle(t);
    const Point& fa = fine_->vertex(tri[0]);
    const Point& fb = fine_->vertex(tri[1]);
    const Point& fc = fine_->vertex(tri[2]);
    const double fdet = (fb.x - fa.x) * (fc.y - fa.y) - (fc.x - fa.x) * (fb.y - fa.y);
    const double gx[3] = {(fb.y - fc.y) / fdet, (fc.y - fa.y) / fdet, (fa.y - fb.y) / fdet};
    const double gy[3] = {(fc.x - fb.x) / fdet, (fa.x - fc.x) / fdet, (fb.x - fa.x) / fdet};
    const double weight = kappa_.value(fine_->centroid(t)) * 0.5 * fdet;
    for (int i = 0; i < 3; ++i) {
      const int dof = fine_dofs_.dof(tri[i]);
      if (dof < 0 || local_of[dof] < 0) continue;
      rhs[local_of[dof]] += weight * (cgx * gx[i] + cgy * gy[i]);
    }
  }
  return rhs;
}

namespace {

struct PatchSpace {
  std::vector<int> free_dofs;  // fine unknowns, ascending
  std::vector<int> local_of;   // fine unknown -> local index or -1
};

// q = argmin over {S_loc q + C^T lambda = f, C q = 0}, solved by a Schur
// complement on the constraint block.
Matrix solve_constrained(const SparseMatrix& s_loc, const SparseMatrix& c_loc,
                         const Matrix& rhs) {
  Eigen::SimplicialLLT<SparseMatrix> llt(s_loc);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("corrector: local stiffness is singular");
  const Matrix u0 = llt.solve(rhs);
  if (c_loc.rows() == 0) return u0;
  const Matrix y = llt.solve(Matrix(c_loc.transpose()));
  const Matrix schur = c_loc * y;
  Eigen::LLT<Matrix> schur_llt(0.5 * (schur + schur.transpose()));
  if (schur_llt.info() != Eigen::Success)
    throw std::runtime_error("corrector: singular constraint system");
  const Matrix lambda = schur_llt.solve(c_loc * u0);
  return u0 - y * lambda;
}

SparseMatrix restrict_square(const SparseMatrix& a, const PatchSpace& space) {
  const auto n = static_cast<Eigen::Index>(space.free_dofs.size());
  std::vector<Triplet> entries;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (SparseMatrix::InnerIterator it(a, space.free_dofs[j]); it; ++it) {
      const int i = space.local_of[it.row()];
      if (i >= 0) entries.emplace_back(i, j, it.value());
    }
  }
  SparseMatrix s(n, n);
  s.setFromTriplets(entries.begin(), entries.end());
  return s;
}

// Rows of I_H touching the patch, restricted to the patch columns.
SparseMatrix restrict_constraints(const SparseMatrix& interp, const PatchSpace& space) {
  std::vector<int> row_of(interp.rows(), -1);
  std::vector<std::pair<int, std::pair<int, double>>> raw;
  const auto n = static_cast<int>(space.free_dofs.size());
  for (int j = 0; j < n; ++j) {
    for (SparseMatrix::InnerIterator it(interp, space.free_dofs[j]); it; ++it) {
      if (it.value() == 0.0) continue;
      raw.push_back({static_cast<int>(it.row()), {j, it.value()}});
      row_of[it.row()] = 0;
    }
  }
  int rows = 0;
  for (auto& r : row_of)
    if (r == 0) r = rows++;
  std::vector<Triplet> entries;
  entries.reserve(raw.size());
  for (const auto& [row, cv] : raw) entries.emplace_back(row_of[row], cv.first, cv.second);
  SparseMatrix c(rows, n);
  c.setFromTriplets(entries.begin(), entries.end());
  return c;
}

}  // namespace

ElementCorrector LodProblem::element_corrector(int element, int k) const {
  if (k < 1) throw std::invalid_argument("element_corrector: k must be >= 1");
  if (element < 0 || element >= coarse_->num_triangles())
    throw std::out_of_range("element_corrector: invalid element");

  const std::vector<int> patch = patch_elements(*coarse_, element, k);
  std::vector<char> in_patch(coarse_->num_triangles(), 0);
  for (int t : patch) in_patch[t] = 1;

  PatchSpace space;
  space.local_of.assign(fine_dofs_.size(), -1);
  for (int t : patch) {
    for (int v : fine_nodes_of_element_[t]) {
      const int dof = fine_dofs_.dof(v);
      if (dof < 0 || space.local_of[dof] != -1) continue;
      const auto& owners = elements_of_fine_node_[v];
      const bool interior = std::all_of(owners.begin(), owners.end(),
                                        [&](int e) { return in_patch[e] != 0; });
      space.local_of[dof] = interior ? 0 : -2;
    }
  }
  for (int dof = 0; dof < fine_dofs_.size(); ++dof) {
    if (space.local_of[dof] == 0) {
      space.local_of[dof] = static_cast<int>(space.free_dofs.size());
      space.free_dofs.push_back(dof);
    } else {
      space.local_of[dof] = -1;
    }
  }

  ElementCorrector out;
  out.stats.element = element;
  out.stats.patch_elements = static_cast<int>(patch.size());
  out.stats.free_dofs = static_cast<int>(space.free_dofs.size());

  std::vector<int> hats;
  std::vector<int> coarse_cols;
  for (int a = 0; a < 3; ++a) {
    const int z = coarse_dofs_.dof(coarse_->triangle(element)[a]);
    if (z < 0) continue;
    hats.push_back(a);
    coarse_cols.push_back(z);
  }
  if (hats.empty() || space.free_dofs.empty()) return out;

  const auto n = static_cast<Eigen::Index>(space.free_dofs.size());
  Matrix rhs(n, static_cast<Eigen::Index>(hats.size()));
  for (std::size_t h = 0; h < hats.size(); ++h) {
    const auto col = element_rhs(element, hats[h], space.local_of);
    rhs.col(static_cast<Eigen::Index>(h)) = Eigen::Map<const Vector>(col.data(), n);
  }

  const SparseMatrix s_loc = restrict_square(stiffness_, space);
  const SparseMatrix c_loc = restrict_constraints(interpolant_.matrix, space);
  out.stats.constraints = static_cast<int>(c_loc.rows());
  const Matrix q = solve_constrained(s_loc, c_loc, rhs);

  out.entries.reserve(static_cast<std::size_t>(q.size()));
  for (Eigen::Index h = 0; h < q.cols(); ++h) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (q(i, h) != 0.0)
        out.entries.emplace_back(space.free_dofs[i], coarse_cols[h], q(i, h));
    }
  }
  return out;
}

SparseMatrix LodProblem::corrector(int k, int threads,
                                   std::vector<CorrectorStats>* stats) const {
  const int n_elements = coarse_->num_triangles();
  std::vector<ElementCorrector> results(n_elements);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int e = next++; e < n_elements; e = next++) results[e] = element_corrector(e, k);
  };
  threads = std::max(1, std::min(threads, n_elements));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
  }

  std::vector<Triplet> entries;
  for (auto& r : results) {
    entries.insert(entries.end(), r.entries.begin(), r.entries.end());
    if (stats) stats->push_back(r.stats);
  }
  SparseMatrix q(fine_dofs_.size(), coarse_dofs_.size());
  q.setFromTriplets(entries.begin(), entries.end());
  return q;
}

Matrix LodProblem::global_corrector() const {
  PatchSpace space;
  space.local_of.resize(fine_dofs_.size());
  for (int dof = 0; dof < fine_dofs_.size(); ++dof) {
    space.local_of[dof] = dof;
    space.free_dofs.push_back(dof);
  }
  const Matrix rhs = stiffness_ * prolongation_;
  return solve_constrained(stiffness_, interpolant_.matrix, rhs);
}

int LodProblem::saturation_radius(int element) const {
  const int total = coarse_->num_triangles();
  const auto adjacency = elements_of_vertex(*coarse_);
  int k = 0;
  while (static_cast<int>(grow_patch(*coarse_, adjacency, element, k).size()) < total) ++k;
  return k;
}

std::vector<double> LodProblem::decay_profile(int element, int k_max) const {
  if (k_max < 1) throw std::invalid_argument("decay_profile: k_max must be >= 1");
  const int full = std::max(1, saturation_radius(element));
  auto to_matrix = [&](const ElementCorrector& c) {
    SparseMatrix q(fine_dofs_.size(), coarse_dofs_.size());
    q.setFromTriplets(c.entries.begin(), c.entries.end());
    return q;
  };
  const SparseMatrix reference = to_matrix(element_corrector(element, full));
  std::vector<double> errors;
  for (int k = 1; k <= k_max; ++k) {
    const SparseMatrix diff = reference - to_matrix(element_corrector(element, k));
    const Matrix sd = Matrix(stiffness_ * diff);
    errors.push_back(std::sqrt(std::max(0.0, Matrix(diff.transpose() * sd).trace())));
  }
  return errors;
}

SparseMatrix galerkin_product(const SparseMatrix& r, const SparseMatrix& a) {
  SparseMatrix ar = a * r;
  SparseMatrix product = r.transpose() * ar;
  SparseMatrix sym = 0.5 * (product + SparseMatrix(product.transpose()));
  sym.makeCompressed();
  return sym;
}

LodBasis build_lod_basis(const LodProblem& problem, int k, const LqrSystem& fine_system,
                         int threads) {
  if (k < 1) throw std::invalid_argument("build_lod_basis: k must be >= 1");
  if (fine_system.n() != problem.fine_dofs().size())
    throw std::invalid_argument("build_lod_basis: system does not match the fine mesh");
  const auto start = std::chrono::steady_clock::now();
  LodBasis basis;
  basis.k = k;
  basis.input_checksum = problem.input_checksum();
  basis.Rh = SparseMatrix(problem.prolongation() - problem.corrector(k, threads, &basis.stats));
  basis.Rh.makeCompressed();
  basis.system.M = galerkin_product(basis.Rh, fine_system.M);
  basis.system.S = galerkin_product(basis.Rh, fine_system.S);
  basis.system.B = basis.Rh.transpose() * fine_system.B;
  basis.system.C = fine_system.C * basis.Rh;
  basis.system.Q = fine_system.Q;
  basis.system.Rw = fine_system.Rw;
  basis.setup_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return basis;
}

namespace {

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw std::runtime_error("read_lod_basis: truncated data");
  return v;
}

}  // namespace

void write_lod_basis(std::ostream& os, const LodBasis& basis) {
  os.write("LODB", 4);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(basis.k));
  put<std::uint32_t>(os, basis.input_checksum);
  put<std::uint64_t>(os, static_cast<std::uint64_t>(basis.Rh.rows()));
  put<std::uint64_t>(os, static_cast<std::uint64_t>(basis.Rh.cols()));
  put<std::uint64_t>(os, static_cast<std::uint64_t>(basis.Rh.nonZeros()));
  for (int col = 0; col < basis.Rh.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(basis.Rh, col); it; ++it) {
      put<std::int64_t>(os, it.row());
      put<std::int64_t>(os, it.col());
      put<double>(os, it.value());
    }
  }
}

LodBasis read_lod_basis(std::istream& is) {
  char magic[4] = {};
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != "LODB")
    throw std::runtime_error("read_lod_basis: bad magic");
  LodBasis basis;
  basis.k = static_cast<int>(get<std::uint32_t>(is));
  basis.input_checksum = get<std::uint32_t>(is);
  const auto rows = get<std::uint64_t>(is);
  const auto cols = get<std::uint64_t>(is);
  const auto nnz = get<std::uint64_t>(is);
  std::vector<Triplet> entries;
  entries.reserve(nnz);
  for (std::uint64_t i = 0; i < nnz; ++i) {
    const auto r = get<std::int64_t>(is);
    const auto c = get<std::int64_t>(is);
    const auto v = get<double>(is);
    entries.emplace_back(static_cast<int>(r), static_cast<int>(c), v);
  }
  basis.Rh.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  basis.Rh.setFromTriplets(entries.begin(), entries.end());
  return basis;
}

}  // namespace lodre
