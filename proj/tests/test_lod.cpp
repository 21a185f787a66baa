#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "lodre/lod.hpp"
#include "oracles.hpp"

using namespace lodre;

namespace {

bool in_triangle(const TriMesh& mesh, int t, const Point& p) {
  const auto& tri = mesh.triangle(t);
  const Point& a = mesh.vertex(tri[0]);
  const Point& b = mesh.vertex(tri[1]);
  const Point& c = mesh.vertex(tri[2]);
  const double det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
  const double l1 = ((p.x - a.x) * (c.y - a.y) - (c.x - a.x) * (p.y - a.y)) / det;
  const double l2 = ((b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y)) / det;
  return l1 >= -1e-12 && l2 >= -1e-12 && l1 + l2 <= 1.0 + 1e-12;
}

struct Fixture {
  std::vector<MeshPtr> meshes = build_hierarchy(Domain::unit_square(), 3);
  CoefficientField kappa =
      kappa_random_grid(Domain::unit_square(), 1.0 / 16.0, 1e-2, 1.0, 17);
  LodProblem problem{meshes[3], meshes[1], kappa};
};

// Orthonormal basis of ker I_H from projected random vectors.
Matrix kernel_samples(const SparseMatrix& ih, int count, std::mt19937_64& rng) {
  const Matrix i(ih);
  const Matrix r = oracle::random_matrix(i.cols(), count, rng);
  const Matrix gram = i * i.transpose();
  return r - i.transpose() * gram.llt().solve(i * r);
}

}  // namespace

TEST_CASE("Clement interpolation") {
  const auto meshes = build_hierarchy(Domain::unit_square(), 3);
  const TriMesh& coarse = *meshes[1];
  const TriMesh& fine = *meshes[3];

  SUBCASE("coarse hat has value one half at its own node") {
    const auto ih = clement_interpolation(fine, coarse).matrix;
    const SparseMatrix p =
        prolongation(coarse, fine, BoundaryTreatment::EliminateDirichlet).matrix;
    const Matrix ip = Matrix(ih * p);
    for (int z = 0; z < ip.rows(); ++z) CHECK(ip(z, z) == doctest::Approx(0.5));
  }
  SUBCASE("constants are reproduced without boundary elimination") {
    const auto ih = clement_interpolation(fine, coarse, BoundaryTreatment::KeepAll).matrix;
    const Vector one = Vector::Ones(ih.cols());
    CHECK((ih * one - Vector::Ones(ih.rows())).cwiseAbs().maxCoeff() < 1e-13);
  }
  SUBCASE("L2 stability") {
    const auto ih = clement_interpolation(fine, coarse).matrix;
    const DofMap fd(fine, BoundaryTreatment::EliminateDirichlet);
    const DofMap cd(coarse, BoundaryTreatment::EliminateDirichlet);
    const SparseMatrix mh = assemble_mass(fine, fd);
    const SparseMatrix mH = assemble_mass(coarse, cd);
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 20; ++trial) {
      const Vector v = oracle::random_matrix(fd.size(), 1, rng);
      const Vector w = ih * v;
      CHECK(std::sqrt(w.dot(mH * w)) <= 3.0 * std::sqrt(v.dot(mh * v)));
    }
  }
  SUBCASE("each row only sees the node patch") {
    const auto ih = clement_interpolation(fine, coarse).matrix;
    const DofMap fd(fine, BoundaryTreatment::EliminateDirichlet);
    const DofMap cd(coarse, BoundaryTreatment::EliminateDirichlet);
    for (int col = 0; col < ih.outerSize(); ++col)
      for (SparseMatrix::InnerIterator it(ih, col); it; ++it) {
        const int z = cd.node(static_cast<int>(it.row()));
        const Point& p = fine.vertex(fd.node(static_cast<int>(it.col())));
        bool inside = false;
        for (int t = 0; t < coarse.num_triangles(); ++t) {
          const auto& tri = coarse.triangle(t);
          if (std::find(tri.begin(), tri.end(), z) != tri.end() && in_triangle(coarse, t, p))
            inside = true;
        }
        CHECK(inside);
      }
  }
  SUBCASE("unrelated meshes are rejected") {
    const auto other = build_base_mesh(Domain::l_shape());
    CHECK_THROWS_AS(clement_interpolation(fine, *other), std::invalid_argument);
  }
}

TEST_CASE("patches") {
  const auto coarse = build_hierarchy(Domain::unit_square(), 2).back();
  // An element away from the boundary.
  int inner = -1;
  for (int t = 0; t < coarse->num_triangles() && inner < 0; ++t) {
    const auto& tri = coarse->triangle(t);
    if (std::all_of(tri.begin(), tri.end(),
                    [&](int v) { return coarse->flag(v) == NodeFlag::Interior; }))
      inner = t;
  }
  REQUIRE(inner >= 0);
  CHECK(patch_elements(*coarse, inner, 0) == std::vector<int>{inner});
  CHECK(patch_elements(*coarse, inner, 1).size() == 13);
  const auto p2 = patch_elements(*coarse, inner, 2);
  const auto p1 = patch_elements(*coarse, inner, 1);
  CHECK(std::includes(p2.begin(), p2.end(), p1.begin(), p1.end()));
  CHECK(patch_elements(*coarse, inner, 20).size() ==
        static_cast<std::size_t>(coarse->num_triangles()));
  CHECK_THROWS_AS(patch_elements(*coarse, inner, -1), std::invalid_argument);
  CHECK_THROWS_AS(patch_elements(*coarse, coarse->num_triangles(), 1), std::out_of_range);

  const auto meshes = build_hierarchy(Domain::unit_square(), 3);
  for (int level = 0; level <= 3; ++level)
    CHECK(default_patch_radius(*meshes[level]) == level + 1);
}

TEST_CASE("element correctors") {
  const Fixture fx;
  const LodProblem& pb = fx.problem;
  const TriMesh& coarse = pb.coarse();
  const TriMesh& fine = pb.fine();
  const SparseMatrix& s = pb.fine_stiffness();

  SUBCASE("supported in the patch") {
    for (int K = 0; K < coarse.num_triangles(); K += 5) {
      const auto patch = patch_elements(coarse, K, 1);
      const auto c = pb.element_corrector(K, 1);
      CHECK(c.stats.patch_elements == static_cast<int>(patch.size()));
      for (const auto& e : c.entries) {
        const Point& p = fine.vertex(pb.fine_dofs().node(e.row()));
        bool inside = false;
        for (int t : patch) inside = inside || in_triangle(coarse, t, p);
        CHECK(inside);
      }
    }
  }
  SUBCASE("energy bounded by the element energy of the hat") {
    const int K = 10;
    const auto c = pb.element_corrector(K, 2);
    SparseMatrix q(pb.fine_dofs().size(), pb.coarse_dofs().size());
    q.setFromTriplets(c.entries.begin(), c.entries.end());
    std::vector<int> tris;
    for (int t = 0; t < fine.num_triangles(); ++t)
      if (fine.ancestor_triangle(t, coarse) == K) tris.push_back(t);
    const SparseMatrix sk = assemble_stiffness_subset(fine, fx.kappa, pb.fine_dofs(), tris);
    const SparseMatrix& p = pb.prolongation();
    for (int z = 0; z < q.cols(); ++z) {
      const Vector qz = q.col(z);
      if (qz.norm() == 0.0) continue;
      const Vector pz = p.col(z);
      CHECK(qz.dot(s * qz) <= pz.dot(sk * pz) * (1.0 + 1e-10));
    }
  }
  SUBCASE("correctors lie in the kernel of the interpolant") {
    const SparseMatrix q = pb.corrector(2);
    const Matrix iq = Matrix(pb.interpolant().matrix * q);
    CHECK(iq.cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("invalid arguments") {
    CHECK_THROWS_AS(pb.element_corrector(0, 0), std::invalid_argument);
    CHECK_THROWS_AS(pb.element_corrector(-1, 1), std::out_of_range);
    const auto other = build_hierarchy(Domain::l_shape(), 1);
    CHECK_THROWS_AS(LodProblem(other[1], fx.meshes[0], fx.kappa), std::invalid_argument);
  }
}

TEST_CASE("global correction") {
  const Fixture fx;
  const LodProblem& pb = fx.problem;
  const Matrix qg = pb.global_corrector();
  const Matrix ih(pb.interpolant().matrix);
  const Matrix s(pb.fine_stiffness());
  const Matrix rg = Matrix(pb.prolongation()) - qg;

  SUBCASE("kernel and orthogonality") {
    CHECK((ih * qg).cwiseAbs().maxCoeff() < 1e-10);
    std::mt19937_64 rng(2);
    const Matrix w = kernel_samples(pb.interpolant().matrix, 30, rng);
    CHECK((ih * w).cwiseAbs().maxCoeff() < 1e-10);
    const Matrix a = w.transpose() * s * rg;
    CHECK(a.cwiseAbs().maxCoeff() < 1e-9 * s.cwiseAbs().maxCoeff() * w.cwiseAbs().maxCoeff());
  }
  SUBCASE("saturated local correctors sum to the global one") {
    const int full = pb.saturation_radius(0);
    int k = full;
    for (int K = 0; K < pb.coarse().num_triangles(); ++K) k = std::max(k, pb.saturation_radius(K));
    const Matrix q(pb.corrector(k));
    CHECK((q - qg).cwiseAbs().maxCoeff() < 1e-10 * qg.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("decay and determinism") {
  const Fixture fx;
  const LodProblem& pb = fx.problem;

  SUBCASE("localization error decreases with the patch radius") {
    const int K = 12;
    const int full = pb.saturation_radius(K);
    const auto e = pb.decay_profile(K, full);
    REQUIRE(e.size() == static_cast<std::size_t>(full));
    for (std::size_t i = 0; i + 1 < e.size(); ++i) CHECK(e[i + 1] <= e[i] * (1.0 + 1e-12));
    CHECK(e.back() < 1e-12 * e.front());
    CHECK(e.front() > 0.0);
  }
  SUBCASE("thread count does not change the result") {
    std::vector<CorrectorStats> stats;
    const SparseMatrix a = pb.corrector(2, 1, &stats);
    const SparseMatrix b = pb.corrector(2, 2);
    CHECK(Matrix(a - b).cwiseAbs().maxCoeff() == 0.0);
    CHECK(stats.size() == static_cast<std::size_t>(pb.coarse().num_triangles()));
  }
  SUBCASE("basis serialization") {
    const LqrSystem sys{assemble_mass(pb.fine(), pb.fine_dofs()), pb.fine_stiffness(),
                        Matrix::Ones(pb.fine_dofs().size(), 1),
                        Matrix::Ones(1, pb.fine_dofs().size()), Matrix::Identity(1, 1),
                        Matrix::Identity(1, 1)};
    const LodBasis basis = build_lod_basis(pb, 2, sys);
    CHECK(basis.system.n() == pb.coarse_dofs().size());
    CHECK(Eigen::LLT<Matrix>(Matrix(basis.system.S)).info() == Eigen::Success);
    CHECK(Eigen::LLT<Matrix>(Matrix(basis.system.M)).info() == Eigen::Success);
    std::stringstream ss;
    write_lod_basis(ss, basis);
    CHECK(ss.str().substr(0, 4) == "LODB");
    const LodBasis back = read_lod_basis(ss);
    CHECK(back.k == 2);
    CHECK(back.input_checksum == pb.input_checksum());
    CHECK(Matrix(back.Rh - basis.Rh).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(build_lod_basis(pb, 0, sys), std::invalid_argument);

    // Same inputs, same checksum; a different coefficient changes it.
    const LodProblem again(fx.meshes[3], fx.meshes[1], fx.kappa);
    CHECK(again.input_checksum() == pb.input_checksum());
    const LodProblem other(fx.meshes[3], fx.meshes[1], CoefficientField::constant(1.0));
    CHECK(other.input_checksum() != pb.input_checksum());
  }
}
