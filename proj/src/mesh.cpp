#include "lodre/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <stdexcept>

namespace lodre {

bool Segment::contains(const Point& p, double tol) const {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  const double cross = (p.x - a.x) * dy - (p.y - a.y) * dx;
  if (std::abs(cross) > tol * std::sqrt(len2)) return false;
  const double s = ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2;
  return s >= -tol && s <= 1.0 + tol;
}

Domain Domain::unit_square() {
  Domain d;
  d.kind_ = DomainKind::UnitSquare;
  d.cell_size_ = 0.5;
  d.nx_ = d.ny_ = 2;
  d.active_.assign(4, 1);
  return d;
}

Domain Domain::l_shape() {
  Domain d;
  d.kind_ = DomainKind::LShape;
  d.cell_size_ = 0.25;
  d.nx_ = d.ny_ = 4;
  d.active_.assign(16, 1);
  for (int j = 0; j < 2; ++j)
    for (int i = 2; i < 4; ++i) d.active_[j * 4 + i] = 0;
  return d;
}

Domain Domain::u_shape() {
  Domain d;
  d.kind_ = DomainKind::UShape;
  d.cell_size_ = 1.0 / 6.0;
  d.nx_ = 6;
  d.ny_ = 4;
  d.active_.assign(24, 0);
  for (int i = 0; i < 6; ++i) {
    d.active_[0 * 6 + i] = 1;
    d.active_[3 * 6 + i] = 1;
  }
  d.active_[1 * 6 + 5] = 1;
  d.active_[2 * 6 + 5] = 1;
  d.all_dirichlet_ = false;
  d.dirichlet_.push_back({{0.0, 0.0}, {0.0, 1.0 / 6.0}});
  return d;
}

std::string Domain::name() const {
  switch (kind_) {
    case DomainKind::UnitSquare: return "unit_square";
    case DomainKind::LShape: return "l_shape";
    case DomainKind::UShape: return "u_shape";
  }
  return "unknown";
}

bool Domain::cell_active(int i, int j) const {
  if (i < 0 || j < 0 || i >= nx_ || j >= ny_) return false;
  return active_[j * nx_ + i] != 0;
}

double Domain::area() const {
  const auto n = std::count(active_.begin(), active_.end(), 1);
  return static_cast<double>(n) * cell_size_ * cell_size_;
}

bool Domain::contains(const Point& p) const {
  const double tol = 1e-12;
  // A closed point belongs to the domain if any cell touching it is active.
  for (int dj = -1; dj <= 1; dj += 2) {
    for (int di = -1; di <= 1; di += 2) {
      const int i = static_cast<int>(std::floor((p.x + di * tol) / cell_size_));
      const int j = static_cast<int>(std::floor((p.y + dj * tol) / cell_size_));
      if (cell_active(i, j)) return true;
    }
  }
  return false;
}

bool Domain::is_dirichlet(const Point& p) const {
  if (all_dirichlet_) return true;
  return std::any_of(dirichlet_.begin(), dirichlet_.end(),
                     [&](const Segment& s) { return s.contains(p); });
}

namespace {

std::vector<NodeFlag> compute_flags(const Domain& domain,
                                    std::span<const Point> vertices,
                                    std::span<const std::array<int, 3>> tris) {
  std::map<std::pair<int, int>, int> edge_count;
  for (const auto& t : tris) {
    for (int e = 0; e < 3; ++e) {
      const int a = t[e];
      const int b = t[(e + 1) % 3];
      ++edge_count[{std::min(a, b), std::max(a, b)}];
    }
  }
  std::vector<NodeFlag> flags(vertices.size(), NodeFlag::Interior);
  for (const auto& [edge, count] : edge_count) {
    if (count != 1) continue;
    for (int v : {edge.first, edge.second}) {
      if (flags[v] == NodeFlag::Dirichlet) continue;
      flags[v] = domain.is_dirichlet(vertices[v]) ? NodeFlag::Dirichlet
                                                   : NodeFlag::Neumann;
    }
  }
  return flags;
}

double edge_length(const Point& a, const Point& b) {
  return std::hypot(b.x - a.x, b.y - a.y);
}

}  // namespace

TriMesh::TriMesh(Domain domain, std::vector<Point> vertices,
                 std::vector<std::array<int, 3>> triangles, int level,
                 std::shared_ptr<const TriMesh> parent,
                 std::vector<std::array<int, 2>> midpoint_parents)
    : domain_(std::move(domain)),
      vertices_(std::move(vertices)),
      triangles_(std::move(triangles)),
      level_(level),
      parent_(std::move(parent)),
      midpoint_parents_(std::move(midpoint_parents)) {
  for (int t = 0; t < num_triangles(); ++t) {
    if (!(signed_area(t) > 0.0))
      throw std::invalid_argument("TriMesh: triangle with non-positive area");
  }
  flags_ = compute_flags(domain_, vertices_, triangles_);
}

double TriMesh::signed_area(int t) const {
  const auto& tri = triangles_[t];
  const Point& a = vertices_[tri[0]];
  const Point& b = vertices_[tri[1]];
  const Point& c = vertices_[tri[2]];
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

Point TriMesh::centroid(int t) const {
  const auto& tri = triangles_[t];
  const Point& a = vertices_[tri[0]];
  const Point& b = vertices_[tri[1]];
  const Point& c = vertices_[tri[2]];
  return {(a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0};
}

double TriMesh::mesh_width() const {
  double h = 0.0;
  for (const auto& tri : triangles_) {
    for (int e = 0; e < 3; ++e)
      h = std::max(h, edge_length(vertices_[tri[e]], vertices_[tri[(e + 1) % 3]]));
  }
  return h;
}

int TriMesh::num_interior_nodes() const {
  return static_cast<int>(
      std::count_if(flags_.begin(), flags_.end(),
                    [](NodeFlag f) { return f != NodeFlag::Dirichlet; }));
}

bool TriMesh::descends_from(const TriMesh& ancestor) const {
  for (const TriMesh* m = this; m != nullptr; m = m->parent_.get()) {
    if (m == &ancestor) return true;
  }
  return false;
}

int TriMesh::ancestor_triangle(int t, const TriMesh& ancestor) const {
  if (!descends_from(ancestor))
    throw std::invalid_argument("ancestor_triangle: mesh is not a descendant");
  return t >> (2 * (level_ - ancestor.level_));
}

DofMap::DofMap(const TriMesh& mesh, BoundaryTreatment treatment)
    : node_to_dof_(mesh.num_vertices(), -1) {
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    if (treatment == BoundaryTreatment::EliminateDirichlet &&
        mesh.flag(v) == NodeFlag::Dirichlet)
      continue;
    node_to_dof_[v] = static_cast<int>(dof_to_node_.size());
    dof_to_node_.push_back(v);
  }
}

MeshPtr build_base_mesh(const Domain& domain) {
  const int nx = domain.nx();
  const int ny = domain.ny();
  const double h = domain.cell_size();
  // Lattice points touched by an active cell, numbered lexicographically by (y, x).
  std::vector<int> index((nx + 1) * (ny + 1), -1);
  std::vector<Point> vertices;
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      const bool used = domain.cell_active(i - 1, j - 1) ||
                        domain.cell_active(i, j - 1) ||
                        domain.cell_active(i - 1, j) || domain.cell_active(i, j);
      if (!used) continue;
      index[j * (nx + 1) + i] = static_cast<int>(vertices.size());
      vertices.push_back({i * h, j * h});
    }
  }
  std::vector<std::array<int, 3>> triangles;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      if (!domain.cell_active(i, j)) continue;
      const int v00 = index[j * (nx + 1) + i];
      const int v10 = index[j * (nx + 1) + i + 1];
      const int v01 = index[(j + 1) * (nx + 1) + i];
      const int v11 = index[(j + 1) * (nx + 1) + i + 1];
      triangles.push_back({v00, v10, v11});
      triangles.push_back({v00, v11, v01});
    }
  }
  return std::make_shared<const TriMesh>(domain, std::move(vertices),
                                         std::move(triangles), 0, nullptr,
                                         std::vector<std::array<int, 2>>{});
}

MeshPtr refine_uniform(const MeshPtr& mesh) {
  const int nv = mesh->num_vertices();
  std::vector<std::array<int, 2>> edges;
  edges.reserve(3 * mesh->num_triangles());
  for (const auto& t : mesh->triangles()) {
    for (int e = 0; e < 3; ++e) {
      const int a = t[e];
      const int b = t[(e + 1) % 3];
      edges.push_back({std::min(a, b), std::max(a, b)});
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  std::vector<Point> vertices(mesh->vertices().begin(), mesh->vertices().end());
  vertices.reserve(nv + edges.size());
  for (const auto& e : edges)
    vertices.push_back(midpoint(mesh->vertex(e[0]), mesh->vertex(e[1])));

  auto mid = [&](int a, int b) {
    const std::array<int, 2> key{std::min(a, b), std::max(a, b)};
    const auto it = std::lower_bound(edges.begin(), edges.end(), key);
    return nv + static_cast<int>(it - edges.begin());
  };

  std::vector<std::array<int, 3>> triangles;
  triangles.reserve(4 * mesh->num_triangles());
  for (const auto& t : mesh->triangles()) {
    const int a = t[0], b = t[1], c = t[2];
    const int ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
    triangles.push_back({a, ab, ca});
    triangles.push_back({ab, b, bc});
    triangles.push_back({ca, bc, c});
    triangles.push_back({ab, bc, ca});
  }
  return std::make_shared<const TriMesh>(mesh->domain(), std::move(vertices),
                                         std::move(triangles), mesh->level() + 1,
                                         mesh, std::move(edges));
}

std::vector<MeshPtr> build_hierarchy(const Domain& domain, int levels) {
  std::vector<MeshPtr> meshes{build_base_mesh(domain)};
  for (int j = 0; j < levels; ++j) meshes.push_back(refine_uniform(meshes.back()));
  return meshes;
}

namespace {

// One refinement step over all vertices: rows fine vertices, columns coarse vertices.
SparseMatrix one_level_prolongation(const TriMesh& fine) {
  const int nc = fine.parent()->num_vertices();
  const int nf = fine.num_vertices();
  std::vector<Triplet> entries;
  entries.reserve(nc + 2 * (nf - nc));
  for (int v = 0; v < nc; ++v) entries.emplace_back(v, v, 1.0);
  const auto parents = fine.midpoint_parents();
  for (int v = nc; v < nf; ++v) {
    entries.emplace_back(v, parents[v - nc][0], 0.5);
    entries.emplace_back(v, parents[v - nc][1], 0.5);
  }
  SparseMatrix p(nf, nc);
  p.setFromTriplets(entries.begin(), entries.end());
  return p;
}

}  // namespace

Prolongation prolongation(const TriMesh& coarse, const TriMesh& fine,
                          BoundaryTreatment treatment) {
  if (!fine.descends_from(coarse))
    throw std::invalid_argument(
        "prolongation: fine mesh is not a refinement of the coarse mesh");

  SparseMatrix full(fine.num_vertices(), fine.num_vertices());
  full.setIdentity();
  for (const TriMesh* m = &fine; m != &coarse; m = m->parent().get()) {
    full = (full * one_level_prolongation(*m)).pruned();
  }

  const DofMap fine_dofs(fine, treatment);
  const DofMap coarse_dofs(coarse, treatment);
  std::vector<Triplet> entries;
  for (int col = 0; col < full.outerSize(); ++col) {
    const int cdof = coarse_dofs.dof(col);
    if (cdof < 0) continue;
    for (SparseMatrix::InnerIterator it(full, col); it; ++it) {
      const int fdof = fine_dofs.dof(static_cast<int>(it.row()));
      if (fdof < 0) continue;
      entries.emplace_back(fdof, cdof, it.value());
    }
  }
  Prolongation result;
  result.matrix.resize(fine_dofs.size(), coarse_dofs.size());
  result.matrix.setFromTriplets(entries.begin(), entries.end());
  result.coarse_level = coarse.level();
  result.fine_level = fine.level();
  return result;
}

double shape_regularity(const TriMesh& mesh) {
  double gamma = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangle(t);
    double perimeter = 0.0;
    double diam = 0.0;
    for (int e = 0; e < 3; ++e) {
      const double len = edge_length(mesh.vertex(tri[e]), mesh.vertex(tri[(e + 1) % 3]));
      perimeter += len;
      diam = std::max(diam, len);
    }
    const double inradius = 2.0 * mesh.signed_area(t) / perimeter;
    gamma = std::max(gamma, 2.0 * inradius / diam);
  }
  return gamma;
}

void write_mesh(std::ostream& os, const TriMesh& mesh) {
  os.precision(17);
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    const char* flag = "interior";
    if (mesh.flag(v) == NodeFlag::Dirichlet) flag = "dirichlet";
    if (mesh.flag(v) == NodeFlag::Neumann) flag = "neumann";
    os << "vertex " << mesh.vertex(v).x << ' ' << mesh.vertex(v).y << ' ' << flag
       << '\n';
  }
  for (const auto& t : mesh.triangles())
    os << "triangle " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

}  // namespace lodre
