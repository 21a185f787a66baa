#pragma once

#include <array>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lodre/types.hpp"

namespace lodre {

enum class DomainKind { UnitSquare, LShape, UShape };

enum class NodeFlag { Interior, Dirichlet, Neumann };

/// Closed boundary segment carrying a homogeneous Dirichlet condition.
struct Segment {
  Point a;
  Point b;
  bool contains(const Point& p, double tol = 1e-12) const;
};

/// Polygonal domain described as a union of cells of a structured base grid.
///
/// The base grid has spacing `cell_size` and `nx` by `ny` cells starting at the
/// origin; `active` marks the cells (row-major, y outer) belonging to the
/// domain. Each active cell becomes two triangles of the level-0 mesh.
class Domain {
 public:
  static Domain unit_square();
  /// Unit square with the quadrant [0.5,1] x [0,0.5] removed.
  static Domain l_shape();
  /// Lying U open to the left: handles of thickness 1/6, extent 1 x 4/6,
  /// Dirichlet only on the left end of the lower handle.
  static Domain u_shape();

  DomainKind kind() const { return kind_; }
  std::string name() const;
  double cell_size() const { return cell_size_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  bool cell_active(int i, int j) const;
  double width() const { return nx_ * cell_size_; }
  double height() const { return ny_ * cell_size_; }
  double area() const;
  bool contains(const Point& p) const;

  /// True if the boundary point p lies on a Dirichlet segment.
  bool is_dirichlet(const Point& p) const;
  bool all_dirichlet() const { return all_dirichlet_; }

 private:
  DomainKind kind_ = DomainKind::UnitSquare;
  double cell_size_ = 0.5;
  int nx_ = 2;
  int ny_ = 2;
  std::vector<char> active_;
  bool all_dirichlet_ = true;
  std::vector<Segment> dirichlet_;
};

/// Conforming triangulation with refinement genealogy.
///
/// Triangles are counter-clockwise. After `refine_uniform`, the children of
/// parent triangle t are 4t..4t+3, old vertices keep their indices and each
/// new vertex is the midpoint of a parent edge recorded in `midpoint_parents`.
class TriMesh {
 public:
  TriMesh(Domain domain, std::vector<Point> vertices,
          std::vector<std::array<int, 3>> triangles, int level,
          std::shared_ptr<const TriMesh> parent,
          std::vector<std::array<int, 2>> midpoint_parents);

  const Domain& domain() const { return domain_; }
  std::span<const Point> vertices() const { return vertices_; }
  std::span<const std::array<int, 3>> triangles() const { return triangles_; }
  std::span<const NodeFlag> node_flags() const { return flags_; }
  const Point& vertex(int i) const { return vertices_[i]; }
  const std::array<int, 3>& triangle(int t) const { return triangles_[t]; }
  NodeFlag flag(int i) const { return flags_[i]; }
  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  int num_triangles() const { return static_cast<int>(triangles_.size()); }
  int level() const { return level_; }
  const std::shared_ptr<const TriMesh>& parent() const { return parent_; }

  /// Parent edge endpoints for vertex v >= parent()->num_vertices().
  std::span<const std::array<int, 2>> midpoint_parents() const {
    return midpoint_parents_;
  }

  double signed_area(int t) const;
  Point centroid(int t) const;
  /// Mesh width: longest edge over all triangles.
  double mesh_width() const;
  int num_interior_nodes() const;

  /// True if `this` is obtained from `ancestor` by zero or more refinements.
  bool descends_from(const TriMesh& ancestor) const;
  /// Index of the triangle of `ancestor` containing triangle t of this mesh.
  int ancestor_triangle(int t, const TriMesh& ancestor) const;

 private:
  Domain domain_;
  std::vector<Point> vertices_;
  std::vector<std::array<int, 3>> triangles_;
  std::vector<NodeFlag> flags_;
  int level_ = 0;
  std::shared_ptr<const TriMesh> parent_;
  std::vector<std::array<int, 2>> midpoint_parents_;
};

using MeshPtr = std::shared_ptr<const TriMesh>;

/// Which nodes carry unknowns.
enum class BoundaryTreatment { EliminateDirichlet, KeepAll };

/// Node <-> unknown numbering. Unknowns keep the relative vertex order.
class DofMap {
 public:
  DofMap() = default;
  DofMap(const TriMesh& mesh, BoundaryTreatment treatment);

  int size() const { return static_cast<int>(dof_to_node_.size()); }
  /// -1 for eliminated nodes.
  int dof(int node) const { return node_to_dof_[node]; }
  int node(int dof) const { return dof_to_node_[dof]; }
  int num_nodes() const { return static_cast<int>(node_to_dof_.size()); }

 private:
  std::vector<int> node_to_dof_;
  std::vector<int> dof_to_node_;
};

MeshPtr build_base_mesh(const Domain& domain);
MeshPtr refine_uniform(const MeshPtr& mesh);
/// Base mesh refined `levels` times; entry j is the level-j mesh.
std::vector<MeshPtr> build_hierarchy(const Domain& domain, int levels);

/// Nodal prolongation from coarse to fine unknowns: entry (i, j) is the coarse
/// hat j evaluated at fine node i.
struct Prolongation {
  SparseMatrix matrix;
  int coarse_level = 0;
  int fine_level = 0;
};

Prolongation prolongation(const TriMesh& coarse, const TriMesh& fine,
                          BoundaryTreatment treatment =
                              BoundaryTreatment::EliminateDirichlet);

/// max over triangles of diam(incircle) / diam(triangle).
double shape_regularity(const TriMesh& mesh);

/// Plain-text dump: `vertex x y flag` and `triangle i j k` records.
void write_mesh(std::ostream& os, const TriMesh& mesh);

}  // namespace lodre
