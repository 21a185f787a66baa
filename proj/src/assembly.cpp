#include "lodre/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace lodre {

CoefficientField CoefficientField::constant(double value) {
  return grid(1.0, 1, 1, {value});
}

CoefficientField CoefficientField::grid(double epsilon, int nx, int ny,
                                        std::vector<double> values) {
  if (!(epsilon > 0.0) || nx <= 0 || ny <= 0 ||
      values.size() != static_cast<std::size_t>(nx) * ny)
    throw std::invalid_argument("CoefficientField::grid: inconsistent grid");
  CoefficientField f;
  f.kind_ = Kind::Grid;
  f.epsilon_ = epsilon;
  f.nx_ = nx;
  f.ny_ = ny;
  f.values_ = std::move(values);
  const auto [lo, hi] = std::minmax_element(f.values_.begin(), f.values_.end());
  if (!(*lo > 0.0) || !std::isfinite(*hi))
    throw std::invalid_argument("CoefficientField::grid: values must be positive");
  f.alpha_ = *lo;
  f.beta_ = *hi;
  return f;
}

CoefficientField CoefficientField::stripes(int n_stripes, double width,
                                           double background, double stripe_value) {
  if (n_stripes < 0 || width < 0.0 || !(background > 0.0) || !(stripe_value > 0.0))
    throw std::invalid_argument("CoefficientField::stripes: invalid parameters");
  if (n_stripes > 0 && width >= 1.0 / (n_stripes + 1))
    throw std::invalid_argument("CoefficientField::stripes: stripes overlap");
  CoefficientField f;
  f.kind_ = Kind::Stripes;
  f.n_stripes_ = n_stripes;
  f.width_ = width;
  f.background_ = background;
  f.stripe_value_ = stripe_value;
  f.alpha_ = f.beta_ = background;
  if (n_stripes > 0 && width > 0.0) {
    f.alpha_ = std::min(background, stripe_value);
    f.beta_ = std::max(background, stripe_value);
  }
  return f;
}

double CoefficientField::value(const Point& p) const {
  if (kind_ == Kind::Grid) {
    const int i = std::clamp(static_cast<int>(std::floor(p.x / epsilon_)), 0, nx_ - 1);
    const int j = std::clamp(static_cast<int>(std::floor(p.y / epsilon_)), 0, ny_ - 1);
    return values_[static_cast<std::size_t>(j) * nx_ + i];
  }
  // Band j covers [c - w/2, c + w/2) around c = j / (n + 1).
  const double spacing = 1.0 / (n_stripes_ + 1);
  const int j = static_cast<int>(std::lround(p.y / spacing));
  if (j >= 1 && j <= n_stripes_) {
    const double center = j * spacing;
    if (p.y >= center - 0.5 * width_ && p.y < center + 0.5 * width_)
      return stripe_value_;
  }
  return background_;
}

void CoefficientField::write(std::ostream& os) const {
  if (kind_ != Kind::Grid)
    throw std::logic_error("CoefficientField::write: only grid fields are serializable");
  os.precision(17);
  os << epsilon_ << '\n';
  for (int j = 0; j < ny_; ++j) {
    for (int i = 0; i < nx_; ++i) {
      if (i) os << ' ';
      os << values_[static_cast<std::size_t>(j) * nx_ + i];
    }
    os << '\n';
  }
}

CoefficientField CoefficientField::read(std::istream& is) {
  std::string line;
  double epsilon = 0.0;
  if (!std::getline(is, line) || !(std::istringstream(line) >> epsilon))
    throw std::runtime_error("CoefficientField::read: missing epsilon");
  std::vector<double> values;
  int nx = -1;
  int ny = 0;
  while (std::getline(is, line)) {
    std::istringstream row(line);
    int count = 0;
    for (double v; row >> v; ++count) values.push_back(v);
    if (count == 0) continue;
    if (nx >= 0 && count != nx)
      throw std::runtime_error("CoefficientField::read: ragged rows");
    nx = count;
    ++ny;
  }
  if (nx <= 0) throw std::runtime_error("CoefficientField::read: no cell values");
  return grid(epsilon, nx, ny, std::move(values));
}

CoefficientField kappa_random_grid(const Domain& domain, double epsilon, double lo,
                                   double hi, std::uint64_t seed) {
  if (!(lo > 0.0) || hi < lo)
    throw std::invalid_argument("kappa_random_grid: need 0 < lo <= hi");
  if (!(epsilon > 0.0))
    throw std::invalid_argument("kappa_random_grid: epsilon must be positive");
  auto cells = [&](double extent) {
    const double n = extent / epsilon;
    if (std::abs(n - std::round(n)) > 1e-9 * n)
      throw std::invalid_argument("kappa_random_grid: epsilon must divide the domain");
    return static_cast<int>(std::lround(n));
  };
  const int nx = cells(domain.width());
  const int ny = cells(domain.height());
  std::mt19937_64 rng(seed);
  std::vector<double> values(static_cast<std::size_t>(nx) * ny);
  for (double& v : values) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    v = lo + (hi - lo) * u;
  }
  return CoefficientField::grid(epsilon, nx, ny, std::move(values));
}

CoefficientField kappa_stripes(int n_stripes, double width, double background,
                               double stripe_value) {
  return CoefficientField::stripes(n_stripes, width, background, stripe_value);
}

void LqrSystem::validate() const {
  const int n = this->n();
  if (M.cols() != n || S.rows() != n || S.cols() != n || B.rows() != n ||
      C.cols() != n || Q.rows() != C.rows() || Q.cols() != C.rows() ||
      Rw.rows() != B.cols() || Rw.cols() != B.cols())
    throw std::invalid_argument("LqrSystem: inconsistent dimensions");
}

namespace {

struct ElementGeometry {
  double area;
  // Gradients of the three barycentric coordinates.
  double gx[3];
  double gy[3];
};

ElementGeometry geometry(const TriMesh& mesh, int t) {
  const auto& tri = mesh.triangle(t);
  const Point& a = mesh.vertex(tri[0]);
  const Point& b = mesh.vertex(tri[1]);
  const Point& c = mesh.vertex(tri[2]);
  const double det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
  ElementGeometry g{};
  g.area = 0.5 * det;
  g.gx[0] = (b.y - c.y) / det;
  g.gy[0] = (c.x - b.x) / det;
  g.gx[1] = (c.y - a.y) / det;
  g.gy[1] = (a.x - c.x) / det;
  g.gx[2] = (a.y - b.y) / det;
  g.gy[2] = (b.x - a.x) / det;
  return g;
}

SparseMatrix from_triplets(int n, std::vector<Triplet>& entries) {
  SparseMatrix a(n, n);
  a.setFromTriplets(entries.begin(), entries.end());
  a.makeCompressed();
  return a;
}

void add_stiffness(const TriMesh& mesh, const CoefficientField& kappa,
                   const DofMap& dofs, int t, std::vector<Triplet>& entries) {
  const auto g = geometry(mesh, t);
  const double k = kappa.value(mesh.centroid(t));
  const auto& tri = mesh.triangle(t);
  for (int a = 0; a < 3; ++a) {
    const int i = dofs.dof(tri[a]);
    if (i < 0) continue;
    for (int b = 0; b < 3; ++b) {
      const int j = dofs.dof(tri[b]);
      if (j < 0) continue;
      entries.emplace_back(i, j, k * g.area * (g.gx[a] * g.gx[b] + g.gy[a] * g.gy[b]));
    }
  }
}

// Sutherland-Hodgman clip of a convex polygon against x0 <= x <= x1, y0 <= y <= y1.
std::vector<Point> clip_to_box(std::vector<Point> poly, double x0, double x1,
                               double y0, double y1) {
  auto clip = [&](auto inside, auto intersect) {
    std::vector<Point> out;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Point& cur = poly[i];
      const Point& prev = poly[(i + n - 1) % n];
      const bool in_cur = inside(cur);
      const bool in_prev = inside(prev);
      if (in_cur) {
        if (!in_prev) out.push_back(intersect(prev, cur));
        out.push_back(cur);
      } else if (in_prev) {
        out.push_back(intersect(prev, cur));
      }
    }
    poly = std::move(out);
  };
  auto at_x = [](double x) {
    return [x](const Point& p, const Point& q) {
      const double s = (x - p.x) / (q.x - p.x);
      return Point{x, p.y + s * (q.y - p.y)};
    };
  };
  auto at_y = [](double y) {
    return [y](const Point& p, const Point& q) {
      const double s = (y - p.y) / (q.y - p.y);
      return Point{p.x + s * (q.x - p.x), y};
    };
  };
  clip([&](const Point& p) { return p.x >= x0; }, at_x(x0));
  if (poly.empty()) return poly;
  clip([&](const Point& p) { return p.x <= x1; }, at_x(x1));
  if (poly.empty()) return poly;
  clip([&](const Point& p) { return p.y >= y0; }, at_y(y0));
  if (poly.empty()) return poly;
  clip([&](const Point& p) { return p.y <= y1; }, at_y(y1));
  return poly;
}

// Integrals of the three barycentric coordinates of triangle t over its
// intersection with the square.
std::array<double, 3> hat_integrals_on_square(const TriMesh& mesh, int t,
                                              const Square& sq) {
  const auto& tri = mesh.triangle(t);
  std::vector<Point> poly{mesh.vertex(tri[0]), mesh.vertex(tri[1]), mesh.vertex(tri[2])};
  poly = clip_to_box(std::move(poly), sq.x0, sq.x0 + sq.side, sq.y0, sq.y0 + sq.side);
  std::array<double, 3> result{0.0, 0.0, 0.0};
  if (poly.size() < 3) return result;
  const auto g = geometry(mesh, t);
  const Point& a = mesh.vertex(tri[0]);
  auto lambda = [&](const Point& p, int i) {
    if (i == 0) return 1.0 - (g.gx[1] + g.gx[2]) * (p.x - a.x) - (g.gy[1] + g.gy[2]) * (p.y - a.y);
    return g.gx[i] * (p.x - a.x) + g.gy[i] * (p.y - a.y);
  };
  // Fan triangulation; a linear function integrates exactly by its centroid value.
  for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
    const Point& p0 = poly[0];
    const Point& p1 = poly[k];
    const Point& p2 = poly[k + 1];
    const double area =
        0.5 * ((p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y));
    const Point c{(p0.x + p1.x + p2.x) / 3.0, (p0.y + p1.y + p2.y) / 3.0};
    for (int i = 0; i < 3; ++i) result[i] += area * lambda(c, i);
  }
  return result;
}

}  // namespace

SparseMatrix assemble_mass(const TriMesh& mesh, const DofMap& dofs) {
  std::vector<Triplet> entries;
  entries.reserve(9 * static_cast<std::size_t>(mesh.num_triangles()));
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const double area = mesh.signed_area(t);
    const auto& tri = mesh.triangle(t);
    for (int a = 0; a < 3; ++a) {
      const int i = dofs.dof(tri[a]);
      if (i < 0) continue;
      for (int b = 0; b < 3; ++b) {
        const int j = dofs.dof(tri[b]);
        if (j < 0) continue;
        entries.emplace_back(i, j, area / 12.0 * (a == b ? 2.0 : 1.0));
      }
    }
  }
  return from_triplets(dofs.size(), entries);
}

SparseMatrix assemble_mass(const TriMesh& mesh) {
  return assemble_mass(mesh, DofMap(mesh, BoundaryTreatment::EliminateDirichlet));
}

SparseMatrix assemble_stiffness(const TriMesh& mesh, const CoefficientField& kappa,
                                const DofMap& dofs) {
  std::vector<Triplet> entries;
  entries.reserve(9 * static_cast<std::size_t>(mesh.num_triangles()));
  for (int t = 0; t < mesh.num_triangles(); ++t) add_stiffness(mesh, kappa, dofs, t, entries);
  return from_triplets(dofs.size(), entries);
}

SparseMatrix assemble_stiffness(const TriMesh& mesh, const CoefficientField& kappa) {
  return assemble_stiffness(mesh, kappa,
                            DofMap(mesh, BoundaryTreatment::EliminateDirichlet));
}

SparseMatrix assemble_stiffness_subset(const TriMesh& mesh,
                                       const CoefficientField& kappa,
                                       const DofMap& dofs,
                                       const std::vector<int>& triangles) {
  std::vector<Triplet> entries;
  entries.reserve(9 * triangles.size());
  for (int t : triangles) add_stiffness(mesh, kappa, dofs, t, entries);
  return from_triplets(dofs.size(), entries);
}

Matrix assemble_input_squares(const TriMesh& mesh, const std::vector<Square>& squares,
                              const DofMap& dofs) {
  Matrix b = Matrix::Zero(dofs.size(), static_cast<Eigen::Index>(squares.size()));
  for (std::size_t s = 0; s < squares.size(); ++s) {
    const Square& sq = squares[s];
    for (int t = 0; t < mesh.num_triangles(); ++t) {
      const auto integrals = hat_integrals_on_square(mesh, t, sq);
      const auto& tri = mesh.triangle(t);
      for (int a = 0; a < 3; ++a) {
        const int i = dofs.dof(tri[a]);
        if (i >= 0) b(i, static_cast<Eigen::Index>(s)) += integrals[a];
      }
    }
  }
  return b;
}

Matrix assemble_input_squares(const TriMesh& mesh, const std::vector<Square>& squares) {
  return assemble_input_squares(mesh, squares,
                                DofMap(mesh, BoundaryTreatment::EliminateDirichlet));
}

Matrix assemble_output_mean(const TriMesh& mesh, const DofMap& dofs) {
  Matrix c = Matrix::Zero(1, dofs.size());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const double third = mesh.signed_area(t) / 3.0;
    for (int v : mesh.triangle(t)) {
      const int i = dofs.dof(v);
      if (i >= 0) c(0, i) += third;
    }
  }
  return c;
}

Matrix assemble_output_mean(const TriMesh& mesh) {
  return assemble_output_mean(mesh, DofMap(mesh, BoundaryTreatment::EliminateDirichlet));
}

Matrix assemble_output_square_mean(const TriMesh& mesh, const Square& square,
                                   const DofMap& dofs) {
  Matrix b = assemble_input_squares(mesh, {square}, dofs);
  return b.transpose() / (square.side * square.side);
}

}  // namespace lodre
