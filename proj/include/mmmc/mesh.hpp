#ifndef MMMC_MESH_HPP
#define MMMC_MESH_HPP

#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mmmc/errors.hpp"

namespace mmmc {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct Interval1D {
  double x_lo = 0.0;
  double x_hi = 1.0;
};

struct Rect2D {
  double x_lo = 0.0;
  double x_hi = 1.0;
  double y_lo = 0.0;
  double y_hi = 1.0;
};

using Domain = std::variant<Interval1D, Rect2D>;

inline int dimension(const Domain& d) { return std::holds_alternative<Interval1D>(d) ? 1 : 2; }

inline double measure(const Domain& d) {
  if (const auto* i = std::get_if<Interval1D>(&d)) return i->x_hi - i->x_lo;
  const auto& r = std::get<Rect2D>(d);
  return (r.x_hi - r.x_lo) * (r.y_hi - r.y_lo);
}

/// Per-element data that every assembly loop needs: measure and the constant
/// gradients of the P1 shape functions (only the first `nodes` entries used).
struct ElementGeometry {
  double measure = 0.0;
  std::array<std::array<double, 2>, 3> grad{};
};

/// Structured simplicial mesh of an interval or a rectangle.
///
/// Boundary vertices carry homogeneous Dirichlet data and are eliminated:
/// `interior_dof[v]` is the row of vertex v in the reduced system, or -1.
/// Immutable once built; `id` tags vectors that live on this mesh.
class Mesh {
public:
  Domain domain;
  std::vector<Point> vertices;
  std::vector<std::size_t> connectivity;  // nodes_per_element entries per element
  std::vector<ElementGeometry> geometry;
  std::vector<std::uint8_t> is_boundary;
  std::vector<std::ptrdiff_t> interior_dof;
  std::vector<std::size_t> interior_vertex;  // inverse of interior_dof
  double h = 0.0;          // max element diameter
  double cell_size = 0.0;  // grid spacing (segment length or square side)
  std::size_t p_per_dir = 0;
  std::uint64_t id = 0;

  int dim() const { return dimension(domain); }
  std::size_t nodes_per_element() const { return dim() == 1 ? 2 : 3; }
  std::size_t num_elements() const { return geometry.size(); }
  std::size_t num_vertices() const { return vertices.size(); }
  std::size_t num_interior() const { return interior_vertex.size(); }

  std::span<const std::size_t> element(std::size_t e) const {
    const std::size_t k = nodes_per_element();
    return {connectivity.data() + e * k, k};
  }

  /// Physical point with barycentric coordinates `lambda` in element e.
  Point map(std::size_t e, const std::array<double, 3>& lambda) const {
    Point p{};
    const auto nodes = element(e);
    for (std::size_t a = 0; a < nodes.size(); ++a) {
      p.x += lambda[a] * vertices[nodes[a]].x;
      p.y += lambda[a] * vertices[nodes[a]].y;
    }
    return p;
  }

  double element_diameter(std::size_t e) const {
    const auto nodes = element(e);
    double d = 0.0;
    for (std::size_t a = 0; a < nodes.size(); ++a) {
      for (std::size_t b = a + 1; b < nodes.size(); ++b) {
        const Point& p = vertices[nodes[a]];
        const Point& q = vertices[nodes[b]];
        d = std::max(d, std::hypot(p.x - q.x, p.y - q.y));
      }
    }
    return d;
  }
};

namespace detail {

inline std::uint64_t next_mesh_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

inline void finish_mesh(Mesh& m) {
  m.interior_dof.assign(m.vertices.size(), -1);
  m.interior_vertex.clear();
  for (std::size_t v = 0; v < m.vertices.size(); ++v) {
    if (!m.is_boundary[v]) {
      m.interior_dof[v] = static_cast<std::ptrdiff_t>(m.interior_vertex.size());
      m.interior_vertex.push_back(v);
    }
  }
  m.geometry.resize(m.connectivity.size() / m.nodes_per_element());
  m.h = 0.0;
  for (std::size_t e = 0; e < m.geometry.size(); ++e) {
    const auto nodes = m.element(e);
    ElementGeometry& g = m.geometry[e];
    if (m.dim() == 1) {
      const double len = m.vertices[nodes[1]].x - m.vertices[nodes[0]].x;
      g.measure = len;
      g.grad[0] = {-1.0 / len, 0.0};
      g.grad[1] = {1.0 / len, 0.0};
    } else {
      const Point& p0 = m.vertices[nodes[0]];
      const Point& p1 = m.vertices[nodes[1]];
      const Point& p2 = m.vertices[nodes[2]];
      const double det = (p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y);
      g.measure = 0.5 * det;
      // grad lambda_a = rot90(opposite edge) / det
      g.grad[0] = {(p1.y - p2.y) / det, (p2.x - p1.x) / det};
      g.grad[1] = {(p2.y - p0.y) / det, (p0.x - p2.x) / det};
      g.grad[2] = {(p0.y - p1.y) / det, (p1.x - p0.x) / det};
    }
    m.h = std::max(m.h, m.element_diameter(e));
  }
  m.id = next_mesh_id();
}

}  // namespace detail

/// Uniform partition of an interval into `n_cells` segments.
inline Mesh build_mesh_1d(const Interval1D& d, std::size_t n_cells) {
  if (n_cells < 2) throw InvalidMesh("1D mesh needs at least 2 cells, got " + std::to_string(n_cells));
  if (!(d.x_lo < d.x_hi)) throw InvalidMesh("interval requires x_lo < x_hi");
  Mesh m;
  m.domain = d;
  m.p_per_dir = n_cells + 1;
  m.cell_size = (d.x_hi - d.x_lo) / static_cast<double>(n_cells);
  m.vertices.resize(n_cells + 1);
  m.is_boundary.assign(n_cells + 1, 0);
  for (std::size_t i = 0; i <= n_cells; ++i) {
    // endpoints set exactly so that the last vertex is x_hi bit-for-bit
    m.vertices[i].x = i == n_cells ? d.x_hi : d.x_lo + static_cast<double>(i) * m.cell_size;
  }
  m.is_boundary.front() = m.is_boundary.back() = 1;
  m.connectivity.reserve(2 * n_cells);
  for (std::size_t i = 0; i < n_cells; ++i) {
    m.connectivity.push_back(i);
    m.connectivity.push_back(i + 1);
  }
  detail::finish_mesh(m);
  return m;
}

/// Uniform n x n grid of a rectangle, each cell split along its
/// lower-left to upper-right diagonal. Vertices are numbered row-major
/// (x fastest), which also fixes the interior DOF order.
inline Mesh build_mesh_2d(const Rect2D& d, std::size_t n) {
  if (n < 2) throw InvalidMesh("2D mesh needs at least 2 cells per direction, got " + std::to_string(n));
  if (!(d.x_lo < d.x_hi) || !(d.y_lo < d.y_hi)) throw InvalidMesh("rectangle requires lo < hi");
  Mesh m;
  m.domain = d;
  m.p_per_dir = n + 1;
  const double hx = (d.x_hi - d.x_lo) / static_cast<double>(n);
  const double hy = (d.y_hi - d.y_lo) / static_cast<double>(n);
  m.cell_size = std::max(hx, hy);
  const std::size_t np = n + 1;
  m.vertices.resize(np * np);
  m.is_boundary.assign(np * np, 0);
  for (std::size_t j = 0; j < np; ++j) {
    for (std::size_t i = 0; i < np; ++i) {
      Point& p = m.vertices[j * np + i];
      p.x = i == n ? d.x_hi : d.x_lo + static_cast<double>(i) * hx;
      p.y = j == n ? d.y_hi : d.y_lo + static_cast<double>(j) * hy;
      m.is_boundary[j * np + i] = (i == 0 || j == 0 || i == n || j == n) ? 1 : 0;
    }
  }
  m.connectivity.reserve(6 * n * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t v00 = j * np + i;
      const std::size_t v10 = v00 + 1;
      const std::size_t v01 = v00 + np;
      const std::size_t v11 = v01 + 1;
      // counter-clockwise: (v00, v10, v11) and (v00, v11, v01)
      for (std::size_t v : {v00, v10, v11, v00, v11, v01}) m.connectivity.push_back(v);
    }
  }
  detail::finish_mesh(m);
  return m;
}

inline Mesh build_mesh(const Domain& d, std::size_t n_cells) {
  if (const auto* i = std::get_if<Interval1D>(&d)) return build_mesh_1d(*i, n_cells);
  return build_mesh_2d(std::get<Rect2D>(d), n_cells);
}

}  // namespace mmmc

#endif  // MMMC_MESH_HPP
