#ifndef MMMC_ASSEMBLY_HPP
#define MMMC_ASSEMBLY_HPP

#include <cmath>
#include <concepts>
#include <memory>
#include <string>

#include "mmmc/errors.hpp"
#include "mmmc/mesh.hpp"
#include "mmmc/quadrature.hpp"
#include "mmmc/sparse.hpp"

namespace mmmc {

template <typename F>
concept ScalarField = requires(const F& f, const Point& p) {
  { f(p) } -> std::convertible_to<double>;
};

namespace detail {

// For P1 elements the gradients are constant, so only the integral of the
// coefficient over each element is needed: K_ab = (int_K c) grad_a . grad_b.
template <ScalarField Coeff>
SparseMatrix assemble_diffusion(const Mesh& mesh, std::shared_ptr<const SparsityPattern> pattern,
                                const Coeff& coeff, const QuadratureRule& quad, bool require_positive) {
  if (!pattern || pattern->mesh_id != mesh.id) pattern = make_pattern(mesh);
  SparseMatrix K(pattern);
  auto values = K.values();
  const std::size_t k = mesh.nodes_per_element();
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const ElementGeometry& g = mesh.geometry[e];
    double c_int = 0.0;
    for (std::size_t q = 0; q < quad.size(); ++q) {
      const Point x = mesh.map(e, quad.points[q]);
      const double c = coeff(x);
      if (!std::isfinite(c)) {
        throw FieldEvaluationError("coefficient is not finite at (" + std::to_string(x.x) + ", " +
                                   std::to_string(x.y) + ")");
      }
      if (require_positive && !(c > 0.0)) {
        throw CoercivityViolation("diffusion coefficient " + std::to_string(c) + " <= 0 at (" +
                                  std::to_string(x.x) + ", " + std::to_string(x.y) + ")");
      }
      c_int += quad.weights[q] * c;
    }
    c_int *= g.measure;
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = 0; b < k; ++b) {
        const std::size_t s = pattern->slot(e, a, b);
        if (s == SparsityPattern::npos) continue;
        values[s] += c_int * (g.grad[a][0] * g.grad[b][0] + g.grad[a][1] * g.grad[b][1]);
      }
    }
  }
  return K;
}

}  // namespace detail

/// Stiffness matrix of (coeff grad u, grad v) over interior DOFs.
/// Throws CoercivityViolation if coeff <= 0 at any quadrature point.
template <ScalarField Coeff>
SparseMatrix assemble_stiffness(const Mesh& mesh, const Coeff& coeff, const QuadratureRule& quad,
                                std::shared_ptr<const SparsityPattern> pattern = nullptr) {
  return detail::assemble_diffusion(mesh, std::move(pattern), coeff, quad, true);
}

/// Same bilinear form for a sign-indefinite coefficient (the perturbation eta).
template <ScalarField Coeff>
SparseMatrix assemble_perturbation_matrix(const Mesh& mesh, const Coeff& eta, const QuadratureRule& quad,
                                          std::shared_ptr<const SparsityPattern> pattern = nullptr) {
  return detail::assemble_diffusion(mesh, std::move(pattern), eta, quad, false);
}

/// Load vector <f, phi_i>.
template <ScalarField Source>
FieldVector assemble_load_f(const Mesh& mesh, const Source& f, const QuadratureRule& quad) {
  FieldVector b(mesh.num_interior(), mesh.id);
  const std::size_t k = mesh.nodes_per_element();
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const auto nodes = mesh.element(e);
    const double meas = mesh.geometry[e].measure;
    for (std::size_t q = 0; q < quad.size(); ++q) {
      const Point x = mesh.map(e, quad.points[q]);
      const double v = f(x);
      if (!std::isfinite(v)) {
        throw FieldEvaluationError("source is not finite at (" + std::to_string(x.x) + ", " +
                                   std::to_string(x.y) + ")");
      }
      const double wv = quad.weights[q] * meas * v;
      for (std::size_t a = 0; a < k; ++a) {
        const auto i = mesh.interior_dof[nodes[a]];
        if (i >= 0) b[static_cast<std::size_t>(i)] += wv * quad.points[q][a];
      }
    }
  }
  return b;
}

/// Consistent P1 mass matrix (exact: the rule only needs degree 2).
inline SparseMatrix assemble_mass(const Mesh& mesh, std::shared_ptr<const SparsityPattern> pattern = nullptr) {
  if (!pattern || pattern->mesh_id != mesh.id) pattern = make_pattern(mesh);
  SparseMatrix Mm(pattern);
  auto values = Mm.values();
  const std::size_t k = mesh.nodes_per_element();
  // int_K l_a l_b = |K| (1 + delta_ab) / ((d+1)(d+2))
  const double denom = k == 2 ? 6.0 : 12.0;
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const double meas = mesh.geometry[e].measure;
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = 0; b < k; ++b) {
        const std::size_t s = pattern->slot(e, a, b);
        if (s != SparsityPattern::npos) values[s] += meas * (a == b ? 2.0 : 1.0) / denom;
      }
    }
  }
  return Mm;
}

/// Right-hand side of the mode recursion: -K_eta * prev.
inline FieldVector mode_rhs(const SparseMatrix& K_eta, const FieldVector& prev) {
  if (K_eta.dim() != prev.size()) {
    throw ShapeError("mode_rhs: matrix dim " + std::to_string(K_eta.dim()) + " vs vector " +
                     std::to_string(prev.size()));
  }
  FieldVector out(prev.size(), prev.mesh_id);
  K_eta.multiply(prev.values, out.values);
  for (double& v : out.values) v = -v;
  return out;
}

/// Nodal interpolant of a field on the interior vertices.
template <ScalarField F>
FieldVector interpolate(const Mesh& mesh, const F& f) {
  FieldVector v(mesh.num_interior(), mesh.id);
  for (std::size_t i = 0; i < mesh.num_interior(); ++i) v[i] = f(mesh.vertices[mesh.interior_vertex[i]]);
  return v;
}

}  // namespace mmmc

#endif  // MMMC_ASSEMBLY_HPP
