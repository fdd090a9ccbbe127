#ifndef MMMC_SPARSE_HPP
#define MMMC_SPARSE_HPP

#include <algorithm>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "mmmc/errors.hpp"
#include "mmmc/mesh.hpp"

namespace mmmc {

/// Row-compressed nonzero structure over the interior DOFs of a mesh, plus
/// the map from each element's local (a, b) pair to its CSR slot. Every matrix
/// assembled on the mesh shares one pattern.
struct SparsityPattern {
  std::size_t dim = 0;
  std::vector<std::size_t> row_ptr;
  std::vector<std::size_t> col;
  // element e, local pair (a, b) -> slot, or npos when either node is on the boundary
  std::vector<std::size_t> element_slots;
  std::size_t nodes_per_element = 0;
  std::uint64_t mesh_id = 0;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  std::size_t nnz() const { return col.size(); }

  std::size_t find(std::size_t i, std::size_t j) const {
    const auto first = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[i]);
    const auto last = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[i + 1]);
    const auto it = std::lower_bound(first, last, j);
    return (it != last && *it == j) ? static_cast<std::size_t>(it - col.begin()) : npos;
  }

  std::size_t slot(std::size_t e, std::size_t a, std::size_t b) const {
    return element_slots[(e * nodes_per_element + a) * nodes_per_element + b];
  }
};

inline std::shared_ptr<const SparsityPattern> make_pattern(const Mesh& mesh) {
  auto p = std::make_shared<SparsityPattern>();
  const std::size_t n = mesh.num_interior();
  const std::size_t k = mesh.nodes_per_element();
  p->dim = n;
  p->nodes_per_element = k;
  p->mesh_id = mesh.id;
  std::vector<std::vector<std::size_t>> rows(n);
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const auto nodes = mesh.element(e);
    for (std::size_t a = 0; a < k; ++a) {
      const auto i = mesh.interior_dof[nodes[a]];
      if (i < 0) continue;
      for (std::size_t b = 0; b < k; ++b) {
        const auto j = mesh.interior_dof[nodes[b]];
        if (j >= 0) rows[static_cast<std::size_t>(i)].push_back(static_cast<std::size_t>(j));
      }
    }
  }
  p->row_ptr.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    auto& r = rows[i];
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
    p->row_ptr[i + 1] = p->row_ptr[i] + r.size();
    p->col.insert(p->col.end(), r.begin(), r.end());
  }
  p->element_slots.assign(mesh.num_elements() * k * k, SparsityPattern::npos);
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const auto nodes = mesh.element(e);
    for (std::size_t a = 0; a < k; ++a) {
      const auto i = mesh.interior_dof[nodes[a]];
      for (std::size_t b = 0; b < k; ++b) {
        const auto j = mesh.interior_dof[nodes[b]];
        if (i >= 0 && j >= 0) {
          p->element_slots[(e * k + a) * k + b] = p->find(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        }
      }
    }
  }
  return p;
}

/// Symmetric matrix over interior DOFs. Both triangles are stored.
class SparseMatrix {
public:
  SparseMatrix() = default;
  explicit SparseMatrix(std::shared_ptr<const SparsityPattern> pattern)
      : pattern_(std::move(pattern)), values_(pattern_->nnz(), 0.0) {}

  std::size_t dim() const { return pattern_ ? pattern_->dim : 0; }
  std::size_t nnz() const { return values_.size(); }
  const SparsityPattern& pattern() const { return *pattern_; }
  const std::shared_ptr<const SparsityPattern>& pattern_ptr() const { return pattern_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  double at(std::size_t i, std::size_t j) const {
    const std::size_t s = pattern_->find(i, j);
    return s == SparsityPattern::npos ? 0.0 : values_[s];
  }

  /// y = A x
  void multiply(std::span<const double> x, std::span<double> y) const {
    if (x.size() != dim() || y.size() != dim()) throw ShapeError("matvec dimension mismatch");
    const auto& p = *pattern_;
    for (std::size_t i = 0; i < p.dim; ++i) {
      double s = 0.0;
      for (std::size_t k = p.row_ptr[i]; k < p.row_ptr[i + 1]; ++k) s += values_[k] * x[p.col[k]];
      y[i] = s;
    }
  }

  /// x^T A x
  double quadratic_form(std::span<const double> x) const {
    if (x.size() != dim()) throw ShapeError("quadratic form dimension mismatch");
    const auto& p = *pattern_;
    double total = 0.0;
    for (std::size_t i = 0; i < p.dim; ++i) {
      double s = 0.0;
      for (std::size_t k = p.row_ptr[i]; k < p.row_ptr[i + 1]; ++k) s += values_[k] * x[p.col[k]];
      total += x[i] * s;
    }
    return total;
  }

  bool is_symmetric() const {
    const auto& p = *pattern_;
    for (std::size_t i = 0; i < p.dim; ++i) {
      for (std::size_t k = p.row_ptr[i]; k < p.row_ptr[i + 1]; ++k) {
        if (values_[k] != at(p.col[k], i)) return false;
      }
    }
    return true;
  }

  std::vector<double> to_dense() const {
    const std::size_t n = dim();
    std::vector<double> d(n * n, 0.0);
    const auto& p = *pattern_;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = p.row_ptr[i]; k < p.row_ptr[i + 1]; ++k) d[i * n + p.col[k]] = values_[k];
    }
    return d;
  }

  /// Builds a matrix from a dense row-major array, keeping exact nonzeros.
  static SparseMatrix from_dense(std::size_t n, std::span<const double> dense) {
    if (dense.size() != n * n) throw ShapeError("dense matrix size mismatch");
    auto p = std::make_shared<SparsityPattern>();
    p->dim = n;
    p->row_ptr.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (dense[i * n + j] != 0.0 || i == j) p->col.push_back(j);
      }
      p->row_ptr[i + 1] = p->col.size();
    }
    SparseMatrix m(p);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = p->row_ptr[i]; k < p->row_ptr[i + 1]; ++k) m.values_[k] = dense[i * n + p->col[k]];
    }
    return m;
  }

private:
  std::shared_ptr<const SparsityPattern> pattern_;
  std::vector<double> values_;
};

/// Nodal coefficient vector of a P1 function, indexed by interior DOF.
struct FieldVector {
  std::vector<double> values;
  std::uint64_t mesh_id = 0;

  FieldVector() = default;
  FieldVector(std::size_t n, std::uint64_t mesh) : values(n, 0.0), mesh_id(mesh) {}
  FieldVector(std::vector<double> v, std::uint64_t mesh) : values(std::move(v)), mesh_id(mesh) {}

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
};

inline void check_same_mesh(const FieldVector& a, const FieldVector& b) {
  if (a.size() != b.size()) throw ShapeError("field vectors have different lengths");
  if (a.mesh_id != b.mesh_id && a.mesh_id != 0 && b.mesh_id != 0) {
    throw ShapeError("field vectors live on different meshes");
  }
}

}  // namespace mmmc

#endif  // MMMC_SPARSE_HPP
