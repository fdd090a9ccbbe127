#ifndef MMMC_SPARSE_DIRECT_HPP
#define MMMC_SPARSE_DIRECT_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mmmc/errors.hpp"
#include "mmmc/sparse.hpp"

namespace mmmc {

/// Operation counts for one run. Workers keep their own copy; copies are
/// merged with += after the workers join.
struct OpCounters {
  std::uint64_t factorizations = 0;
  std::uint64_t triangular_solve_pairs = 0;
  std::uint64_t matvecs = 0;
  std::uint64_t assemblies = 0;

  OpCounters& operator+=(const OpCounters& o) {
    factorizations += o.factorizations;
    triangular_solve_pairs += o.triangular_solve_pairs;
    matvecs += o.matvecs;
    assemblies += o.assemblies;
    return *this;
  }
  friend bool operator==(const OpCounters&, const OpCounters&) = default;
};

/// Envelope (profile) Cholesky factor K = P^T L L^T P.
///
/// Row i of L is stored densely from column first[i] to the diagonal; the
/// envelope of K is preserved by the factorization, so no fill appears
/// outside it. On the structured meshes the natural vertex order gives a
/// bandwidth of one grid row.
class Factorization {
public:
  std::size_t dim() const { return first_.size(); }
  const std::vector<std::size_t>& ordering() const { return ordering_; }
  std::size_t factor_nonzeros() const { return values_.size(); }
  double diagonal(std::size_t i) const { return values_[row_start_[i] + (i - first_[i])]; }

  /// Solves K x = rhs by one forward and one backward substitution.
  void solve(std::span<const double> rhs, std::span<double> x) const {
    const std::size_t n = dim();
    if (rhs.size() != n || x.size() != n) {
      throw ShapeError("solve: factor dim " + std::to_string(n) + " vs rhs " + std::to_string(rhs.size()));
    }
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = rhs[ordering_[i]];
    // L y = b
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = values_.data() + row_start_[i];
      double s = y[i];
      for (std::size_t k = first_[i]; k < i; ++k) s -= row[k - first_[i]] * y[k];
      y[i] = s / row[i - first_[i]];
    }
    // L^T z = y, column sweep over the stored rows
    for (std::size_t i = n; i-- > 0;) {
      const double* row = values_.data() + row_start_[i];
      y[i] /= row[i - first_[i]];
      const double zi = y[i];
      for (std::size_t k = first_[i]; k < i; ++k) y[k] -= row[k - first_[i]] * zi;
    }
    for (std::size_t i = 0; i < n; ++i) x[ordering_[i]] = y[i];
  }

  friend Factorization factorize(const SparseMatrix& K, std::vector<std::size_t> ordering);

private:
  std::vector<std::size_t> ordering_;   // position -> original DOF
  std::vector<std::size_t> first_;      // first stored column of each row
  std::vector<std::size_t> row_start_;  // offset of each row in values_
  std::vector<double> values_;
};

/// Cholesky factorization of a symmetric positive definite matrix.
/// `ordering[p]` is the DOF placed at position p; empty means natural order.
/// Throws NotPositiveDefinite on a non-positive pivot.
inline Factorization factorize(const SparseMatrix& K, std::vector<std::size_t> ordering = {}) {
  const std::size_t n = K.dim();
  if (ordering.empty()) {
    ordering.resize(n);
    std::iota(ordering.begin(), ordering.end(), std::size_t{0});
  }
  if (ordering.size() != n) throw ShapeError("ordering length does not match matrix dimension");
  std::vector<std::size_t> position(n, n);
  for (std::size_t p = 0; p < n; ++p) {
    if (ordering[p] >= n || position[ordering[p]] != n) throw ShapeError("ordering is not a permutation");
    position[ordering[p]] = p;
  }

  const auto& pat = K.pattern();
  const auto vals = K.values();
  Factorization F;
  F.ordering_ = std::move(ordering);
  F.first_.resize(n);
  F.row_start_.resize(n + 1);
  for (std::size_t p = 0; p < n; ++p) {
    const std::size_t i = F.ordering_[p];
    std::size_t f = p;
    for (std::size_t k = pat.row_ptr[i]; k < pat.row_ptr[i + 1]; ++k) f = std::min(f, position[pat.col[k]]);
    F.first_[p] = f;
  }
  F.row_start_[0] = 0;
  for (std::size_t p = 0; p < n; ++p) F.row_start_[p + 1] = F.row_start_[p] + (p - F.first_[p] + 1);
  F.values_.assign(F.row_start_[n], 0.0);

  // scatter the lower triangle of P K P^T into the envelope
  for (std::size_t p = 0; p < n; ++p) {
    const std::size_t i = F.ordering_[p];
    for (std::size_t k = pat.row_ptr[i]; k < pat.row_ptr[i + 1]; ++k) {
      const std::size_t q = position[pat.col[k]];
      if (q <= p) F.values_[F.row_start_[p] + (q - F.first_[p])] = vals[k];
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    double* Li = F.values_.data() + F.row_start_[i];
    const std::size_t fi = F.first_[i];
    for (std::size_t j = fi; j <= i; ++j) {
      const double* Lj = F.values_.data() + F.row_start_[j];
      const std::size_t fj = F.first_[j];
      double s = Li[j - fi];
      for (std::size_t k = std::max(fi, fj); k < j; ++k) s -= Li[k - fi] * Lj[k - fj];
      if (j < i) {
        Li[j - fi] = s / Lj[j - fj];
      } else {
        if (!(s > 0.0)) {
          throw NotPositiveDefinite("non-positive pivot " + std::to_string(s) + " at row " + std::to_string(i));
        }
        Li[i - fi] = std::sqrt(s);
      }
    }
  }
  return F;
}

inline Factorization factorize(const SparseMatrix& K, OpCounters& counters) {
  Factorization F = factorize(K);
  ++counters.factorizations;
  return F;
}

inline FieldVector solve_with_factors(const Factorization& F, const FieldVector& rhs) {
  FieldVector x(rhs.size(), rhs.mesh_id);
  F.solve(rhs.values, x.values);
  return x;
}

inline FieldVector solve_with_factors(const Factorization& F, const FieldVector& rhs, OpCounters& counters) {
  FieldVector x = solve_with_factors(F, rhs);
  ++counters.triangular_solve_pairs;
  return x;
}

}  // namespace mmmc

#endif  // MMMC_SPARSE_DIRECT_HPP
