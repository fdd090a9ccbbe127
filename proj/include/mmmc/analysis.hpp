#ifndef MMMC_ANALYSIS_HPP
#define MMMC_ANALYSIS_HPP

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mmmc/assembly.hpp"
#include "mmmc/errors.hpp"
#include "mmmc/mesh.hpp"
#include "mmmc/quadrature.hpp"
#include "mmmc/random_fields.hpp"
#include "mmmc/solver.hpp"
#include "mmmc/sparse.hpp"

namespace mmmc {

enum class NormKind { L2, H1, RelativeL2, RelativeH1 };

inline bool is_relative(NormKind k) { return k == NormKind::RelativeL2 || k == NormKind::RelativeH1; }

namespace detail {

inline void check_on_mesh(const Mesh& mesh, const FieldVector& v) {
  if (v.size() != mesh.num_interior()) {
    throw ShapeError("vector of length " + std::to_string(v.size()) + " is not on a mesh with " +
                     std::to_string(mesh.num_interior()) + " interior DOFs");
  }
  if (v.mesh_id != 0 && v.mesh_id != mesh.id) throw ShapeError("vector belongs to a different mesh");
}

// Squared L2 norm and squared H1 seminorm of a P1 function.
inline std::pair<double, double> p1_norms_squared(const Mesh& mesh, const FieldVector& v) {
  const auto pattern = make_pattern(mesh);
  const double l2 = assemble_mass(mesh, pattern).quadratic_form(v.values);
  const double semi =
      assemble_stiffness(mesh, [](const Point&) { return 1.0; }, assembly_rule(mesh.dim()), pattern).quadratic_form(v.values);
  return {std::max(0.0, l2), std::max(0.0, semi)};
}

}  // namespace detail

/// L2 or H1 norm of a P1 function, exact via the mass and unit-stiffness
/// quadratic forms. Relative kinds need a reference; use discrete_distance.
inline double discrete_norm(const Mesh& mesh, const FieldVector& v, NormKind kind) {
  detail::check_on_mesh(mesh, v);
  if (is_relative(kind)) throw InvalidData("relative norm requires a reference field");
  const auto [l2, semi] = detail::p1_norms_squared(mesh, v);
  return kind == NormKind::L2 ? std::sqrt(l2) : std::sqrt(l2 + semi);
}

inline double h1_seminorm(const Mesh& mesh, const FieldVector& v) {
  detail::check_on_mesh(mesh, v);
  return std::sqrt(detail::p1_norms_squared(mesh, v).second);
}

/// ||v - ref||, divided by ||ref|| for the relative kinds.
inline double discrete_distance(const Mesh& mesh, const FieldVector& v, const FieldVector& ref, NormKind kind) {
  detail::check_on_mesh(mesh, v);
  detail::check_on_mesh(mesh, ref);
  FieldVector d(v.size(), mesh.id);
  for (std::size_t i = 0; i < v.size(); ++i) d[i] = v[i] - ref[i];
  const NormKind base = (kind == NormKind::L2 || kind == NormKind::RelativeL2) ? NormKind::L2 : NormKind::H1;
  const double num = discrete_norm(mesh, d, base);
  if (!is_relative(kind)) return num;
  const double den = discrete_norm(mesh, ref, base);
  if (!(den > 0.0)) throw InvalidData("relative distance against a zero reference");
  return num / den;
}

/// Smooth field with its gradient, used as an exact reference.
struct ExactField {
  std::function<double(const Point&)> value;
  std::function<std::array<double, 2>(const Point&)> gradient;
};

/// ||v - exact|| by elementwise quadrature of the pointwise difference
/// (error_rule: 5-point Gauss in 1D, degree 6 on triangles).
inline double error_vs_exact(const Mesh& mesh, const FieldVector& v, const ExactField& exact, NormKind kind) {
  detail::check_on_mesh(mesh, v);
  const QuadratureRule quad = error_rule(mesh.dim());
  const bool want_grad = kind == NormKind::H1 || kind == NormKind::RelativeH1;
  double err = 0.0, ref = 0.0;
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const auto nodes = mesh.element(e);
    const ElementGeometry& g = mesh.geometry[e];
    std::array<double, 3> local{};
    std::array<double, 2> grad_v{};
    for (std::size_t a = 0; a < nodes.size(); ++a) {
      const auto i = mesh.interior_dof[nodes[a]];
      local[a] = i >= 0 ? v[static_cast<std::size_t>(i)] : 0.0;
      grad_v[0] += local[a] * g.grad[a][0];
      grad_v[1] += local[a] * g.grad[a][1];
    }
    for (std::size_t q = 0; q < quad.size(); ++q) {
      const Point x = mesh.map(e, quad.points[q]);
      double vh = 0.0;
      for (std::size_t a = 0; a < nodes.size(); ++a) vh += local[a] * quad.points[q][a];
      const double u = exact.value(x);
      const double w = quad.weights[q] * g.measure;
      err += w * (vh - u) * (vh - u);
      ref += w * u * u;
      if (want_grad) {
        const auto du = exact.gradient(x);
        const double gx = grad_v[0] - du[0];
        const double gy = mesh.dim() == 2 ? grad_v[1] - du[1] : 0.0;
        err += w * (gx * gx + gy * gy);
        ref += w * (du[0] * du[0] + (mesh.dim() == 2 ? du[1] * du[1] : 0.0));
      }
    }
  }
  if (!is_relative(kind)) return std::sqrt(err);
  if (!(ref > 0.0)) throw InvalidData("relative error against a zero exact field");
  return std::sqrt(err / ref);
}

/// c(eps) in E(u) = c(eps) (x - x^2) for -((1 + eps Y) u')' = Y on (0, 1),
/// u(0) = u(1) = 0, Y ~ U[0, 1]: c = (1/eps - ln(1 + eps)/eps^2) / 2.
/// Uses the Taylor series for small eps; c(0) = 1/4.
inline double expectation_coefficient_1d(double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw InvalidData("epsilon must lie in [0, 1]");
  if (epsilon < 1e-3) {
    // (1/eps - ln(1+eps)/eps^2)/2 = (1/2 - eps/3 + eps^2/4 - eps^3/5 + ...)/2
    double s = 0.0, p = 1.0;
    for (int k = 0; k < 8; ++k, p *= -epsilon) s += p / (k + 2.0);
    return 0.5 * s;
  }
  return 0.5 * (1.0 / epsilon - std::log1p(epsilon) / (epsilon * epsilon));
}

inline ExactField exact_expectation_1d(double epsilon) {
  const double c = expectation_coefficient_1d(epsilon);
  return {[c](const Point& p) { return c * (p.x - p.x * p.x); },
          [c](const Point& p) { return std::array<double, 2>{c * (1.0 - 2.0 * p.x), 0.0}; }};
}

/// Mean over a single uniform random variable by Gauss-Legendre quadrature in
/// that variable instead of sampling. eta and f must be ScalarUniform on one
/// shared stream, or deterministic. The mode recursion and factorization reuse
/// are the same as in run_multimode_mc; `samples` in the result is the number
/// of quadrature nodes.
inline RunResult quadrature_expectation_1d(const Problem& p, SolverConfig cfg, std::size_t nodes = 64) {
  cfg.validate();
  std::optional<std::uint32_t> stream;
  for (const RandomFieldSpec* s : {&p.eta, &p.f}) {
    if (const auto* su = std::get_if<ScalarUniform>(s)) {
      if (stream && *stream != su->stream) throw UnsupportedSpec("eta and f must share one uniform variable");
      stream = su->stream;
    } else if (!std::holds_alternative<Deterministic>(*s)) {
      throw UnsupportedSpec("quadrature expectation needs scalar-uniform or deterministic fields");
    }
  }
  const auto t_start = detail::Clock::now();
  const Mesh& mesh = p.mesh;
  const QuadratureRule quad = cfg.quadrature.value_or(assembly_rule(mesh.dim()));
  const auto pattern = make_pattern(mesh);
  const std::size_t n = mesh.num_interior();
  const std::size_t N = cfg.modes;

  RunResult r;
  r.variant = SolverVariant::MultiModes;
  r.epsilon = cfg.epsilon;
  r.samples = nodes;
  r.epsilon_warning = cfg.epsilon_warning();
  const SparseMatrix K0 = assemble_stiffness(mesh, p.a0.fn, quad, pattern);
  ++r.counters.assemblies;
  const Factorization F = factorize(K0, r.counters);
  const SparseMatrix gram = detail::h1_gram(mesh, pattern);

  const GaussLegendre gl = gauss_legendre(nodes);
  r.psi = FieldVector(n, mesh.id);
  r.variance = FieldVector(n, mesh.id);
  r.mode_means.assign(N, FieldVector(n, mesh.id));
  r.mode_h1_means.assign(N, 0.0);
  std::vector<double> second(n, 0.0);
  auto realize_at = [](const RandomFieldSpec& s, double t) {
    if (const auto* su = std::get_if<ScalarUniform>(&s)) return realize(s, {su->lo + (su->hi - su->lo) * t});
    return realize(s, {});
  };
  for (std::size_t k = 0; k < nodes; ++k) {
    const double t = 0.5 * (gl.nodes[k] + 1.0);
    const double w = 0.5 * gl.weights[k];
    const RealizedField eta = realize_at(p.eta, t);
    const RealizedField f = realize_at(p.f, t);
    const FieldVector load = assemble_load_f(mesh, f, quad);
    const SparseMatrix K_eta = assemble_perturbation_matrix(mesh, eta, quad, pattern);
    r.counters.assemblies += 2;
    std::vector<double> U(n, 0.0);
    double weight = 1.0;
    for_each_mode(F, &K_eta, load, N, r.counters, [&](std::size_t m, const FieldVector& u) {
      for (std::size_t i = 0; i < n; ++i) {
        U[i] += weight * u[i];
        r.mode_means[m][i] += w * u[i];
      }
      r.mode_h1_means[m] += w * detail::h1_norm(gram, u);
      weight *= cfg.epsilon;
    });
    for (std::size_t i = 0; i < n; ++i) {
      r.psi[i] += w * U[i];
      second[i] += w * U[i] * U[i];
    }
  }
  for (std::size_t i = 0; i < n; ++i) r.variance[i] = std::max(0.0, second[i] - r.psi[i] * r.psi[i]);
  r.timings.total = detail::seconds_since(t_start);
  return r;
}

struct ConvergenceRow {
  double parameter = 0.0;
  double error = 0.0;
  std::optional<double> order;  // against the previous row
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
};

/// Observed orders log(e_i / e_{i+1}) / log(p_i / p_{i+1}) between consecutive rows.
inline ConvergenceTable convergence_orders(std::span<const std::pair<double, double>> data) {
  ConvergenceTable t;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto [param, err] = data[i];
    if (!(err > 0.0)) throw InvalidData("errors must be positive");
    if (!(param > 0.0)) throw InvalidData("refinement parameters must be positive");
    ConvergenceRow row{param, err, std::nullopt};
    if (i > 0) {
      if (!(param < data[i - 1].first)) throw InvalidData("refinement parameters must be strictly decreasing");
      row.order = std::log(data[i - 1].second / err) / std::log(data[i - 1].first / param);
    }
    t.rows.push_back(row);
  }
  return t;
}

/// Sample standard deviation over sqrt(M), two-pass.
inline double mc_standard_error(std::span<const double> values) {
  const std::size_t M = values.size();
  if (M < 2) throw InvalidData("standard error needs at least two samples");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(M);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(M - 1) / static_cast<double>(M));
}

/// L2-aggregated standard error of a sample mean: sqrt(sum_i m_i var_i / M)
/// with m_i = |supp phi_i| / (d + 1) the lumped mass of node i and var_i the
/// per-node sample variance.
inline double mc_l2_standard_error(const Mesh& mesh, const FieldVector& variance, std::size_t samples) {
  detail::check_on_mesh(mesh, variance);
  if (samples < 2) throw InvalidData("standard error needs at least two samples");
  std::vector<double> lumped(mesh.num_interior(), 0.0);
  const double share = 1.0 / static_cast<double>(mesh.nodes_per_element());
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    for (std::size_t v : mesh.element(e)) {
      const auto i = mesh.interior_dof[v];
      if (i >= 0) lumped[static_cast<std::size_t>(i)] += share * mesh.geometry[e].measure;
    }
  }
  double total = 0.0;
  for (std::size_t i = 0; i < lumped.size(); ++i) total += lumped[i] * variance[i];
  return std::sqrt(total / static_cast<double>(samples));
}

}  // namespace mmmc

#endif  // MMMC_ANALYSIS_HPP
