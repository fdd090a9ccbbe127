#ifndef MMMC_QUADRATURE_HPP
#define MMMC_QUADRATURE_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "mmmc/errors.hpp"

namespace mmmc {

/// Reference-element rule in barycentric coordinates. Weights are
/// normalized so they sum to 1 (the reference measure); callers scale by the
/// physical element measure. 1D rules only use the first two coordinates.
struct QuadratureRule {
  std::vector<std::array<double, 3>> points;
  std::vector<double> weights;
  int degree = 0;

  std::size_t size() const { return weights.size(); }
};

struct GaussLegendre {
  std::vector<double> nodes;    // on [-1, 1], ascending
  std::vector<double> weights;  // sum to 2
};

/// Gauss-Legendre nodes and weights by Newton iteration on P_n.
inline GaussLegendre gauss_legendre(std::size_t n) {
  if (n == 0) throw InvalidData("Gauss-Legendre rule needs at least one point");
  GaussLegendre gl;
  gl.nodes.resize(n);
  gl.weights.resize(n);
  const std::size_t half = (n + 1) / 2;
  for (std::size_t i = 0; i < half; ++i) {
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (std::size_t k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
        p0 = p1;
        p1 = pk;
      }
      dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    gl.nodes[i] = -x;
    gl.nodes[n - 1 - i] = x;
    gl.weights[i] = gl.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) gl.nodes[n / 2] = 0.0;
  return gl;
}

/// n-point Gauss-Legendre rule on a segment, exact to degree 2n-1.
inline QuadratureRule segment_rule(std::size_t n) {
  const GaussLegendre gl = gauss_legendre(n);
  QuadratureRule q;
  q.degree = static_cast<int>(2 * n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = 0.5 * (gl.nodes[i] + 1.0);
    q.points.push_back({1.0 - t, t, 0.0});
    q.weights.push_back(0.5 * gl.weights[i]);
  }
  return q;
}

namespace detail {

inline void add_orbit3(QuadratureRule& q, double a, double b, double w) {
  q.points.push_back({a, b, b});
  q.points.push_back({b, a, b});
  q.points.push_back({b, b, a});
  for (int i = 0; i < 3; ++i) q.weights.push_back(w);
}

inline void add_orbit6(QuadratureRule& q, double a, double b, double c, double w) {
  for (const auto& p : {std::array{a, b, c}, std::array{a, c, b}, std::array{b, a, c},
                        std::array{b, c, a}, std::array{c, a, b}, std::array{c, b, a}}) {
    q.points.push_back(p);
    q.weights.push_back(w);
  }
}

}  // namespace detail

/// Symmetric triangle rules (Dunavant). Supported degrees: 1, 2, 4, 6.
inline QuadratureRule triangle_rule(int degree) {
  QuadratureRule q;
  switch (degree) {
    case 1:
      q.points.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
      q.weights.push_back(1.0);
      break;
    case 2:
      detail::add_orbit3(q, 2.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0);
      break;
    case 4:
      detail::add_orbit3(q, 0.108103018168070, 0.445948490915965, 0.223381589678011);
      detail::add_orbit3(q, 0.816847572980459, 0.091576213509771, 0.109951743655322);
      break;
    case 6:
      detail::add_orbit3(q, 0.501426509658179, 0.249286745170910, 0.116786275726379);
      detail::add_orbit3(q, 0.873821971016996, 0.063089014491502, 0.050844906370207);
      detail::add_orbit6(q, 0.053145049844817, 0.310352451033784, 0.636502499121399, 0.082851075618374);
      break;
    default:
      throw InvalidData("no triangle rule of degree " + std::to_string(degree));
  }
  q.degree = degree;
  // The tabulated values carry 15 digits; renormalize so the weights sum to 1
  // exactly and every point's barycentric coordinates sum to 1.
  double total = 0.0;
  for (double w : q.weights) total += w;
  for (double& w : q.weights) w /= total;
  for (auto& p : q.points) {
    const double s = p[0] + p[1] + p[2];
    for (double& l : p) l /= s;
  }
  return q;
}

/// Default assembly rule: 3-point Gauss in 1D, degree-4 on triangles.
inline QuadratureRule assembly_rule(int dim) { return dim == 1 ? segment_rule(3) : triangle_rule(4); }

/// Rule for errors against closed-form fields: 5-point Gauss in 1D, degree 6 on triangles.
inline QuadratureRule error_rule(int dim) { return dim == 1 ? segment_rule(5) : triangle_rule(6); }

}  // namespace mmmc

#endif  // MMMC_QUADRATURE_HPP
