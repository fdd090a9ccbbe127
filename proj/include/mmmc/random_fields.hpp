#ifndef MMMC_RANDOM_FIELDS_HPP
#define MMMC_RANDOM_FIELDS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/special_functions/erf.hpp>

#include "mmmc/errors.hpp"
#include "mmmc/mesh.hpp"
#include "mmmc/quadrature.hpp"

namespace mmmc {

// ---------------------------------------------------------------------------
// Counter-based random stream

/// Philox4x32-10 block function (Salmon et al., SC'11).
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
  constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(M0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(M1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += W0;
    key[1] += W1;
  }
  return ctr;
}

/// Identifies one scalar random variable: a stream (one per random field)
/// and an index within it.
inline std::uint64_t variable_id(std::uint32_t stream, std::uint32_t index) {
  return (static_cast<std::uint64_t>(stream) << 32) | index;
}

/// Uniform variate in the open interval (0, 1), a pure function of
/// (seed, sample, variable).
inline double uniform01(std::uint64_t seed, std::uint64_t sample, std::uint64_t variable) {
  const auto out = philox4x32(
      {static_cast<std::uint32_t>(sample), static_cast<std::uint32_t>(sample >> 32),
       static_cast<std::uint32_t>(variable), static_cast<std::uint32_t>(variable >> 32)},
      {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
  const std::uint64_t bits = (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal by inversion: Phi^{-1}(u) = -sqrt(2) erfc^{-1}(2u).
inline double standard_normal(std::uint64_t seed, std::uint64_t sample, std::uint64_t variable) {
  const double u = uniform01(seed, sample, variable);
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * u);
}

// ---------------------------------------------------------------------------
// Covariance kernels and the Nystrom KL basis

/// exp(-|x - y|^m / length), m = 1 or 2.
struct ExpAbsKernel {
  int exponent = 1;
  double length = 0.5;
};

/// User-supplied covariance, tabulated at the Nystrom nodes.
struct CustomKernel {
  std::function<double(const Point&, const Point&)> fn;
  std::string label = "custom";
};

using CovarianceKernel = std::variant<ExpAbsKernel, CustomKernel>;

inline double covariance(const CovarianceKernel& k, const Point& x, const Point& y) {
  if (const auto* e = std::get_if<ExpAbsKernel>(&k)) {
    const double r = std::hypot(x.x - y.x, x.y - y.y);
    return std::exp(-(e->exponent == 1 ? r : r * r) / e->length);
  }
  return std::get<CustomKernel>(k).fn(x, y);
}

/// Quadrature treatment of the kernel's diagonal.
///
/// Plain: sum_j w_j C(x_i, x_j) phi_j. The discrete trace equals the
/// quadrature of C(x, x) exactly, but a kernel with a kink on the diagonal
/// (exponent 1) limits eigenvalue accuracy to O(n^-2).
/// DiagonalCorrected (1D only): sum_j w_j C(x_i, x_j) (phi_j - phi_i) + s(x_i) phi_i
/// with s(x) = int C(x, y) dy integrated on both sides of the kink. Eigenvalues
/// converge much faster; the discrete trace then tracks the partial sum of the
/// true spectrum rather than int C(x, x).
enum class NystromRule { Plain, DiagonalCorrected };

namespace detail {

/// int_D C(x, y) dy with the interval split at x.
inline double kernel_row_integral(const CovarianceKernel& kernel, const Interval1D& d, const Point& x) {
  static const GaussLegendre gl = gauss_legendre(64);
  double total = 0.0;
  for (const auto& [a, b] : {std::pair{d.x_lo, x.x}, std::pair{x.x, d.x_hi}}) {
    const double half = 0.5 * (b - a);
    if (!(half > 0.0)) continue;
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
      total += half * gl.weights[i] * covariance(kernel, x, {a + half * (gl.nodes[i] + 1.0), 0.0});
    }
  }
  return total;
}

}  // namespace detail

/// Discrete eigenpairs of the covariance operator.
///
/// `eigenvalues` holds the whole spectrum of the Nystrom matrix (descending,
/// negatives clipped to 0); `eigenvectors[k]` holds phi_k at the nodes for the
/// first k_max pairs, normalized so sum_j w_j phi_k(x_j)^2 = 1.
struct KLBasis {
  CovarianceKernel kernel;
  Domain domain;
  NystromRule rule = NystromRule::Plain;
  std::vector<Point> nodes;
  std::vector<double> weights;
  std::vector<double> eigenvalues;
  std::vector<std::vector<double>> eigenvectors;

  std::size_t retained() const { return eigenvectors.size(); }

  /// Denominator shift g(x) of the Nystrom extension; zero for the plain rule.
  double extension_shift(const Point& x, double row_sum) const {
    if (rule == NystromRule::Plain) return 0.0;
    return row_sum - detail::kernel_row_integral(kernel, std::get<Interval1D>(domain), x);
  }

  /// Nystrom extension phi_k(x) = sum_j w_j C(x, x_j) phi_k(x_j) / (lambda_k + g(x)).
  double eigenfunction(std::size_t k, const Point& x) const {
    if (k >= retained()) throw ShapeError("eigenfunction index out of range");
    if (!(eigenvalues[k] > 0.0)) return 0.0;
    double s = 0.0, row_sum = 0.0;
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      const double c = weights[j] * covariance(kernel, x, nodes[j]);
      s += c * eigenvectors[k][j];
      row_sum += c;
    }
    return s / (eigenvalues[k] + extension_shift(x, row_sum));
  }
};

/// Nystrom discretization of the covariance operator on Gauss-Legendre nodes
/// (tensor nodes in 2D, ceil(sqrt(n)) per direction) and its symmetric
/// eigendecomposition.
inline KLBasis kl_decompose(const CovarianceKernel& kernel, const Domain& domain, std::size_t quad_nodes,
                            std::size_t k_max, NystromRule rule = NystromRule::Plain) {
  if (const auto* e = std::get_if<ExpAbsKernel>(&kernel)) {
    if (e->exponent != 1 && e->exponent != 2) throw KernelError("exponent must be 1 or 2");
    if (!(e->length > 0.0 && e->length < 1.0)) throw KernelError("correlation length must lie in (0, 1)");
  } else if (!std::get<CustomKernel>(kernel).fn) {
    throw KernelError("custom kernel has no function");
  }
  if (quad_nodes == 0) throw KernelError("need at least one quadrature node");

  if (rule == NystromRule::DiagonalCorrected && !std::holds_alternative<Interval1D>(domain)) {
    throw UnsupportedSpec("the diagonal-corrected Nystrom rule is implemented for intervals only");
  }

  KLBasis basis;
  basis.kernel = kernel;
  basis.domain = domain;
  basis.rule = rule;
  if (const auto* iv = std::get_if<Interval1D>(&domain)) {
    const GaussLegendre gl = gauss_legendre(quad_nodes);
    const double half = 0.5 * (iv->x_hi - iv->x_lo);
    for (std::size_t i = 0; i < quad_nodes; ++i) {
      basis.nodes.push_back({iv->x_lo + half * (gl.nodes[i] + 1.0), 0.0});
      basis.weights.push_back(half * gl.weights[i]);
    }
  } else {
    const auto& r = std::get<Rect2D>(domain);
    const auto per_dir = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(quad_nodes))));
    const GaussLegendre gl = gauss_legendre(per_dir);
    const double hx = 0.5 * (r.x_hi - r.x_lo), hy = 0.5 * (r.y_hi - r.y_lo);
    for (std::size_t j = 0; j < per_dir; ++j) {
      for (std::size_t i = 0; i < per_dir; ++i) {
        basis.nodes.push_back({r.x_lo + hx * (gl.nodes[i] + 1.0), r.y_lo + hy * (gl.nodes[j] + 1.0)});
        basis.weights.push_back(hx * hy * gl.weights[i] * gl.weights[j]);
      }
    }
  }
  const std::size_t n = basis.nodes.size();
  if (k_max > n) throw KernelError("k_max exceeds the number of quadrature nodes");

  // B = W^{1/2} C W^{1/2} is symmetric with the same spectrum as C W.
  Eigen::MatrixXd B(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      B(i, j) = covariance(kernel, basis.nodes[i], basis.nodes[j]);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (std::abs(B(i, j) - B(j, i)) > 1e-12 * std::max(1.0, std::abs(B(i, j)))) {
        throw KernelError("kernel is not symmetric at nodes " + std::to_string(i) + ", " + std::to_string(j));
      }
    }
  }
  std::vector<double> shift(n, 0.0);
  if (rule == NystromRule::DiagonalCorrected) {
    const auto& iv = std::get<Interval1D>(domain);
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < n; ++j) row += basis.weights[j] * B(i, j);
      shift[i] = detail::kernel_row_integral(kernel, iv, basis.nodes[i]) - row;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) B(i, j) *= std::sqrt(basis.weights[i] * basis.weights[j]);
    B(i, i) += shift[i];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(B);
  if (solver.info() != Eigen::Success) throw KernelError("symmetric eigensolver did not converge");

  // Eigen returns ascending order
  basis.eigenvalues.resize(n);
  for (std::size_t k = 0; k < n; ++k) basis.eigenvalues[k] = std::max(0.0, solver.eigenvalues()(static_cast<Eigen::Index>(n - 1 - k)));
  for (std::size_t k = 0; k < k_max; ++k) {
    const auto v = solver.eigenvectors().col(static_cast<Eigen::Index>(n - 1 - k));
    std::vector<double> phi(n);
    double mean = 0.0, largest = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      phi[j] = v(static_cast<Eigen::Index>(j)) / std::sqrt(basis.weights[j]);
      mean += basis.weights[j] * phi[j];
      if (std::abs(phi[j]) > std::abs(largest)) largest = phi[j];
    }
    // fix the sign: positive mean, or positive largest entry for zero-mean modes
    const double sign = std::abs(mean) > 1e-8 ? (mean > 0 ? 1.0 : -1.0) : (largest >= 0 ? 1.0 : -1.0);
    for (double& p : phi) p *= sign;
    basis.eigenvectors.push_back(std::move(phi));
  }
  return basis;
}

// ---------------------------------------------------------------------------
// Field specifications

/// One uniform random variable used as a spatially constant field. Two specs
/// with the same stream see the same draw (affinely mapped to their ranges).
struct ScalarUniform {
  double lo = 0.0;
  double hi = 1.0;
  std::uint32_t stream = 0;
};

/// base + amplitude * sum_{m,n} exp(-decay (m^2+n^2)) cos(m pi (x-cx)) cos(n pi (y-cy)) Y_mn,
/// Y_mn ~ U[lo, hi] independent.
struct TrigSeriesEta2D {
  int terms_x = 10;
  int terms_y = 10;
  double decay = 0.2;
  double base = 0.5;
  double amplitude = 0.5;
  double lo = -1.0;
  double hi = 1.0;
  double center_x = 1.0;
  double center_y = 1.0;
  std::uint32_t stream = 1;
};

/// x^2 + y^2 + amplitude * sum_{m,n} exp(-decay (m^2+n^2)) sin(m pi (x-cx)) sin(n pi (y-cy)) Z_mn,
/// Z_mn ~ N(0, 1) independent.
struct TrigSeriesF2D {
  int terms_x = 5;
  int terms_y = 5;
  double decay = 0.2;
  double amplitude = 2.0;
  double center_x = 1.0;
  double center_y = 1.0;
  std::uint32_t stream = 2;
};

enum class Noise { Normal, Uniform };

/// mean + sum_k coefficients[k] phi_k(x) xi_k. Uniform noise is scaled to
/// unit variance: xi ~ U[-sqrt 3, sqrt 3].
struct KLField {
  double mean = 0.0;
  std::vector<double> coefficients;
  std::shared_ptr<const KLBasis> basis;
  Noise noise = Noise::Normal;
  std::uint32_t stream = 3;
};

struct Deterministic {
  std::function<double(const Point&)> fn;
  std::string label;
};

inline Deterministic constant_field(double c) {
  return {[c](const Point&) { return c; }, "constant " + std::to_string(c)};
}

using RandomFieldSpec = std::variant<ScalarUniform, TrigSeriesEta2D, TrigSeriesF2D, KLField, Deterministic>;

inline void validate(const RandomFieldSpec& spec) {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ScalarUniform>) {
          if (!(s.lo < s.hi)) throw InvalidData("ScalarUniform requires lo < hi");
        } else if constexpr (std::is_same_v<T, TrigSeriesEta2D>) {
          if (s.terms_x < 1 || s.terms_y < 1) throw InvalidData("trig series needs at least one term per direction");
          if (!(s.lo < s.hi)) throw InvalidData("trig series coordinate law requires lo < hi");
        } else if constexpr (std::is_same_v<T, TrigSeriesF2D>) {
          if (s.terms_x < 1 || s.terms_y < 1) throw InvalidData("trig series needs at least one term per direction");
        } else if constexpr (std::is_same_v<T, KLField>) {
          if (!s.basis) throw InvalidData("KL field has no basis");
          if (s.coefficients.size() > s.basis->retained()) throw InvalidData("KL field uses more terms than retained");
          for (std::size_t k = 1; k < s.basis->eigenvalues.size(); ++k) {
            if (s.basis->eigenvalues[k] > s.basis->eigenvalues[k - 1] || s.basis->eigenvalues[k] < 0.0) {
              throw InvalidData("KL eigenvalues must be nonincreasing and nonnegative");
            }
          }
        } else {
          if (!s.fn) throw InvalidData("deterministic field has no function");
        }
      },
      spec);
}

/// Number of scalar random coordinates a spec consumes per sample.
inline std::size_t num_coordinates(const RandomFieldSpec& spec) {
  return std::visit(
      [](const auto& s) -> std::size_t {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ScalarUniform>) return 1;
        else if constexpr (std::is_same_v<T, TrigSeriesEta2D> || std::is_same_v<T, TrigSeriesF2D>)
          return static_cast<std::size_t>(s.terms_x) * static_cast<std::size_t>(s.terms_y);
        else if constexpr (std::is_same_v<T, KLField>) return s.coefficients.size();
        else return 0;
      },
      spec);
}

/// Random coordinates of sample j: a pure function of (spec, seed, j).
inline std::vector<double> draw_coordinates(const RandomFieldSpec& spec, std::uint64_t seed, std::uint64_t j) {
  const std::size_t n = num_coordinates(spec);
  std::vector<double> c(n);
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        for (std::size_t i = 0; i < n; ++i) {
          if constexpr (std::is_same_v<T, Deterministic>) {
          } else {
            const std::uint64_t var = variable_id(s.stream, static_cast<std::uint32_t>(i));
            if constexpr (std::is_same_v<T, ScalarUniform> || std::is_same_v<T, TrigSeriesEta2D>) {
              c[i] = s.lo + (s.hi - s.lo) * uniform01(seed, j, var);
            } else if constexpr (std::is_same_v<T, TrigSeriesF2D>) {
              c[i] = standard_normal(seed, j, var);
            } else {
              c[i] = s.noise == Noise::Normal ? standard_normal(seed, j, var)
                                              : std::sqrt(3.0) * (2.0 * uniform01(seed, j, var) - 1.0);
            }
          }
        }
      },
      spec);
  return c;
}

namespace detail {

inline void cos_multiples(double theta, std::size_t n, std::vector<double>& out) {
  out.resize(n + 1);
  out[0] = 1.0;
  if (n >= 1) out[1] = std::cos(theta);
  for (std::size_t m = 2; m <= n; ++m) out[m] = 2.0 * out[1] * out[m - 1] - out[m - 2];
}

inline void sin_multiples(double theta, std::size_t n, std::vector<double>& out) {
  out.resize(n + 1);
  out[0] = 0.0;
  if (n >= 1) out[1] = std::sin(theta);
  const double c = std::cos(theta);
  for (std::size_t m = 2; m <= n; ++m) out[m] = 2.0 * c * out[m - 1] - out[m - 2];
}

// Y_mn lives at index (m-1)*terms_y + (n-1); the weights fold in the decay
// factor exp(-decay (m^2 + n^2)).
inline std::vector<double> trig_weights(int terms_x, int terms_y, double decay, std::span<const double> coords) {
  std::vector<double> w(coords.size());
  for (int m = 1; m <= terms_x; ++m) {
    for (int n = 1; n <= terms_y; ++n) {
      const auto i = static_cast<std::size_t>((m - 1) * terms_y + (n - 1));
      w[i] = std::exp(-decay * (m * m + n * n)) * coords[i];
    }
  }
  return w;
}

template <bool Sine>
double trig_sum(int terms_x, int terms_y, double cx, double cy, std::span<const double> weights, const Point& p) {
  thread_local std::vector<double> bx, by;
  const double tx = std::numbers::pi * (p.x - cx), ty = std::numbers::pi * (p.y - cy);
  if constexpr (Sine) {
    sin_multiples(tx, static_cast<std::size_t>(terms_x), bx);
    sin_multiples(ty, static_cast<std::size_t>(terms_y), by);
  } else {
    cos_multiples(tx, static_cast<std::size_t>(terms_x), bx);
    cos_multiples(ty, static_cast<std::size_t>(terms_y), by);
  }
  double total = 0.0;
  for (int m = 1; m <= terms_x; ++m) {
    const double* row_w = weights.data() + (m - 1) * terms_y;
    double row = 0.0;
    for (int n = 1; n <= terms_y; ++n) row += row_w[n - 1] * by[static_cast<std::size_t>(n)];
    total += bx[static_cast<std::size_t>(m)] * row;
  }
  return total;
}

}  // namespace detail

inline double eval_eta_2d(const TrigSeriesEta2D& s, std::span<const double> coords, const Point& p) {
  if (coords.size() != static_cast<std::size_t>(s.terms_x * s.terms_y)) throw ShapeError("eta coordinate count mismatch");
  const auto w = detail::trig_weights(s.terms_x, s.terms_y, s.decay, coords);
  return s.base + s.amplitude * detail::trig_sum<false>(s.terms_x, s.terms_y, s.center_x, s.center_y, w, p);
}

inline double eval_f_2d(const TrigSeriesF2D& s, std::span<const double> coords, const Point& p) {
  if (coords.size() != static_cast<std::size_t>(s.terms_x * s.terms_y)) throw ShapeError("f coordinate count mismatch");
  const auto w = detail::trig_weights(s.terms_x, s.terms_y, s.decay, coords);
  return p.x * p.x + p.y * p.y +
         s.amplitude * detail::trig_sum<true>(s.terms_x, s.terms_y, s.center_x, s.center_y, w, p);
}

/// Almost-sure range of a realized field, when the spec bounds it.
inline std::optional<std::pair<double, double>> field_bounds(const RandomFieldSpec& spec) {
  if (const auto* s = std::get_if<ScalarUniform>(&spec)) return std::pair{s->lo, s->hi};
  if (const auto* s = std::get_if<TrigSeriesEta2D>(&spec)) {
    double sum = 0.0;
    for (int m = 1; m <= s->terms_x; ++m)
      for (int n = 1; n <= s->terms_y; ++n) sum += std::exp(-s->decay * (m * m + n * n));
    const double spread = std::abs(s->amplitude) * sum * std::max(std::abs(s->lo), std::abs(s->hi));
    return std::pair{s->base - spread, s->base + spread};
  }
  return std::nullopt;
}

/// A spec together with one draw of its random coordinates, evaluable at any
/// point. Evaluation is deterministic and thread-safe.
class RealizedField {
public:
  RealizedField() : spec_(constant_field(0.0)) {}

  RealizedField(RandomFieldSpec spec, std::vector<double> coords) : spec_(std::move(spec)), coords_(std::move(coords)) {
    if (coords_.size() != num_coordinates(spec_)) {
      throw ShapeError("expected " + std::to_string(num_coordinates(spec_)) + " random coordinates, got " +
                       std::to_string(coords_.size()));
    }
    if (const auto* t = std::get_if<TrigSeriesEta2D>(&spec_)) {
      nodal_ = detail::trig_weights(t->terms_x, t->terms_y, t->decay, coords_);
    } else if (const auto* t = std::get_if<TrigSeriesF2D>(&spec_)) {
      nodal_ = detail::trig_weights(t->terms_x, t->terms_y, t->decay, coords_);
    } else if (const auto* kl = std::get_if<KLField>(&spec_)) {
      // Fold the draw into nodal weights so that one evaluation is a single
      // Nystrom sum: g_j = w_j * sum_k c_k xi_k phi_k(x_j) / lambda_k. The
      // corrected rule has a point-dependent denominator, so it keeps one
      // row per term: g_kj = w_j c_k xi_k phi_k(x_j).
      const KLBasis& b = *kl->basis;
      const std::size_t n = b.nodes.size();
      const bool per_term = b.rule != NystromRule::Plain;
      nodal_.assign(per_term ? n * kl->coefficients.size() : n, 0.0);
      for (std::size_t k = 0; k < kl->coefficients.size(); ++k) {
        if (!(b.eigenvalues[k] > 0.0)) continue;
        const double scale = kl->coefficients[k] * coords_[k] / (per_term ? 1.0 : b.eigenvalues[k]);
        double* row = nodal_.data() + (per_term ? k * n : 0);
        for (std::size_t j = 0; j < n; ++j) row[j] += scale * b.eigenvectors[k][j] * b.weights[j];
      }
    }
  }

  double operator()(const Point& p) const {
    return std::visit(
        [&](const auto& s) -> double {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, ScalarUniform>) return coords_[0];
          else if constexpr (std::is_same_v<T, TrigSeriesEta2D>)
            return s.base + s.amplitude * detail::trig_sum<false>(s.terms_x, s.terms_y, s.center_x, s.center_y, nodal_, p);
          else if constexpr (std::is_same_v<T, TrigSeriesF2D>)
            return p.x * p.x + p.y * p.y +
                   s.amplitude * detail::trig_sum<true>(s.terms_x, s.terms_y, s.center_x, s.center_y, nodal_, p);
          else if constexpr (std::is_same_v<T, KLField>) {
            const KLBasis& b = *s.basis;
            const std::size_t n = b.nodes.size();
            if (b.rule == NystromRule::Plain) {
              double v = 0.0;
              for (std::size_t j = 0; j < n; ++j) v += covariance(b.kernel, p, b.nodes[j]) * nodal_[j];
              return s.mean + v;
            }
            thread_local std::vector<double> row;
            row.resize(n);
            double row_sum = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              row[j] = covariance(b.kernel, p, b.nodes[j]);
              row_sum += b.weights[j] * row[j];
            }
            const double g = b.extension_shift(p, row_sum);
            double v = 0.0;
            for (std::size_t k = 0; k < s.coefficients.size(); ++k) {
              if (!(b.eigenvalues[k] > 0.0)) continue;
              double dot = 0.0;
              for (std::size_t j = 0; j < n; ++j) dot += row[j] * nodal_[k * n + j];
              v += dot / (b.eigenvalues[k] + g);
            }
            return s.mean + v;
          } else return s.fn(p);
        },
        spec_);
  }

  const RandomFieldSpec& spec() const { return spec_; }
  const std::vector<double>& coordinates() const { return coords_; }

private:
  RandomFieldSpec spec_;
  std::vector<double> coords_;
  std::vector<double> nodal_;  // trig: decay-weighted coordinates; KL: weighted nodal sums
};

inline RealizedField realize(const RandomFieldSpec& spec, std::vector<double> coords) {
  return RealizedField(spec, std::move(coords));
}

/// One realization omega_j of the (eta, f) pair.
struct SampleDraw {
  std::uint64_t index = 0;
  RealizedField eta;
  RealizedField f;
};

inline SampleDraw draw_sample(const RandomFieldSpec& eta, const RandomFieldSpec& f, std::uint64_t seed,
                              std::uint64_t j) {
  return {j, RealizedField(eta, draw_coordinates(eta, seed, j)), RealizedField(f, draw_coordinates(f, seed, j))};
}

// ---------------------------------------------------------------------------
// KL fields and the weak-perturbation rewriting

/// Truncated KL field mean + sum_{k<k_max} sqrt(lambda_k) phi_k xi_k.
inline KLField kl_field(double mean, std::shared_ptr<const KLBasis> basis, std::size_t k_max,
                        Noise noise = Noise::Normal, std::uint32_t stream = 3) {
  if (!basis || k_max > basis->retained()) throw InvalidData("k_max exceeds retained eigenpairs");
  KLField f{mean, {}, basis, noise, stream};
  for (std::size_t k = 0; k < k_max; ++k) f.coefficients.push_back(std::sqrt(basis->eigenvalues[k]));
  return f;
}

struct WeakForm {
  double a0 = 0.0;
  double epsilon = 0.0;
  KLField eta;  // zeta = sum_k sqrt(lambda_k / lambda_1) phi_k xi_k
};

/// Rewrites a truncated KL field as a0 + epsilon * zeta with epsilon = sqrt(lambda_1).
/// Throws DegenerateField if lambda_1 <= 0.
inline WeakForm kl_to_weak_form(double mean, std::shared_ptr<const KLBasis> basis, std::size_t k_max,
                                Noise noise = Noise::Normal, std::uint32_t stream = 3) {
  if (!basis || basis->eigenvalues.empty() || !(basis->eigenvalues[0] > 0.0)) {
    throw DegenerateField("leading KL eigenvalue is not positive");
  }
  if (k_max == 0 || k_max > basis->retained()) throw InvalidData("k_max must be in [1, retained]");
  const double l1 = basis->eigenvalues[0];
  WeakForm w;
  w.a0 = mean;
  w.epsilon = std::sqrt(l1);
  w.eta = KLField{0.0, {}, basis, noise, stream};
  for (std::size_t k = 0; k < k_max; ++k) w.eta.coefficients.push_back(std::sqrt(basis->eigenvalues[k] / l1));
  return w;
}

}  // namespace mmmc

#endif  // MMMC_RANDOM_FIELDS_HPP
