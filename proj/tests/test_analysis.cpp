#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "mmmc/analysis.hpp"
#include "mmmc/experiments.hpp"

using namespace mmmc;

namespace {

constexpr double pi = std::numbers::pi;

const ExactField sine{[](const Point& p) { return std::sin(pi * p.x); },
                      [](const Point& p) { return std::array<double, 2>{pi * std::cos(pi * p.x), 0.0}; }};

const ExactField zero{[](const Point&) { return 0.0; }, [](const Point&) { return std::array<double, 2>{0.0, 0.0}; }};

FieldVector random_vector(const Mesh& mesh, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  FieldVector v(mesh.num_interior(), mesh.id);
  for (double& x : v.values) x = g(rng);
  return v;
}

// c(eps) = E[Y / (2 (1 + eps Y))] by composite Simpson in Y
double c_by_simpson(double eps) {
  const int n = 2000;
  double s = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double y = static_cast<double>(k) / n;
    const double w = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    s += w * y / (2.0 * (1.0 + eps * y));
  }
  return s / (3.0 * n);
}

}  // namespace

TEST(DiscreteNorm, ZeroVector) {
  const Mesh mesh = build_mesh_2d({0, 1, 0, 1}, 4);
  const FieldVector v(mesh.num_interior(), mesh.id);
  EXPECT_EQ(discrete_norm(mesh, v, NormKind::L2), 0.0);
  EXPECT_EQ(discrete_norm(mesh, v, NormKind::H1), 0.0);
}

TEST(DiscreteNorm, SineInterpolant) {
  const Mesh mesh = build_mesh_1d({0.0, 1.0}, 1000);
  const FieldVector v = interpolate(mesh, sine.value);
  EXPECT_NEAR(discrete_norm(mesh, v, NormKind::L2), 1.0 / std::sqrt(2.0), 1e-5);
  const double h1 = discrete_norm(mesh, v, NormKind::H1);
  EXPECT_NEAR(h1 * h1, 0.5 + pi * pi / 2.0, 1e-3);
}

TEST(DiscreteNorm, PythagoreanSplit) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const Mesh mesh = trial % 2 ? build_mesh_1d({0.0, 1.0 + trial}, 5 + trial) : build_mesh_2d({0, 1, 0, 2}, 3 + trial / 2);
    const FieldVector v = random_vector(mesh, rng);
    const double l2 = discrete_norm(mesh, v, NormKind::L2), semi = h1_seminorm(mesh, v), h1 = discrete_norm(mesh, v, NormKind::H1);
    EXPECT_NEAR(l2 * l2 + semi * semi, h1 * h1, 1e-12 * h1 * h1);
  }
}

TEST(DiscreteNorm, ShapeAndKindErrors) {
  const Mesh a = build_mesh_1d({0.0, 1.0}, 8);
  const Mesh b = build_mesh_1d({0.0, 1.0}, 8);
  EXPECT_THROW(discrete_norm(a, FieldVector(3, a.id), NormKind::L2), ShapeError);
  EXPECT_THROW(discrete_norm(a, FieldVector(7, b.id), NormKind::L2), ShapeError);
  EXPECT_THROW(discrete_norm(a, FieldVector(7, a.id), NormKind::RelativeL2), InvalidData);
  EXPECT_THROW(discrete_distance(a, FieldVector(7, a.id), FieldVector(7, a.id), NormKind::RelativeH1), InvalidData);
}

TEST(ErrorVsExact, InterpolationErrorQuartersWithH) {
  std::vector<double> errs;
  for (std::size_t n : {8, 16, 32, 64}) {
    const Mesh mesh = build_mesh_1d({0.0, 1.0}, n);
    errs.push_back(error_vs_exact(mesh, interpolate(mesh, sine.value), sine, NormKind::L2));
  }
  for (std::size_t i = 0; i + 1 < errs.size(); ++i) {
    EXPECT_GE(errs[i] / errs[i + 1], 3.5);
    EXPECT_LE(errs[i] / errs[i + 1], 4.5);
  }
}

TEST(ErrorVsExact, InterpolationOrderIn2D) {
  const ExactField bump{[](const Point& p) { return std::sin(pi * p.x) * std::sin(pi * p.y); },
                        [](const Point& p) {
                          return std::array<double, 2>{pi * std::cos(pi * p.x) * std::sin(pi * p.y),
                                                       pi * std::sin(pi * p.x) * std::cos(pi * p.y)};
                        }};
  double prev_l2 = 0, prev_h1 = 0;
  for (std::size_t n : {8, 16, 32}) {
    const Mesh mesh = build_mesh_2d({0, 1, 0, 1}, n);
    const FieldVector v = interpolate(mesh, bump.value);
    const double l2 = error_vs_exact(mesh, v, bump, NormKind::L2), h1 = error_vs_exact(mesh, v, bump, NormKind::H1);
    if (prev_l2 > 0) {
      EXPECT_NEAR(prev_l2 / l2, 4.0, 0.5);
      EXPECT_NEAR(prev_h1 / h1, 2.0, 0.25);
    }
    prev_l2 = l2;
    prev_h1 = h1;
  }
}

TEST(ErrorVsExact, ZeroExactGivesNorm) {
  std::mt19937_64 rng(3);
  for (const Mesh& mesh : {build_mesh_1d({0.0, 2.0}, 9), build_mesh_2d({0, 1, 0, 1}, 5)}) {
    const FieldVector v = random_vector(mesh, rng);
    EXPECT_NEAR(error_vs_exact(mesh, v, zero, NormKind::L2), discrete_norm(mesh, v, NormKind::L2), 1e-12);
    EXPECT_NEAR(error_vs_exact(mesh, v, zero, NormKind::H1), discrete_norm(mesh, v, NormKind::H1), 1e-11);
    EXPECT_THROW(error_vs_exact(mesh, v, zero, NormKind::RelativeL2), InvalidData);
  }
}

TEST(ExactExpectation, CoefficientValues) {
  EXPECT_DOUBLE_EQ(expectation_coefficient_1d(0.0), 0.25);
  EXPECT_NEAR(expectation_coefficient_1d(0.5), 0.5 * (2.0 - 4.0 * std::log(1.5)), 1e-15);
  EXPECT_NEAR(exact_expectation_1d(0.5).value({0.5, 0.0}), 0.04726, 1e-5);
  for (double eps : {1e-6, 5e-4, 0.999e-3, 1e-3, 1.001e-3, 0.2, 0.6, 1.0}) {
    EXPECT_NEAR(expectation_coefficient_1d(eps), c_by_simpson(eps), 1e-12) << eps;
  }
  EXPECT_THROW(expectation_coefficient_1d(-0.1), InvalidData);
}

TEST(ExactExpectation, SymmetricAndGradientConsistent) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    const double eps = u(rng), x = u(rng);
    const ExactField e = exact_expectation_1d(eps);
    EXPECT_NEAR(e.value({x, 0}), e.value({1.0 - x, 0}), 1e-15);
    const double d = 1e-6;
    const double fd = (e.value({x + d, 0}) - e.value({x - d, 0})) / (2 * d);
    EXPECT_NEAR(e.gradient({x, 0})[0], fd, 1e-8);
  }
}

TEST(QuadratureExpectation, MatchesTableH1ErrorAtCoarseMesh) {
  const Problem p = uniform_1d_problem(20);
  SolverConfig cfg;
  cfg.epsilon = 0.5;
  cfg.modes = 10;
  const RunResult r = quadrature_expectation_1d(p, cfg);
  const double err = error_vs_exact(p.mesh, r.psi, exact_expectation_1d(0.5), NormKind::H1);
  EXPECT_NEAR(err, 5.46e-3, 0.1 * 5.46e-3);
}

TEST(QuadratureExpectation, SingleModeError) {
  const Problem p = uniform_1d_problem(100);
  for (double eps : {0.2, 0.5, 0.9}) {
    SolverConfig cfg;
    cfg.epsilon = eps;
    cfg.modes = 1;
    const RunResult r = quadrature_expectation_1d(p, cfg);
    const double predicted = std::abs(expectation_coefficient_1d(eps) - 0.25) / std::sqrt(30.0);
    EXPECT_NEAR(error_vs_exact(p.mesh, r.psi, exact_expectation_1d(eps), NormKind::L2), predicted, 1e-3 * predicted);
  }
}

TEST(QuadratureExpectation, AgreesWithMonteCarlo) {
  const Problem p = uniform_1d_problem(20);
  SolverConfig cfg;
  cfg.epsilon = 0.5;
  cfg.modes = 8;
  cfg.samples = 20000;
  cfg.seed = 13;
  const RunResult q = quadrature_expectation_1d(p, cfg);
  const RunResult mc = run_multimode_mc(p, cfg);
  for (std::size_t i = 0; i < q.psi.size(); ++i) {
    const double se = std::sqrt(mc.variance[i] / static_cast<double>(cfg.samples));
    EXPECT_LE(std::abs(mc.psi[i] - q.psi[i]), 4.0 * se) << i;
  }
  // the quadrature variance is the exact variance of U_N in Y
  for (std::size_t i = 0; i < q.psi.size(); ++i) EXPECT_NEAR(mc.variance[i], q.variance[i], 0.05 * q.variance[i]);
}

TEST(QuadratureExpectation, RejectsSampledFields) {
  Problem p = trig_2d_problem(4);
  SolverConfig cfg;
  EXPECT_THROW(quadrature_expectation_1d(p, cfg), UnsupportedSpec);
  p = uniform_1d_problem(4);
  p.f = ScalarUniform{0.0, 1.0, 3};
  EXPECT_THROW(quadrature_expectation_1d(p, cfg), UnsupportedSpec);
}

TEST(ConvergenceOrders, TableExamples) {
  const std::vector<std::pair<double, double>> a{{0.2, 1.38e-3}, {0.1, 3.29e-4}};
  const auto ta = convergence_orders(a);
  EXPECT_FALSE(ta.rows[0].order.has_value());
  EXPECT_NEAR(*ta.rows[1].order, 2.07, 0.005);
  const std::vector<std::pair<double, double>> b{{1, 8}, {0.5, 4}, {0.25, 2}, {0.125, 1}};
  for (std::size_t i = 1; i < 4; ++i) EXPECT_NEAR(*convergence_orders(b).rows[i].order, 1.0, 1e-14);
  const std::vector<std::pair<double, double>> c{{0.2, 2.19e-2}, {0.1, 1.09e-2}};
  // inputs carry two significant digits
  EXPECT_NEAR(*convergence_orders(c).rows[1].order, 1.00, 0.01);
}

TEST(ConvergenceOrders, ScaleInvariant) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.1, 10.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::pair<double, double>> d, s;
    double h = 1.0;
    const double scale = u(rng);
    for (int i = 0; i < 5; ++i, h *= 0.5) {
      const double e = u(rng);
      d.emplace_back(h, e);
      s.emplace_back(h, scale * e);
    }
    const auto td = convergence_orders(d), ts = convergence_orders(s);
    for (std::size_t i = 1; i < 5; ++i) EXPECT_NEAR(*td.rows[i].order, *ts.rows[i].order, 1e-12);
  }
}

TEST(ConvergenceOrders, RejectsBadInput) {
  const std::vector<std::pair<double, double>> neg{{0.2, 1e-3}, {0.1, 0.0}};
  const std::vector<std::pair<double, double>> up{{0.1, 1e-3}, {0.2, 1e-4}};
  EXPECT_THROW(convergence_orders(neg), InvalidData);
  EXPECT_THROW(convergence_orders(up), InvalidData);
}

TEST(StandardError, ConstantAlternatingAndScaling) {
  const std::vector<double> c(50, 3.25);
  EXPECT_EQ(mc_standard_error(c), 0.0);
  for (std::size_t M : {2, 10, 1000}) {
    std::vector<double> alt(M);
    for (std::size_t j = 0; j < M; ++j) alt[j] = j % 2 ? -1.0 : 1.0;
    EXPECT_NEAR(mc_standard_error(alt), 1.0 / std::sqrt(static_cast<double>(M - 1)), 1e-14);
  }
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(1.0, 2.0);
  std::vector<double> v(200), w(200);
  for (std::size_t j = 0; j < v.size(); ++j) w[j] = 10.0 * (v[j] = g(rng));
  EXPECT_NEAR(mc_standard_error(w), 10.0 * mc_standard_error(v), 1e-12);
  EXPECT_THROW(mc_standard_error(std::vector<double>{1.0}), InvalidData);
}

TEST(StandardError, L2AggregateOfConstantVariance) {
  // lumped masses sum to |D|, so a constant variance s2 gives sqrt(s2 |D| / M)
  const Mesh mesh = build_mesh_1d({0.0, 1.0}, 10);
  FieldVector var(mesh.num_interior(), mesh.id);
  for (double& x : var.values) x = 4.0;
  EXPECT_NEAR(mc_l2_standard_error(mesh, var, 100), std::sqrt(4.0 * 0.9 / 100.0), 1e-14);
  EXPECT_THROW(mc_l2_standard_error(mesh, var, 1), InvalidData);
}

TEST(Truncation, ErrorRatiosTrackEpsilon) {
  const double eps = 0.5;
  const auto errs = truncation_errors_1d(0.01, eps, 5);
  for (std::size_t N = 1; N <= 3; ++N) {
    const double ratio = errs[N] / errs[N - 1];
    EXPECT_GE(ratio, eps / 2) << N;
    EXPECT_LE(ratio, 2 * eps) << N;
  }
}

TEST(Convergence, OneDimensionalOrders) {
  ConvergeParams prm;
  const ConvergeResult r = converge_1d(prm);
  for (std::size_t i = 1; i < r.h1.rows.size(); ++i) {
    EXPECT_GE(*r.h1.rows[i].order, 0.9);
    EXPECT_LE(*r.h1.rows[i].order, 1.1);
    EXPECT_GE(*r.l2.rows[i].order, 1.8);
    EXPECT_LE(*r.l2.rows[i].order, 2.7);
  }
}
