#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "mmmc/mesh.hpp"

using namespace mmmc;

namespace {

double signed_area(const Mesh& m, std::size_t e) {
  const auto n = m.element(e);
  const Point &a = m.vertices[n[0]], &b = m.vertices[n[1]], &c = m.vertices[n[2]];
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

double total_measure(const Mesh& m) {
  double s = 0.0;
  for (const auto& g : m.geometry) s += g.measure;
  return s;
}

}  // namespace

TEST(Mesh1D, UnitIntervalHundredCells) {
  const Mesh m = build_mesh_1d({0.0, 1.0}, 100);
  EXPECT_NEAR(m.h, 0.01, 1e-15);
  EXPECT_EQ(m.num_interior(), 99u);
  EXPECT_EQ(m.num_elements(), 100u);
}

TEST(Mesh1D, SmallestMesh) {
  const Mesh m = build_mesh_1d({0.0, 1.0}, 2);
  ASSERT_EQ(m.num_vertices(), 3u);
  EXPECT_DOUBLE_EQ(m.vertices[0].x, 0.0);
  EXPECT_DOUBLE_EQ(m.vertices[1].x, 0.5);
  EXPECT_DOUBLE_EQ(m.vertices[2].x, 1.0);
  EXPECT_EQ(m.num_interior(), 1u);
}

TEST(Mesh1D, IntervalOfLengthTwo) {
  const Mesh m = build_mesh_1d({0.0, 2.0}, 4);
  EXPECT_DOUBLE_EQ(m.h, 0.5);
  EXPECT_EQ(m.num_interior(), 3u);
}

TEST(Mesh1D, RejectsFewerThanTwoCells) {
  EXPECT_THROW(build_mesh_1d({0.0, 1.0}, 1), InvalidMesh);
  EXPECT_THROW(build_mesh_1d({0.0, 1.0}, 0), InvalidMesh);
  EXPECT_THROW(build_mesh_1d({1.0, 0.0}, 4), InvalidMesh);
}

TEST(Mesh2D, TenCellsOnSquareOfSideTwo) {
  const Mesh m = build_mesh_2d({0.0, 2.0, 0.0, 2.0}, 10);
  EXPECT_EQ(m.num_elements(), 200u);
  EXPECT_EQ(m.num_interior(), 81u);
  EXPECT_NEAR(m.h, 0.2 * std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(m.cell_size, 0.2, 1e-15);
}

TEST(Mesh2D, FortyCells) {
  const Mesh m = build_mesh_2d({0.0, 2.0, 0.0, 2.0}, 40);
  EXPECT_NEAR(m.cell_size, 0.05, 1e-15);
  EXPECT_EQ(m.num_interior(), 1521u);
}

TEST(Mesh2D, SmallestMesh) {
  const Mesh m = build_mesh_2d({0.0, 1.0, 0.0, 1.0}, 2);
  EXPECT_EQ(m.num_elements(), 8u);
  EXPECT_EQ(m.num_interior(), 1u);
}

TEST(Mesh2D, RejectsDegenerateInput) {
  EXPECT_THROW(build_mesh_2d({0.0, 1.0, 0.0, 1.0}, 1), InvalidMesh);
  EXPECT_THROW(build_mesh_2d({0.0, 1.0, 1.0, 1.0}, 4), InvalidMesh);
}

class MeshInvariants : public ::testing::TestWithParam<std::size_t> {};

TEST_P(MeshInvariants, StructuralProperties) {
  const std::size_t n = GetParam();
  for (const Mesh& m : {build_mesh_1d({-0.5, 1.5}, n), build_mesh_2d({0.0, 2.0, -1.0, 0.5}, n)}) {
    SCOPED_TRACE(m.dim());
    EXPECT_NEAR(total_measure(m), measure(m.domain), 1e-12 * measure(m.domain));

    double h = 0.0, h_min = 1e300;
    for (std::size_t e = 0; e < m.num_elements(); ++e) {
      for (std::size_t v : m.element(e)) ASSERT_LT(v, m.num_vertices());
      if (m.dim() == 2) {
        EXPECT_GT(signed_area(m, e), 0.0);
      }
      h = std::max(h, m.element_diameter(e));
      h_min = std::min(h_min, m.element_diameter(e));
    }
    EXPECT_NEAR(m.h, h, 1e-12 * h);
    EXPECT_GE(h_min, 0.4 * m.h);

    std::set<std::size_t> rows;
    for (std::size_t v = 0; v < m.num_vertices(); ++v) {
      if (m.is_boundary[v]) {
        EXPECT_EQ(m.interior_dof[v], -1);
      } else {
        ASSERT_GE(m.interior_dof[v], 0);
        const auto i = static_cast<std::size_t>(m.interior_dof[v]);
        EXPECT_TRUE(rows.insert(i).second);
        EXPECT_EQ(m.interior_vertex[i], v);
      }
    }
    ASSERT_EQ(rows.size(), m.num_interior());
    ASSERT_FALSE(rows.empty());
    EXPECT_EQ(*rows.rbegin(), rows.size() - 1);
  }
}

TEST_P(MeshInvariants, SixTrianglesAroundInteriorVertices) {
  const Mesh m = build_mesh_2d({0.0, 1.0, 0.0, 1.0}, GetParam());
  std::vector<int> incident(m.num_vertices(), 0);
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    for (std::size_t v : m.element(e)) ++incident[v];
  }
  for (std::size_t v : m.interior_vertex) EXPECT_EQ(incident[v], 6);
}

TEST_P(MeshInvariants, AffineGradientReproduced) {
  std::mt19937_64 rng(GetParam());
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const Mesh m = build_mesh_2d({0.0, 2.0, 0.0, 1.0}, GetParam());
  for (int trial = 0; trial < 10; ++trial) {
    const double a = u(rng), b = u(rng), c = u(rng);
    for (std::size_t e = 0; e < m.num_elements(); ++e) {
      double gx = 0.0, gy = 0.0;
      const auto nodes = m.element(e);
      for (std::size_t k = 0; k < 3; ++k) {
        const Point& p = m.vertices[nodes[k]];
        const double val = a + b * p.x + c * p.y;
        gx += val * m.geometry[e].grad[k][0];
        gy += val * m.geometry[e].grad[k][1];
      }
      ASSERT_NEAR(gx, b, 1e-12 * (1.0 + std::abs(b)) * 10);
      ASSERT_NEAR(gy, c, 1e-12 * (1.0 + std::abs(c)) * 10);
    }
  }
  const Mesh l = build_mesh_1d({0.0, 3.0}, GetParam());
  for (std::size_t e = 0; e < l.num_elements(); ++e) {
    const auto nodes = l.element(e);
    const double g = (2.0 * l.vertices[nodes[0]].x + 1.0) * l.geometry[e].grad[0][0] +
                     (2.0 * l.vertices[nodes[1]].x + 1.0) * l.geometry[e].grad[1][0];
    ASSERT_NEAR(g, 2.0, 1e-12);
  }
}

INSTANTIATE_TEST_SUITE_P(Sizes, MeshInvariants, ::testing::Values(2, 3, 7, 16, 33));

TEST(Mesh, DistinctIds) {
  const Mesh a = build_mesh_1d({0.0, 1.0}, 4);
  const Mesh b = build_mesh_1d({0.0, 1.0}, 4);
  EXPECT_NE(a.id, b.id);
}
