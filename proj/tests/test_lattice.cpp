#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "pharmonic/diagnostics.hpp"
#include "pharmonic/io.hpp"
#include "pharmonic/lattice.hpp"

using namespace pharmonic;

namespace {

constexpr double kPi = std::numbers::pi;

ScalarField random_scalar(const Grid2D& g, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  ScalarField f{std::vector<double>(g.node_count())};
  for (auto& v : f.values) v = U(rng);
  return f;
}

S1Field random_unit(const Grid2D& g, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-kPi, kPi);
  S1Field u{std::vector<Vec2>(g.node_count()), FieldKind::constrained};
  for (auto& v : u.values) v = polar(U(rng));
  return u;
}

}  // namespace

TEST(Grid, FactoriesAndInvariants) {
  Grid2D t = Grid2D::torus(16);
  EXPECT_EQ(t.node_count(), 256u);
  EXPECT_EQ(t.cell_count(), 256u);
  for (std::size_t k = 0; k < t.node_count(); ++k) EXPECT_TRUE(t.free(k));

  Grid2D d = Grid2D::disk(1.0, 1.0 / 32);
  for (int j = 1; j + 1 < d.ny(); ++j)
    for (int i = 1; i + 1 < d.nx(); ++i)
      if (d.role(i, j) == NodeRole::interior) {
        EXPECT_LE(norm(d.node_pos(i, j) - d.disk_center()), 1.0);
        for (auto [a, b] : {std::pair{i + 1, j}, {i - 1, j}, {i, j + 1}, {i, j - 1}})
          EXPECT_NE(d.role(a, b), NodeRole::exterior);
      }
  EXPECT_THROW(Grid2D::torus(4), InvalidArgument);
}

TEST(GradScalar, ConstantAndLinear) {
  Grid2D g = Grid2D::rectangle(12, 10, 0.1, {0.0, 0.0});
  ScalarField c{std::vector<double>(g.node_count(), 3.0)};
  OneForm2D z = grad_scalar(g, c);
  for (double v : z.ax) EXPECT_EQ(v, 0.0);
  for (double v : z.ay) EXPECT_EQ(v, 0.0);

  ScalarField x{std::vector<double>(g.node_count())};
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) x.values[g.index(i, j)] = g.node_pos(i, j).x;
  OneForm2D d = grad_scalar(g, x);
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      if (g.edge_x(i, j)) { EXPECT_NEAR(d.ax[g.index(i, j)], 1.0, 1e-12); }
      if (g.edge_y(i, j)) { EXPECT_EQ(d.ay[g.index(i, j)], 0.0); }
    }
}

TEST(GradScalar, RandomTorusIsCurlFree) {
  Grid2D g = Grid2D::torus(16);
  OneForm2D d = grad_scalar(g, random_scalar(g, 7));
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) EXPECT_NEAR(plaquette_curl(g, d, i, j) * g.h(), 0.0, 1e-14);
}

TEST(GradScalar, ShapeMismatch) {
  Grid2D g = Grid2D::torus(16);
  EXPECT_THROW(grad_scalar(g, ScalarField{std::vector<double>(10)}), ShapeMismatch);
}

TEST(Current, ConstantPlaneWaveAndVortex) {
  Grid2D g = Grid2D::torus(32);
  S1Field one{std::vector<Vec2>(g.node_count(), Vec2{1.0, 0.0}), FieldKind::constrained};
  OneForm2D z = current(g, one);
  for (double v : z.ax) EXPECT_EQ(v, 0.0);

  const double alpha = 2.0 * kPi * 3;  // periodic on the unit torus
  S1Field w{std::vector<Vec2>(g.node_count()), FieldKind::constrained};
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) w.values[g.index(i, j)] = polar(alpha * i * g.h());
  OneForm2D jw = current(g, w);
  for (std::size_t k = 0; k < jw.ax.size(); ++k) {
    EXPECT_NEAR(jw.ax[k], alpha, 1e-10);
    EXPECT_NEAR(jw.ay[k], 0.0, 1e-12);
  }

  // Vortex: tangential with |j| close to 1/|z|, compared at edge midpoints.
  Grid2D s = Grid2D::centered_square(129, 2.0);  // odd: the origin is a cell center
  Vec2 c{};
  OneForm2D jv = current(s, exact_vortex_field(s, 1, c));
  double worst = 0.0;
  for (int j = 0; j < s.ny(); ++j)
    for (int i = 0; i + 1 < s.nx(); ++i) {
      Vec2 m = s.node_pos(i, j) + Vec2{0.5 * s.h(), 0.0} - c;
      if (norm(m) < 0.2) continue;
      double exact = -m.y / (m.x * m.x + m.y * m.y);  // d theta / dx
      worst = std::max(worst, std::abs(jv.ax[s.index(i, j)] - exact) * norm(m));
    }
  EXPECT_LT(worst, 5.0 * s.h());
}

TEST(Current, RelaxedDegenerateModulus) {
  Grid2D g = Grid2D::torus(16);
  S1Field u{std::vector<Vec2>(g.node_count(), Vec2{1.0, 0.0}), FieldKind::relaxed};
  u.values[5] = Vec2{1e-10, 0.0};
  EXPECT_THROW(current(g, u), DegenerateModulus);
}

TEST(Winding, ConstantVortexAndAway) {
  Grid2D g = Grid2D::centered_square(64, 2.0);
  S1Field one{std::vector<Vec2>(g.node_count(), Vec2{0.0, 1.0}), FieldKind::constrained};
  for (int w : winding_map(g, one)) EXPECT_EQ(w, 0);
  Vec2 c{0.5 * g.h(), 0.5 * g.h()};
  for (int k : {-1, 1}) {
    auto wm = winding_map(g, exact_vortex_field(g, k, c));
    for (int j = 0; j < g.cells_y(); ++j)
      for (int i = 0; i < g.cells_x(); ++i) {
        int w = wm[g.cell_index(i, j)];
        EXPECT_EQ(w, norm(g.cell_center(i, j) - c) < 1e-9 ? k : 0);
      }
  }
  // |k| = 2 in one cell puts every edge at a phase step of exactly pi, so the
  // charge may spread over neighbors; the total is still exact.
  for (int k : {-2, 2}) {
    int total = 0;
    for (int w : winding_map(g, exact_vortex_field(g, k, c))) total += w;
    EXPECT_EQ(total, k);
  }
}

TEST(DetectVortices, SingleAndPairAndLifting) {
  Grid2D g = Grid2D::centered_square(64, 2.0);
  Vec2 c{0.3 + 0.5 * g.h(), -0.2 + 0.5 * g.h()};
  VortexSet one = detect_vortices(g, exact_vortex_field(g, 1, c), 4 * g.h());
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one.vortices[0].winding, 1);
  EXPECT_LE(norm(one.vortices[0].position - c), g.h());

  Vec2 a{-0.5 + 0.5 * g.h(), 0.5 * g.h()}, b{0.5 + 0.5 * g.h(), 0.5 * g.h()};
  VortexSet two = detect_vortices(g, vortex_product_field(g, {{a, 1}, {b, -1}}), 4 * g.h());
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(two.total_winding(), 0);
  EXPECT_EQ(std::min(two.vortices[0].winding, two.vortices[1].winding), -1);

  S1Field smooth{std::vector<Vec2>(g.node_count()), FieldKind::constrained};
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) smooth.values[g.index(i, j)] = polar(std::sin(3.0 * g.node_pos(i, j).x));
  EXPECT_TRUE(detect_vortices(g, smooth, 4 * g.h()).empty());
}

TEST(DetectVortices, CloseClustersMergeWithWarning) {
  Grid2D g = Grid2D::centered_square(64, 2.0);
  Vec2 a{0.5 * g.h(), 0.5 * g.h()}, b{2.5 * g.h(), 0.5 * g.h()};
  VortexSet vs = detect_vortices(g, vortex_product_field(g, {{a, 1}, {b, 1}}), 4 * g.h());
  ASSERT_EQ(vs.size(), 1u);
  EXPECT_EQ(vs.vortices[0].winding, 2);
  EXPECT_FALSE(vs.warnings.empty());
}

TEST(BoundaryDegree, DiskTraceConstantAndProduct) {
  Grid2D d = Grid2D::disk(1.0, 1.0 / 32);
  Contour loop = outer_contour(d);
  for (int k : {-2, 1, 3}) {
    S1Field u{std::vector<Vec2>(d.node_count(), Vec2{1.0, 0.0}), FieldKind::constrained};
    for (int j = 0; j < d.ny(); ++j)
      for (int i = 0; i < d.nx(); ++i) {
        Vec2 x = d.node_pos(i, j) - d.disk_center();
        if (norm(x) > 0) u.values[d.index(i, j)] = polar(k * std::atan2(x.y, x.x));
      }
    EXPECT_EQ(boundary_degree(u, loop), k);
  }
  S1Field c{std::vector<Vec2>(d.node_count(), Vec2{0.0, 1.0}), FieldKind::constrained};
  EXPECT_EQ(boundary_degree(c, loop), 0);

  Grid2D g = Grid2D::centered_square(64, 2.0);
  Vec2 a{-0.3 + 0.5 * g.h(), 0.5 * g.h()}, b{0.3 + 0.5 * g.h(), 0.5 * g.h()};
  S1Field p = vortex_product_field(g, {{a, 2}, {b, -1}});
  EXPECT_EQ(boundary_degree(p, outer_contour(g)), 1);
}

TEST(BallIntegral, AreaZeroAndLogAnnulus) {
  Grid2D g = Grid2D::centered_square(256, 2.0);
  CellDensity one{std::vector<double>(g.cell_count(), 1.0)};
  EXPECT_NEAR(ball_integral(g, one, Vec2{}, 0.5), kPi / 4, 4.0 * g.h());
  CellDensity zero{std::vector<double>(g.cell_count(), 0.0)};
  EXPECT_EQ(ball_integral(g, zero, Vec2{}, 0.5), 0.0);

  Vec2 c{0.5 * g.h(), 0.5 * g.h()};
  CellDensity d = du_p_density(g, exact_vortex_field(g, 1, c), 2.0);
  double ann = ball_integral(g, d, c, 0.8) - ball_integral(g, d, c, 0.2);
  EXPECT_NEAR(ann, 2 * kPi * std::log(4.0), 20.0 * g.h());
  EXPECT_THROW(ball_integral(g, one, Vec2{0.9, 0.0}, 0.5), DomainExit);
}

TEST(Invariants, ExactnessDegreeConservationGauge) {
  Grid2D g = Grid2D::torus(16);
  OneForm2D d = grad_scalar(g, random_scalar(g, 3));
  // Winding of the integrated exact form is zero everywhere.
  S1Field e{std::vector<Vec2>(g.node_count()), FieldKind::constrained};
  ScalarField f = random_scalar(g, 3);
  for (std::size_t k = 0; k < e.values.size(); ++k) e.values[k] = polar(f.values[k]);
  for (int w : winding_map(g, e)) EXPECT_EQ(w, 0);

  // Degree conservation on a random field over a rectangle.
  Grid2D r = Grid2D::centered_square(20, 1.0);
  S1Field u = random_unit(r, 11);
  int total = 0;
  for (int w : winding_map(r, u)) total += w;
  EXPECT_EQ(total, boundary_degree(u, outer_contour(r)));

  // Gauge invariance.
  S1Field v = random_unit(g, 5);
  S1Field rotated = v;
  for (auto& x : rotated.values) x = cmul(x, polar(0.7));
  OneForm2D j0 = current(g, v), j1 = current(g, rotated);
  for (std::size_t k = 0; k < j0.ax.size(); ++k) {
    EXPECT_NEAR(j0.ax[k], j1.ax[k], 1e-12 / g.h());
    EXPECT_NEAR(j0.ay[k], j1.ay[k], 1e-12 / g.h());
  }
  EXPECT_EQ(winding_map(g, v), winding_map(g, rotated));
}

TEST(Invariants, WrappedPhaseMatchesLifting) {
  Grid2D g = Grid2D::centered_square(24, 1.0);
  ScalarField phi{std::vector<double>(g.node_count())};
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      Vec2 x = g.node_pos(i, j);
      phi.values[g.index(i, j)] = 2.0 * std::sin(2.0 * x.x) + x.y * x.y;
    }
  S1Field u{std::vector<Vec2>(g.node_count()), FieldKind::constrained};
  for (std::size_t k = 0; k < u.values.size(); ++k) u.values[k] = polar(phi.values[k]);
  OneForm2D a = current(g, u), b = grad_scalar(g, phi);
  for (std::size_t k = 0; k < a.ax.size(); ++k) {
    EXPECT_NEAR(a.ax[k], b.ax[k], 1e-9);
    EXPECT_NEAR(a.ay[k], b.ay[k], 1e-9);
  }
}

TEST(Snapshot, RoundTripAndCsv) {
  Grid2D g = Grid2D::disk(1.0, 1.0 / 16);
  S1Field u = random_unit(g, 2);
  auto path = std::filesystem::temp_directory_path() / "pharmonic_snap_test.snap";
  write_snapshot(path, g, u);
  Snapshot s = read_snapshot(path);
  EXPECT_EQ(s.nx, g.nx());
  EXPECT_EQ(s.ny, g.ny());
  EXPECT_EQ(s.h, g.h());
  EXPECT_EQ(s.topology, Topology::disk);
  EXPECT_EQ(s.field.kind, FieldKind::constrained);
  for (std::size_t k = 0; k < u.values.size(); ++k) {
    EXPECT_EQ(s.field.values[k].x, u.values[k].x);
    EXPECT_EQ(s.field.values[k].y, u.values[k].y);
  }
  // Little-endian payload: first value bytes after the 32-byte header.
  std::string raw = read_file(path);
  ASSERT_EQ(raw.size(), 32 + 16 * g.node_count());
  double first;
  std::memcpy(&first, raw.data() + 32, 8);
  EXPECT_EQ(first, u.values[0].x);
  EXPECT_THROW(load_field(path, Grid2D::torus(16)), ShapeMismatch);
  raw[0] = 'X';
  EXPECT_THROW(decode_snapshot(raw), Error);
  std::filesystem::remove(path);

  std::string csv = field_csv(g, u);
  EXPECT_EQ(csv.rfind("x,y,u1,u2\n", 0), 0u);
  std::size_t rows = 0, active = 0;
  for (char ch : csv) rows += ch == '\n';
  for (std::size_t k = 0; k < g.node_count(); ++k) active += g.active(k);
  EXPECT_EQ(rows, active + 1);
}
