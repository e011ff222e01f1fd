#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "pharmonic/diagnostics.hpp"
#include "pharmonic/solver.hpp"

using namespace pharmonic;

namespace {

constexpr double kPi = std::numbers::pi;

struct DiskRun {
  Grid2D g;
  std::vector<SweepStage> stages;
};

DiskRun disk(int k, int n, std::vector<double> ps) {
  Grid2D g = Grid2D::disk(1.0, 1.0 / n);
  SolveConfig cfg;
  cfg.p_schedule = std::move(ps);
  cfg.stopping.rel_tolerance = 1e-5;
  return {g, disk_sweep(g, k, cfg)};
}

}  // namespace

TEST(Minimize, HarmonicPhaseP2) {
  // Degree-0 Dirichlet data exp(i phi_b); at p = 2 with the penalty off and a
  // constrained start the minimizer is exp(i phi) with phi discrete harmonic.
  Grid2D g = Grid2D::centered_square(24, 1.0);
  auto phib = [](Vec2 x) { return 0.8 * (x.x * x.x - x.y * x.y) + 0.3 * x.x; };
  S1Field u0{std::vector<Vec2>(g.node_count()), FieldKind::constrained};
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i)
      u0.values[g.index(i, j)] = g.free(g.index(i, j)) ? Vec2{1.0, 0.0} : polar(phib(g.node_pos(i, j)));
  EnergyParams ep;
  ep.p = 2.0;
  SolveConfig cfg;
  cfg.stopping.rel_tolerance = 1e-9;
  cfg.stopping.max_iterations = 50000;
  SolveResult r = minimize(g, u0, ep, cfg);
  EXPECT_TRUE(r.report.converged);
  // The harmonic quadratic (x^2 - y^2) plus linear is reproduced exactly by the
  // 5-point Laplacian.
  double worst = 0.0;
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      Vec2 d = r.field.values[g.index(i, j)];
      worst = std::max(worst, std::abs(std::remainder(std::atan2(d.y, d.x) - phib(g.node_pos(i, j)), 2 * kPi)));
    }
  EXPECT_LT(worst, 1e-6);
}

TEST(Minimize, BoundaryFidelityDescentAndDeterminism) {
  Grid2D g = Grid2D::disk(1.0, 1.0 / 32);
  S1Field u0 = disk_initial_field(g, 1);
  SolveConfig cfg;
  cfg.stopping.max_iterations = 300;
  EnergyParams ep;
  ep.p = 1.7;
  ep.delta_reg = 0.1;
  ep.eps_penalty = g.h();
  SolveResult a = minimize(g, u0, ep, cfg);
  SolveResult b = minimize(g, u0, ep, cfg);
  for (std::size_t k = 0; k < g.node_count(); ++k) {
    if (g.active(k) && !g.free(k)) {
      EXPECT_EQ(a.field.values[k].x, u0.values[k].x);
      EXPECT_EQ(a.field.values[k].y, u0.values[k].y);
    }
    EXPECT_EQ(a.field.values[k].x, b.field.values[k].x);
    EXPECT_EQ(a.field.values[k].y, b.field.values[k].y);
  }
  const auto& h = a.report.energy_history;
  for (std::size_t i = 1; i < h.size(); ++i) EXPECT_LE(h[i], h[i - 1]);

  // Thread count does not change the result.
  SolveConfig c4 = cfg;
  c4.threads = 4;
  SolveResult t = minimize(g, u0, ep, c4);
  for (std::size_t k = 0; k < g.node_count(); ++k) EXPECT_EQ(a.field.values[k].x, t.field.values[k].x);
}

TEST(Minimize, NonConvergenceFlaggedAndDivergence) {
  Grid2D g = Grid2D::disk(1.0, 1.0 / 32);
  SolveConfig cfg;
  cfg.stopping.max_iterations = 3;
  EnergyParams ep;
  ep.p = 1.7;
  ep.delta_reg = 0.1;
  ep.eps_penalty = g.h();
  SolveResult r = minimize(g, disk_initial_field(g, 1), ep, cfg);
  EXPECT_FALSE(r.report.converged);
  EXPECT_EQ(r.field.values.size(), g.node_count());

  S1Field bad = disk_initial_field(g, 1);
  bad.values[g.index(g.nx() / 2, g.ny() / 2)] = Vec2{NAN, 0.0};
  EXPECT_THROW(minimize(g, bad, ep, cfg), InvalidArgument);
}

TEST(Minimize, WarmStartFromExactVortex) {
  Grid2D g = Grid2D::centered_square(64, 1.0);
  S1Field v = exact_vortex_field(g, 1, Vec2{0.5 * g.h(), 0.5 * g.h()});
  SolveConfig cfg;
  cfg.p_schedule = {1.5};
  cfg.stopping.rel_tolerance = 1e-5;
  EnergyParams ep;
  ep.p = 1.5;
  double e0 = p_energy(g, v, ep);
  SolveResult r = minimize_regularized(g, v, 1.5, cfg);
  double e1 = p_energy(g, r.field, ep);
  EXPECT_LE(e1, e0 * (1 + 1e-12));
  EXPECT_LT((e0 - e1) / e0, 0.02);
}

TEST(Sweep, DegreeOneSingleVortexEveryStage) {
  DiskRun r = disk(1, 64, {1.5, 1.7, 1.9});
  ASSERT_EQ(r.stages.size(), 3u);
  for (const auto& st : r.stages) {
    EXPECT_TRUE(st.report.converged) << "p=" << st.p;
    Projection pr = project_unit(r.g, st.field);
    VortexSet vs = detect_vortices(r.g, pr.field, 4 * r.g.h());
    ASSERT_EQ(vs.size(), 1u) << "p=" << st.p;
    EXPECT_EQ(vs.vortices[0].winding, 1);
    EXPECT_EQ(boundary_degree(pr.field, outer_contour(r.g)), 1);
  }
}

TEST(Sweep, DegreeZeroNoVorticesBoundedEnergy) {
  Grid2D g = Grid2D::disk(1.0, 1.0 / 32);
  SolveConfig cfg;
  cfg.p_schedule = {1.5, 1.7, 1.9};
  S1Field u0{std::vector<Vec2>(g.node_count(), Vec2{1.0, 0.0}), FieldKind::relaxed};
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i)
      if (g.active(g.index(i, j))) u0.values[g.index(i, j)] = polar(std::sin(3 * g.node_pos(i, j).x));
  auto stages = continuation_sweep(g, u0, cfg);
  for (const auto& st : stages) {
    Projection pr = project_unit(g, st.field);
    EXPECT_TRUE(detect_vortices(g, pr.field, 4 * g.h()).empty());
    EnergyParams ep;
    ep.p = st.p;
    EXPECT_LT(p_energy(g, pr.field, ep), 20.0);
  }
}

TEST(Sweep, DegreeTwoSplitsIntoTwoUnitVortices) {
  DiskRun r = disk(2, 64, {1.9});
  Projection pr = project_unit(r.g, r.stages.back().field);
  VortexSet vs = detect_vortices(r.g, pr.field, 4 * r.g.h());
  ASSERT_EQ(vs.size(), 2u);
  for (const auto& v : vs.vortices) EXPECT_EQ(v.winding, 1);
  // Energy oracle for the candidates: two unit cores beat one double core.
  EXPECT_LT(2 * oracle_vortex_energy(1, 1.9, 0.1, 1.0), oracle_vortex_energy(2, 1.9, 0.1, 1.0));
}

TEST(Sweep, StageFailureCarriesIndex) {
  Grid2D g = Grid2D::disk(1.0, 1.0 / 16);
  SolveConfig cfg;
  cfg.p_schedule = {1.5, 1.7};
  S1Field u0 = disk_initial_field(g, 1);
  u0.values[g.index(g.nx() / 2, g.ny() / 2)] = Vec2{INFINITY, 0.0};
  try {
    continuation_sweep(g, u0, cfg);
    FAIL() << "expected a stage failure";
  } catch (const StageFailure& e) {
    EXPECT_EQ(e.stage(), 0u);
  }
}

TEST(Config, ScheduleValidation) {
  SolveConfig cfg;
  cfg.p_schedule = {1.7, 1.5};
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg.p_schedule = {1.5, 2.5};
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg.p_schedule = {1.5};
  cfg.delta_schedule = {1e-3, 1e-2};
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg.delta_schedule = {1e-1};
  cfg.stopping.rel_tolerance = 0.0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
}

TEST(ProjectUnit, IdentityScalingAndUnreliable) {
  Grid2D g = Grid2D::torus(16);
  S1Field c{std::vector<Vec2>(g.node_count(), polar(0.4)), FieldKind::constrained};
  Projection p = project_unit(g, c);
  for (std::size_t k = 0; k < g.node_count(); ++k) {
    EXPECT_NEAR(p.field.values[k].x, c.values[k].x, 1e-15);
    EXPECT_NEAR(p.field.values[k].y, c.values[k].y, 1e-15);
  }
  S1Field two{std::vector<Vec2>(g.node_count(), Vec2{2.0, 0.0}), FieldKind::relaxed};
  for (const auto& v : project_unit(g, two).field.values) EXPECT_EQ(v.x, 1.0);

  S1Field tiny{std::vector<Vec2>(g.node_count(), Vec2{0.01, 0.0}), FieldKind::relaxed};
  EXPECT_THROW(project_unit(g, tiny), ProjectionUnreliable);
}

TEST(ProjectUnit, CoreIsOneSmallCluster) {
  // Core radius tracks eps = h: compare the cluster diameter at two spacings.
  for (int n : {32, 64}) {
    DiskRun r = disk(1, n, {1.9});
    Projection pr = project_unit(r.g, r.stages.back().field, 0.5);
    double diam = 0.0;
    std::vector<Vec2> pts;
    for (std::size_t k = 0; k < r.g.node_count(); ++k)
      if (pr.core[k]) pts.push_back(r.g.node_pos(static_cast<int>(k % r.g.nx()), static_cast<int>(k / r.g.nx())));
    for (auto& a : pts)
      for (auto& b : pts) diam = std::max(diam, norm(a - b));
    EXPECT_LE(diam, 4.0 * r.g.h()) << "n=" << n;
  }
}
