#pragma once

// Two-parameter family h_y = v_y o f over the closed unit disk of y, its
// generalized GL energy surface and the mean-zero witness.

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "pharmonic/energy.hpp"
#include "pharmonic/error.hpp"
#include "pharmonic/lattice.hpp"
#include "pharmonic/parallel.hpp"

namespace pharmonic {

/// v_y(z) = (z + y / (1 - |y|)) / |z + y / (1 - |y|)| for |y| < 1, and the
/// constant y for |y| = 1.
inline Vec2 v_y(Vec2 y, Vec2 z) {
  double r = norm(y);
  if (r > 1.0 + 1e-12) throw InvalidArgument("v_y: |y| must not exceed 1");
  if (r >= 1.0) return y / r;
  Vec2 w = z + y / (1.0 - r);
  double n = norm(w);
  if (n == 0.0) throw SingularPoint("v_y: z is the vortex point -y / (1 - |y|)");
  return w / n;
}

/// Vortex point of v_y (|y| < 1).
inline Vec2 v_y_vortex(Vec2 y) { return -1.0 * y / (1.0 - norm(y)); }

/// Node values of a map f from the grid into R^2; identity by default.
struct DomainMap {
  std::vector<Vec2> values;

  static DomainMap identity(const Grid2D& g) {
    DomainMap f;
    f.values.resize(g.node_count());
    for (int j = 0; j < g.ny(); ++j)
      for (int i = 0; i < g.nx(); ++i) f.values[g.index(i, j)] = g.node_pos(i, j);
    return f;
  }
};

/// Polar sample grid on the closed unit disk: the center plus radii
/// (a + 1) / nr for a < nr (the last one is the boundary circle) and angles
/// offset + 2 pi b / ntheta.
struct YGrid {
  int nr = 32;
  int ntheta = 32;
  double angle_offset = 0.0;

  double radius(int a) const { return static_cast<double>(a + 1) / nr; }
  double angle(int b) const { return angle_offset + 2.0 * std::numbers::pi * b / ntheta; }
  Vec2 point(int a, int b) const { return radius(a) * polar(angle(b)); }
};

struct FamilySample {
  Vec2 y;
  double energy = 0.0;
  Vec2 mean;
};

struct FamilySurface {
  YGrid grid;
  EnergyParams params;
  FamilySample center;               ///< y = 0
  std::vector<FamilySample> samples; ///< row-major [a * ntheta + b]
  FamilySample argmax;
  double max_energy = 0.0;
  double min_energy = 0.0;
  std::vector<std::string> warnings;

  const FamilySample& at(int a, int b) const {
    return samples[static_cast<std::size_t>(a) * grid.ntheta + b];
  }
};

namespace detail {

/// Samples h_y at every active node as a relaxed field (values are unit
/// vectors, energies use raw differences).
inline S1Field sample_family(const Grid2D& g, const DomainMap& f, Vec2 y) {
  S1Field u{std::vector<Vec2>(g.node_count(), Vec2{1.0, 0.0}), FieldKind::relaxed};
  for (std::size_t k = 0; k < g.node_count(); ++k)
    if (g.active(k)) u.values[k] = v_y(y, f.values[k]);
  return u;
}

/// Cell-average mean of a node field over active cells.
inline Vec2 field_mean(const Grid2D& g, const S1Field& u) {
  Vec2 s{};
  std::size_t n = 0;
  for (int j = 0; j < g.cells_y(); ++j)
    for (int i = 0; i < g.cells_x(); ++i) {
      if (!g.cell_active(i, j)) continue;
      auto c = g.cell_corners(i, j);
      s += 0.25 * (u.values[c[0]] + u.values[c[1]] + u.values[c[2]] + u.values[c[3]]);
      ++n;
    }
  return n ? s / static_cast<double>(n) : s;
}

inline bool vortex_on_node(const Grid2D& g, const DomainMap& f, const YGrid& yg) {
  auto hits = [&](Vec2 y) {
    Vec2 z = v_y_vortex(y);
    for (std::size_t k = 0; k < g.node_count(); ++k)
      if (g.active(k) && norm(f.values[k] - z) < 1e-9 * g.h()) return true;
    return false;
  };
  if (hits(Vec2{})) return true;
  for (int a = 0; a + 1 < yg.nr; ++a)
    for (int b = 0; b < yg.ntheta; ++b)
      if (hits(yg.point(a, b))) return true;
  return false;
}

}  // namespace detail

inline FamilySample family_sample(const Grid2D& g, const DomainMap& f, Vec2 y,
                                  const EnergyParams& params) {
  S1Field u = detail::sample_family(g, f, y);
  return {y, gl_energy(g, u, params), detail::field_mean(g, u)};
}

/// GL energies of h_y over the polar y-grid. If a vortex point of v_y o f
/// lands on a node, the angles are shifted by half a step (with a warning);
/// a hit at y = 0 cannot be shifted away and raises SingularPoint.
inline FamilySurface family_energy_surface(const Grid2D& g, const DomainMap& f, YGrid yg,
                                           const EnergyParams& params, int threads = 1) {
  params.validate();
  if (f.values.size() != g.node_count()) throw ShapeMismatch("family_energy_surface: map size");
  if (yg.nr < 1 || yg.ntheta < 3) throw InvalidArgument("family_energy_surface: y-grid too small");
  FamilySurface s;
  if (detail::vortex_on_node(g, f, yg)) {
    yg.angle_offset += std::numbers::pi / yg.ntheta;
    s.warnings.push_back("vortex of v_y o f on a node; y-grid angles shifted by half a step");
    if (detail::vortex_on_node(g, f, yg))
      throw SingularPoint("family_energy_surface: vortex on a node after the half-step shift");
  }
  s.grid = yg;
  s.params = params;
  s.center = family_sample(g, f, Vec2{}, params);
  s.samples.resize(static_cast<std::size_t>(yg.nr) * yg.ntheta);
  parallel_rows(yg.nr, threads, [&](int a) {
    for (int b = 0; b < yg.ntheta; ++b)
      s.samples[static_cast<std::size_t>(a) * yg.ntheta + b] =
          family_sample(g, f, yg.point(a, b), params);
  });
  s.argmax = s.center;
  s.max_energy = s.min_energy = s.center.energy;
  for (const auto& smp : s.samples) {
    if (smp.energy > s.max_energy) s.argmax = smp, s.max_energy = smp.energy;
    s.min_energy = std::min(s.min_energy, smp.energy);
  }
  return s;
}

/// Largest energy difference between adjacent samples (radial, angular and
/// center-to-first-ring neighbors).
inline double surface_max_jump(const FamilySurface& s) {
  double worst = 0.0;
  const auto& yg = s.grid;
  for (int b = 0; b < yg.ntheta; ++b)
    worst = std::max(worst, std::abs(s.at(0, b).energy - s.center.energy));
  for (int a = 0; a < yg.nr; ++a)
    for (int b = 0; b < yg.ntheta; ++b) {
      double e = s.at(a, b).energy;
      worst = std::max(worst, std::abs(e - s.at(a, (b + 1) % yg.ntheta).energy));
      if (a + 1 < yg.nr) worst = std::max(worst, std::abs(e - s.at(a + 1, b).energy));
    }
  return worst;
}

struct MeanZeroWitness {
  Vec2 y0;
  double mean_norm = 0.0;
  double energy = 0.0;
  /// The measured positive floor (the witness energy itself).
  double delta = 0.0;
  bool positive = false;
};

/// Sample with the smallest |mean(h_y)|.
inline MeanZeroWitness mean_zero_witness(const FamilySurface& s) {
  const FamilySample* best = &s.center;
  for (const auto& smp : s.samples)
    if (norm(smp.mean) < norm(best->mean)) best = &smp;
  MeanZeroWitness w;
  w.y0 = best->y;
  w.mean_norm = norm(best->mean);
  w.energy = best->energy;
  w.delta = best->energy;
  w.positive = best->energy > 0.0;
  return w;
}

}  // namespace pharmonic
