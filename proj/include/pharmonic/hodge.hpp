#pragma once

// Discrete Hodge decomposition of edge 1-forms on the periodic torus,
// j = d phi + rot psi + hconst, with node potential phi, cell stream
// function psi and a constant harmonic part. Both Poisson problems are
// diagonalized by the 2D DFT (FFTW).
//
// Conventions (edge (i,j)->(i+1,j) carries ax, (i,j)->(i,j+1) carries ay):
//   div j (node)   = (ax(i,j) - ax(i-1,j) + ay(i,j) - ay(i,j-1)) / h
//   curl j (cell)  = plaquette circulation / h
//   rot psi        = (-(psi(i,j) - psi(i,j-1)) / h, (psi(i,j) - psi(i-1,j)) / h)
// so that div d = curl rot = 5-point Laplacian and div rot = curl d = 0.

#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <vector>

#include <fftw3.h>

#include "pharmonic/energy.hpp"
#include "pharmonic/error.hpp"
#include "pharmonic/lattice.hpp"

namespace pharmonic {

struct HodgeParts {
  ScalarField phi;  ///< node potential, zero mean
  /// Cell stream function, zero mean; psi[cell_index(i,j)].
  std::vector<double> psi;
  Vec2 hconst;
  /// ||j - d phi - rot psi - hconst||_2 / ||j||_2 (edge l2).
  double residual = 0.0;
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

/// Solves the periodic 5-point problem Lap f = rhs (rhs row-major nx*ny,
/// mean removed first) with the zero-mean gauge.
inline std::vector<double> periodic_poisson(int nx, int ny, double h, std::vector<double> rhs) {
  const std::size_t n = static_cast<std::size_t>(nx) * ny;
  double mean = 0.0;
  for (double v : rhs) mean += v;
  mean /= static_cast<double>(n);
  for (double& v : rhs) v -= mean;

  const int nxc = nx / 2 + 1;
  std::vector<std::complex<double>> spec(static_cast<std::size_t>(ny) * nxc);
  std::vector<double> out(n);
  fftw_plan fwd, bwd;
  {
    // FFTW's planner is not reentrant.
    std::lock_guard lock(fftw_planner_mutex());
    fwd = fftw_plan_dft_r2c_2d(ny, nx, rhs.data(), reinterpret_cast<fftw_complex*>(spec.data()),
                               FFTW_ESTIMATE);
    bwd = fftw_plan_dft_c2r_2d(ny, nx, reinterpret_cast<fftw_complex*>(spec.data()), out.data(),
                               FFTW_ESTIMATE);
  }
  fftw_execute(fwd);
  const double inv_h2 = 1.0 / (h * h);
  for (int l = 0; l < ny; ++l) {
    double sy = std::sin(std::numbers::pi * l / ny);
    for (int k = 0; k < nxc; ++k) {
      double sx = std::sin(std::numbers::pi * k / nx);
      double eig = -4.0 * inv_h2 * (sx * sx + sy * sy);
      auto& c = spec[static_cast<std::size_t>(l) * nxc + k];
      c = (k == 0 && l == 0) ? 0.0 : c / (eig * static_cast<double>(n));
    }
  }
  fftw_execute(bwd);
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
  }
  return out;
}

inline void require_torus(const Grid2D& g, const char* what) {
  if (!g.periodic()) throw Unsupported(std::string(what) + ": torus topology required");
}

}  // namespace detail

/// Node divergence of a 1-form on the torus.
inline ScalarField divergence(const Grid2D& g, const OneForm2D& j) {
  detail::require_torus(g, "divergence");
  ScalarField d{std::vector<double>(g.node_count())};
  for (int b = 0; b < g.ny(); ++b)
    for (int a = 0; a < g.nx(); ++a)
      d.values[g.index(a, b)] = (j.ax[g.index(a, b)] - j.ax[g.index(g.wrap_x(a - 1), b)] +
                                 j.ay[g.index(a, b)] - j.ay[g.index(a, g.wrap_y(b - 1))]) /
                                g.h();
  return d;
}

/// rot of a cell function (see header comment).
inline OneForm2D rot(const Grid2D& g, const std::vector<double>& psi) {
  detail::require_torus(g, "rot");
  if (psi.size() != g.cell_count()) throw ShapeMismatch("rot: psi size does not match cells");
  OneForm2D out{std::vector<double>(g.node_count()), std::vector<double>(g.node_count())};
  const double inv_h = 1.0 / g.h();
  for (int b = 0; b < g.ny(); ++b)
    for (int a = 0; a < g.nx(); ++a) {
      double c = psi[g.cell_index(a, b)];
      out.ax[g.index(a, b)] = -(c - psi[g.cell_index(a, g.wrap_y(b - 1))]) * inv_h;
      out.ay[g.index(a, b)] = (c - psi[g.cell_index(g.wrap_x(a - 1), b)]) * inv_h;
    }
  return out;
}

/// Edge l2 inner product h^2 * sum(ax bx + ay by).
inline double form_inner(const Grid2D& g, const OneForm2D& a, const OneForm2D& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.ax.size(); ++k) s += a.ax[k] * b.ax[k] + a.ay[k] * b.ay[k];
  return s * g.h() * g.h();
}

inline OneForm2D constant_form(const Grid2D& g, Vec2 c) {
  return {std::vector<double>(g.node_count(), c.x), std::vector<double>(g.node_count(), c.y)};
}

inline HodgeParts hodge_decompose(const Grid2D& g, const OneForm2D& j) {
  detail::require_torus(g, "hodge_decompose");
  if (j.ax.size() != g.node_count() || j.ay.size() != g.node_count())
    throw ShapeMismatch("hodge_decompose: form size does not match grid");
  HodgeParts out;
  out.phi.values = detail::periodic_poisson(g.nx(), g.ny(), g.h(), divergence(g, j).values);
  std::vector<double> curl(g.cell_count());
  for (int b = 0; b < g.ny(); ++b)
    for (int a = 0; a < g.nx(); ++a) curl[g.cell_index(a, b)] = plaquette_curl(g, j, a, b);
  out.psi = detail::periodic_poisson(g.nx(), g.ny(), g.h(), std::move(curl));
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < j.ax.size(); ++k) mx += j.ax[k], my += j.ay[k];
  out.hconst = Vec2{mx, my} / static_cast<double>(g.node_count());

  OneForm2D dphi = grad_scalar(g, out.phi), r = rot(g, out.psi);
  double res = 0.0, nrm = 0.0;
  for (std::size_t k = 0; k < j.ax.size(); ++k) {
    double ex = j.ax[k] - dphi.ax[k] - r.ax[k] - out.hconst.x;
    double ey = j.ay[k] - dphi.ay[k] - r.ay[k] - out.hconst.y;
    res += ex * ex + ey * ey;
    nrm += j.ax[k] * j.ax[k] + j.ay[k] * j.ay[k];
  }
  out.residual = nrm > 0.0 ? std::sqrt(res / nrm) : std::sqrt(res);
  return out;
}

/// L^q norm of a 1-form, using the cell vector of averaged parallel edges.
inline double form_lq_norm(const Grid2D& g, const OneForm2D& a, double q) {
  double s = 0.0;
  for (int j = 0; j < g.cells_y(); ++j)
    for (int i = 0; i < g.cells_x(); ++i) {
      if (!g.cell_active(i, j)) continue;
      auto c = g.cell_corners(i, j);
      double vx = 0.5 * (a.ax[c[0]] + a.ax[c[3]]);
      double vy = 0.5 * (a.ay[c[0]] + a.ay[c[1]]);
      s += std::pow(std::hypot(vx, vy), q);
    }
  return std::pow(s * g.h() * g.h(), 1.0 / q);
}

// ---------------------------------------------------------------------------
// Exact-part scaling

struct ScalingInput {
  double p = 0.0;
  OneForm2D current;
};

struct ScalingRow {
  double p = 0.0;
  double exact_norm = 0.0;    ///< ||d phi||_{L^q}
  double coexact_norm = 0.0;  ///< ||rot psi||_{L^q}
  double current_norm = 0.0;  ///< ||j||_{L^q}
  Vec2 hconst;
  double shape = 0.0;         ///< (2-p)^{1-1/p} |log(2-p)|
  double exact_ratio = 0.0;   ///< exact_norm / shape
  double coexact_ratio = 0.0; ///< coexact_norm / 1
  double residual = 0.0;
};

struct ScalingTable {
  double q = 0.0;
  std::vector<ScalingRow> rows;
  /// max / min of exact_ratio over rows.
  double exact_band = 0.0;
  double coexact_band = 0.0;
};

inline double exact_part_shape(double p) {
  return std::pow(2.0 - p, 1.0 - 1.0 / p) * std::abs(std::log(2.0 - p));
}

inline ScalingTable exact_part_scaling(const Grid2D& g, const std::vector<ScalingInput>& sweep,
                                       double q) {
  if (sweep.size() < 3) throw InsufficientData("exact_part_scaling: need at least 3 p values");
  ScalingTable t{q, {}, 0.0, 0.0};
  double lo = INFINITY, hi = 0.0, clo = INFINITY, chi = 0.0;
  for (const auto& s : sweep) {
    if (!(s.p > 1.0 && s.p < 2.0)) throw InvalidArgument("exact_part_scaling: p must lie in (1, 2)");
    if (!(q < s.p)) throw InvalidArgument("exact_part_scaling: q must be below every p");
    HodgeParts parts = hodge_decompose(g, s.current);
    ScalingRow r;
    r.p = s.p;
    r.exact_norm = form_lq_norm(g, grad_scalar(g, parts.phi), q);
    r.coexact_norm = form_lq_norm(g, rot(g, parts.psi), q);
    r.current_norm = form_lq_norm(g, s.current, q);
    r.hconst = parts.hconst;
    r.shape = exact_part_shape(s.p);
    r.exact_ratio = r.exact_norm / r.shape;
    r.coexact_ratio = r.coexact_norm;
    r.residual = parts.residual;
    lo = std::min(lo, r.exact_ratio), hi = std::max(hi, r.exact_ratio);
    clo = std::min(clo, r.coexact_ratio), chi = std::max(chi, r.coexact_ratio);
    t.rows.push_back(r);
  }
  t.exact_band = lo > 0.0 ? hi / lo : INFINITY;
  t.coexact_band = clo > 0.0 ? chi / clo : INFINITY;
  return t;
}

// ---------------------------------------------------------------------------
// Torus fields

/// Integrates a 1-form whose plaquette circulations h * sum are multiples of
/// 2 pi into a unit field exp(i theta), theta(0,0) = 0. Row 0 first, then
/// columns.
inline S1Field integrate_phase(const Grid2D& g, const OneForm2D& j) {
  detail::require_torus(g, "integrate_phase");
  std::vector<double> theta(g.node_count(), 0.0);
  const double h = g.h();
  for (int a = 1; a < g.nx(); ++a)
    theta[g.index(a, 0)] = theta[g.index(a - 1, 0)] + h * j.ax[g.index(a - 1, 0)];
  for (int a = 0; a < g.nx(); ++a)
    for (int b = 1; b < g.ny(); ++b)
      theta[g.index(a, b)] = theta[g.index(a, b - 1)] + h * j.ay[g.index(a, b - 1)];
  S1Field u{std::vector<Vec2>(g.node_count()), FieldKind::constrained};
  for (std::size_t k = 0; k < theta.size(); ++k) u.values[k] = polar(theta[k]);
  return u;
}

/// +1 vortex in cell (ca, cb) and -1 vortex half a period away along x.
/// The current is rot psi with Lap psi = 2 pi (delta_+ - delta_-) / h^2 plus
/// the harmonic part (0, pi / Ly), which makes every loop circulation a
/// multiple of 2 pi. Requires an even nx.
inline S1Field torus_vortex_pair(const Grid2D& g, int ca, int cb) {
  detail::require_torus(g, "torus_vortex_pair");
  if (g.nx() % 2 != 0) throw InvalidArgument("torus_vortex_pair: nx must be even");
  std::vector<double> src(g.cell_count(), 0.0);
  const double s = 2.0 * std::numbers::pi / (g.h() * g.h());
  src[g.cell_index(g.wrap_x(ca), g.wrap_y(cb))] += s;
  src[g.cell_index(g.wrap_x(ca + g.nx() / 2), g.wrap_y(cb))] -= s;
  std::vector<double> psi = detail::periodic_poisson(g.nx(), g.ny(), g.h(), std::move(src));
  OneForm2D j = rot(g, psi);
  const double hy = std::numbers::pi / (g.ny() * g.h());
  for (double& v : j.ay) v += hy;
  return integrate_phase(g, j);
}

// ---------------------------------------------------------------------------
// Diffuse-measure experiment

struct DiffuseRow {
  double p = 0.0;
  int m = 0;
  double mass = 0.0;         ///< lattice total of (2-p)|du|^p
  double closed_form = 0.0;  ///< (2-p)(2 pi m)^p
  double squared_form = 0.0; ///< (2-p)(2 pi m)^2
  double hbar_p = 0.0;       ///< |(2-p)^{1/p} hconst|^p
  double relative_error = 0.0;
  std::size_t vortices = 0;
};

/// m_p = max(1, round((2 pi)^{-1} (2-p)^{-1/p})).
inline int diffuse_winding(double p) {
  return std::max(1, static_cast<int>(std::lround(std::pow(2.0 - p, -1.0 / p) /
                                                  (2.0 * std::numbers::pi))));
}

inline S1Field plane_wave(const Grid2D& g, int m) {
  S1Field u{std::vector<Vec2>(g.node_count()), FieldKind::constrained};
  const double L = g.nx() * g.h();
  for (int b = 0; b < g.ny(); ++b)
    for (int a = 0; a < g.nx(); ++a)
      u.values[g.index(a, b)] = polar(2.0 * std::numbers::pi * m * (a * g.h()) / L);
  return u;
}

/// Evaluates mu_p of exp(2 pi i m_p x) on the torus for each p. `windings`
/// overrides m_p when non-empty (same length as `ps`).
inline std::vector<DiffuseRow> diffuse_measure_experiment(const Grid2D& g,
                                                          const std::vector<double>& ps,
                                                          const std::vector<int>& windings = {}) {
  detail::require_torus(g, "diffuse_measure_experiment");
  if (!windings.empty() && windings.size() != ps.size())
    throw InvalidArgument("diffuse_measure_experiment: windings and p lists differ in length");
  std::vector<DiffuseRow> out;
  for (std::size_t s = 0; s < ps.size(); ++s) {
    DiffuseRow r;
    r.p = ps[s];
    r.m = windings.empty() ? diffuse_winding(r.p) : windings[s];
    if (2.0 * std::numbers::pi * std::abs(r.m) * g.h() >= std::numbers::pi)
      throw InvalidArgument("diffuse_measure_experiment: winding unresolved by the grid");
    S1Field u = plane_wave(g, r.m);
    r.mass = total_integral(g, mu_density(g, u, r.p));
    double k = 2.0 * std::numbers::pi * std::abs(r.m);
    r.closed_form = (2.0 - r.p) * std::pow(k, r.p);
    r.squared_form = (2.0 - r.p) * k * k;
    HodgeParts parts = hodge_decompose(g, current(g, u));
    r.hbar_p = std::pow(std::pow(2.0 - r.p, 1.0 / r.p) * norm(parts.hconst), r.p);
    r.relative_error = r.closed_form > 0.0 ? std::abs(r.mass - r.closed_form) / r.closed_form
                                           : std::abs(r.mass);
    r.vortices = detect_vortices(g, u, 2.0 * g.h()).size();
    out.push_back(r);
  }
  return out;
}

}  // namespace pharmonic
