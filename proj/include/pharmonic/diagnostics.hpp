#pragma once

// Quantitative checks on (projected) S^1-valued fields: energy density
// theta_p and its monotonicity in r, the annulus Pohozaev balance, the
// inner-variation residual, per-vortex quantization, the density constant
// c(n, p) and closed-form vortex oracles.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "pharmonic/energy.hpp"
#include "pharmonic/error.hpp"
#include "pharmonic/lattice.hpp"

namespace pharmonic {

// ---------------------------------------------------------------------------
// Closed-form oracles

/// Samples (z - center)^k / |z - center|^k. The center must not be a node.
inline S1Field exact_vortex_field(const Grid2D& g, int kappa, Vec2 center) {
  S1Field u{std::vector<Vec2>(g.node_count(), Vec2{1.0, 0.0}), FieldKind::constrained};
  if (kappa == 0) return u;
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      Vec2 d = g.displacement(center, g.node_pos(i, j));
      if (norm(d) < 1e-12 * g.h())
        throw SingularPoint("exact_vortex_field: vortex center coincides with a node");
      u.values[g.index(i, j)] = polar(kappa * std::atan2(d.y, d.x));
    }
  return u;
}

/// Product of unit vortices; windings add.
inline S1Field vortex_product_field(const Grid2D& g, const std::vector<std::pair<Vec2, int>>& vortices) {
  S1Field u{std::vector<Vec2>(g.node_count(), Vec2{1.0, 0.0}), FieldKind::constrained};
  for (const auto& [c, k] : vortices) u = multiply(u, exact_vortex_field(g, k, c));
  return u;
}

/// p-energy of (z/|z|)^kappa on the annulus r < |z| < R:
/// 2 pi |kappa|^p (R^{2-p} - r^{2-p}) / (2 - p), and 2 pi kappa^2 log(R/r) at p = 2.
inline double oracle_vortex_energy(int kappa, double p, double r, double R) {
  if (!(r > 0.0 && R > r)) throw InvalidArgument("oracle_vortex_energy: need 0 < r < R");
  double k = std::pow(std::abs(kappa), p);
  if (kappa == 0) return 0.0;
  if (p == 2.0) return 2.0 * std::numbers::pi * k * std::log(R / r);
  return 2.0 * std::numbers::pi * k * (std::pow(R, 2.0 - p) - std::pow(r, 2.0 - p)) / (2.0 - p);
}

/// c(n, p) = integral over the unit (n-2)-ball of (1 - |y|^2)^{(2-p)/2},
/// with c(2, p) = 1. Computed in polar form with r = sin t, which makes the
/// integrand smooth: |S^{m-1}| * int_0^{pi/2} cos^{3-p} t sin^{m-1} t dt.
inline double c_np(int n, double p) {
  if (n < 2) throw InvalidArgument("c_np: n must be at least 2");
  if (!(p > 1.0 && p <= 2.0)) throw InvalidArgument("c_np: p must lie in (1, 2]");
  if (n > 6) throw Unsupported("c_np: n > 6 is not supported");
  if (n == 2) return 1.0;
  const int m = n - 2;
  const double sphere = 2.0 * std::pow(std::numbers::pi, 0.5 * m) / std::tgamma(0.5 * m);
  auto f = [&](double t) { return std::pow(std::cos(t), 3.0 - p) * std::pow(std::sin(t), m - 1); };
  double err = 0.0;
  double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      f, 0.0, 0.5 * std::numbers::pi, 20, 1e-14, &err);
  return sphere * v;
}

/// Volume of the unit m-ball.
inline double unit_ball_volume(int m) {
  return std::pow(std::numbers::pi, 0.5 * m) / std::tgamma(0.5 * m + 1.0);
}

// ---------------------------------------------------------------------------
// Densities

namespace detail {
inline void require_constrained(const S1Field& u, const char* what) {
  if (u.kind != FieldKind::constrained)
    throw InvalidArgument(std::string(what) + " expects a constrained field");
}

}  // namespace detail

/// r^{p-2} * integral of |du|^p over B_r(x).
inline double theta_p(const Grid2D& g, const S1Field& u, Vec2 x, double r, double p) {
  if (r < 5.0 * g.h() * (1.0 - 1e-12)) throw InvalidArgument("theta_p: radius below 5h");
  return std::pow(r, p - 2.0) * ball_integral(g, du_p_density(g, u, p), x, r);
}

struct DensityProfile {
  Vec2 center;
  std::vector<double> radii;
  std::vector<double> values;
  /// max over consecutive pairs of (theta_j - theta_{j+1})^+ / theta_{j+1}
  double max_violation = 0.0;
};

namespace detail {
inline double max_decrease(const std::vector<double>& v) {
  double worst = 0.0;
  for (std::size_t k = 0; k + 1 < v.size(); ++k)
    if (v[k + 1] > 0.0) worst = std::max(worst, (v[k] - v[k + 1]) / v[k + 1]);
  return worst;
}
}  // namespace detail

inline DensityProfile monotonicity_profile(const Grid2D& g, const S1Field& u, Vec2 x,
                                           const std::vector<double>& radii, double p) {
  if (radii.empty()) throw InvalidArgument("monotonicity_profile: no radii");
  for (std::size_t k = 1; k < radii.size(); ++k)
    if (!(radii[k] > radii[k - 1])) throw InvalidArgument("monotonicity_profile: radii must increase");
  CellDensity dens = du_p_density(g, u, p);
  DensityProfile out{x, radii, {}, 0.0};
  for (double r : radii) {
    if (r < 5.0 * g.h() * (1.0 - 1e-12)) throw InvalidArgument("monotonicity_profile: radius below 5h");
    out.values.push_back(std::pow(r, p - 2.0) * ball_integral(g, dens, x, r));
  }
  out.max_violation = detail::max_decrease(out.values);
  return out;
}

/// `count` radii from r0 to r1, geometrically spaced.
inline std::vector<double> geometric_radii(double r0, double r1, int count) {
  std::vector<double> r;
  for (int k = 0; k < count; ++k)
    r.push_back(r0 * std::pow(r1 / r0, count == 1 ? 0.0 : static_cast<double>(k) / (count - 1)));
  return r;
}

struct PohozaevResult {
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;  ///< |lhs - rhs|
  double relative() const { return rhs != 0.0 ? residual / std::abs(rhs) : residual; }
};

/// Annulus balance around a:
///   int_{r1}^{r2} mu(D_r(a)) dr  versus
///   int_{A(r1,r2)} |z-a| (|du|^p - p |du|^{p-2} |du(nu)|^2) dz,
/// nu the outward radial unit vector. The left side uses a 32-point trapezoid
/// in r.
inline PohozaevResult pohozaev_residual(const Grid2D& g, const S1Field& u, Vec2 a, double r1,
                                        double r2, double p) {
  detail::require_constrained(u, "pohozaev_residual");
  if (!(r1 > 0.0 && r2 > r1)) throw InvalidArgument("pohozaev_residual: need 0 < r1 < r2");
  if (!g.contains_ball(a, r2)) throw DomainExit("pohozaev_residual: annulus leaves the domain");
  CellDensity mu = mu_density(g, u, p);
  constexpr int kRadii = 32;
  PohozaevResult out;
  double dr = (r2 - r1) / (kRadii - 1);
  for (int k = 0; k < kRadii; ++k) {
    double r = r1 + k * dr;
    double w = (k == 0 || k == kRadii - 1) ? 0.5 : 1.0;
    out.lhs += w * dr * ball_integral(g, mu, a, r);
  }
  // Right side, cell by cell.
  double s = 0.0;
  const double h = g.h();
  int ilo = static_cast<int>(std::floor((a.x - r2 - g.origin().x) / h)) - 1;
  int ihi = static_cast<int>(std::ceil((a.x + r2 - g.origin().x) / h)) + 1;
  int jlo = static_cast<int>(std::floor((a.y - r2 - g.origin().y) / h)) - 1;
  int jhi = static_cast<int>(std::ceil((a.y + r2 - g.origin().y) / h)) + 1;
  for (int jj = jlo; jj <= jhi; ++jj)
    for (int ii = ilo; ii <= ihi; ++ii) {
      int i = g.wrap_x(ii), j = g.wrap_y(jj);
      if (i < 0 || j < 0 || i >= g.cells_x() || j >= g.cells_y() || !g.cell_active(i, j)) continue;
      Vec2 d{g.origin().x + (ii + 0.5) * h - a.x, g.origin().y + (jj + 0.5) * h - a.y};
      double rho = norm(d);
      if (rho <= r1 || rho > r2) continue;
      double s2 = cell_gradient_sq(g, u, i, j);
      if (s2 == 0.0) continue;
      Vec2 jc = cell_current(g, u, i, j);
      double radial = dot(jc, d) / rho;
      s += rho * (std::pow(s2, 0.5 * p) - p * std::pow(s2, 0.5 * p - 1.0) * radial * radial);
    }
  out.rhs = s * h * h;
  out.residual = std::abs(out.lhs - out.rhs);
  return out;
}

/// Smooth tensor-product bump cos^2(pi t / 2) on |t| < 1, per axis.
struct BumpField {
  Vec2 center;
  double radius;
  Vec2 direction;

  double profile(double t) const {
    return std::abs(t) < 1.0 ? std::pow(std::cos(0.5 * std::numbers::pi * t), 2) : 0.0;
  }
  double dprofile(double t) const {
    return std::abs(t) < 1.0 ? -0.5 * std::numbers::pi * std::sin(std::numbers::pi * t) : 0.0;
  }
};

struct StationarityOptions {
  /// Bump centers; empty means a 3 x 3 array spread over the domain.
  std::vector<Vec2> centers;
  /// Bump half-width; zero means a quarter of the domain width.
  double radius = 0.0;
};

/// max over test fields X of |int |du|^p div X - p |du|^{p-2} <du^T du, grad X>|
/// divided by (sup|X| E_p(u)). Test fields are bumps at the option centers in
/// the two coordinate directions.
inline double stationarity_residual(const Grid2D& g, const S1Field& u, double p,
                                    StationarityOptions opt = {}) {
  detail::require_constrained(u, "stationarity_residual");
  const double h = g.h();
  const double width = g.periodic() ? g.nx() * h
                       : g.topology() == Topology::disk ? 2.0 * g.disk_radius()
                                                        : (g.nx() - 1) * h;
  Vec2 mid = g.topology() == Topology::disk ? g.disk_center()
             : g.periodic()                 ? Vec2{0.5 * g.nx() * h, 0.5 * g.ny() * h}
                                            : g.node_pos(0, 0) + 0.5 * Vec2{(g.nx() - 1) * h, (g.ny() - 1) * h};
  if (opt.radius <= 0.0) opt.radius = 0.25 * width * (g.topology() == Topology::disk ? 0.7 : 1.0);
  if (opt.centers.empty()) {
    double off = g.topology() == Topology::disk ? 0.3 * width : 0.25 * width;
    for (int b = -1; b <= 1; ++b)
      for (int a = -1; a <= 1; ++a) opt.centers.push_back(mid + Vec2{a * off, b * off});
  }
  EnergyParams ep;
  ep.p = p;
  const double energy = p_energy(g, u, ep);
  if (energy == 0.0) return 0.0;

  // Per-cell |du|^2, the tensor du^T du and the cell center.
  struct CellData {
    Vec2 x;
    double s, mxx, myy, mxy;
  };
  std::vector<CellData> cells;
  cells.reserve(g.cell_count());
  for (int j = 0; j < g.cells_y(); ++j)
    for (int i = 0; i < g.cells_x(); ++i) {
      if (!g.cell_active(i, j)) continue;
      auto c = g.cell_corners(i, j);
      const auto& v = u.values;
      double ab = wrapped_phase_difference(v[c[0]], v[c[1]]) / h;
      double at = wrapped_phase_difference(v[c[3]], v[c[2]]) / h;
      double al = wrapped_phase_difference(v[c[0]], v[c[3]]) / h;
      double ar = wrapped_phase_difference(v[c[1]], v[c[2]]) / h;
      double mxx = 0.5 * (ab * ab + at * at), myy = 0.5 * (al * al + ar * ar);
      double mxy = 0.25 * (ab + at) * (al + ar);
      cells.push_back({g.cell_center(i, j), mxx + myy, mxx, myy, mxy});
    }

  double worst = 0.0;
  for (Vec2 c : opt.centers)
    for (Vec2 dir : {Vec2{1.0, 0.0}, Vec2{0.0, 1.0}}) {
      BumpField X{c, opt.radius, dir};
      double integral = 0.0;
      for (const auto& cd : cells) {
        Vec2 d = g.displacement(c, cd.x);
        double tx = d.x / X.radius, ty = d.y / X.radius;
        double bx = X.profile(tx), by = X.profile(ty);
        if (bx == 0.0 || by == 0.0 || cd.s == 0.0) continue;
        // grad of the scalar bump
        double gx = X.dprofile(tx) / X.radius * by;
        double gy = bx * X.dprofile(ty) / X.radius;
        // X = b * dir, so dX^k/dx_a = dir_k * grad_a b.
        double divX = dir.x * gx + dir.y * gy;
        // <M, grad X> = sum_{a,k} M_{ak} d_a X^k
        double contraction = cd.mxx * gx * dir.x + cd.mxy * gx * dir.y + cd.mxy * gy * dir.x +
                             cd.myy * gy * dir.y;
        double sp = std::pow(cd.s, 0.5 * p);
        integral += sp * divX - p * (sp / cd.s) * contraction;
      }
      integral *= h * h;
      worst = std::max(worst, std::abs(integral) / energy);
    }
  return worst;
}

// ---------------------------------------------------------------------------
// Quantization

struct QuantizationEntry {
  Vec2 position;
  int winding = 0;
  double mu = 0.0;               ///< mu(D_{r_ref}(a))
  double predicted = 0.0;        ///< 2 pi kappa^2
  double distance_2pi_z = 0.0;   ///< distance of mu to 2 pi Z
  double distance_predicted = 0.0;
  double exact_vortex_mu = 0.0;  ///< 2 pi |kappa|^p r_ref^{2-p}
};

struct QuantizationReport {
  double r_ref = 0.0;
  double p = 0.0;
  std::vector<QuantizationEntry> entries;
};

/// A quarter of the smallest vortex separation. Distance to the domain
/// boundary counts through the mirror image (twice the distance).
inline double reference_radius(const Grid2D& g, const VortexSet& vs) {
  double sep = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < vs.size(); ++a) {
    for (std::size_t b = a + 1; b < vs.size(); ++b)
      sep = std::min(sep, norm(g.displacement(vs.vortices[a].position, vs.vortices[b].position)));
    if (g.topology() == Topology::disk)
      sep = std::min(sep, 2.0 * (g.disk_radius() - norm(vs.vortices[a].position - g.disk_center())));
  }
  if (!std::isfinite(sep)) sep = g.extent();
  return 0.25 * sep;
}

inline QuantizationReport quantization_report(const Grid2D& g, const S1Field& u, double p,
                                              const VortexSet& vs, double r_ref) {
  detail::require_constrained(u, "quantization_report");
  QuantizationReport rep{r_ref, p, {}};
  if (vs.empty()) return rep;
  for (std::size_t a = 0; a < vs.size(); ++a)
    for (std::size_t b = a + 1; b < vs.size(); ++b)
      if (norm(g.displacement(vs.vortices[a].position, vs.vortices[b].position)) < 2.0 * r_ref)
        throw InvalidArgument("quantization_report: reference balls overlap");
  CellDensity mu = mu_density(g, u, p);
  const double two_pi = 2.0 * std::numbers::pi;
  for (const auto& v : vs.vortices) {
    QuantizationEntry e;
    e.position = v.position;
    e.winding = v.winding;
    e.mu = ball_integral(g, mu, v.position, r_ref);
    e.predicted = two_pi * v.winding * v.winding;
    e.distance_2pi_z = std::abs(e.mu - two_pi * std::round(e.mu / two_pi));
    e.distance_predicted = std::abs(e.mu - e.predicted);
    e.exact_vortex_mu = two_pi * std::pow(std::abs(v.winding), p) * std::pow(r_ref, 2.0 - p);
    rep.entries.push_back(e);
  }
  return rep;
}

/// sup_{B_r(x)} |du|^p * r^2 / int_{B_2r(x)} |du|^p. No vortex may sit in B_2r(x).
inline double gradient_bound_ratio(const Grid2D& g, const S1Field& u, Vec2 x, double r, double p,
                                   const VortexSet& vortices = {}) {
  for (const auto& v : vortices.vortices)
    if (norm(g.displacement(x, v.position)) <= 2.0 * r)
      throw InvalidArgument("gradient_bound_ratio: vortex inside B_2r(x)");
  CellDensity d = du_p_density(g, u, p);
  double sup = 0.0;
  for_each_cell_in_ball(g, x, r, [&](std::size_t c, Vec2) { sup = std::max(sup, d.values[c]); });
  double mass = ball_integral(g, d, x, 2.0 * r);
  if (mass == 0.0) return 0.0;
  return sup * r * r / mass;
}

}  // namespace pharmonic
