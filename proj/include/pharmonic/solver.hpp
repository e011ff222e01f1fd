#pragma once

// Energy minimization for relaxed (Ginzburg-Landau) and constrained (phase)
// fields: Barzilai-Borwein gradient descent with Armijo backtracking, plus
// continuation in the degeneracy regularizer and in p.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "pharmonic/energy.hpp"
#include "pharmonic/error.hpp"
#include "pharmonic/lattice.hpp"

namespace pharmonic {

enum class BoundaryKind { dirichlet, periodic };

struct Stopping {
  int max_iterations = 20000;
  /// Stop once the gradient norm falls below this fraction of its initial value.
  double rel_tolerance = 1e-4;
  /// When positive, replaces the initial gradient norm as the reference.
  double reference_gradient = 0.0;
  /// Jacobi-preconditioned steps.
  bool precondition = true;
};

struct SolveConfig {
  /// Dirichlet data is the boundary-node trace of the initial field.
  BoundaryKind boundary = BoundaryKind::dirichlet;
  Stopping stopping;
  /// Exponents for continuation sweeps, increasing toward 2.
  std::vector<double> p_schedule{1.5, 1.7, 1.9};
  /// Degeneracy-regularizer stages inside every p stage, decreasing.
  std::vector<double> delta_schedule{1e-1, 1e-2, 1e-3};
  /// Penalty scale; unset means eps = h.
  std::optional<double> eps_penalty;
  double delta_N = 0.25;
  std::uint64_t seed = 0;
  int threads = 1;
  /// Armijo sufficient-decrease constant.
  double armijo = 1e-4;

  void validate() const {
    if (stopping.max_iterations <= 0) throw InvalidArgument("max_iterations must be positive");
    if (!(stopping.rel_tolerance > 0.0)) throw InvalidArgument("rel_tolerance must be positive");
    if (p_schedule.empty()) throw InvalidArgument("p schedule is empty");
    for (std::size_t k = 0; k < p_schedule.size(); ++k) {
      if (!(p_schedule[k] > 1.0 && p_schedule[k] <= 2.0))
        throw InvalidArgument("p must lie in (1, 2]");
      if (k > 0 && !(p_schedule[k] > p_schedule[k - 1]))
        throw InvalidArgument("p schedule must increase toward 2");
    }
    for (std::size_t k = 0; k < delta_schedule.size(); ++k) {
      if (!(delta_schedule[k] >= 0.0)) throw InvalidArgument("delta_reg must be nonnegative");
      if (k > 0 && !(delta_schedule[k] < delta_schedule[k - 1]))
        throw InvalidArgument("delta_reg schedule must decrease");
    }
    if (eps_penalty && !(*eps_penalty > 0.0)) throw InvalidArgument("eps must be positive");
    if (threads < 1) throw InvalidArgument("threads must be at least 1");
  }
};

struct StageSummary {
  double p = 0.0;
  double delta_reg = 0.0;
  double eps_penalty = 0.0;
  int iterations = 0;
  double initial_energy = 0.0;
  double final_energy = 0.0;
  double initial_gradient_norm = 0.0;
  double final_gradient_norm = 0.0;
  bool converged = false;
};

struct SolveReport {
  double final_energy = 0.0;
  double gradient_norm = 0.0;
  double initial_gradient_norm = 0.0;
  int iterations = 0;
  int backtracks = 0;
  bool converged = false;
  /// "converged", "max-iterations" or "stalled".
  std::string status;
  std::vector<StageSummary> stages;
  std::vector<double> energy_history;
  double wall_seconds = 0.0;
};

struct SolveResult {
  S1Field field;
  SolveReport report;
};

namespace detail {

inline double inner(double a, double b) { return a * b; }
inline double inner(Vec2 a, Vec2 b) { return dot(a, b); }
inline double magnitude(double a) { return std::abs(a); }
inline double magnitude(Vec2 a) { return norm(a); }

/// Monotone, diagonally preconditioned Barzilai-Borwein descent on the free
/// entries of x. `eval(x, g, d)` returns the energy, writes the gradient into g
/// and, when d is non-null, a positive curvature estimate per entry. Accepted
/// steps satisfy the Armijo condition, so the energy never increases.
template <class T, class Eval>
SolveReport bb_descent(std::vector<T>& x, const std::vector<std::uint8_t>& free_mask, Eval&& eval,
                       const Stopping& stop, double armijo, double h, double initial_step,
                       bool precondition, double max_step = 0.5) {
  auto t0 = std::chrono::steady_clock::now();
  SolveReport rep;
  const std::size_t n = x.size();
  std::vector<T> g, gt, xt(n), z(n);
  std::vector<double> d, dt;
  std::vector<double>* dptr = precondition ? &d : nullptr;
  std::vector<double>* dtptr = precondition ? &dt : nullptr;
  auto mask = [&](std::vector<T>& v) {
    for (std::size_t k = 0; k < n; ++k)
      if (!free_mask[k]) v[k] = T{};
  };
  auto sq = [&](const std::vector<T>& v) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += inner(v[k], v[k]);
    return s;
  };
  auto check = [](double e) {
    if (std::isnan(e)) throw Divergence("energy evaluated to NaN");
  };
  // z = D^{-1} g, returns g . z
  auto direction = [&](const std::vector<double>* dd) {
    double gz = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      double scale = (dd && (*dd)[k] > 0.0) ? 1.0 / (*dd)[k] : 1.0;
      z[k] = free_mask[k] ? scale * g[k] : T{};
      gz += inner(g[k], z[k]);
    }
    return gz;
  };

  double E = eval(x, g, dptr);
  check(E);
  mask(g);
  double gg = sq(g);
  const double g0 = stop.reference_gradient > 0.0 ? stop.reference_gradient * h : std::sqrt(gg);
  rep.initial_gradient_norm = std::sqrt(gg) / h;
  rep.energy_history.push_back(E);
  double gz = direction(dptr);
  double zmax = 0.0;
  for (const auto& v : z) zmax = std::max(zmax, magnitude(v));
  double alpha = zmax > 0.0 ? initial_step / zmax : 1.0;
  rep.status = "max-iterations";
  int it = 0;
  for (; it < stop.max_iterations; ++it) {
    if (std::sqrt(gg) <= stop.rel_tolerance * g0) {
      rep.converged = true;
      rep.status = "converged";
      break;
    }
    double Et = 0.0;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      for (std::size_t k = 0; k < n; ++k) xt[k] = free_mask[k] ? x[k] - alpha * z[k] : x[k];
      Et = eval(xt, gt, dtptr);
      check(Et);
      // Once the predicted decrease drops below rounding in E, plain
      // non-increase is accepted; Armijo would only shrink the step.
      double predicted = armijo * alpha * gz;
      if (Et <= E - predicted || (predicted <= 1e-13 * std::abs(E) && Et <= E)) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
      ++rep.backtracks;
    }
    if (!accepted) {
      rep.status = "stalled";
      break;
    }
    mask(gt);
    // BB quantities in the metric of the new preconditioner.
    double sDs = 0.0, sy = 0.0, yDy = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (!free_mask[k]) continue;
      T s = xt[k] - x[k];
      T y = gt[k] - g[k];
      double dk = (precondition && dt[k] > 0.0) ? dt[k] : 1.0;
      sDs += dk * inner(s, s), sy += inner(s, y), yDy += inner(y, y) / dk;
    }
    std::swap(x, xt);
    std::swap(g, gt);
    if (precondition) std::swap(d, dt);
    E = Et;
    gg = sq(g);
    gz = direction(dptr);
    rep.energy_history.push_back(E);
    if (sy > 0.0) {
      alpha = (it % 2 == 0) ? sDs / sy : sy / yDy;
    } else {
      alpha *= 2.0;
    }
    // Trust cap: no entry moves by more than max_step in one trial.
    double zm = 0.0;
    for (std::size_t k = 0; k < n; ++k) zm = std::max(zm, magnitude(z[k]));
    if (zm > 0.0) alpha = std::min(alpha, max_step / zm);
  }
  if (!rep.converged && std::sqrt(gg) <= stop.rel_tolerance * g0) {
    rep.converged = true;
    rep.status = "converged";
  }
  rep.iterations = it;
  rep.final_energy = E;
  rep.gradient_norm = std::sqrt(gg) / h;
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

inline std::vector<std::uint8_t> free_nodes(const Grid2D& g, BoundaryKind b) {
  if (b == BoundaryKind::periodic && !g.periodic())
    throw InvalidArgument("periodic boundary requires torus topology");
  if (b == BoundaryKind::dirichlet && g.periodic())
    throw InvalidArgument("Dirichlet boundary conflicts with torus topology");
  std::vector<std::uint8_t> m(g.node_count(), 0);
  for (std::size_t k = 0; k < m.size(); ++k) m[k] = g.free(k) ? 1 : 0;
  return m;
}

}  // namespace detail

/// Minimizes the GL energy (relaxed input) or the phase energy of exp(i theta)
/// (constrained input) from u0 for one parameter set. Boundary nodes keep
/// their initial values bit for bit.
inline SolveResult minimize(const Grid2D& g, const S1Field& u0, const EnergyParams& params,
                            const SolveConfig& config) {
  detail::check_shape(g, u0.values.size(), "minimize");
  params.validate();
  config.validate();
  for (const Vec2& v : u0.values)
    if (!std::isfinite(v.x) || !std::isfinite(v.y)) throw InvalidArgument("minimize: u0 not finite");
  auto mask = detail::free_nodes(g, config.boundary);
  SolveResult out;

  if (u0.kind == FieldKind::relaxed) {
    RelaxedEnergy energy(g, params, config.threads);
    std::vector<Vec2> x = u0.values;
    out.report = detail::bb_descent(
        x, mask,
        [&](const std::vector<Vec2>& v, std::vector<Vec2>& grad, std::vector<double>* diag) {
          return energy.evaluate(v, &grad, diag);
        },
        config.stopping, config.armijo, g.h(), 1e-2, config.stopping.precondition);
    out.field = S1Field{std::move(x), FieldKind::relaxed};
  } else {
    PhaseEnergy energy(g, params, config.threads);
    std::vector<double> theta(g.node_count());
    for (std::size_t k = 0; k < theta.size(); ++k)
      theta[k] = std::atan2(u0.values[k].y, u0.values[k].x);
    out.report = detail::bb_descent(
        theta, mask,
        [&](const std::vector<double>& v, std::vector<double>& grad, std::vector<double>* diag) {
          return energy.evaluate(v, &grad, diag);
        },
        config.stopping, config.armijo, g.h(), 1e-2, config.stopping.precondition);
    out.field = S1Field{std::vector<Vec2>(g.node_count()), FieldKind::constrained};
    for (std::size_t k = 0; k < theta.size(); ++k)
      out.field.values[k] = mask[k] ? polar(theta[k]) : u0.values[k];
  }
  StageSummary s;
  s.p = params.p;
  s.delta_reg = params.delta_reg;
  s.eps_penalty = params.eps_penalty;
  s.iterations = out.report.iterations;
  s.initial_energy = out.report.energy_history.front();
  s.final_energy = out.report.final_energy;
  s.initial_gradient_norm = out.report.initial_gradient_norm;
  s.final_gradient_norm = out.report.gradient_norm;
  s.converged = out.report.converged;
  out.report.stages.push_back(s);
  return out;
}

/// Runs the degeneracy-regularizer schedule at fixed p, warm starting each
/// stage; the last stage is reported as the result.
inline SolveResult minimize_regularized(const Grid2D& g, const S1Field& u0, double p,
                                        const SolveConfig& config) {
  SolveResult cur{u0, {}};
  SolveReport total;
  std::vector<double> deltas = config.delta_schedule;
  if (deltas.empty()) deltas.push_back(0.0);
  SolveConfig cfg = config;
  for (double d : deltas) {
    EnergyParams params;
    params.p = p;
    params.delta_reg = d;
    params.delta_N = config.delta_N;
    params.eps_penalty = config.eps_penalty.value_or(g.h());
    SolveResult r = minimize(g, cur.field, params, cfg);
    if (cfg.stopping.reference_gradient <= 0.0)
      cfg.stopping.reference_gradient = r.report.initial_gradient_norm;
    total.iterations += r.report.iterations;
    total.backtracks += r.report.backtracks;
    total.wall_seconds += r.report.wall_seconds;
    total.stages.insert(total.stages.end(), r.report.stages.begin(), r.report.stages.end());
    total.energy_history.insert(total.energy_history.end(), r.report.energy_history.begin(),
                                r.report.energy_history.end());
    total.final_energy = r.report.final_energy;
    total.gradient_norm = r.report.gradient_norm;
    if (total.initial_gradient_norm == 0.0) total.initial_gradient_norm = r.report.initial_gradient_norm;
    total.converged = r.report.converged;
    total.status = r.report.status;
    cur.field = std::move(r.field);
  }
  cur.report = std::move(total);
  return cur;
}

struct SweepStage {
  double p = 0.0;
  S1Field field;
  SolveReport report;
};

/// Continuation in p: each stage is warm-started from the previous output.
/// `on_stage` (optional) sees every finished stage, e.g. for checkpointing.
inline std::vector<SweepStage> continuation_sweep(
    const Grid2D& g, const S1Field& u0, const SolveConfig& config,
    const std::function<void(std::size_t, const SweepStage&)>& on_stage = {}) {
  config.validate();
  std::vector<SweepStage> out;
  S1Field cur = u0;
  for (std::size_t s = 0; s < config.p_schedule.size(); ++s) {
    double p = config.p_schedule[s];
    try {
      SolveResult r = minimize_regularized(g, cur, p, config);
      cur = r.field;
      out.push_back({p, std::move(r.field), std::move(r.report)});
    } catch (const Error& e) {
      throw StageFailure(s, e.what());
    }
    if (on_stage) on_stage(s, out.back());
  }
  return out;
}

struct Projection {
  S1Field field;
  /// 1 where |u| < 0.1 (vortex core), excluded from pointwise diagnostics.
  std::vector<std::uint8_t> core;
  std::size_t core_count = 0;
};

/// u / |u| nodewise. Fails when more than 5% of active nodes fall below 0.1.
inline Projection project_unit(const Grid2D& g, const S1Field& u, double threshold = 0.1,
                               double max_fraction = 0.05) {
  detail::check_shape(g, u.values.size(), "project_unit");
  Projection out{S1Field{u.values, FieldKind::constrained},
                 std::vector<std::uint8_t>(u.values.size(), 0), 0};
  std::size_t active = 0;
  for (std::size_t k = 0; k < u.values.size(); ++k) {
    if (!g.active(k)) continue;
    ++active;
    double m = norm(u.values[k]);
    if (m < threshold) {
      out.core[k] = 1;
      ++out.core_count;
    }
    out.field.values[k] = m > 0.0 ? u.values[k] / m : Vec2{1.0, 0.0};
  }
  if (static_cast<double>(out.core_count) > max_fraction * static_cast<double>(active))
    throw ProjectionUnreliable("project_unit: more than 5% of nodes below the modulus threshold");
  return out;
}

/// Boundary data (x/|x|)^k around `center`.
inline Vec2 degree_trace(Vec2 x, Vec2 center, int k) {
  Vec2 d = x - center;
  return polar(k * std::atan2(d.y, d.x));
}

/// Initial field for a degree-k disk: k unit vortices equally spaced on a ring
/// of radius `ring` (a single vortex sits at the center), times the harmonic
/// phase correction that restores the boundary trace (x/|x|)^k exactly on the
/// circle. For vortices at rho*exp(2 pi i m / k) the product is
/// (z^k - rho^k)(1 - rho^k z^k) up to normalization. Boundary nodes get the
/// trace itself.
inline S1Field disk_initial_field(const Grid2D& g, int k, double ring = 0.5) {
  S1Field u{std::vector<Vec2>(g.node_count(), Vec2{1.0, 0.0}), FieldKind::relaxed};
  const Vec2 c = g.disk_center();
  const double R = g.topology() == Topology::disk ? g.disk_radius() : 1.0;
  const int m = std::abs(k);
  const double rho = m <= 1 ? 0.0 : ring / R;
  const double rho_m = std::pow(rho, m);
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      std::size_t idx = g.index(i, j);
      if (!g.active(idx)) continue;
      Vec2 x = g.node_pos(i, j);
      if (g.role(idx) == NodeRole::boundary || m == 0) {
        u.values[idx] = degree_trace(x, c, k);
        continue;
      }
      Vec2 z = (x - c) / R;
      Vec2 zm{1.0, 0.0};
      for (int t = 0; t < m; ++t) zm = cmul(zm, z);
      Vec2 v = cmul(zm - Vec2{rho_m, 0.0}, Vec2{1.0, 0.0} - rho_m * zm);
      double n = norm(v);
      v = n > 0.0 ? v / n : Vec2{1.0, 0.0};
      u.values[idx] = k < 0 ? conj(v) : v;
    }
  return u;
}

/// Bilinear transfer of `from` (on grid `gf`) onto the free nodes of grid `gt`.
/// Nodes whose surrounding source cell has an inactive corner, and all
/// non-free nodes, keep the value of `base`.
inline S1Field transfer(const Grid2D& gf, const S1Field& from, const Grid2D& gt, const S1Field& base) {
  detail::check_shape(gf, from.values.size(), "transfer");
  detail::check_shape(gt, base.values.size(), "transfer");
  S1Field out = base;
  out.kind = from.kind;
  const double hf = gf.h();
  for (int j = 0; j < gt.ny(); ++j)
    for (int i = 0; i < gt.nx(); ++i) {
      std::size_t k = gt.index(i, j);
      if (!gt.free(k)) continue;
      Vec2 x = gt.node_pos(i, j);
      double fx = (x.x - gf.origin().x) / hf, fy = (x.y - gf.origin().y) / hf;
      int ci = static_cast<int>(std::floor(fx)), cj = static_cast<int>(std::floor(fy));
      double tx = fx - ci, ty = fy - cj;
      if (gf.periodic()) {
        ci = gf.wrap_x(ci), cj = gf.wrap_y(cj);
      } else if (ci < 0 || cj < 0 || ci + 1 >= gf.nx() || cj + 1 >= gf.ny()) {
        continue;
      }
      std::size_t a = gf.index(ci, cj), b = gf.index(gf.wrap_x(ci + 1), cj);
      std::size_t c = gf.index(ci, gf.wrap_y(cj + 1)), d = gf.index(gf.wrap_x(ci + 1), gf.wrap_y(cj + 1));
      if (!gf.active(a) || !gf.active(b) || !gf.active(c) || !gf.active(d)) continue;
      out.values[k] = (1 - tx) * (1 - ty) * from.values[a] + tx * (1 - ty) * from.values[b] +
                      (1 - tx) * ty * from.values[c] + tx * ty * from.values[d];
    }
  return out;
}

/// Degree-k disk sweep with nested-grid initialization: the first p stage is
/// solved on grids of spacing 4h and 2h, each result transferred to the next
/// finer grid as its starting field. `levels` counts the coarse grids.
inline std::vector<SweepStage> disk_sweep(
    const Grid2D& g, int k, const SolveConfig& config, int levels = 2, double ring = 0.5,
    const std::function<void(std::size_t, const SweepStage&)>& on_stage = {}) {
  if (g.topology() != Topology::disk) throw InvalidArgument("disk_sweep requires a disk grid");
  config.validate();
  S1Field u0 = disk_initial_field(g, k, ring);
  if (levels > 0) {
    std::vector<Grid2D> chain{g};
    for (int l = 0; l < levels; ++l) {
      double hc = chain.back().h() * 2.0;
      if (g.disk_radius() / hc < 8.0) break;
      chain.push_back(Grid2D::disk(g.disk_radius(), hc, g.disk_center()));
    }
    if (chain.size() > 1) {
      SolveConfig coarse = config;
      coarse.p_schedule = {config.p_schedule.front()};
      S1Field cur = disk_initial_field(chain.back(), k, ring);
      for (std::size_t l = chain.size() - 1; l >= 1; --l) {
        SolveConfig c = coarse;
        c.eps_penalty = config.eps_penalty.value_or(chain[l].h());
        cur = minimize_regularized(chain[l], cur, coarse.p_schedule.front(), c).field;
        const Grid2D& next = chain[l - 1];
        cur = transfer(chain[l], cur, next, disk_initial_field(next, k, ring));
      }
      u0 = std::move(cur);
    }
  }
  return continuation_sweep(g, u0, config, on_stage);
}

}  // namespace pharmonic
