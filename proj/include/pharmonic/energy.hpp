#pragma once

// Discrete p-energy, its degeneracy-regularized form, the generalized
// Ginzburg-Landau energy with a capped distance penalty, and the exact
// gradient of the discrete GL energy.
//
// Cell convention: |du|^2 on a plaquette is half the sum of the squared
// values on its four edges. Constrained fields use wrapped phase differences
// per edge, relaxed fields raw differences (u_b - u_a) / h.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "pharmonic/error.hpp"
#include "pharmonic/lattice.hpp"
#include "pharmonic/parallel.hpp"

namespace pharmonic {

struct EnergyParams {
  double p = 1.9;
  /// Penalty scale; +infinity switches the penalty off.
  double eps_penalty = std::numeric_limits<double>::infinity();
  /// Degeneracy regularizer: densities use (delta_reg^2 + |du|^2)^{p/2}.
  double delta_reg = 0.0;
  /// Tube radius of the penalty profile.
  double delta_N = 0.25;

  double penalty_weight() const {
    return std::isinf(eps_penalty) ? 0.0 : std::pow(eps_penalty, -p);
  }

  void validate() const {
    if (!(p > 1.0 && p <= 2.0)) throw InvalidArgument("p must lie in (1, 2]");
    if (!(eps_penalty > 0.0)) throw InvalidArgument("eps_penalty must be positive");
    if (!(delta_reg >= 0.0)) throw InvalidArgument("delta_reg must be nonnegative");
    if (!(delta_N > 0.0 && delta_N <= 0.25)) throw InvalidArgument("delta_N must lie in (0, 1/4]");
  }
};

/// lambda(t) = t on [0, a], 4a on [4a, inf), a = delta_N^2, joined by the
/// cubic Hermite segment matching value and slope at both ends. Its slope
/// (1 + 3s)(1 - s), s in [0, 1], is nonnegative, so lambda is monotone and C^1.
class PenaltyProfile {
 public:
  explicit PenaltyProfile(double delta_N) : a_(delta_N * delta_N) {}

  double lower() const { return a_; }
  double upper() const { return 4.0 * a_; }
  double cap() const { return 4.0 * a_; }

  double value(double t) const {
    if (t <= a_) return t;
    if (t >= 4.0 * a_) return 4.0 * a_;
    double s = (t - a_) / (3.0 * a_);
    // a + 3a * (s + s^2 - s^3)
    return a_ + 3.0 * a_ * s * (1.0 + s - s * s);
  }

  double derivative(double t) const {
    if (t <= a_) return 1.0;
    if (t >= 4.0 * a_) return 0.0;
    double s = (t - a_) / (3.0 * a_);
    return (1.0 + 3.0 * s) * (1.0 - s);
  }

 private:
  double a_;
};

namespace detail {

struct CellEdges {
  std::size_t bottom, top, left, right;  // node indices carrying ax/ay
  std::size_t c[4];                      // corners, counterclockwise
};

inline CellEdges cell_edges(const Grid2D& g, int i, int j) {
  auto c = g.cell_corners(i, j);
  return {c[0], c[3], c[0], c[1], {c[0], c[1], c[2], c[3]}};
}

inline double edge_sq(Vec2 a, Vec2 b, FieldKind kind) {
  if (kind == FieldKind::constrained) {
    double d = wrapped_phase_difference(a, b);
    return d * d;
  }
  return norm2(b - a);
}

}  // namespace detail

/// |du|^2 on cell (i, j).
inline double cell_gradient_sq(const Grid2D& g, const S1Field& u, int i, int j) {
  auto c = g.cell_corners(i, j);
  const auto& v = u.values;
  double s = detail::edge_sq(v[c[0]], v[c[1]], u.kind) + detail::edge_sq(v[c[3]], v[c[2]], u.kind) +
             detail::edge_sq(v[c[0]], v[c[3]], u.kind) + detail::edge_sq(v[c[1]], v[c[2]], u.kind);
  return 0.5 * s / (g.h() * g.h());
}

/// Cell-centered current (average of the two parallel edge currents) for a
/// constrained field; the direction-resolved part of du.
inline Vec2 cell_current(const Grid2D& g, const S1Field& u, int i, int j) {
  auto c = g.cell_corners(i, j);
  const auto& v = u.values;
  double jx = 0.5 * (wrapped_phase_difference(v[c[0]], v[c[1]]) +
                     wrapped_phase_difference(v[c[3]], v[c[2]]));
  double jy = 0.5 * (wrapped_phase_difference(v[c[0]], v[c[3]]) +
                     wrapped_phase_difference(v[c[1]], v[c[2]]));
  return Vec2{jx, jy} / g.h();
}

/// (delta_reg^2 + |du|^2)^{p/2} per active cell.
inline CellDensity energy_density(const Grid2D& g, const S1Field& u, const EnergyParams& params) {
  detail::check_shape(g, u.values.size(), "energy_density");
  CellDensity d{std::vector<double>(g.cell_count(), 0.0)};
  const double d2 = params.delta_reg * params.delta_reg;
  for (int j = 0; j < g.cells_y(); ++j)
    for (int i = 0; i < g.cells_x(); ++i)
      if (g.cell_active(i, j))
        d.values[g.cell_index(i, j)] = std::pow(d2 + cell_gradient_sq(g, u, i, j), 0.5 * params.p);
  return d;
}

/// |du|^p per active cell.
inline CellDensity du_p_density(const Grid2D& g, const S1Field& u, double p) {
  EnergyParams e;
  e.p = p;
  return energy_density(g, u, e);
}

/// Normalized energy measure density (2 - p)|du|^p.
inline CellDensity mu_density(const Grid2D& g, const S1Field& u, double p) {
  CellDensity d = du_p_density(g, u, p);
  for (double& v : d.values) v *= (2.0 - p);
  return d;
}

inline double p_energy(const Grid2D& g, const S1Field& u, const EnergyParams& params) {
  return total_integral(g, energy_density(g, u, params));
}

/// h^2 sum over active nodes of lambda((|u| - 1)^2), without the eps^{-p} factor.
inline double penalty_integral(const Grid2D& g, const S1Field& u, double delta_N) {
  PenaltyProfile lam(delta_N);
  double s = 0.0;
  for (std::size_t k = 0; k < g.node_count(); ++k)
    if (g.active(k)) {
      double r = norm(u.values[k]) - 1.0;
      s += lam.value(r * r);
    }
  return s * g.h() * g.h();
}

inline double gl_energy(const Grid2D& g, const S1Field& u, const EnergyParams& params) {
  double e = p_energy(g, u, params);
  double w = params.penalty_weight();
  return w == 0.0 ? e : e + w * penalty_integral(g, u, params.delta_N);
}

/// Fused energy/gradient evaluator for relaxed fields. Holds scratch buffers so
/// repeated solver evaluations do not reallocate. The gradient is gathered per
/// node, so results do not depend on the thread count.
class RelaxedEnergy {
 public:
  RelaxedEnergy(const Grid2D& g, EnergyParams params, int threads = 1)
      : g_(g), params_(params), lam_(params.delta_N), threads_(threads),
        cell_w_(g.cell_count(), 0.0), row_e_(static_cast<std::size_t>(g.ny()), 0.0) {
    params_.validate();
  }

  const EnergyParams& params() const { return params_; }

  /// Energy of `u`; writes dE/du into `grad` when non-null (zero at exterior
  /// nodes, filled at boundary nodes too so callers can mask).
  double evaluate(const std::vector<Vec2>& u, std::vector<Vec2>* grad,
                  std::vector<double>* diag = nullptr) {
    const Grid2D& g = g_;
    const double h = g.h(), inv_h = 1.0 / h, h2 = h * h;
    const double p = params_.p, d2 = params_.delta_reg * params_.delta_reg;
    const bool quadratic = p == 2.0;
    const double pw = params_.penalty_weight();
    bool degenerate = false;

    std::fill(row_e_.begin(), row_e_.end(), 0.0);
    parallel_rows(g.cells_y(), threads_, [&](int j) {
      double acc = 0.0;
      for (int i = 0; i < g.cells_x(); ++i) {
        std::size_t ci = g.cell_index(i, j);
        if (!g.cell_active(i, j)) {
          cell_w_[ci] = 0.0;
          continue;
        }
        auto c = g.cell_corners(i, j);
        double s = 0.5 * inv_h * inv_h *
                   (norm2(u[c[1]] - u[c[0]]) + norm2(u[c[2]] - u[c[3]]) +
                    norm2(u[c[3]] - u[c[0]]) + norm2(u[c[2]] - u[c[1]]));
        double base = d2 + s;
        if (quadratic) {
          acc += base;
          cell_w_[ci] = h2;
        } else {
          if (base == 0.0) {
            if (grad) degenerate = true;
            cell_w_[ci] = 0.0;
            continue;
          }
          double e = std::pow(base, 0.5 * p);
          acc += e;
          cell_w_[ci] = 0.5 * p * h2 * e / base;
        }
      }
      if (pw != 0.0)
        for (int i = 0; i < g.nx() && j < g.ny(); ++i) {
          std::size_t k = g.index(i, j);
          if (!g.active(k)) continue;
          double r = norm(u[k]) - 1.0;
          acc += pw * lam_.value(r * r);
        }
      row_e_[static_cast<std::size_t>(j)] = acc;
    });
    if (!g.periodic() && pw != 0.0) {
      // Node rows exceed cell rows by one on open grids.
      int j = g.ny() - 1;
      double acc = 0.0;
      for (int i = 0; i < g.nx(); ++i) {
        std::size_t k = g.index(i, j);
        if (!g.active(k)) continue;
        double r = norm(u[k]) - 1.0;
        acc += pw * lam_.value(r * r);
      }
      row_e_[static_cast<std::size_t>(j)] += acc;
    }
    if (degenerate)
      throw DegenerateCoefficient(
          "gl_gradient: zero-gradient cell with delta_reg = 0 and p < 2");
    double energy = ordered_sum(row_e_) * h2;
    if (!grad) return energy;

    grad->assign(g.node_count(), Vec2{});
    if (diag) diag->assign(g.node_count(), 0.0);
    auto w_of = [&](int i, int j) -> double {
      if (g.periodic()) return cell_w_[g.cell_index(g.wrap_x(i), g.wrap_y(j))];
      if (i < 0 || j < 0 || i >= g.cells_x() || j >= g.cells_y()) return 0.0;
      return cell_w_[g.cell_index(i, j)];
    };
    parallel_rows(g.ny(), threads_, [&](int j) {
      for (int i = 0; i < g.nx(); ++i) {
        std::size_t k = g.index(i, j);
        if (!g.active(k)) continue;
        Vec2 acc{};
        Vec2 uk = u[k];
        double wsum = 0.0;
        // Outgoing horizontal edge (i,j)->(i+1,j): cells (i,j) and (i,j-1).
        if (g.edge_x(i, j)) {
          double W = w_of(i, j) + w_of(i, j - 1);
          acc -= W * (u[g.index(g.wrap_x(i + 1), j)] - uk);
          wsum += W;
        }
        // Incoming horizontal edge (i-1,j)->(i,j).
        if ((g.periodic() || i > 0) && g.edge_x(g.wrap_x(i - 1), j)) {
          double W = w_of(i - 1, j) + w_of(i - 1, j - 1);
          acc += W * (uk - u[g.index(g.wrap_x(i - 1), j)]);
          wsum += W;
        }
        // Outgoing vertical edge (i,j)->(i,j+1): cells (i,j) and (i-1,j).
        if (g.edge_y(i, j)) {
          double W = w_of(i, j) + w_of(i - 1, j);
          acc -= W * (u[g.index(i, g.wrap_y(j + 1))] - uk);
          wsum += W;
        }
        // Incoming vertical edge (i,j-1)->(i,j).
        if ((g.periodic() || j > 0) && g.edge_y(i, g.wrap_y(j - 1))) {
          double W = w_of(i, j - 1) + w_of(i - 1, j - 1);
          acc += W * (uk - u[g.index(i, g.wrap_y(j - 1))]);
          wsum += W;
        }
        acc *= inv_h * inv_h;
        double curv = wsum * inv_h * inv_h;
        if (pw != 0.0) {
          double m = norm(uk);
          double r = m - 1.0;
          double dl = lam_.derivative(r * r);
          if (dl != 0.0 && m > 0.0) acc += (pw * h2 * dl * 2.0 * r / m) * uk;
          curv += 2.0 * pw * h2 * dl;
        }
        if (diag) (*diag)[k] = curv;
        (*grad)[k] = acc;
      }
    });
    return energy;
  }

 private:
  const Grid2D& g_;
  EnergyParams params_;
  PenaltyProfile lam_;
  int threads_;
  std::vector<double> cell_w_;
  std::vector<double> row_e_;
};

/// Exact gradient of the discrete GL energy of a relaxed field.
inline std::vector<Vec2> gl_gradient(const Grid2D& g, const S1Field& u, const EnergyParams& params) {
  detail::check_shape(g, u.values.size(), "gl_gradient");
  if (u.kind != FieldKind::relaxed) throw InvalidArgument("gl_gradient expects a relaxed field");
  if (params.p < 2.0 && params.delta_reg == 0.0) {
    for (int j = 0; j < g.cells_y(); ++j)
      for (int i = 0; i < g.cells_x(); ++i)
        if (g.cell_active(i, j) && cell_gradient_sq(g, u, i, j) == 0.0)
          throw DegenerateCoefficient("gl_gradient: zero-gradient cell with delta_reg = 0 and p < 2");
  }
  RelaxedEnergy e(g, params);
  std::vector<Vec2> grad;
  e.evaluate(u.values, &grad);
  return grad;
}

/// Energy of the constrained field exp(i theta) (wrapped phase differences)
/// and its gradient in theta. Used by the phase-parameterized solver.
class PhaseEnergy {
 public:
  PhaseEnergy(const Grid2D& g, EnergyParams params, int threads = 1)
      : g_(g), params_(params), threads_(threads), cell_w_(g.cell_count(), 0.0),
        row_e_(static_cast<std::size_t>(g.ny()), 0.0) {
    params_.validate();
  }

  double evaluate(const std::vector<double>& theta, std::vector<double>* grad,
                  std::vector<double>* diag = nullptr) {
    const Grid2D& g = g_;
    const double h = g.h(), inv_h = 1.0 / h, h2 = h * h;
    const double p = params_.p, d2 = params_.delta_reg * params_.delta_reg;
    auto wrap = [](double d) {
      constexpr double tau = 2.0 * std::numbers::pi;
      return d - tau * std::nearbyint(d / tau);
    };
    bool degenerate = false;
    std::fill(row_e_.begin(), row_e_.end(), 0.0);
    parallel_rows(g.cells_y(), threads_, [&](int j) {
      double acc = 0.0;
      for (int i = 0; i < g.cells_x(); ++i) {
        std::size_t ci = g.cell_index(i, j);
        cell_w_[ci] = 0.0;
        if (!g.cell_active(i, j)) continue;
        auto c = g.cell_corners(i, j);
        double a = wrap(theta[c[1]] - theta[c[0]]), b = wrap(theta[c[2]] - theta[c[3]]);
        double l = wrap(theta[c[3]] - theta[c[0]]), r = wrap(theta[c[2]] - theta[c[1]]);
        double base = d2 + 0.5 * inv_h * inv_h * (a * a + b * b + l * l + r * r);
        if (base == 0.0) {
          if (p < 2.0 && grad) degenerate = true;
          continue;
        }
        double e = p == 2.0 ? base : std::pow(base, 0.5 * p);
        acc += e;
        cell_w_[ci] = 0.5 * p * h2 * e / base;
      }
      row_e_[static_cast<std::size_t>(j)] = acc;
    });
    if (degenerate)
      throw DegenerateCoefficient("phase gradient: zero-gradient cell with delta_reg = 0 and p < 2");
    double energy = ordered_sum(row_e_) * h2;
    if (!grad) return energy;
    grad->assign(g.node_count(), 0.0);
    if (diag) diag->assign(g.node_count(), 0.0);
    auto w_of = [&](int i, int j) -> double {
      if (g.periodic()) return cell_w_[g.cell_index(g.wrap_x(i), g.wrap_y(j))];
      if (i < 0 || j < 0 || i >= g.cells_x() || j >= g.cells_y()) return 0.0;
      return cell_w_[g.cell_index(i, j)];
    };
    parallel_rows(g.ny(), threads_, [&](int j) {
      for (int i = 0; i < g.nx(); ++i) {
        std::size_t k = g.index(i, j);
        if (!g.active(k)) continue;
        double acc = 0.0, wsum = 0.0, tk = theta[k];
        if (g.edge_x(i, j)) {
          double W = w_of(i, j) + w_of(i, j - 1);
          acc -= W * wrap(theta[g.index(g.wrap_x(i + 1), j)] - tk);
          wsum += W;
        }
        if ((g.periodic() || i > 0) && g.edge_x(g.wrap_x(i - 1), j)) {
          double W = w_of(i - 1, j) + w_of(i - 1, j - 1);
          acc += W * wrap(tk - theta[g.index(g.wrap_x(i - 1), j)]);
          wsum += W;
        }
        if (g.edge_y(i, j)) {
          double W = w_of(i, j) + w_of(i - 1, j);
          acc -= W * wrap(theta[g.index(i, g.wrap_y(j + 1))] - tk);
          wsum += W;
        }
        if ((g.periodic() || j > 0) && g.edge_y(i, g.wrap_y(j - 1))) {
          double W = w_of(i, j - 1) + w_of(i - 1, j - 1);
          acc += W * wrap(tk - theta[g.index(i, g.wrap_y(j - 1))]);
          wsum += W;
        }
        if (diag) (*diag)[k] = wsum * inv_h * inv_h;
        (*grad)[k] = acc * inv_h * inv_h;
      }
    });
    return energy;
  }

 private:
  const Grid2D& g_;
  EnergyParams params_;
  int threads_;
  std::vector<double> cell_w_;
  std::vector<double> row_e_;
};

}  // namespace pharmonic
