#pragma once

// Discrete domains, node/edge/cell fields and the discrete exterior calculus
// used by every other module: forward differences, wrapped-phase currents,
// plaquette windings, vortex detection and ball quadrature.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pharmonic/error.hpp"
#include "pharmonic/parallel.hpp"
#include "pharmonic/vec2.hpp"

namespace pharmonic {

enum class Topology { torus, rectangle, disk };
enum class NodeRole : std::uint8_t { interior, boundary, exterior };
enum class FieldKind { relaxed, constrained };

inline const char* to_string(Topology t) {
  switch (t) {
    case Topology::torus: return "torus";
    case Topology::rectangle: return "rectangle";
    case Topology::disk: return "disk";
  }
  return "?";
}

inline const char* to_string(FieldKind k) {
  return k == FieldKind::relaxed ? "relaxed" : "constrained";
}

/// Uniform square lattice. Nodes (i, j) sit at origin + h * (i, j).
/// Cell (i, j) is the plaquette with lower-left corner (i, j); on the torus
/// every index wraps, otherwise cells run over [0, nx-1) x [0, ny-1).
class Grid2D {
 public:
  /// Periodic unit-cell torus [0, length)^2 with n nodes per side.
  static Grid2D torus(int n, double length = 1.0) {
    return torus(n, n, length / n);
  }

  static Grid2D torus(int nx, int ny, double h) {
    Grid2D g(nx, ny, h, {0.0, 0.0}, Topology::torus);
    std::fill(g.roles_.begin(), g.roles_.end(), NodeRole::interior);
    g.finish();
    return g;
  }

  /// Closed rectangle; perimeter nodes are boundary, the rest interior.
  static Grid2D rectangle(int nx, int ny, double h, Vec2 origin) {
    Grid2D g(nx, ny, h, origin, Topology::rectangle);
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        bool edge = i == 0 || j == 0 || i == nx - 1 || j == ny - 1;
        g.roles_[g.index(i, j)] = edge ? NodeRole::boundary : NodeRole::interior;
      }
    g.finish();
    return g;
  }

  /// Square of side `side` centered at `center`, with `cells` cells per side.
  /// Nodes sit at cell corners, so the center is a node iff `cells` is even.
  static Grid2D centered_square(int cells, double side, Vec2 center = {}) {
    double h = side / cells;
    return rectangle(cells + 1, cells + 1, h,
                     {center.x - 0.5 * side, center.y - 0.5 * side});
  }

  /// Masked disk of the given radius. The lattice is placed so that `center`
  /// is a cell center (never a node). Nodes with |x - c| <= R are interior;
  /// their non-interior 4-neighbors are boundary; everything else exterior.
  static Grid2D disk(double radius, double h, Vec2 center = {}) {
    if (!(radius > 0.0)) throw InvalidArgument("disk radius must be positive");
    int half = static_cast<int>(std::ceil(radius / h)) + 2;
    int n = 2 * half;
    Vec2 origin{center.x - (half - 0.5) * h, center.y - (half - 0.5) * h};
    Grid2D g(n, n, h, origin, Topology::disk);
    g.disk_center_ = center;
    g.disk_radius_ = radius;
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        g.roles_[g.index(i, j)] = norm(g.node_pos(i, j) - center) <= radius
                                      ? NodeRole::interior
                                      : NodeRole::exterior;
    std::vector<NodeRole> roles = g.roles_;
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        if (roles[g.index(i, j)] != NodeRole::exterior) continue;
        bool touches = (i > 0 && roles[g.index(i - 1, j)] == NodeRole::interior) ||
                       (i + 1 < n && roles[g.index(i + 1, j)] == NodeRole::interior) ||
                       (j > 0 && roles[g.index(i, j - 1)] == NodeRole::interior) ||
                       (j + 1 < n && roles[g.index(i, j + 1)] == NodeRole::interior);
        if (touches) g.roles_[g.index(i, j)] = NodeRole::boundary;
      }
    g.finish();
    return g;
  }

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double h() const { return h_; }
  Vec2 origin() const { return origin_; }
  Topology topology() const { return topology_; }
  bool periodic() const { return topology_ == Topology::torus; }
  std::size_t node_count() const { return roles_.size(); }
  Vec2 disk_center() const { return disk_center_; }
  double disk_radius() const { return disk_radius_; }

  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(j) * nx_ + i;
  }
  int wrap_x(int i) const { return periodic() ? (i % nx_ + nx_) % nx_ : i; }
  int wrap_y(int j) const { return periodic() ? (j % ny_ + ny_) % ny_ : j; }

  Vec2 node_pos(int i, int j) const { return {origin_.x + i * h_, origin_.y + j * h_}; }
  NodeRole role(int i, int j) const { return roles_[index(i, j)]; }
  NodeRole role(std::size_t k) const { return roles_[k]; }
  bool active(std::size_t k) const { return roles_[k] != NodeRole::exterior; }
  bool free(std::size_t k) const { return roles_[k] == NodeRole::interior; }

  int cells_x() const { return periodic() ? nx_ : nx_ - 1; }
  int cells_y() const { return periodic() ? ny_ : ny_ - 1; }
  std::size_t cell_count() const {
    return static_cast<std::size_t>(cells_x()) * cells_y();
  }
  std::size_t cell_index(int i, int j) const {
    return static_cast<std::size_t>(j) * cells_x() + i;
  }
  Vec2 cell_center(int i, int j) const {
    return {origin_.x + (i + 0.5) * h_, origin_.y + (j + 0.5) * h_};
  }
  bool cell_active(int i, int j) const { return cell_active_[cell_index(i, j)]; }

  /// Corners of cell (i, j), counterclockwise from the lower-left.
  std::array<std::size_t, 4> cell_corners(int i, int j) const {
    int i1 = wrap_x(i + 1), j1 = wrap_y(j + 1);
    return {index(i, j), index(i1, j), index(i1, j1), index(i, j1)};
  }

  /// Horizontal edge (i,j)->(i+1,j) exists.
  bool edge_x(int i, int j) const {
    if (!periodic() && i + 1 >= nx_) return false;
    return active(index(i, j)) && active(index(wrap_x(i + 1), j));
  }
  /// Vertical edge (i,j)->(i,j+1) exists.
  bool edge_y(int i, int j) const {
    if (!periodic() && j + 1 >= ny_) return false;
    return active(index(i, j)) && active(index(i, wrap_y(j + 1)));
  }

  /// Displacement from `from` to `to`, using the minimal image on the torus.
  Vec2 displacement(Vec2 from, Vec2 to) const {
    Vec2 d = to - from;
    if (periodic()) {
      double lx = nx_ * h_, ly = ny_ * h_;
      d.x -= lx * std::round(d.x / lx);
      d.y -= ly * std::round(d.y / ly);
    }
    return d;
  }

  /// Whether the closed ball B_r(x) lies inside the domain.
  bool contains_ball(Vec2 x, double r) const {
    switch (topology_) {
      case Topology::torus:
        return r < 0.5 * std::min(nx_, ny_) * h_;
      case Topology::rectangle: {
        Vec2 hi = node_pos(nx_ - 1, ny_ - 1);
        return x.x - r >= origin_.x && x.y - r >= origin_.y && x.x + r <= hi.x &&
               x.y + r <= hi.y;
      }
      case Topology::disk:
        return norm(x - disk_center_) + r <= disk_radius_;
    }
    return false;
  }

  /// Upper bound on |x - y| for x, y in the domain.
  double extent() const {
    return periodic() ? 0.5 * std::hypot(nx_ * h_, ny_ * h_)
                      : std::hypot((nx_ - 1) * h_, (ny_ - 1) * h_);
  }

  bool same_shape(const Grid2D& o) const {
    return nx_ == o.nx_ && ny_ == o.ny_ && h_ == o.h_ && topology_ == o.topology_ &&
           origin_ == o.origin_ && roles_ == o.roles_;
  }

 private:
  Grid2D(int nx, int ny, double h, Vec2 origin, Topology t)
      : nx_(nx), ny_(ny), h_(h), origin_(origin), topology_(t),
        roles_(static_cast<std::size_t>(nx) * ny, NodeRole::exterior) {
    if (nx < 8 || ny < 8) throw InvalidArgument("grid needs at least 8 nodes per side");
    if (!(h > 0.0)) throw InvalidArgument("grid spacing must be positive");
  }

  void finish() {
    cell_active_.assign(cell_count(), 0);
    for (int j = 0; j < cells_y(); ++j)
      for (int i = 0; i < cells_x(); ++i) {
        auto c = cell_corners(i, j);
        bool ok = std::all_of(c.begin(), c.end(), [&](std::size_t k) { return active(k); });
        cell_active_[cell_index(i, j)] = ok ? 1 : 0;
      }
  }

  int nx_, ny_;
  double h_;
  Vec2 origin_;
  Topology topology_;
  std::vector<NodeRole> roles_;
  std::vector<std::uint8_t> cell_active_;
  Vec2 disk_center_{};
  double disk_radius_ = 0.0;
};

/// Node-centered real function.
struct ScalarField {
  std::vector<double> values;
};

/// Cell-centered density (one value per plaquette).
struct CellDensity {
  std::vector<double> values;
};

/// Two real components per node; `constrained` fields are unit-norm.
struct S1Field {
  std::vector<Vec2> values;
  FieldKind kind = FieldKind::relaxed;
};

/// Edge-based 1-form. ax[index(i,j)] lives on (i,j)->(i+1,j),
/// ay[index(i,j)] on (i,j)->(i,j+1). Entries of missing edges are zero.
struct OneForm2D {
  std::vector<double> ax;
  std::vector<double> ay;
};

struct Vortex {
  Vec2 position;
  int winding = 0;
  double cluster_radius = 0.0;
};

struct VortexSet {
  std::vector<Vortex> vortices;
  std::vector<std::string> warnings;

  int total_winding() const {
    int s = 0;
    for (const auto& v : vortices) s += v.winding;
    return s;
  }
  std::size_t size() const { return vortices.size(); }
  bool empty() const { return vortices.empty(); }
};

namespace detail {
inline void check_shape(const Grid2D& g, std::size_t n, const char* what) {
  if (n != g.node_count())
    throw ShapeMismatch(std::string(what) + ": field size does not match grid");
}
}  // namespace detail

/// arg(conj(a) * b) in (-pi, pi].
inline double wrapped_phase_difference(Vec2 a, Vec2 b) {
  return std::atan2(cross(a, b), dot(a, b));
}

/// Forward-difference exterior derivative of a node function.
inline OneForm2D grad_scalar(const Grid2D& g, const ScalarField& f) {
  detail::check_shape(g, f.values.size(), "grad_scalar");
  OneForm2D out{std::vector<double>(g.node_count(), 0.0),
                std::vector<double>(g.node_count(), 0.0)};
  const double inv_h = 1.0 / g.h();
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      std::size_t k = g.index(i, j);
      if (g.edge_x(i, j)) out.ax[k] = (f.values[g.index(g.wrap_x(i + 1), j)] - f.values[k]) * inv_h;
      if (g.edge_y(i, j)) out.ay[k] = (f.values[g.index(i, g.wrap_y(j + 1))] - f.values[k]) * inv_h;
    }
  return out;
}

/// Plaquette circulation of a 1-form divided by the cell area (discrete curl).
inline double plaquette_curl(const Grid2D& g, const OneForm2D& a, int i, int j) {
  int i1 = g.wrap_x(i + 1), j1 = g.wrap_y(j + 1);
  double circ = a.ax[g.index(i, j)] + a.ay[g.index(i1, j)] - a.ax[g.index(i, j1)] -
                a.ay[g.index(i, j)];
  return circ / g.h();
}

/// Value of the current on the edge a -> b for the given field kind.
inline double edge_current(Vec2 a, Vec2 b, FieldKind kind, double inv_h) {
  return kind == FieldKind::constrained ? wrapped_phase_difference(a, b) * inv_h
                                        : cross(a, b) * inv_h;
}

/// Discrete current ju = u^1 du^2 - u^2 du^1.
/// Constrained fields use the wrapped phase difference, relaxed fields the
/// midpoint product Im(conj(u_a) u_b) / h.
inline OneForm2D current(const Grid2D& g, const S1Field& u) {
  detail::check_shape(g, u.values.size(), "current");
  OneForm2D out{std::vector<double>(g.node_count(), 0.0),
                std::vector<double>(g.node_count(), 0.0)};
  const double inv_h = 1.0 / g.h();
  auto check = [&](Vec2 v) {
    if (u.kind == FieldKind::relaxed && norm(v) < 1e-8)
      throw DegenerateModulus("current: relaxed field modulus below 1e-8 on an edge endpoint");
  };
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      std::size_t k = g.index(i, j);
      Vec2 a = u.values[k];
      if (g.edge_x(i, j)) {
        Vec2 b = u.values[g.index(g.wrap_x(i + 1), j)];
        check(a), check(b);
        out.ax[k] = edge_current(a, b, u.kind, inv_h);
      }
      if (g.edge_y(i, j)) {
        Vec2 b = u.values[g.index(i, g.wrap_y(j + 1))];
        check(a), check(b);
        out.ay[k] = edge_current(a, b, u.kind, inv_h);
      }
    }
  return out;
}

/// Winding of u around plaquette (i, j): (1/2pi) times the sum of the four
/// wrapped phase differences, counterclockwise.
inline int winding(const Grid2D& g, const S1Field& u, int i, int j) {
  auto c = g.cell_corners(i, j);
  double total = 0.0;
  for (int e = 0; e < 4; ++e)
    total += wrapped_phase_difference(u.values[c[e]], u.values[c[(e + 1) % 4]]);
  return static_cast<int>(std::lround(total / (2.0 * std::numbers::pi)));
}

/// Per-cell winding numbers (zero on inactive cells).
inline std::vector<int> winding_map(const Grid2D& g, const S1Field& u) {
  detail::check_shape(g, u.values.size(), "winding_map");
  std::vector<int> w(g.cell_count(), 0);
  for (int j = 0; j < g.cells_y(); ++j)
    for (int i = 0; i < g.cells_x(); ++i)
      if (g.cell_active(i, j)) w[g.cell_index(i, j)] = winding(g, u, i, j);
  return w;
}

/// Closed lattice loop given as node indices; the last node connects back to
/// the first.
struct Contour {
  std::vector<std::size_t> nodes;
};

/// Degree of u along a closed lattice loop.
inline int boundary_degree(const S1Field& u, const Contour& c) {
  if (c.nodes.size() < 3) throw InvalidArgument("contour needs at least 3 nodes");
  double total = 0.0;
  for (std::size_t k = 0; k < c.nodes.size(); ++k)
    total += wrapped_phase_difference(u.values[c.nodes[k]],
                                      u.values[c.nodes[(k + 1) % c.nodes.size()]]);
  return static_cast<int>(std::lround(total / (2.0 * std::numbers::pi)));
}

/// Counterclockwise loop of lattice nodes around the cells (i0..i1) x (j0..j1),
/// bounds inclusive.
inline Contour box_contour(const Grid2D& g, int i0, int j0, int i1, int j1) {
  Contour c;
  for (int i = i0; i <= i1 + 1; ++i) c.nodes.push_back(g.index(g.wrap_x(i), g.wrap_y(j0)));
  for (int j = j0 + 1; j <= j1 + 1; ++j) c.nodes.push_back(g.index(g.wrap_x(i1 + 1), g.wrap_y(j)));
  for (int i = i1; i >= i0; --i) c.nodes.push_back(g.index(g.wrap_x(i), g.wrap_y(j1 + 1)));
  for (int j = j1; j > j0; --j) c.nodes.push_back(g.index(g.wrap_x(i0), g.wrap_y(j)));
  return c;
}

/// Outer boundary loop of the active-cell region of a non-periodic grid,
/// traced counterclockwise. At pinch corners the walk turns right first so the
/// loop hugs the region.
inline Contour outer_contour(const Grid2D& g) {
  if (g.periodic()) throw Unsupported("outer_contour: torus has no boundary");
  auto active = [&](int i, int j) {
    return i >= 0 && j >= 0 && i < g.cells_x() && j < g.cells_y() && g.cell_active(i, j);
  };
  // Directed boundary edges keep the active cell on their left.
  // Direction codes: 0 = +x, 1 = +y, 2 = -x, 3 = -y.
  constexpr int dx[4] = {1, 0, -1, 0};
  constexpr int dy[4] = {0, 1, 0, -1};
  auto is_boundary_edge = [&](int i, int j, int d) {
    switch (d) {
      case 0: return active(i, j) && !active(i, j - 1);
      case 1: return active(i - 1, j) && !active(i, j);
      case 2: return active(i - 1, j - 1) && !active(i - 1, j);
      default: return active(i, j - 1) && !active(i - 1, j - 1);
    }
  };
  int si = -1, sj = -1;
  for (int j = 0; j < g.cells_y() && si < 0; ++j)
    for (int i = 0; i < g.cells_x(); ++i)
      if (g.cell_active(i, j)) { si = i; sj = j; break; }
  if (si < 0) throw InvalidArgument("outer_contour: grid has no active cells");
  Contour c;
  int i = si, j = sj, d = 0;
  const std::size_t limit = 4 * g.node_count();
  do {
    c.nodes.push_back(g.index(i, j));
    i += dx[d];
    j += dy[d];
    int next = -1;
    for (int turn : {3, 0, 1}) {
      int nd = (d + turn) % 4;
      if (is_boundary_edge(i, j, nd)) { next = nd; break; }
    }
    if (next < 0) throw InvalidArgument("outer_contour: boundary walk got stuck");
    d = next;
    if (c.nodes.size() > limit) throw InvalidArgument("outer_contour: walk did not close");
  } while (!(i == si && j == sj && d == 0));
  return c;
}

/// Visits active cells whose centers lie in the closed ball B_r(x), calling
/// fn(cell_index, displacement_from_x).
template <class Fn>
void for_each_cell_in_ball(const Grid2D& g, Vec2 x, double r, Fn&& fn) {
  const double h = g.h();
  int ilo = static_cast<int>(std::floor((x.x - r - g.origin().x) / h - 0.5)) - 1;
  int ihi = static_cast<int>(std::ceil((x.x + r - g.origin().x) / h - 0.5)) + 1;
  int jlo = static_cast<int>(std::floor((x.y - r - g.origin().y) / h - 0.5)) - 1;
  int jhi = static_cast<int>(std::ceil((x.y + r - g.origin().y) / h - 0.5)) + 1;
  if (!g.periodic()) {
    ilo = std::max(ilo, 0), jlo = std::max(jlo, 0);
    ihi = std::min(ihi, g.cells_x() - 1), jhi = std::min(jhi, g.cells_y() - 1);
  }
  const double r2 = r * r;
  for (int jj = jlo; jj <= jhi; ++jj)
    for (int ii = ilo; ii <= ihi; ++ii) {
      Vec2 d{g.origin().x + (ii + 0.5) * h - x.x, g.origin().y + (jj + 0.5) * h - x.y};
      if (d.x * d.x + d.y * d.y > r2) continue;
      int ci = g.wrap_x(ii), cj = g.wrap_y(jj);
      if (!g.cell_active(ci, cj)) continue;
      fn(g.cell_index(ci, cj), d);
    }
}

/// h^2 * sum of f over active cells whose centers lie in B_r(x).
inline double ball_integral(const Grid2D& g, const CellDensity& f, Vec2 x, double r) {
  if (f.values.size() != g.cell_count())
    throw ShapeMismatch("ball_integral: density size does not match grid cells");
  if (!(r > 0.0) || !g.contains_ball(x, r))
    throw DomainExit("ball_integral: ball leaves the domain");
  double s = 0.0;
  for_each_cell_in_ball(g, x, r, [&](std::size_t c, Vec2) { s += f.values[c]; });
  return s * g.h() * g.h();
}

/// Sum of h^2 f over all active cells.
inline double total_integral(const Grid2D& g, const CellDensity& f) {
  double s = 0.0;
  for (int j = 0; j < g.cells_y(); ++j)
    for (int i = 0; i < g.cells_x(); ++i)
      if (g.cell_active(i, j)) s += f.values[g.cell_index(i, j)];
  return s * g.h() * g.h();
}

/// Groups nonzero-winding plaquettes into vortices. Plaquettes within
/// `cluster_radius` of each other share a cluster (single linkage); a cluster's
/// winding is the sum over its plaquettes and its position the |winding|-
/// weighted centroid. Clusters whose centroids end up closer than the radius
/// are merged with a warning; net-zero clusters are dropped.
inline VortexSet detect_vortices(const Grid2D& g, const S1Field& u, double cluster_radius) {
  detail::check_shape(g, u.values.size(), "detect_vortices");
  struct Hit {
    Vec2 pos;
    int w;
  };
  std::vector<Hit> hits;
  for (int j = 0; j < g.cells_y(); ++j)
    for (int i = 0; i < g.cells_x(); ++i)
      if (g.cell_active(i, j))
        if (int w = winding(g, u, i, j); w != 0) hits.push_back({g.cell_center(i, j), w});

  // Union-find over plaquettes.
  std::vector<std::size_t> parent(hits.size());
  for (std::size_t k = 0; k < parent.size(); ++k) parent[k] = k;
  auto find = [&](std::size_t k) {
    while (parent[k] != k) k = parent[k] = parent[parent[k]];
    return k;
  };
  auto unite = [&](std::size_t a, std::size_t b) {
    a = find(a), b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  };
  // Plaquettes link only when adjacent (diagonals included); separate
  // clusters closer than cluster_radius are merged below with a warning.
  const double link = std::min(cluster_radius, 1.5 * g.h());
  for (std::size_t a = 0; a < hits.size(); ++a)
    for (std::size_t b = a + 1; b < hits.size(); ++b)
      if (norm(g.displacement(hits[a].pos, hits[b].pos)) <= link) unite(a, b);

  struct Cluster {
    Vec2 anchor, offset_sum;
    double weight = 0;
    int winding = 0;
  };
  std::vector<Cluster> clusters;
  std::vector<long> slot(hits.size(), -1);
  for (std::size_t k = 0; k < hits.size(); ++k) {
    std::size_t r = find(k);
    if (slot[r] < 0) {
      slot[r] = static_cast<long>(clusters.size());
      clusters.push_back({hits[r].pos, {}, 0.0, 0});
    }
    Cluster& c = clusters[slot[r]];
    double wt = std::abs(hits[k].w);
    c.offset_sum += wt * g.displacement(c.anchor, hits[k].pos);
    c.weight += wt;
    c.winding += hits[k].w;
  }

  VortexSet out;
  std::vector<Vortex> found;
  for (const auto& c : clusters)
    found.push_back({c.anchor + c.offset_sum / c.weight, c.winding, cluster_radius});

  bool merged = true;
  while (merged) {
    merged = false;
    for (std::size_t a = 0; a < found.size() && !merged; ++a)
      for (std::size_t b = a + 1; b < found.size() && !merged; ++b)
        if (norm(g.displacement(found[a].position, found[b].position)) <= cluster_radius) {
          out.warnings.push_back("merged vortex clusters closer than the cluster radius");
          Vec2 mid = found[a].position + 0.5 * g.displacement(found[a].position, found[b].position);
          found[a] = {mid, found[a].winding + found[b].winding, cluster_radius};
          found.erase(found.begin() + static_cast<long>(b));
          merged = true;
        }
  }
  for (const auto& v : found)
    if (v.winding != 0) out.vortices.push_back(v);
  return out;
}

/// Nodewise product of two fields (complex multiplication).
inline S1Field multiply(const S1Field& a, const S1Field& b) {
  if (a.values.size() != b.values.size()) throw ShapeMismatch("multiply: size mismatch");
  S1Field out{std::vector<Vec2>(a.values.size()),
              a.kind == FieldKind::constrained && b.kind == FieldKind::constrained
                  ? FieldKind::constrained
                  : FieldKind::relaxed};
  for (std::size_t k = 0; k < a.values.size(); ++k) out.values[k] = cmul(a.values[k], b.values[k]);
  return out;
}

}  // namespace pharmonic
