#pragma once

// Named experiments. Each runner computes its results into plain structs,
// then `run_experiment` serializes them:
//   summary.json   every diagnostic, the normalized config, hash and version
//   profiles.csv   the experiment's main table (see README)
//   surface.csv    min-max energy surface (minmax-surface only)
//   mu_density.svg heatmap of the energy measure density
//   surface.svg    heatmap of the min-max surface (minmax-surface only)
//   failure.json   written instead of summary.json when the run fails

#include <filesystem>
#include <functional>
#include <ostream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "pharmonic/config.hpp"
#include "pharmonic/diagnostics.hpp"
#include "pharmonic/hodge.hpp"
#include "pharmonic/io.hpp"
#include "pharmonic/minmax.hpp"
#include "pharmonic/solver.hpp"
#include "pharmonic/svg.hpp"

namespace pharmonic {

using Json = nlohmann::ordered_json;

inline Json to_json(Vec2 v) { return Json::array({v.x, v.y}); }

/// Experiment-independent header of every JSON report.
inline Json report_header(const ExperimentConfig& c) {
  Json j;
  j["version"] = kVersion;
  j["config_hash"] = hex64(config_hash(c));
  j["experiment"] = c.experiment;
  Json cfg = Json::object();
  std::istringstream is(normalized(c));
  std::string line, section;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line.front() == '[') {
      section = line.substr(1, line.size() - 2);
      cfg[section] = Json::object();
      continue;
    }
    auto eq = line.find(" = ");
    cfg[section][line.substr(0, eq)] = line.substr(eq + 3);
  }
  j["config"] = cfg;
  return j;
}

inline SolveConfig solve_config(const ExperimentConfig& c) {
  SolveConfig s;
  s.boundary = c.boundary == "periodic" ? BoundaryKind::periodic : BoundaryKind::dirichlet;
  s.stopping.max_iterations = c.max_iterations;
  s.stopping.rel_tolerance = c.tolerance;
  s.p_schedule = c.p;
  s.delta_schedule = c.delta_reg;
  s.eps_penalty = c.eps;
  s.delta_N = c.delta_N;
  s.seed = c.seed;
  s.threads = c.threads;
  return s;
}

inline Json to_json(const SolveReport& r) {
  Json j;
  j["converged"] = r.converged;
  j["status"] = r.status;
  j["iterations"] = r.iterations;
  j["backtracks"] = r.backtracks;
  j["final_energy"] = r.final_energy;
  j["initial_gradient_norm"] = r.initial_gradient_norm;
  j["gradient_norm"] = r.gradient_norm;
  j["stages"] = Json::array();
  for (const auto& s : r.stages)
    j["stages"].push_back({{"p", s.p},
                           {"delta_reg", s.delta_reg},
                           {"eps", s.eps_penalty},
                           {"iterations", s.iterations},
                           {"initial_energy", s.initial_energy},
                           {"final_energy", s.final_energy},
                           {"initial_gradient_norm", s.initial_gradient_norm},
                           {"final_gradient_norm", s.final_gradient_norm},
                           {"converged", s.converged}});
  return j;
}

inline SolveReport report_from_json(const Json& j) {
  SolveReport r;
  r.converged = j.at("converged");
  r.status = j.at("status");
  r.iterations = j.at("iterations");
  r.backtracks = j.at("backtracks");
  r.final_energy = j.at("final_energy");
  r.initial_gradient_norm = j.at("initial_gradient_norm");
  r.gradient_norm = j.at("gradient_norm");
  for (const auto& s : j.at("stages")) {
    StageSummary t;
    t.p = s.at("p");
    t.delta_reg = s.at("delta_reg");
    t.eps_penalty = s.at("eps");
    t.iterations = s.at("iterations");
    t.initial_energy = s.at("initial_energy");
    t.final_energy = s.at("final_energy");
    t.initial_gradient_norm = s.at("initial_gradient_norm");
    t.final_gradient_norm = s.at("final_gradient_norm");
    t.converged = s.at("converged");
    r.stages.push_back(t);
  }
  return r;
}

/// Cell density as a heatmap; inactive cells stay blank.
inline Heatmap density_heatmap(const Grid2D& g, const CellDensity& d, std::string title) {
  Heatmap m{g.cells_x(), g.cells_y(), {}, std::move(title), true};
  m.values.resize(g.cell_count(), std::numeric_limits<double>::quiet_NaN());
  for (int j = 0; j < g.cells_y(); ++j)
    for (int i = 0; i < g.cells_x(); ++i)
      if (g.cell_active(i, j)) m.values[g.cell_index(i, j)] = d.values[g.cell_index(i, j)];
  return m;
}

// ---------------------------------------------------------------------------
// disk-sweep

struct VortexDiagnostics {
  Vec2 position;
  int winding = 0;
  double theta_5h = 0.0;
  /// (2-p) theta_p(u, a, r_ref) / (2 pi c(2,p)); the lower bound asks >= 0.85.
  double density_ratio = 0.0;
  DensityProfile profile;
  PohozaevResult pohozaev;
  /// Annulus inside the domain and free of other vortices.
  bool pohozaev_valid = false;
  QuantizationEntry quantization;
  /// 2 pi (1 - r_ref^{2-p}) + 0.15 * 2 pi
  double quantization_envelope = 0.0;
};

struct DiskStageDiagnostics {
  double p = 0.0;
  double energy = 0.0;         ///< E_p of the projected field
  double scaled_energy = 0.0;  ///< (2-p) E_p
  double modulus_min = 0.0;
  std::size_t core_nodes = 0;
  int boundary_degree = 0;
  int total_winding = 0;
  double r_ref = 0.0;
  double stationarity = 0.0;
  std::vector<VortexDiagnostics> vortices;
  std::vector<std::string> warnings;
};

inline DiskStageDiagnostics analyze_disk_stage(const Grid2D& g, const S1Field& field, double p,
                                               const ExperimentConfig& c) {
  const double h = g.h();
  const double two_pi = 2.0 * std::numbers::pi;
  DiskStageDiagnostics d;
  d.p = p;
  Projection pr = project_unit(g, field);
  const S1Field& u = pr.field;
  d.core_nodes = pr.core_count;
  d.modulus_min = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < field.values.size(); ++k)
    if (g.active(k)) d.modulus_min = std::min(d.modulus_min, norm(field.values[k]));
  EnergyParams ep;
  ep.p = p;
  d.energy = p_energy(g, u, ep);
  d.scaled_energy = (2.0 - p) * d.energy;
  d.boundary_degree = boundary_degree(u, outer_contour(g));
  VortexSet vs = detect_vortices(g, u, 4.0 * h);
  d.warnings = vs.warnings;
  d.total_winding = vs.total_winding();
  d.r_ref = reference_radius(g, vs);
  d.stationarity = stationarity_residual(g, u, p);
  if (vs.empty()) return d;
  QuantizationReport q = quantization_report(g, u, p, vs, d.r_ref);
  for (std::size_t a = 0; a < vs.size(); ++a) {
    const Vortex& v = vs.vortices[a];
    VortexDiagnostics vd;
    vd.position = v.position;
    vd.winding = v.winding;
    vd.theta_5h = theta_p(g, u, v.position, 5.0 * h, p);
    double r_theta = std::max(d.r_ref, 5.0 * h);
    vd.density_ratio = (2.0 - p) * theta_p(g, u, v.position, r_theta, p) / (two_pi * c_np(2, p));
    // Balls must stay inside the disk: clip the profile range per vortex.
    double room = g.disk_radius() - norm(v.position - g.disk_center());
    double rmax = std::min(c.profile_rmax, room);
    if (rmax > 5.0 * h)
      vd.profile = monotonicity_profile(g, u, v.position,
                                        geometric_radii(5.0 * h, rmax, c.profile_points), p);
    vd.pohozaev_valid = g.contains_ball(v.position, c.pohozaev_r2);
    for (std::size_t b = 0; b < vs.size(); ++b)
      if (b != a && norm(vs.vortices[b].position - v.position) <= c.pohozaev_r2 + 4.0 * h)
        vd.pohozaev_valid = false;
    if (g.contains_ball(v.position, c.pohozaev_r2))
      vd.pohozaev = pohozaev_residual(g, u, v.position, c.pohozaev_r1, c.pohozaev_r2, p);
    vd.quantization = q.entries[a];
    vd.quantization_envelope = two_pi * (1.0 - std::pow(d.r_ref, 2.0 - p)) + 0.15 * two_pi;
    d.vortices.push_back(std::move(vd));
  }
  return d;
}

inline Json to_json(const DiskStageDiagnostics& d) {
  Json j;
  j["p"] = d.p;
  j["energy"] = d.energy;
  j["scaled_energy"] = d.scaled_energy;
  j["modulus_min"] = d.modulus_min;
  j["core_nodes"] = d.core_nodes;
  j["boundary_degree"] = d.boundary_degree;
  j["vortex_count"] = d.vortices.size();
  j["total_winding"] = d.total_winding;
  j["r_ref"] = d.r_ref;
  j["stationarity_residual"] = d.stationarity;
  j["vortices"] = Json::array();
  for (const auto& v : d.vortices) {
    Json jv;
    jv["position"] = to_json(v.position);
    jv["winding"] = v.winding;
    jv["theta_5h"] = v.theta_5h;
    jv["density_ratio"] = v.density_ratio;
    jv["density_bound_ok"] = v.density_ratio >= 0.85;
    jv["monotonicity_violation"] = v.profile.max_violation;
    jv["profile_rmax"] = v.profile.radii.empty() ? 0.0 : v.profile.radii.back();
    jv["pohozaev"] = {{"lhs", v.pohozaev.lhs},
                      {"rhs", v.pohozaev.rhs},
                      {"relative_residual", v.pohozaev.relative()},
                      {"valid", v.pohozaev_valid}};
    jv["quantization"] = {{"mu", v.quantization.mu},
                          {"predicted", v.quantization.predicted},
                          {"distance_2pi_z", v.quantization.distance_2pi_z},
                          {"distance_predicted", v.quantization.distance_predicted},
                          {"exact_vortex_mu", v.quantization.exact_vortex_mu},
                          {"envelope", v.quantization_envelope},
                          {"within_envelope",
                           v.quantization.distance_predicted <= v.quantization_envelope}};
    j["vortices"].push_back(jv);
  }
  j["warnings"] = d.warnings;
  return j;
}

struct DiskSweepResult {
  Grid2D grid;
  std::vector<SweepStage> stages;
  std::vector<DiskStageDiagnostics> diagnostics;
  std::size_t resumed_stages = 0;
};

inline Grid2D disk_grid(const ExperimentConfig& c) { return Grid2D::disk(1.0, c.h()); }

/// Runs the sweep. With a checkpoint directory, finished stages are stored
/// there (snapshot plus solve report) and reused when the config hash and p
/// match, so an interrupted run resumes at the first missing stage.
inline DiskSweepResult run_disk_sweep(const ExperimentConfig& c,
                                      const std::filesystem::path& checkpoint_dir = {},
                                      std::ostream* log = nullptr) {
  namespace fs = std::filesystem;
  DiskSweepResult res{disk_grid(c), {}, {}, 0};
  const Grid2D& g = res.grid;
  SolveConfig sc = solve_config(c);
  const std::uint64_t hash = config_hash(c);
  auto ckpt = [&](std::size_t s) { return checkpoint_dir / ("stage_" + std::to_string(s) + ".ckpt"); };
  auto side = [&](std::size_t s) { return checkpoint_dir / ("stage_" + std::to_string(s) + ".json"); };

  if (!checkpoint_dir.empty()) {
    fs::create_directories(checkpoint_dir);
    for (std::size_t s = 0; s < c.p.size(); ++s) {
      if (!fs::exists(ckpt(s)) || !fs::exists(side(s))) break;
      try {
        Checkpoint cp = read_checkpoint(ckpt(s));
        const Snapshot& sn = cp.snapshot;
        if (cp.config_hash != hash || cp.stage != s || cp.p != c.p[s]) break;
        if (sn.nx != g.nx() || sn.ny != g.ny() || sn.h != g.h() || sn.topology != g.topology()) break;
        res.stages.push_back({c.p[s], std::move(cp.snapshot.field),
                              report_from_json(Json::parse(read_file(side(s))))});
      } catch (const Error&) {
        break;
      } catch (const Json::exception&) {
        break;
      }
    }
    res.resumed_stages = res.stages.size();
    if (log && res.resumed_stages)
      *log << "resumed " << res.resumed_stages << " stage(s) from " << checkpoint_dir << "\n";
  }

  const std::size_t offset = res.stages.size();
  auto on_stage = [&](std::size_t s, const SweepStage& st) {
    std::size_t idx = s + offset;
    if (log)
      *log << "stage " << idx << " p=" << st.p << " iterations=" << st.report.iterations
           << " converged=" << st.report.converged << "\n";
    if (!checkpoint_dir.empty()) {
      write_checkpoint(ckpt(idx), hash, static_cast<std::uint32_t>(idx), st.p, g, st.field);
      write_file_atomic(side(idx), to_json(st.report).dump(2) + "\n");
    }
  };
  if (offset < c.p.size()) {
    std::vector<SweepStage> more;
    try {
      if (offset == 0) {
        more = disk_sweep(g, c.k, sc, c.levels, c.ring, on_stage);
      } else {
        SolveConfig rest = sc;
        rest.p_schedule.assign(c.p.begin() + static_cast<std::ptrdiff_t>(offset), c.p.end());
        more = continuation_sweep(g, res.stages.back().field, rest, on_stage);
      }
    } catch (const StageFailure& e) {
      throw StageFailure(e.stage() + offset, e.what());
    }
    for (auto& st : more) res.stages.push_back(std::move(st));
  }
  for (const auto& st : res.stages) res.diagnostics.push_back(analyze_disk_stage(g, st.field, st.p, c));
  return res;
}

// ---------------------------------------------------------------------------
// torus-hodge

/// Vortex pair (+1 at (n/4, n/2), -1 half a period away) with a seeded
/// uniform phase perturbation of amplitude `perturbation` radians.
inline S1Field torus_initial_field(const Grid2D& g, const ExperimentConfig& c) {
  S1Field u = torus_vortex_pair(g, g.nx() / 4, g.ny() / 2);
  std::mt19937_64 rng(c.seed);
  for (auto& v : u.values) {
    double t = static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0, 1)
    v = cmul(v, polar(c.perturbation * (2.0 * t - 1.0)));
  }
  return u;
}

struct TorusHodgeStage {
  double p = 0.0;
  S1Field field;
  SolveReport report;
  std::size_t vortex_count = 0;
  int total_winding = 0;
  double initial_exact_norm = 0.0;  ///< ||d phi||_{L^q} of the starting field
};

struct TorusHodgeResult {
  Grid2D grid;
  std::vector<TorusHodgeStage> stages;
  ScalingTable table;
};

/// Independent solves (one per p) from the same perturbed pair, run
/// concurrently across `threads`.
inline TorusHodgeResult run_torus_hodge(const ExperimentConfig& c, std::ostream* log = nullptr) {
  TorusHodgeResult res{Grid2D::torus(c.n), {}, {}};
  const Grid2D& g = res.grid;
  S1Field u0 = torus_initial_field(g, c);
  SolveConfig sc = solve_config(c);
  sc.threads = 1;
  double init_exact = form_lq_norm(g, grad_scalar(g, hodge_decompose(g, current(g, u0)).phi), c.q);
  res.stages.resize(c.p.size());
  std::vector<std::string> errors(c.p.size());
  parallel_rows(static_cast<int>(c.p.size()), c.threads, [&](int s) {
    try {
      SolveResult r = minimize_regularized(g, u0, c.p[s], sc);
      VortexSet vs = detect_vortices(g, r.field, 2.0 * g.h());
      res.stages[s] = {c.p[s], std::move(r.field), std::move(r.report), vs.size(),
                       vs.total_winding(), init_exact};
    } catch (const Error& e) {
      errors[s] = e.what();
    }
  });
  for (std::size_t s = 0; s < errors.size(); ++s)
    if (!errors[s].empty()) throw StageFailure(s, errors[s]);
  if (log)
    for (const auto& st : res.stages)
      *log << "p=" << st.p << " iterations=" << st.report.iterations
           << " converged=" << st.report.converged << "\n";
  std::vector<ScalingInput> in;
  for (const auto& st : res.stages) in.push_back({st.p, current(g, st.field)});
  res.table = exact_part_scaling(g, in, c.q);
  return res;
}

// ---------------------------------------------------------------------------
// minmax-surface

struct MinmaxStage {
  double p = 0.0;
  FamilySurface surface;
  MeanZeroWitness witness;
  double scaled_max = 0.0;       ///< (2-p) max_y E
  double max_jump = 0.0;
  double jump_fraction = 0.0;    ///< max_jump / (max - min)
  double boundary_energy = 0.0;  ///< largest energy on the |y| = 1 ring
  double vortex_p_energy = 0.0;  ///< lattice p_energy of z/|z| on the square
};

struct MinmaxResult {
  Grid2D grid;
  std::vector<MinmaxStage> stages;
  double band = 0.0;  ///< max / min of scaled_max over p
};

inline Grid2D minmax_grid(const ExperimentConfig& c) { return Grid2D::centered_square(c.n, 1.0); }

inline MinmaxResult run_minmax(const ExperimentConfig& c) {
  MinmaxResult res{minmax_grid(c), {}, 0.0};
  const Grid2D& g = res.grid;
  DomainMap f = DomainMap::identity(g);
  YGrid yg{c.nr, c.ntheta, 0.0};
  double lo = INFINITY, hi = 0.0;
  for (double p : c.p) {
    EnergyParams ep;
    ep.p = p;
    ep.eps_penalty = c.eps.value_or(g.h());
    ep.delta_N = c.delta_N;
    MinmaxStage st;
    st.p = p;
    st.surface = family_energy_surface(g, f, yg, ep, c.threads);
    st.witness = mean_zero_witness(st.surface);
    st.scaled_max = (2.0 - p) * st.surface.max_energy;
    st.max_jump = surface_max_jump(st.surface);
    double range = st.surface.max_energy - st.surface.min_energy;
    st.jump_fraction = range > 0.0 ? st.max_jump / range : 0.0;
    for (int b = 0; b < yg.ntheta; ++b)
      st.boundary_energy = std::max(st.boundary_energy, st.surface.at(yg.nr - 1, b).energy);
    EnergyParams pe;
    pe.p = p;
    st.vortex_p_energy = p_energy(g, exact_vortex_field(g, 1, Vec2{}), pe);
    lo = std::min(lo, st.scaled_max), hi = std::max(hi, st.scaled_max);
    res.stages.push_back(std::move(st));
  }
  res.band = lo > 0.0 ? hi / lo : INFINITY;
  return res;
}

/// Nearest-sample raster of a polar surface on [-1, 1]^2.
inline Heatmap surface_heatmap(const FamilySurface& s, int pixels, std::string title) {
  Heatmap m{pixels, pixels, std::vector<double>(static_cast<std::size_t>(pixels) * pixels,
                                                std::numeric_limits<double>::quiet_NaN()),
            std::move(title), false};
  const auto& yg = s.grid;
  for (int j = 0; j < pixels; ++j)
    for (int i = 0; i < pixels; ++i) {
      Vec2 y{-1.0 + (i + 0.5) * 2.0 / pixels, -1.0 + (j + 0.5) * 2.0 / pixels};
      double r = norm(y);
      if (r > 1.0) continue;
      int a = static_cast<int>(std::lround(r * yg.nr)) - 1;
      double e;
      if (a < 0) {
        e = s.center.energy;
      } else {
        double t = std::atan2(y.y, y.x) - yg.angle_offset;
        int b = static_cast<int>(std::lround(t / (2.0 * std::numbers::pi) * yg.ntheta));
        b = ((b % yg.ntheta) + yg.ntheta) % yg.ntheta;
        e = s.at(std::min(a, yg.nr - 1), b).energy;
      }
      m.values[static_cast<std::size_t>(j) * pixels + i] = e;
    }
  return m;
}

// ---------------------------------------------------------------------------
// oracle-suite

struct OracleCheck {
  std::string name;
  double value = 0.0;
  double reference = 0.0;
  double error = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// Closed-form checks, no solver involved.
inline std::vector<OracleCheck> run_oracle_suite(const ExperimentConfig& c) {
  std::vector<OracleCheck> out;
  auto add = [&](std::string name, double v, double ref, double tol, bool relative) {
    double err = std::abs(v - ref);
    if (relative && ref != 0.0) err /= std::abs(ref);
    out.push_back({std::move(name), v, ref, err, tol, err <= tol});
  };
  auto ps = [](double p) { return detail::fmt_double(p); };

  // Exact vortex energy on the annulus 0.1 < |z| < 1.
  const double h = c.h();
  const int cells = 2 * static_cast<int>(std::ceil(1.0 / h)) + 65;
  Grid2D sq = Grid2D::centered_square(cells, cells * h);
  for (int kappa : {1, 2}) {
    S1Field u = exact_vortex_field(sq, kappa, Vec2{});
    for (double p : c.p) {
      CellDensity d = du_p_density(sq, u, p);
      double e = ball_integral(sq, d, Vec2{}, 1.0) - ball_integral(sq, d, Vec2{}, 0.1);
      add("vortex_energy k=" + std::to_string(kappa) + " p=" + ps(p), e,
          oracle_vortex_energy(kappa, p, 0.1, 1.0), 1e-2, true);
    }
  }

  // c(n, p).
  for (double p : {1.1, 1.5, 1.9, 2.0}) add("c(2," + ps(p) + ")", c_np(2, p), 1.0, 0.0, false);
  add("c(3,2)", c_np(3, 2.0), 2.0, 1e-8, false);
  add("c(4,2)", c_np(4, 2.0), std::numbers::pi, 1e-8, false);
  add("c(5,2)", c_np(5, 2.0), 4.0 * std::numbers::pi / 3.0, 1e-8, false);
  {
    const int N = 1000000;
    double s = 0.0;
    for (int i = 0; i < N; ++i) {
      double y = -1.0 + (i + 0.5) * 2.0 / N;
      s += std::pow(1.0 - y * y, 0.25);
    }
    add("c(3,1.5) vs midpoint", c_np(3, 1.5), s * 2.0 / N, 1e-6, false);
  }

  // Gradient check on random 16^2 relaxed fields.
  {
    Grid2D g = Grid2D::torus(16);
    std::mt19937_64 rng(c.seed);
    auto unif = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    for (double p : {1.3, 1.6, 1.9}) {
      S1Field u{std::vector<Vec2>(g.node_count()), FieldKind::relaxed};
      for (auto& v : u.values) v = (0.5 + unif()) * polar(2.0 * std::numbers::pi * unif());
      EnergyParams ep;
      ep.p = p;
      ep.eps_penalty = 0.5;
      ep.delta_reg = 0.05;
      std::vector<Vec2> grad = gl_gradient(g, u, ep);
      double worst = 0.0, scale = 0.0;
      for (const auto& v : grad) scale = std::max(scale, norm(v));
      const double step = 1e-6;
      for (std::size_t k = 0; k < u.values.size(); ++k)
        for (int comp = 0; comp < 2; ++comp) {
          S1Field a = u, b = u;
          (comp ? a.values[k].y : a.values[k].x) += step;
          (comp ? b.values[k].y : b.values[k].x) -= step;
          double fd = (gl_energy(g, a, ep) - gl_energy(g, b, ep)) / (2.0 * step);
          double an = comp ? grad[k].y : grad[k].x;
          worst = std::max(worst, std::abs(fd - an) / scale);
        }
      out.push_back({"gl_gradient fd p=" + ps(p), worst, 0.0, worst, 1e-5, worst <= 1e-5});
    }
  }

  // Diffuse measure on the torus.
  {
    Grid2D g = Grid2D::torus(128);
    for (const auto& r : diffuse_measure_experiment(g, {1.5, 1.7, 1.9}))
      add("diffuse_mass p=" + ps(r.p) + " m=" + std::to_string(r.m), r.mass, r.closed_form, 1e-12,
          true);
  }

  // v_y examples.
  add("v_y vortex |y|=1/2", norm(v_y_vortex(Vec2{0.5, 0.0}) - Vec2{-1.0, 0.0}), 0.0, 1e-15, false);
  add("v_y boundary constant", norm(v_y(Vec2{0.6, 0.8}, Vec2{0.3, -0.2}) - Vec2{0.6, 0.8}), 0.0,
      1e-15, false);
  return out;
}

// ---------------------------------------------------------------------------
// Driver

inline std::string error_type(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const StageFailure*>(&e)) return "stage_failure";
  if (dynamic_cast<const InvalidArgument*>(&e)) return "invalid_argument";
  if (dynamic_cast<const Divergence*>(&e)) return "divergence";
  if (dynamic_cast<const ProjectionUnreliable*>(&e)) return "projection_unreliable";
  if (dynamic_cast<const Error*>(&e)) return "error";
  return "internal";
}

inline Json failure_report(const ExperimentConfig& c, const std::exception& e) {
  Json j = report_header(c);
  j["status"] = "failed";
  j["error"] = {{"type", error_type(e)}, {"message", e.what()}};
  if (auto* s = dynamic_cast<const StageFailure*>(&e)) j["error"]["stage"] = s->stage();
  if (auto* s = dynamic_cast<const ConfigError*>(&e)) j["error"]["problems"] = s->problems();
  return j;
}

struct RunOutcome {
  int exit_code = 0;
  Json summary;
};

namespace detail {

inline void write_json(const std::filesystem::path& p, const Json& j) {
  write_file_atomic(p, j.dump(2) + "\n");
}

inline std::string csv_num(double v) { return fmt_double(v); }

inline Json disk_summary(const ExperimentConfig& c, const DiskSweepResult& r,
                         const std::filesystem::path& out) {
  Json j;
  j["grid"] = {{"topology", "disk"}, {"radius", 1.0}, {"h", r.grid.h()}, {"nodes", r.grid.node_count()}};
  j["degree"] = c.k;
  j["stages"] = Json::array();
  std::ostringstream prof;
  prof << "p,vortex,x,y,r,theta\n";
  bool counts_ok = true;
  for (std::size_t s = 0; s < r.stages.size(); ++s) {
    const auto& d = r.diagnostics[s];
    Json js;
    js["solve"] = to_json(r.stages[s].report);
    js["diagnostics"] = to_json(d);
    j["stages"].push_back(js);
    counts_ok = counts_ok && d.vortices.size() == static_cast<std::size_t>(std::abs(c.k)) &&
                d.boundary_degree == c.k && d.total_winding == c.k;
    for (std::size_t a = 0; a < d.vortices.size(); ++a) {
      const auto& v = d.vortices[a];
      for (std::size_t t = 0; t < v.profile.radii.size(); ++t)
        prof << csv_num(d.p) << ',' << a << ',' << csv_num(v.position.x) << ','
             << csv_num(v.position.y) << ',' << csv_num(v.profile.radii[t]) << ','
             << csv_num(v.profile.values[t]) << '\n';
    }
  }
  // Quantization table: p x vortex.
  Json qt = Json::array();
  for (const auto& d : r.diagnostics)
    for (const auto& v : d.vortices)
      qt.push_back({{"p", d.p},
                    {"position", to_json(v.position)},
                    {"winding", v.winding},
                    {"mu", v.quantization.mu},
                    {"distance_predicted", v.quantization.distance_predicted},
                    {"envelope", v.quantization_envelope}});
  j["quantization_table"] = qt;
  j["vortex_count_matches_degree"] = counts_ok;
  write_file_atomic(out / "profiles.csv", prof.str());
  const auto& last = r.stages.back();
  S1Field u = project_unit(r.grid, last.field).field;
  write_file_atomic(out / "mu_density.svg",
                    render_svg(density_heatmap(r.grid, mu_density(r.grid, u, last.p),
                                               "mu_p density, disk k=" + std::to_string(c.k) +
                                                   " p=" + fmt_double(last.p))));
  write_snapshot(out / "field.snap", r.grid, last.field);
  return j;
}

inline Json torus_hodge_summary(const ExperimentConfig& c, const TorusHodgeResult& r,
                                const std::filesystem::path& out) {
  Json j;
  j["grid"] = {{"topology", "torus"}, {"h", r.grid.h()}, {"n", r.grid.nx()}};
  j["q"] = c.q;
  j["stages"] = Json::array();
  std::ostringstream prof;
  prof << "p,exact_norm,shape,exact_ratio,coexact_norm,current_norm,hconst_x,hconst_y,residual\n";
  for (std::size_t s = 0; s < r.stages.size(); ++s) {
    const auto& st = r.stages[s];
    const auto& row = r.table.rows[s];
    j["stages"].push_back({{"p", st.p},
                           {"solve", to_json(st.report)},
                           {"vortex_count", st.vortex_count},
                           {"total_winding", st.total_winding},
                           {"initial_exact_norm", st.initial_exact_norm},
                           {"exact_norm", row.exact_norm},
                           {"coexact_norm", row.coexact_norm},
                           {"current_norm", row.current_norm},
                           {"exact_fraction", row.exact_norm / row.current_norm},
                           {"hconst", to_json(row.hconst)},
                           {"shape", row.shape},
                           {"exact_ratio", row.exact_ratio},
                           {"coexact_ratio", row.coexact_ratio},
                           {"reconstruction_residual", row.residual}});
    prof << csv_num(row.p) << ',' << csv_num(row.exact_norm) << ',' << csv_num(row.shape) << ','
         << csv_num(row.exact_ratio) << ',' << csv_num(row.coexact_norm) << ','
         << csv_num(row.current_norm) << ',' << csv_num(row.hconst.x) << ','
         << csv_num(row.hconst.y) << ',' << csv_num(row.residual) << '\n';
  }
  j["exact_band"] = r.table.exact_band;
  j["coexact_band"] = r.table.coexact_band;
  j["exact_band_within_3"] = r.table.exact_band <= 3.0;
  write_file_atomic(out / "profiles.csv", prof.str());
  const auto& last = r.stages.back();
  write_file_atomic(out / "mu_density.svg",
                    render_svg(density_heatmap(r.grid, mu_density(r.grid, last.field, last.p),
                                               "mu_p density, torus pair p=" + fmt_double(last.p))));
  write_snapshot(out / "field.snap", r.grid, last.field);
  return j;
}

inline Json torus_diffuse_summary(const ExperimentConfig& c, const std::filesystem::path& out) {
  Grid2D g = Grid2D::torus(c.n);
  auto rows = diffuse_measure_experiment(g, c.p, c.m);
  Json j;
  j["grid"] = {{"topology", "torus"}, {"h", g.h()}, {"n", g.nx()}};
  j["rows"] = Json::array();
  std::ostringstream prof;
  prof << "p,m,mass,closed_form,squared_form,hbar_p,relative_error,vortices\n";
  double worst = 0.0;
  for (const auto& r : rows) {
    j["rows"].push_back({{"p", r.p},
                         {"m", r.m},
                         {"mass", r.mass},
                         {"closed_form", r.closed_form},
                         {"squared_form", r.squared_form},
                         {"hbar_p", r.hbar_p},
                         {"relative_error", r.relative_error},
                         {"vortices", r.vortices}});
    worst = std::max(worst, r.relative_error);
    prof << csv_num(r.p) << ',' << r.m << ',' << csv_num(r.mass) << ',' << csv_num(r.closed_form)
         << ',' << csv_num(r.squared_form) << ',' << csv_num(r.hbar_p) << ','
         << csv_num(r.relative_error) << ',' << r.vortices << '\n';
  }
  j["max_relative_error"] = worst;
  write_file_atomic(out / "profiles.csv", prof.str());
  const auto& last = rows.back();
  write_file_atomic(out / "mu_density.svg",
                    render_svg(density_heatmap(g, mu_density(g, plane_wave(g, last.m), last.p),
                                               "mu_p density, plane wave m=" + std::to_string(last.m) +
                                                   " p=" + fmt_double(last.p))));
  return j;
}

inline Json minmax_summary(const ExperimentConfig& c, const MinmaxResult& r,
                           const std::filesystem::path& out) {
  Json j;
  j["grid"] = {{"topology", "rectangle"}, {"side", 1.0}, {"h", r.grid.h()}, {"cells", c.n}};
  j["y_grid"] = {{"nr", c.nr}, {"ntheta", c.ntheta}};
  j["stages"] = Json::array();
  std::ostringstream surf;
  surf << "p,y1,y2,energy,mean1,mean2\n";
  auto row = [&](double p, const FamilySample& s) {
    surf << csv_num(p) << ',' << csv_num(s.y.x) << ',' << csv_num(s.y.y) << ',' << csv_num(s.energy)
         << ',' << csv_num(s.mean.x) << ',' << csv_num(s.mean.y) << '\n';
  };
  for (const auto& st : r.stages) {
    j["stages"].push_back({{"p", st.p},
                           {"eps", st.surface.params.eps_penalty},
                           {"max_energy", st.surface.max_energy},
                           {"min_energy", st.surface.min_energy},
                           {"argmax", to_json(st.surface.argmax.y)},
                           {"scaled_max", st.scaled_max},
                           {"center_energy", st.surface.center.energy},
                           {"vortex_p_energy", st.vortex_p_energy},
                           {"boundary_energy", st.boundary_energy},
                           {"max_jump", st.max_jump},
                           {"jump_fraction", st.jump_fraction},
                           {"angle_offset", st.surface.grid.angle_offset},
                           {"witness",
                            {{"y0", to_json(st.witness.y0)},
                             {"mean_norm", st.witness.mean_norm},
                             {"energy", st.witness.energy},
                             {"delta", st.witness.delta},
                             {"positive", st.witness.positive}}},
                           {"warnings", st.surface.warnings}});
    row(st.p, st.surface.center);
    for (const auto& s : st.surface.samples) row(st.p, s);
  }
  j["scaled_max_band"] = r.band;
  j["scaled_max_band_within_2"] = r.band < 2.0;
  write_file_atomic(out / "surface.csv", surf.str());
  const auto& last = r.stages.back();
  write_file_atomic(out / "surface.svg",
                    render_svg(surface_heatmap(last.surface, 128,
                                               "E_{p,eps}(h_y) over y, p=" + fmt_double(last.p))));
  S1Field hw = detail::sample_family(r.grid, DomainMap::identity(r.grid), last.witness.y0);
  write_file_atomic(out / "mu_density.svg",
                    render_svg(density_heatmap(r.grid, mu_density(r.grid, hw, last.p),
                                               "mu_p density of the witness h_y0, p=" +
                                                   fmt_double(last.p))));
  std::ostringstream prof;
  prof << "p,a,radius,max_energy_on_ring,min_energy_on_ring\n";
  for (const auto& st : r.stages)
    for (int a = 0; a < st.surface.grid.nr; ++a) {
      double lo = INFINITY, hi = -INFINITY;
      for (int b = 0; b < st.surface.grid.ntheta; ++b)
        lo = std::min(lo, st.surface.at(a, b).energy), hi = std::max(hi, st.surface.at(a, b).energy);
      prof << csv_num(st.p) << ',' << a << ',' << csv_num(st.surface.grid.radius(a)) << ','
           << csv_num(hi) << ',' << csv_num(lo) << '\n';
    }
  write_file_atomic(out / "profiles.csv", prof.str());
  return j;
}

inline Json oracle_summary(const std::vector<OracleCheck>& checks, const std::filesystem::path& out) {
  Json j;
  j["checks"] = Json::array();
  std::ostringstream prof;
  prof << "name,value,reference,error,tolerance,pass\n";
  bool all = true;
  for (const auto& k : checks) {
    j["checks"].push_back({{"name", k.name},
                           {"value", k.value},
                           {"reference", k.reference},
                           {"error", k.error},
                           {"tolerance", k.tolerance},
                           {"pass", k.pass}});
    all = all && k.pass;
    prof << '"' << k.name << "\"," << csv_num(k.value) << ',' << csv_num(k.reference) << ','
         << csv_num(k.error) << ',' << csv_num(k.tolerance) << ',' << (k.pass ? "true" : "false")
         << '\n';
  }
  j["all_pass"] = all;
  write_file_atomic(out / "profiles.csv", prof.str());
  return j;
}

}  // namespace detail

/// Runs the configured experiment into `out`. Returns 0 on success; on
/// failure writes failure.json and returns 2 (or 3 when an oracle check of
/// the oracle suite fails).
inline RunOutcome run_experiment(const ExperimentConfig& c, const std::filesystem::path& out,
                                 std::ostream* log = nullptr) {
  namespace fs = std::filesystem;
  RunOutcome res;
  try {
    fs::create_directories(out);
    Json j = report_header(c);
    j["status"] = "ok";
    Json body;
    if (c.experiment == "disk-sweep") {
      fs::path ck = c.checkpoint ? out / "checkpoints" : fs::path{};
      body = detail::disk_summary(c, run_disk_sweep(c, ck, log), out);
    } else if (c.experiment == "torus-hodge") {
      body = detail::torus_hodge_summary(c, run_torus_hodge(c, log), out);
    } else if (c.experiment == "torus-diffuse") {
      body = detail::torus_diffuse_summary(c, out);
    } else if (c.experiment == "minmax-surface") {
      body = detail::minmax_summary(c, run_minmax(c), out);
    } else {
      body = detail::oracle_summary(run_oracle_suite(c), out);
      if (!body["all_pass"].get<bool>()) {
        j["status"] = "failed";
        res.exit_code = 3;
      }
    }
    for (auto& [k, v] : body.items()) j[k] = v;
    res.summary = j;
    if (fs::exists(out / "failure.json")) fs::remove(out / "failure.json");
    detail::write_json(out / "summary.json", j);
  } catch (const std::exception& e) {
    res.exit_code = 2;
    res.summary = failure_report(c, e);
    try {
      fs::create_directories(out);
      detail::write_json(out / "failure.json", res.summary);
    } catch (...) {
    }
  }
  return res;
}

}  // namespace pharmonic
