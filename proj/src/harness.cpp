#include "mhd/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "json.hpp"

#include "mhd/errors.hpp"

namespace mhd::harness {

using grid::Field;
using grid::for_extended;
using grid::for_interior;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Config.

namespace {

DivControl parse_div_control(const std::string& s) {
  if (s == "projection") return DivControl::Projection;
  if (s == "constrained-transport") return DivControl::ConstrainedTransport;
  throw ConfigError("unknown div_control: " + s);
}

std::string div_control_name(DivControl d) {
  return d == DivControl::Projection ? "projection" : "constrained-transport";
}

}  // namespace

RunConfig RunConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

RunConfig RunConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  RunConfig c;
  if (j.contains("grid")) {
    const auto& g = j["grid"];
    c.dim = g.value("dim", c.dim);
    if (g.contains("n"))
      for (int a = 0; a < 3 && a < static_cast<int>(g["n"].size()); ++a)
        c.n[a] = g["n"][a].get<int>();
    if (g.contains("extent"))
      for (int a = 0; a < 3 && a < static_cast<int>(g["extent"].size()); ++a)
        c.extent[a] = g["extent"][a].get<double>();
  }
  if (j.contains("eos")) {
    const auto& e = j["eos"];
    c.eos_kind = e.value("kind", c.eos_kind);
    c.c_v = e.value("c_v", c.c_v);
    c.p_infinity = e.value("p_infinity", c.p_infinity);
    c.radiation_a = e.value("radiation_a", c.radiation_a);
  }
  if (j.contains("transport")) {
    const auto& t = j["transport"];
    c.transport.mu0 = t.value("mu0", c.transport.mu0);
    c.transport.mu1 = t.value("mu1", c.transport.mu1);
    c.transport.eta0 = t.value("eta0", c.transport.eta0);
    c.transport.eta1 = t.value("eta1", c.transport.eta1);
    c.transport.kappa0 = t.value("kappa0", c.transport.kappa0);
    c.transport.kappa1 = t.value("kappa1", c.transport.kappa1);
    c.transport.zeta0 = t.value("zeta0", c.transport.zeta0);
    c.transport.zeta1 = t.value("zeta1", c.transport.zeta1);
  }
  if (j.contains("boundary")) {
    const auto& b = j["boundary"];
    c.theta_B = b.value("theta_B", c.theta_B);
    if (b.contains("B_B"))
      for (int a = 0; a < 3; ++a) c.B_B[a] = b["B_B"][a].get<double>();
  }
  if (j.contains("initial")) {
    const auto& i = j["initial"];
    c.rho_bar = i.value("rho_bar", c.rho_bar);
    c.theta_bar = i.value("theta_bar", c.theta_bar);
    c.perturbation = i.value("perturbation", c.perturbation);
    c.amplitude = i.value("amplitude", c.amplitude);
  }
  if (j.contains("solver")) {
    const auto& s = j["solver"];
    c.solver.cfl = s.value("cfl", c.solver.cfl);
    c.solver.t_end = s.value("t_end", c.solver.t_end);
    c.solver.poisson_tol = s.value("poisson_tol", c.solver.poisson_tol);
    c.solver.poisson_max_iter = s.value("poisson_max_iter", c.solver.poisson_max_iter);
    c.solver.fault_resistive_heating =
        s.value("fault_resistive_heating", c.solver.fault_resistive_heating);
    if (s.contains("div_control"))
      c.solver.div_control = parse_div_control(s["div_control"].get<std::string>());
    c.n_out = s.value("n_out", c.n_out);
  }
  if (j.contains("scenario")) {
    const auto& s = j["scenario"];
    c.scenario = s.value("name", c.scenario);
    c.rho_lo = s.value("rho_lo", c.rho_lo);
    c.rho_hi = s.value("rho_hi", c.rho_hi);
    c.theta_lo = s.value("theta_lo", c.theta_lo);
    c.theta_hi = s.value("theta_hi", c.theta_hi);
    c.u_bar = s.value("u_bar", c.u_bar);
    c.s_bar = s.value("s_bar", c.s_bar);
  }
  if (j.contains("diagnostics")) {
    const auto& d = j["diagnostics"];
    c.cutoff_delta = d.value("cutoff_delta", c.cutoff_delta);
    c.rei_c = d.value("rei_c", c.rei_c);
    c.c_audit = d.value("c_audit", c.c_audit);
    c.dict_members = d.value("dict_members", c.dict_members);
  }
  c.out_dir = j.value("out_dir", c.out_dir);
  c.seed = j.value("seed", c.seed);
  c.threads = j.value("threads", c.threads);
  c.validate();
  return c;
}

std::string RunConfig::canonical_json() const {
  ojson j;
  j["grid"] = {{"dim", dim}, {"n", {n[0], n[1], n[2]}},
               {"extent", {extent[0], extent[1], extent[2]}}};
  j["eos"] = {{"kind", eos_kind},
              {"c_v", c_v},
              {"p_infinity", p_infinity},
              {"radiation_a", radiation_a}};
  j["transport"] = {{"mu0", transport.mu0},     {"mu1", transport.mu1},
                    {"eta0", transport.eta0},   {"eta1", transport.eta1},
                    {"kappa0", transport.kappa0}, {"kappa1", transport.kappa1},
                    {"zeta0", transport.zeta0}, {"zeta1", transport.zeta1}};
  j["boundary"] = {{"theta_B", theta_B}, {"B_B", {B_B[0], B_B[1], B_B[2]}}};
  j["initial"] = {{"rho_bar", rho_bar},
                  {"theta_bar", theta_bar},
                  {"perturbation", perturbation},
                  {"amplitude", amplitude}};
  j["solver"] = {{"cfl", solver.cfl},
                 {"t_end", solver.t_end},
                 {"div_control", div_control_name(solver.div_control)},
                 {"poisson_tol", solver.poisson_tol},
                 {"poisson_max_iter", solver.poisson_max_iter},
                 {"fault_resistive_heating", solver.fault_resistive_heating},
                 {"n_out", n_out}};
  j["scenario"] = {{"name", scenario}, {"rho_lo", rho_lo},     {"rho_hi", rho_hi},
                   {"theta_lo", theta_lo}, {"theta_hi", theta_hi}, {"u_bar", u_bar},
                   {"s_bar", s_bar}};
  j["diagnostics"] = {{"cutoff_delta", cutoff_delta},
                      {"rei_c", rei_c},
                      {"c_audit", c_audit},
                      {"dict_members", dict_members}};
  // out_dir and threads are runtime concerns; results must not depend on
  // them, so they stay out of the hashed canonical form.
  j["seed"] = seed;
  return j.dump();
}

std::string RunConfig::config_hash() const { return sha1_hex(canonical_json()); }

void RunConfig::validate() const {
  make_grid().validate();
  solver.validate();
  transport.validate();
  if (eos_kind != "ideal" && eos_kind != "monatomic_radiation")
    throw ConfigError("unknown eos kind: " + eos_kind);
  if (perturbation != "none" && perturbation != "solenoidal-B" &&
      perturbation != "velocity-bump" && perturbation != "temperature-bump")
    throw ConfigError("unknown perturbation: " + perturbation);
  if (!(rho_bar > 0.0) || !(theta_bar > 0.0) || !(theta_B > 0.0))
    throw ConfigError("background state must be positive");
  if (amplitude < 0.0) throw ConfigError("amplitude must be nonnegative");
  if (n_out < 1) throw ConfigError("n_out must be >= 1");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (!scenario.empty() && scenario != "bounded-dmv" &&
      scenario != "constant-coefficients" && scenario != "perfect-gas" &&
      scenario != "unconditional")
    throw ConfigError("unknown scenario: " + scenario);
  if (solver.div_control == DivControl::ConstrainedTransport && dim != 2)
    throw ConfigError("constrained transport requires a 2D grid");
}

std::shared_ptr<eos::Model> RunConfig::make_eos() const {
  if (eos_kind == "ideal") return std::make_shared<eos::IdealPolytropic>(c_v);
  return std::make_shared<eos::MonatomicRadiation>(p_infinity, radiation_a);
}

Grid RunConfig::make_grid() const {
  Grid g;
  g.dim = dim;
  for (int a = 0; a < 3; ++a) {
    g.n[a] = n[a];
    g.extent[a] = extent[a];
  }
  return g;
}

// ---------------------------------------------------------------------------
// Scenario presets.

void apply_scenario(RunConfig& cfg) {
  if (cfg.scenario.empty() || cfg.scenario == "bounded-dmv") return;
  if (cfg.scenario == "constant-coefficients") {
    cfg.transport.mu1 = cfg.transport.eta1 = cfg.transport.kappa1 = cfg.transport.zeta1 =
        0.0;
    // growth condition |p| <~ 1 + rho e + rho |s| checked over a state sweep
    auto eosm = cfg.make_eos();
    double growth = 0.0;
    for (double rho : {0.1, 0.5, 1.0, 5.0, 20.0, 50.0})
      for (double th : {0.1, 0.5, 1.0, 5.0, 10.0}) {
        const eos::ThermoPoint pt{rho, th};
        const double denom = 1.0 + rho * eosm->internal_energy(pt) +
                             rho * std::abs(eosm->entropy(pt));
        growth = std::max(growth, std::abs(eosm->pressure(pt)) / denom);
      }
    if (!std::isfinite(growth))
      throw HypothesisViolation("ass_cc_p: pressure growth constant is not finite");
    return;
  }
  if (cfg.scenario == "perfect-gas") {
    if (cfg.eos_kind != "ideal")
      throw HypothesisViolation("ass_pg: perfect-gas preset requires the ideal EOS");
    cfg.transport.kappa1 = 0.0;  // boyle_coeff: kappa constant
    if (cfg.transport.mu1 <= 0.0) cfg.transport.mu1 = 0.5;
    return;
  }
  // unconditional
  if (cfg.eos_kind != "monatomic_radiation")
    throw HypothesisViolation(
        "ur_coeff: unconditional preset requires the monatomic+radiation EOS");
  if (!(cfg.radiation_a > 0.0))
    throw HypothesisViolation("ur_coeff: radiation constant a must be positive");
  cfg.transport.kappa1 = 0.0;
  if (cfg.transport.mu1 <= 0.0) cfg.transport.mu1 = 0.5;
}

void monitor_scenario(const RunConfig& cfg, const FluidState& s, const eos::Model& eosm) {
  if (cfg.scenario.empty() || cfg.scenario == "unconditional") return;
  const Grid& g = s.g;
  for_interior(g, [&](int i, int j, int k) {
    const double rho = s.rho.at(g, i, j, k);
    const double theta = eosm.invert_temperature(rho, s.eps.at(g, i, j, k) / rho);
    auto where = [&]() {
      return " at cell (" + std::to_string(i) + "," + std::to_string(j) + "," +
             std::to_string(k) + "), t=" + std::to_string(s.t);
    };
    if (cfg.scenario == "bounded-dmv") {
      if (rho <= cfg.rho_lo || rho >= cfg.rho_hi)
        throw HypothesisViolation("ass_bmvs: rho left [" + std::to_string(cfg.rho_lo) +
                                  "," + std::to_string(cfg.rho_hi) + "]" + where());
      if (theta <= cfg.theta_lo || theta >= cfg.theta_hi)
        throw HypothesisViolation("ass_bmvs: theta left [" +
                                  std::to_string(cfg.theta_lo) + "," +
                                  std::to_string(cfg.theta_hi) + "]" + where());
    } else if (cfg.scenario == "constant-coefficients") {
      const double umag = std::sqrt(norm2(s.momentum(i, j, k))) / rho;
      if (theta > cfg.theta_hi)
        throw HypothesisViolation("ass_cc: theta exceeded " +
                                  std::to_string(cfg.theta_hi) + where());
      if (umag > cfg.u_bar)
        throw HypothesisViolation("ass_cc: |u| exceeded " + std::to_string(cfg.u_bar) +
                                  where());
    } else if (cfg.scenario == "perfect-gas") {
      if (std::abs(eosm.entropy({rho, theta})) > cfg.s_bar)
        throw HypothesisViolation("ass_pg_s: |s| exceeded " + std::to_string(cfg.s_bar) +
                                  where());
    }
  });
}

// ---------------------------------------------------------------------------
// Initial state.

namespace {

// C1 bump on [a, b] with unit peak.
double bump(double x, double a, double b) {
  if (x <= a || x >= b) return 0.0;
  const double s = 0.5 * (b - a);
  return (x - a) * (x - a) * (b - x) * (b - x) / (s * s * s * s);
}

}  // namespace

std::pair<FluidState, BoundaryData> build_initial_state(const RunConfig& cfg,
                                                        const eos::Model& eosm) {
  const Grid g = cfg.make_grid();
  auto [s, bd] = solver::make_equilibrium(g, eosm, cfg.rho_bar, cfg.theta_bar, cfg.B_B);
  bd.theta_B = [tb = cfg.theta_B](double, const Vec3&) { return tb; };

  const bool ct = cfg.solver.div_control == DivControl::ConstrainedTransport;
  if (ct) {
    s.has_az = true;
    for_extended(g, Grid::ng, [&](int i, int j, int k) {
      const Vec3 x = g.center(i, j, k);
      s.az.at(g, i, j, k) = cfg.B_B[0] * x[1] - cfg.B_B[1] * x[0];
    });
  }

  std::mt19937 rng(static_cast<std::uint32_t>(cfg.seed));
  const double pi = 3.14159265358979323846;
  const double Lx = g.extent[0], Ly = g.extent[1];
  const bool two_d = g.active(1);

  if (cfg.perturbation == "solenoidal-B" && cfg.amplitude > 0.0) {
    const int k1 = 1 + static_cast<int>(rng() % 2);
    auto psi = [&](double x, double y) {
      const double sy = two_d ? std::sin(pi * y / Ly) : 1.0;
      return cfg.amplitude * std::sin(k1 * pi * x / Lx) * (two_d ? sy * sy : 1.0);
    };
    if (ct) {
      for_extended(g, Grid::ng, [&](int i, int j, int k) {
        const Vec3 x = g.center(i, j, k);
        s.az.at(g, i, j, k) += psi(x[0], x[1]);
      });
    } else if (two_d) {
      for_interior(g, [&](int i, int j, int k) {
        const Vec3 x = g.center(i, j, k);
        // B += curl(0, 0, psi), analytic derivatives
        const double dpsidy = cfg.amplitude * std::sin(k1 * pi * x[0] / Lx) * 2.0 *
                              std::sin(pi * x[1] / Ly) * std::cos(pi * x[1] / Ly) * pi /
                              Ly;
        const double dpsidx = cfg.amplitude * (k1 * pi / Lx) *
                              std::cos(k1 * pi * x[0] / Lx) *
                              std::sin(pi * x[1] / Ly) * std::sin(pi * x[1] / Ly);
        s.bx.at(g, i, j, k) += dpsidy;
        s.by.at(g, i, j, k) -= dpsidx;
      });
    } else {
      // 1D: out-of-plane component, divergence-free identically
      for_interior(g, [&](int i, int j, int k) {
        const Vec3 x = g.center(i, j, k);
        s.bz.at(g, i, j, k) += cfg.amplitude * std::sin(k1 * pi * x[0] / Lx);
      });
    }
  } else if (cfg.perturbation == "velocity-bump" && cfg.amplitude > 0.0) {
    const int dir = static_cast<int>(rng() % 3);
    const double a0 = 0.15 + 0.05 * (rng() % 3);
    auto shape = [&](const Vec3& x) {
      double v = bump(x[0], a0 * Lx, (1.0 - a0) * Lx);
      if (two_d) v *= bump(x[1], 0.15 * Ly, 0.85 * Ly);
      return v;
    };
    for_interior(g, [&](int i, int j, int k) {
      const Vec3 x = g.center(i, j, k);
      const double u = cfg.amplitude * shape(x);
      Field* mc[3] = {&s.mx, &s.my, &s.mz};
      mc[dir]->at(g, i, j, k) += s.rho.at(g, i, j, k) * u;
    });
  } else if (cfg.perturbation == "temperature-bump" && cfg.amplitude > 0.0) {
    if (cfg.amplitude >= 1.0)
      throw ConfigError("temperature-bump amplitude must be below 1");
    const double a0 = 0.15 + 0.05 * (rng() % 3);
    for_interior(g, [&](int i, int j, int k) {
      const Vec3 x = g.center(i, j, k);
      double v = bump(x[0], a0 * Lx, (1.0 - a0) * Lx);
      if (two_d) v *= bump(x[1], 0.15 * Ly, 0.85 * Ly);
      const double theta = cfg.theta_bar * (1.0 + cfg.amplitude * v);
      const double rho = s.rho.at(g, i, j, k);
      s.eps.at(g, i, j, k) = rho * eosm.internal_energy({rho, theta});
    });
  }
  solver::apply_boundary(s, bd, eosm);
  return {std::move(s), bd};
}

// ---------------------------------------------------------------------------
// Simulation driver.

namespace {

CsvRow diagnostics_row(const FluidState& s, const RunConfig& cfg, const eos::Model& eosm,
                       const BoundaryData& bd, const relent::ReferenceSolution& ref) {
  CsvRow row;
  row.t = s.t;
  const solver::Totals tot = solver::totals(s, eosm);
  row.mass = tot.mass;
  row.momx = tot.momentum[0];
  row.momy = tot.momentum[1];
  row.momz = tot.momentum[2];
  row.E_total = tot.energy;
  row.S_total = tot.entropy;
  row.E_ballistic = solver::ballistic_energy(
      s, eosm, [&](const Vec3&) { return cfg.theta_B; },
      [&](const Vec3&) { return cfg.B_B; }, bd);
  row.H_rel = relent::rel_energy_total(s, eosm, ref, 0);
  row.prod_min = solver::min_entropy_production(s, eosm, cfg.transport);
  row.divB_max = grid::max_div_B(s);
  return row;
}

}  // namespace

SimResult run_simulation(const RunConfig& cfg_in) {
  RunConfig cfg = cfg_in;
  apply_scenario(cfg);
  cfg.validate();
  auto eosm = cfg.make_eos();
  auto [s, bd] = build_initial_state(cfg, *eosm);
  const relent::ReferenceSolution ref = relent::ReferenceSolution::equilibrium(
      s.g, cfg.rho_bar, cfg.theta_bar, cfg.B_B);

  SimResult result;
  result.bd = bd;
  monitor_scenario(cfg, s, *eosm);
  result.traj.snaps.push_back(s);
  result.rows.push_back(diagnostics_row(s, cfg, *eosm, bd, ref));

  const double t_end = cfg.solver.t_end;
  const long max_steps = 5'000'000;
  for (int out = 1; out <= cfg.n_out; ++out) {
    const double t_target = t_end * out / cfg.n_out;
    while (s.t < t_target - 1e-14 * t_end) {
      double dt = solver::compute_dt(s, *eosm, cfg.transport, cfg.solver);
      dt = std::min(dt, t_target - s.t);
      s = solver::step_with_dt(s, bd, *eosm, cfg.transport, cfg.solver, dt);
      monitor_scenario(cfg, s, *eosm);
      if (++result.steps_taken > max_steps)
        throw CflError("step budget exhausted before t_end");
    }
    s.t = t_target;  // pin against roundoff drift in the accumulated time
    result.traj.snaps.push_back(s);
    CsvRow row = diagnostics_row(s, cfg, *eosm, bd, ref);
    // entropy balance residual over the last output interval
    solver::Trajectory pair;
    pair.snaps = {result.traj.snaps[result.traj.snaps.size() - 2], s};
    const auto audit =
        solver::entropy_audit(pair, *eosm, cfg.transport, bd, cfg.c_audit);
    if (!audit.empty()) row.entropy_residual = audit.front().residual;
    result.rows.push_back(row);
  }
  return result;
}

// ---------------------------------------------------------------------------
// CSV formatting.

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string csv_header(bool relent_cols) {
  std::string h =
      "t,mass,momx,momy,momz,E_total,S_total,E_ballistic,H_rel,prod_min,divB_max,"
      "entropy_residual";
  if (relent_cols) h += ",rei_lhs,rei_rhs,rei_margin,kp_ratio";
  return h;
}

std::string csv_line(const CsvRow& r, bool relent_cols) {
  std::string line = fmt(r.t) + "," + fmt(r.mass) + "," + fmt(r.momx) + "," +
                     fmt(r.momy) + "," + fmt(r.momz) + "," + fmt(r.E_total) + "," +
                     fmt(r.S_total) + "," + fmt(r.E_ballistic) + "," + fmt(r.H_rel) +
                     "," + fmt(r.prod_min) + "," + fmt(r.divB_max) + "," +
                     fmt(r.entropy_residual);
  if (relent_cols)
    line += "," + fmt(r.rei_lhs) + "," + fmt(r.rei_rhs) + "," + fmt(r.rei_margin) + "," +
            fmt(r.kp_ratio);
  return line;
}

// ---------------------------------------------------------------------------
// relent.

namespace {

relent::VecField velocity_field(const FluidState& s, const eos::Model&) {
  const Grid& g = s.g;
  relent::VecField u(g);
  for_interior(g, [&](int i, int j, int k) {
    const double rho = s.rho.at(g, i, j, k);
    u.x.at(g, i, j, k) = s.mx.at(g, i, j, k) / rho;
    u.y.at(g, i, j, k) = s.my.at(g, i, j, k) / rho;
    u.z.at(g, i, j, k) = s.mz.at(g, i, j, k) / rho;
  });
  // odd-mirror ghosts: consistent with the zero boundary trace
  for (int axis = 0; axis < g.dim; ++axis)
    for (int side = 0; side < 2; ++side)
      for (int layer = 1; layer <= Grid::ng; ++layer) {
        const int t1 = (axis + 1) % 3, t2 = (axis + 2) % 3;
        for (int c2 = 0; c2 < g.n[t2]; ++c2)
          for (int c1 = 0; c1 < g.n[t1]; ++c1) {
            int gi[3], mi[3];
            gi[t1] = mi[t1] = c1;
            gi[t2] = mi[t2] = c2;
            gi[axis] = (side == 0) ? -layer : g.n[axis] + layer - 1;
            mi[axis] = (side == 0) ? layer - 1 : g.n[axis] - layer;
            for (Field* f : {&u.x, &u.y, &u.z})
              f->at(g, gi[0], gi[1], gi[2]) = -f->at(g, mi[0], mi[1], mi[2]);
          }
      }
  return u;
}

relent::VecField reference_velocity(const relent::ReferenceSolution& ref,
                                    std::size_t slice) {
  const Grid& g = ref.g;
  relent::VecField u(g);
  const relent::RefFields& f = ref.slices[ref.stationary ? 0 : slice];
  for_extended(g, Grid::ng, [&](int i, int j, int k) {
    u.x.at(g, i, j, k) = f.Ux.at(g, i, j, k);
    u.y.at(g, i, j, k) = f.Uy.at(g, i, j, k);
    u.z.at(g, i, j, k) = f.Uz.at(g, i, j, k);
  });
  return u;
}

double fit_slope(const std::vector<double>& logx, const std::vector<double>& logy) {
  const double n = static_cast<double>(logx.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < logx.size(); ++i) {
    sx += logx[i];
    sy += logy[i];
    sxx += logx[i] * logx[i];
    sxy += logx[i] * logy[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

RelentResult run_relent(const RunConfig& cfg_in, const std::string& reference) {
  RunConfig cfg = cfg_in;
  apply_scenario(cfg);
  if (cfg.perturbation == "none") cfg.perturbation = "velocity-bump";
  cfg.validate();
  if (reference != "equilibrium" && reference != "fine")
    throw ConfigError("reference must be 'equilibrium' or 'fine'");

  auto eosm = cfg.make_eos();
  const Grid g = cfg.make_grid();
  relent::CutoffSpec spec;
  spec.delta = cfg.cutoff_delta;

  RelentResult result;
  result.reference = reference;
  const std::vector<double> amps = {1e-1, 1e-2, 1e-3, 1e-4};
  for (double a : amps) {
    RunConfig run_cfg = cfg;
    run_cfg.amplitude = a;
    SimResult sim = run_simulation(run_cfg);

    relent::ReferenceSolution ref = [&] {
      if (reference == "equilibrium")
        return relent::ReferenceSolution::equilibrium(g, cfg.rho_bar, cfg.theta_bar,
                                                      cfg.B_B);
      RunConfig fine_cfg = run_cfg;
      for (int ax = 0; ax < fine_cfg.dim; ++ax) fine_cfg.n[ax] *= 4;
      SimResult fine = run_simulation(fine_cfg);
      return relent::ReferenceSolution::restrict_trajectory(fine.traj, g, sim.bd, *eosm);
    }();
    ref.check_admissible(sim.bd, reference == "equilibrium" ? 1e-8 : 1e-6);

    RelentAmplitude entry;
    entry.amplitude = a;
    for (std::size_t n_snap = 0; n_snap < sim.traj.snaps.size(); ++n_snap) {
      const FluidState& s = sim.traj.snaps[n_snap];
      const std::size_t slice = ref.slice_for(s.t);
      const double H = relent::rel_energy_total(s, *eosm, ref, slice);
      entry.times.push_back(s.t);
      entry.H.push_back(std::max(H, 0.0));
      entry.sup_H = std::max(entry.sup_H, H);
    }
    entry.rei = relent::rei_sides(sim.traj, ref, *eosm, cfg.transport, spec, cfg.rei_c);
    for (const relent::ReiRow& row : entry.rei)
      result.worst_margin = std::min(result.worst_margin, row.margin);
    entry.c_fit = relent::gronwall_fit(entry.times, entry.H).c_fit;
    entry.rows = sim.rows;
    for (std::size_t n_snap = 0; n_snap < sim.traj.snaps.size(); ++n_snap) {
      CsvRow& row = entry.rows[n_snap];
      row.H_rel = entry.H[n_snap];
      row.rei_lhs = entry.rei[n_snap].lhs;
      row.rei_rhs = entry.rei[n_snap].rhs;
      row.rei_margin = entry.rei[n_snap].margin;
      const FluidState& snap = sim.traj.snaps[n_snap];
      const relent::KPResult kp = relent::korn_poincare_ratio(
          velocity_field(snap, *eosm), reference_velocity(ref, ref.slice_for(snap.t)),
          g);
      row.kp_ratio = kp.identical ? 0.0 : kp.ratio;
    }
    result.sweep.push_back(std::move(entry));
  }
  std::vector<double> lx, ly;
  for (const auto& e : result.sweep)
    if (e.sup_H > 0.0) {
      lx.push_back(std::log(e.amplitude));
      ly.push_back(std::log(e.sup_H));
    }
  if (lx.size() >= 2) result.slope = fit_slope(lx, ly);
  return result;
}

// ---------------------------------------------------------------------------
// dmv audit.

DmvResult run_dmv_audit(const RunConfig& cfg_in, int ensemble) {
  if (ensemble < 1) throw ConfigError("ensemble size must be >= 1");
  RunConfig cfg = cfg_in;
  apply_scenario(cfg);
  if (cfg.perturbation == "none" && cfg.amplitude > 0.0)
    cfg.perturbation = "velocity-bump";
  cfg.validate();
  auto eosm = cfg.make_eos();

  std::vector<solver::Trajectory> trajs;
  std::vector<double> weights(ensemble, 1.0 / ensemble);
  const char* kinds[3] = {"velocity-bump", "temperature-bump", "solenoidal-B"};
  for (int q = 0; q < ensemble; ++q) {
    RunConfig member = cfg;
    member.seed = cfg.seed + static_cast<unsigned long>(q);
    if (ensemble > 1 && cfg.amplitude > 0.0) {
      member.perturbation = kinds[q % 3];
      member.amplitude = cfg.amplitude * (1.0 + 0.25 * (q % 4));
    }
    trajs.push_back(run_simulation(member).traj);
  }
  const ym::EymSequence seq = ym::from_ensemble(trajs, weights, *eosm);
  const ym::TestFunctionDictionary dict = ym::TestFunctionDictionary::make_default(
      cfg.make_grid(), cfg.theta_B, cfg.B_B, cfg.dict_members);
  DmvResult result;
  result.reports = ym::full_audit(seq, dict, cfg.transport, *eosm, cfg.c_audit);
  for (const auto& r : result.reports)
    if (!r.pass) result.all_pass = false;
  return result;
}

// ---------------------------------------------------------------------------
// kp check.

namespace {

double kp_sweep_max(const Grid& g, int sweep, unsigned long seed, int& identical) {
  std::mt19937 rng(static_cast<std::uint32_t>(seed));
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  std::uniform_int_distribution<int> mode(1, 3);
  const double pi = 3.14159265358979323846;
  double max_ratio = 0.0;
  for (int trial = 0; trial < sweep; ++trial) {
    // two random smooth zero-boundary fields from a small sine basis
    double a[2][3][2];
    int kx[2][3], ky[2][3];
    for (int f = 0; f < 2; ++f)
      for (int c = 0; c < 3; ++c) {
        a[f][c][0] = coef(rng);
        a[f][c][1] = coef(rng);
        kx[f][c] = mode(rng);
        ky[f][c] = mode(rng);
      }
    auto eval = [&](int f, int c, const Vec3& x) {
      double v = a[f][c][0] * std::sin(kx[f][c] * pi * x[0] / g.extent[0]);
      v += a[f][c][1] * std::sin((kx[f][c] % 3 + 1) * pi * x[0] / g.extent[0]);
      if (g.active(1)) v *= std::sin(ky[f][c] * pi * x[1] / g.extent[1]);
      return v;
    };
    relent::VecField u(g), ur(g);
    relent::VecField* fields[2] = {&u, &ur};
    for (int f = 0; f < 2; ++f) {
      Field* comp[3] = {&fields[f]->x, &fields[f]->y, &fields[f]->z};
      for_interior(g, [&](int i, int j, int k) {
        const Vec3 x = g.center(i, j, k);
        for (int c = 0; c < 3; ++c) comp[c]->at(g, i, j, k) = eval(f, c, x);
      });
      // odd ghosts preserve the zero trace discretely
      for (int axis = 0; axis < g.dim; ++axis)
        for (int side = 0; side < 2; ++side)
          for (int layer = 1; layer <= Grid::ng; ++layer) {
            const int t1 = (axis + 1) % 3, t2 = (axis + 2) % 3;
            for (int c2 = 0; c2 < g.n[t2]; ++c2)
              for (int c1 = 0; c1 < g.n[t1]; ++c1) {
                int gi[3], mi[3];
                gi[t1] = mi[t1] = c1;
                gi[t2] = mi[t2] = c2;
                gi[axis] = (side == 0) ? -layer : g.n[axis] + layer - 1;
                mi[axis] = (side == 0) ? layer - 1 : g.n[axis] - layer;
                for (int c = 0; c < 3; ++c)
                  comp[c]->at(g, gi[0], gi[1], gi[2]) =
                      -comp[c]->at(g, mi[0], mi[1], mi[2]);
              }
          }
    }
    const relent::KPResult res = relent::korn_poincare_ratio(u, ur, g);
    if (res.identical)
      ++identical;
    else
      max_ratio = std::max(max_ratio, res.ratio);
  }
  return max_ratio;
}

}  // namespace

KpResult run_kp_check(const RunConfig& cfg, int sweep) {
  if (sweep < 1) throw ConfigError("sweep size must be >= 1");
  KpResult result;
  result.sweep = sweep;
  const Grid g = cfg.make_grid();
  result.max_ratio = kp_sweep_max(g, sweep, cfg.seed, result.identical_count);
  Grid g2 = g;
  for (int ax = 0; ax < g.dim; ++ax) g2.n[ax] *= 2;
  int id2 = 0;
  result.max_ratio_refined = kp_sweep_max(g2, sweep, cfg.seed, id2);
  return result;
}

// ---------------------------------------------------------------------------
// eos check.

EosCheckResult run_eos_check(const RunConfig& cfg) {
  auto eosm = cfg.make_eos();
  EosCheckResult res;
  const eos::Rect box{0.1, 10.0, 0.1, 10.0};
  res.gibbs = eos::check_gibbs(*eosm, box, 2000);
  res.stability = eos::check_stability(*eosm, box, 2000);
  const double gibbs_tol = (cfg.eos_kind == "ideal") ? 1e-12 : 1e-5;
  res.pass = res.gibbs.pass(gibbs_tol) && res.stability.pass;
  if (cfg.eos_kind == "monatomic_radiation") {
    res.structural_applicable = true;
    res.structural =
        eos::check_structural(dynamic_cast<const eos::MonatomicRadiation&>(*eosm), 1e6);
    res.pass = res.pass && res.structural.pass();
  }
  return res;
}

// ---------------------------------------------------------------------------
// Command wrappers.

namespace {

namespace fs = std::filesystem;

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) throw DataError("cannot write " + p.string());
  out << text;
}

}  // namespace

int cmd_simulate(const RunConfig& cfg) {
  const SimResult res = run_simulation(cfg);
  fs::create_directories(cfg.out_dir);
  std::string csv = csv_header(false) + "\n";
  for (const CsvRow& r : res.rows) csv += csv_line(r, false) + "\n";
  write_text(fs::path(cfg.out_dir) / "timeseries.csv", csv);
  const fs::path snapdir = fs::path(cfg.out_dir) / "snapshots";
  fs::create_directories(snapdir);
  for (std::size_t n = 0; n < res.traj.snaps.size(); ++n) {
    char name[32];
    std::snprintf(name, sizeof name, "snap_%04zu.bin", n);
    grid::write_snapshot((snapdir / name).string(), res.traj.snaps[n]);
  }
  ojson rep;
  rep["config_hash"] = cfg.config_hash();
  rep["steps"] = res.steps_taken;
  rep["final_time"] = res.rows.back().t;
  rep["divB_max_final"] = res.rows.back().divB_max;
  rep["prod_min_final"] = res.rows.back().prod_min;
  write_text(fs::path(cfg.out_dir) / "report.json", rep.dump(2) + "\n");
  std::cout << "simulate: " << res.steps_taken << " steps to t=" << res.rows.back().t
            << ", report in " << cfg.out_dir << "\n";
  return 0;
}

int cmd_relent(const RunConfig& cfg, const std::string& reference) {
  const RelentResult res = run_relent(cfg, reference);
  fs::create_directories(cfg.out_dir);
  std::string sweep_csv = "amplitude,sup_H,c_fit\n";
  for (const auto& e : res.sweep)
    sweep_csv += fmt(e.amplitude) + "," + fmt(e.sup_H) + "," + fmt(e.c_fit) + "\n";
  write_text(fs::path(cfg.out_dir) / "relent_sweep.csv", sweep_csv);
  for (std::size_t a = 0; a < res.sweep.size(); ++a) {
    std::string ts = csv_header(true) + "\n";
    for (const CsvRow& r : res.sweep[a].rows) ts += csv_line(r, true) + "\n";
    char name[40];
    std::snprintf(name, sizeof name, "timeseries_amp%zu.csv", a);
    write_text(fs::path(cfg.out_dir) / name, ts);
  }
  std::string h_csv = "amplitude,t,H,rei_lhs,rei_rhs,rei_margin\n";
  for (const auto& e : res.sweep)
    for (std::size_t n = 0; n < e.times.size(); ++n)
      h_csv += fmt(e.amplitude) + "," + fmt(e.times[n]) + "," + fmt(e.H[n]) + "," +
               fmt(e.rei[n].lhs) + "," + fmt(e.rei[n].rhs) + "," + fmt(e.rei[n].margin) +
               "\n";
  write_text(fs::path(cfg.out_dir) / "relent_H.csv", h_csv);
  ojson rep;
  rep["config_hash"] = cfg.config_hash();
  rep["reference"] = res.reference;
  rep["slope"] = res.slope;
  rep["worst_rei_margin"] = res.worst_margin;
  for (const auto& e : res.sweep)
    rep["c_fit"].push_back({{"amplitude", e.amplitude}, {"c_fit", e.c_fit}});
  write_text(fs::path(cfg.out_dir) / "relent_report.json", rep.dump(2) + "\n");
  std::cout << "relent: slope=" << res.slope << " worst_margin=" << res.worst_margin
            << ", report in " << cfg.out_dir << "\n";
  return 0;
}

int cmd_dmv_audit(const RunConfig& cfg, int ensemble) {
  const DmvResult res = run_dmv_audit(cfg, ensemble);
  fs::create_directories(cfg.out_dir);
  ojson rep;
  rep["config_hash"] = cfg.config_hash();
  rep["ensemble"] = ensemble;
  rep["all_pass"] = res.all_pass;
  for (const auto& r : res.reports) {
    ojson jr;
    jr["identity"] = r.identity;
    jr["worst_residual"] = r.worst;
    jr["worst_test"] = r.worst_id;
    jr["pass"] = r.pass;
    for (const auto& e : r.entries)
      jr["entries"].push_back({{"test", e.test_id},
                               {"residual", e.residual},
                               {"tolerance", e.tolerance},
                               {"pass", e.pass}});
    rep["identities"].push_back(jr);
  }
  write_text(fs::path(cfg.out_dir) / "dmv_audit.json", rep.dump(2) + "\n");
  for (const auto& r : res.reports)
    std::cout << "dmv-audit " << r.identity << ": worst=" << r.worst << " ("
              << r.worst_id << ") " << (r.pass ? "PASS" : "FAIL") << "\n";
  return res.all_pass ? 0 : 1;
}

int cmd_kp_check(const RunConfig& cfg, int sweep) {
  const KpResult res = run_kp_check(cfg, sweep);
  fs::create_directories(cfg.out_dir);
  ojson rep;
  rep["config_hash"] = cfg.config_hash();
  rep["sweep"] = res.sweep;
  rep["max_ratio"] = res.max_ratio;
  rep["max_ratio_refined"] = res.max_ratio_refined;
  rep["identical_count"] = res.identical_count;
  write_text(fs::path(cfg.out_dir) / "kp_report.json", rep.dump(2) + "\n");
  std::cout << "kp-check: max_ratio=" << res.max_ratio
            << " refined=" << res.max_ratio_refined << "\n";
  return 0;
}

int cmd_eos_check(const RunConfig& cfg) {
  const EosCheckResult res = run_eos_check(cfg);
  fs::create_directories(cfg.out_dir);
  ojson rep;
  rep["config_hash"] = cfg.config_hash();
  rep["gibbs"] = {{"max_residual_theta", res.gibbs.max_residual_theta},
                  {"max_residual_rho", res.gibbs.max_residual_rho}};
  rep["stability_pass"] = res.stability.pass;
  if (res.structural_applicable) {
    for (const auto& c : res.structural.clauses)
      rep["structural"].push_back(
          {{"clause", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    rep["pressure_growth_constant"] = res.structural.pressure_growth_constant;
  } else {
    rep["structural"] = "not applicable";
  }
  rep["pass"] = res.pass;
  write_text(fs::path(cfg.out_dir) / "eos_report.json", rep.dump(2) + "\n");
  std::cout << "eos-check: gibbs(theta)=" << res.gibbs.max_residual_theta
            << " gibbs(rho)=" << res.gibbs.max_residual_rho
            << " stability=" << (res.stability.pass ? "PASS" : "FAIL");
  if (res.structural_applicable)
    std::cout << " structural=" << (res.structural.pass() ? "PASS" : "FAIL");
  else
    std::cout << " structural=not-applicable";
  std::cout << " => " << (res.pass ? "PASS" : "FAIL") << "\n";
  return res.pass ? 0 : 1;
}

}  // namespace mhd::harness
