#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mhd/constitutive.hpp"
#include "mhd/eos.hpp"
#include "mhd/grid.hpp"
#include "mhd/relative_energy.hpp"
#include "mhd/solver.hpp"
#include "mhd/young_measure.hpp"

namespace mhd::harness {

using constitutive::TransportModel;
using grid::BoundaryData;
using grid::DivControl;
using grid::FluidState;
using grid::Grid;

struct RunConfig {
  // grid
  int dim = 1;
  int n[3] = {64, 1, 1};
  double extent[3] = {1.0, 1.0, 1.0};

  // eos: "ideal" or "monatomic_radiation"
  std::string eos_kind = "ideal";
  double c_v = 1.5;
  double p_infinity = 1.0;
  double radiation_a = 0.1;

  // transport
  TransportModel transport;

  // boundary + background state
  double theta_B = 1.0;
  Vec3 B_B{0, 0, 0};
  double rho_bar = 1.0;
  double theta_bar = 1.0;

  // initial perturbation: "none" | "solenoidal-B" | "velocity-bump" | "temperature-bump"
  std::string perturbation = "none";
  double amplitude = 0.0;

  solver::SolverConfig solver;
  int n_out = 10;  // number of output intervals over [0, t_end]

  // scenario preset: "" | "bounded-dmv" | "constant-coefficients" | "perfect-gas"
  //                | "unconditional"
  std::string scenario;
  // monitor bounds for the conditional presets
  double rho_lo = 0.05, rho_hi = 20.0;
  double theta_lo = 0.05, theta_hi = 20.0;
  double u_bar = 20.0, s_bar = 100.0;

  // diagnostics
  double cutoff_delta = 0.05;
  double rei_c = 10.0;
  double c_audit = 10.0;
  int dict_members = 20;

  std::string out_dir = "out";
  unsigned long seed = 0;
  int threads = 1;

  static RunConfig from_json_file(const std::string& path);
  static RunConfig from_json_text(const std::string& text);
  std::string canonical_json() const;
  std::string config_hash() const;  // SHA-1 of the canonical form
  void validate() const;

  std::shared_ptr<eos::Model> make_eos() const;
  Grid make_grid() const;
};

// Applies preset coefficient constraints and validates them; throws
// HypothesisViolation when the config contradicts the preset.
void apply_scenario(RunConfig& cfg);

// Per-step state monitor; throws HypothesisViolation with the equation tag
// and cell/time context when a bound is broken.
void monitor_scenario(const RunConfig& cfg, const FluidState& s, const eos::Model& eosm);

struct CsvRow {
  double t = 0.0;
  double mass = 0.0, momx = 0.0, momy = 0.0, momz = 0.0;
  double E_total = 0.0, S_total = 0.0, E_ballistic = 0.0;
  double H_rel = 0.0, prod_min = 0.0, divB_max = 0.0, entropy_residual = 0.0;
  // relent extras
  double rei_lhs = 0.0, rei_rhs = 0.0, rei_margin = 0.0, kp_ratio = 0.0;
};

std::string csv_header(bool relent_cols);
std::string csv_line(const CsvRow& r, bool relent_cols);

struct SimResult {
  solver::Trajectory traj;
  BoundaryData bd;
  std::vector<CsvRow> rows;
  int steps_taken = 0;
};

// Runs the configured scenario with output snapshots at the n_out + 1
// scheduled times (steps clip dt to land on them exactly).
SimResult run_simulation(const RunConfig& cfg);

// Initial state builder (exposed for tests): equilibrium plus the configured
// seeded perturbation.
std::pair<FluidState, BoundaryData> build_initial_state(const RunConfig& cfg,
                                                        const eos::Model& eosm);

struct RelentAmplitude {
  double amplitude = 0.0;
  double sup_H = 0.0;
  double c_fit = 0.0;
  std::vector<double> times, H;
  std::vector<relent::ReiRow> rei;
  std::vector<CsvRow> rows;  // full time series with the relent extras filled
};

struct RelentResult {
  std::vector<RelentAmplitude> sweep;
  double slope = 0.0;        // log-log slope of sup H vs amplitude
  double worst_margin = 0.0; // most negative rei margin across the sweep
  std::string reference;     // "equilibrium" or "fine"
};

RelentResult run_relent(const RunConfig& cfg, const std::string& reference);

struct DmvResult {
  std::vector<ym::AuditReport> reports;
  bool all_pass = true;
};

DmvResult run_dmv_audit(const RunConfig& cfg, int ensemble);

struct KpResult {
  double max_ratio = 0.0;
  double max_ratio_refined = 0.0;  // same sweep at doubled resolution
  int identical_count = 0;
  int sweep = 0;
};

KpResult run_kp_check(const RunConfig& cfg, int sweep);

struct EosCheckResult {
  eos::GibbsReport gibbs;
  eos::StabilityReport stability;
  bool structural_applicable = false;
  eos::StructuralReport structural;
  bool pass = true;
};

EosCheckResult run_eos_check(const RunConfig& cfg);

// Command wrappers: run, write artifacts under cfg.out_dir, print a short
// summary, return a process exit code.
int cmd_simulate(const RunConfig& cfg);
int cmd_relent(const RunConfig& cfg, const std::string& reference);
int cmd_dmv_audit(const RunConfig& cfg, int ensemble);
int cmd_kp_check(const RunConfig& cfg, int sweep);
int cmd_eos_check(const RunConfig& cfg);

}  // namespace mhd::harness
