#pragma once

#include <cstddef>
#include <vector>

#include "mhd/constitutive.hpp"
#include "mhd/eos.hpp"
#include "mhd/grid.hpp"
#include "mhd/solver.hpp"

namespace mhd::relent {

using constitutive::TransportModel;
using grid::BoundaryData;
using grid::Field;
using grid::FluidState;
using grid::Grid;

// One phase-space sample (rho, theta, u, B).
struct StatePoint {
  double rho = 1.0, theta = 1.0;
  Vec3 u{0, 0, 0}, B{0, 0, 0};
};

// Pointwise value of the comparison quadruple (r, Theta, U, H).
struct RefStatePoint {
  double r = 1.0, Theta = 1.0;
  Vec3 U{0, 0, 0}, H{0, 0, 0};
};

// Reference value plus the derivatives the inequality needs.
struct RefPoint {
  RefStatePoint v;
  double dTheta_dt = 0.0;
  Vec3 grad_Theta{0, 0, 0};
  Mat3 DU;  // symmetric velocity gradient of U
  double divU = 0.0;
  Vec3 curlH{0, 0, 0};
};

// Comparison fields on one time slice, ghost layers included.
struct RefFields {
  Field r, Theta, Ux, Uy, Uz, Hx, Hy, Hz;
  explicit RefFields(const Grid& g)
      : r(g), Theta(g), Ux(g), Uy(g), Uz(g), Hx(g), Hy(g), Hz(g) {}
};

// The smooth comparison state (r, Theta, U, H): either a stationary
// equilibrium (all derivatives vanish identically) or the restriction of a
// finer-grid trajectory, with derivatives taken by centered differences.
struct ReferenceSolution {
  Grid g;
  bool stationary = false;
  std::vector<double> times;      // one entry per slice; single entry if stationary
  std::vector<RefFields> slices;  // ghost-filled

  static ReferenceSolution equilibrium(const Grid& g, double r_bar, double theta_bar,
                                       const Vec3& H_bar);
  // Block-averages each snapshot of a finer trajectory onto `coarse` (the
  // fine grid must be an integer multiple in every active direction), then
  // projects H back onto the discrete divergence-free space.
  static ReferenceSolution restrict_trajectory(const solver::Trajectory& fine,
                                               const Grid& coarse, const BoundaryData& bd,
                                               const eos::Model& eosm);

  // Verifies positivity, boundary traces, and solenoidality of H.
  void check_admissible(const BoundaryData& bd, double tol = 1e-8) const;

  RefPoint at(std::size_t slice, int i, int j, int k) const;
  std::size_t slice_for(double t) const;  // nearest slice; AlignmentError if > 1e-9 off
};

double rel_energy_density(const StatePoint& pt, const RefStatePoint& ref,
                          const eos::Model& eosm);

// Midpoint-rule integral of rel_energy_density over the box.
double rel_energy_total(const FluidState& s, const eos::Model& eosm,
                        const ReferenceSolution& ref, std::size_t slice);

struct CutoffSpec {
  double delta = 0.05;
  double ramp_width() const { return 0.5 * delta; }
  void validate() const;
};

// C1 piecewise-cubic product ramp: 1 on [delta, 1/delta]^2, 0 outside
// [delta/2, 2/delta]^2.
double cutoff_weight(const CutoffSpec& spec, const eos::ThermoPoint& pt);

struct LowerBoundReport {
  double c_delta = 0.0;   // min over samples of E / bracket
  double max_ratio = 0.0; // max over samples of E / bracket
  bool vacuous = true;    // no sample had a bracket above threshold
  std::size_t used = 0;
};

LowerBoundReport lower_bound_check(const std::vector<std::pair<StatePoint, RefStatePoint>>& samples,
                                   const CutoffSpec& spec, const eos::Model& eosm);

struct ReiRow {
  double tau = 0.0;
  double H = 0.0;          // relative energy at tau (defects are zero here)
  double lhs = 0.0;        // H(tau) plus accumulated dissipation-mismatch integrals
  double rhs = 0.0;        // c * int H dt plus accumulated residual integral
  double margin = 0.0;     // rhs - lhs
  // per-term cumulative integrals, surfaced for inspection
  double q_mu = 0.0, x_mu = 0.0;
  double q_eta = 0.0, x_eta = 0.0;
  double q_kappa = 0.0, x_kappa = 0.0;
  double q_zeta = 0.0, x_zeta = 0.0;
  double residual = 0.0;
};

std::vector<ReiRow> rei_sides(const solver::Trajectory& traj, const ReferenceSolution& ref,
                              const eos::Model& eosm, const TransportModel& tm,
                              const CutoffSpec& spec, double c);

struct GronwallFit {
  double c_fit = 0.0;       // infinity() when no envelope exists
  double max_violation = 0.0;
};

GronwallFit gronwall_fit(const std::vector<double>& times, const std::vector<double>& H);

struct VecField {
  Field x, y, z;
  explicit VecField(const Grid& g) : x(g), y(g), z(g) {}
};

struct KPResult {
  double ratio = 0.0;
  bool identical = false;
};

// int |u - u~|^2 / int |T[D(u)] - T[D(u~)]|^2 with centered gradients. Both
// fields must carry ghost layers consistent with a vanishing boundary trace.
KPResult korn_poincare_ratio(const VecField& u, const VecField& u_ref, const Grid& g);

}  // namespace mhd::relent
