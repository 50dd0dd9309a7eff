#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mhd/constitutive.hpp"
#include "mhd/eos.hpp"
#include "mhd/grid.hpp"
#include "mhd/solver.hpp"

namespace mhd::ym {

using constitutive::TransportModel;
using grid::Field;
using grid::FluidState;
using grid::Grid;

// One point of the phase space F: state values plus the gradient slots.
struct Atom {
  double rho = 0.0;
  Vec3 u{0, 0, 0};
  double theta = 0.0;
  Vec3 B{0, 0, 0};
  Mat3 D_u;          // symmetric velocity-gradient slot
  Vec3 D_theta{0, 0, 0};
  Vec3 C_B{0, 0, 0};
  void validate() const;  // finiteness, rho >= 0, theta >= 0
};

// Per-cell probability measure with finitely many atoms.
struct EmpiricalYoungMeasure {
  Grid g;
  double t = 0.0;
  // indexed cell-major: i + nx*(j + ny*k), interior cells only
  std::vector<std::vector<std::pair<double, Atom>>> cells;

  explicit EmpiricalYoungMeasure(const Grid& grid)
      : g(grid), cells(grid.ncells()) {}
  std::size_t cell_index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(g.n[0]) *
               (static_cast<std::size_t>(j) +
                static_cast<std::size_t>(g.n[1]) * static_cast<std::size_t>(k));
  }
  void validate() const;  // weights >= 0, sum to 1 +- 1e-12 per cell
};

struct EymSequence {
  std::vector<EmpiricalYoungMeasure> frames;  // increasing times
};

// Builds the time-indexed empirical measure from an ensemble of
// time-aligned trajectories; atoms carry the discrete gradient slots.
EymSequence from_ensemble(const std::vector<solver::Trajectory>& trajectories,
                          const std::vector<double>& weights, const eos::Model& eosm);

Field expectation(const EmpiricalYoungMeasure& eym,
                  const std::function<double(const Atom&)>& observable);

// ---------------------------------------------------------------------------
// Certified space-time test functions: closed-form value plus the exact
// derivatives the weak forms need.

struct ScalarST {
  std::string id;
  std::function<double(double, const Vec3&)> f;
  std::function<double(double, const Vec3&)> ft;
  std::function<Vec3(double, const Vec3&)> grad;
};

struct VectorST {
  std::string id;
  std::function<Vec3(double, const Vec3&)> f;
  std::function<Vec3(double, const Vec3&)> ft;
  std::function<Mat3(double, const Vec3&)> grad;  // (c, a) = d f_c / d x_a
};

struct TensorST {
  std::string id;
  std::function<Mat3(double, const Vec3&)> f;    // symmetric
  std::function<Vec3(double, const Vec3&)> div;  // row-wise divergence
};

inline double div_of(const Mat3& grad) { return trace(grad); }
inline Vec3 curl_of(const Mat3& grad) {
  return {grad(2, 1) - grad(1, 2), grad(0, 2) - grad(2, 0), grad(1, 0) - grad(0, 1)};
}

// theta-tilde / B-tilde pair for the ballistic inequality.
struct BallisticPair {
  ScalarST theta_t;
  VectorST B_t;
};

struct TestFunctionDictionary {
  std::vector<ScalarST> continuity;
  std::vector<VectorST> momentum;   // vanish on the whole boundary
  std::vector<VectorST> induction;  // div-free with the stated trace conditions
  std::vector<ScalarST> div_tests;  // compactly supported chi for the weak div B form
  std::vector<ScalarST> entropy;    // >= 0, vanish near the thermal Dirichlet faces
  std::vector<BallisticPair> ballistic;
  std::vector<TensorST> cc_S_tests;
  std::vector<std::pair<VectorST, ScalarST>> cc_t_tests;  // (psi, theta-tilde)
  std::vector<std::pair<VectorST, VectorST>> cc_B_tests;  // (B-tilde, G)

  // Closed-form families adapted to the grid's boundary tags; every member is
  // verified numerically on construction (ConstraintError on violation).
  static TestFunctionDictionary make_default(const Grid& g, double theta_bar,
                                             const Vec3& B_bar, int members = 20);
  void verify(const Grid& g, double theta_bar, const Vec3& B_bar) const;
};

// ---------------------------------------------------------------------------
// Audits. All residuals use midpoint quadrature in space and trapezoid in
// time over the frames; tau is the final frame time.

double weak_residual_continuity(const EymSequence& seq, const ScalarST& phi);

struct MomentumResidual {
  double residual = 0.0;
  double defect_bound_used = 0.0;
};
MomentumResidual weak_residual_momentum(const EymSequence& seq, const VectorST& phi,
                                        const TransportModel& tm, const eos::Model& eosm,
                                        double defect_budget);

double weak_residual_induction(const EymSequence& seq, const VectorST& phi,
                               const TransportModel& tm);

double weak_divB(const EymSequence& seq, const ScalarST& chi);

// Signed margin LHS - RHS of the entropy inequality; negative = violation.
double entropy_inequality_margin(const EymSequence& seq, const ScalarST& phi,
                                 const TransportModel& tm, const eos::Model& eosm);

struct BallisticAudit {
  std::string pair_id;
  std::vector<double> tau;
  std::vector<double> margin;  // RHS - LHS_without_defect per tau
  std::vector<double> defect;  // max(0, LHS_without_defect - RHS) per tau
};
BallisticAudit ballistic_inequality_audit(const EymSequence& seq, const BallisticPair& pair,
                                          const TransportModel& tm, const eos::Model& eosm);

// Time integral of the worst measured defect, scaled by c_defect: the budget
// handed to the momentum residual per the concentration/dissipation bounds.
double defect_budget(const EymSequence& seq, const std::vector<BallisticPair>& pairs,
                     const TransportModel& tm, const eos::Model& eosm, double c_defect);

struct CompatibilityResiduals {
  double cc_S = 0.0;
  double cc_t = 0.0;
  double cc_B = 0.0;
  std::string worst_S_id, worst_t_id, worst_B_id;
};
CompatibilityResiduals compatibility_audit(const EymSequence& seq,
                                           const TestFunctionDictionary& dict);

struct AuditEntry {
  std::string test_id;
  double residual = 0.0;
  double tolerance = 0.0;
  bool pass = true;
};
struct AuditReport {
  std::string identity;
  std::vector<AuditEntry> entries;
  double worst = 0.0;
  std::string worst_id;
  bool pass = true;
};

// Runs every identity of Definition 3.1 against the dictionary with
// tolerance c_audit * (h + dt_max).
std::vector<AuditReport> full_audit(const EymSequence& seq,
                                    const TestFunctionDictionary& dict,
                                    const TransportModel& tm, const eos::Model& eosm,
                                    double c_audit, double c_defect = 10.0);

}  // namespace mhd::ym
