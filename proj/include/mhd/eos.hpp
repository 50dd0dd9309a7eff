#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mhd/util.hpp"

namespace mhd::eos {

struct ThermoPoint {
  double rho;    // mass density, > 0
  double theta;  // absolute temperature, > 0
};

struct Partials {
  double dp_drho, dp_dtheta;
  double de_drho, de_dtheta;
  double ds_drho, ds_dtheta;
};

struct Rect {
  double rho_min, rho_max;
  double theta_min, theta_max;
};

struct GibbsReport {
  // max over samples of the two component identities of Gibbs' equation,
  // scaled by local magnitudes.
  double max_residual_theta = 0.0;  // |de/dtheta - theta ds/dtheta|
  double max_residual_rho = 0.0;    // |de/drho - theta ds/drho - p/rho^2|
  bool pass(double tol) const {
    return max_residual_theta < tol && max_residual_rho < tol;
  }
};

struct StabilityReport {
  bool pass = true;
  ThermoPoint worst{0.0, 0.0};
  double worst_dp_drho = 0.0;
  double worst_de_dtheta = 0.0;
};

struct StructuralClause {
  std::string name;
  bool pass;
  std::string detail;
};

struct StructuralReport {
  std::vector<StructuralClause> clauses;
  double pressure_growth_constant = 0.0;  // smallest C with |p| <= C(1 + rho e + rho|s|)
  bool pass() const {
    for (const auto& c : clauses)
      if (!c.pass) return false;
    return true;
  }
  std::string first_failure() const {
    for (const auto& c : clauses)
      if (!c.pass) return c.name + ": " + c.detail;
    return "";
  }
};

// Thermodynamic closure. Implementations are immutable after construction
// and safe to share across threads.
class Model {
 public:
  virtual ~Model() = default;
  virtual std::string name() const = 0;
  virtual double pressure(const ThermoPoint& pt) const = 0;
  virtual double internal_energy(const ThermoPoint& pt) const = 0;
  virtual double entropy(const ThermoPoint& pt) const = 0;
  virtual Partials partials(const ThermoPoint& pt) const = 0;
  // Inverse of e(rho, .) at fixed rho; needed by the solver to recover theta.
  virtual double invert_temperature(double rho, double specific_e) const;

  double gibbs_free_energy(const ThermoPoint& pt) const;
  // dp/drho at fixed theta; overridden with closed forms where available so
  // the solver's wave-speed bound stays cheap.
  virtual double sound_speed2(const ThermoPoint& pt) const;

 protected:
  static void validate(const ThermoPoint& pt);
};

class IdealPolytropic final : public Model {
 public:
  explicit IdealPolytropic(double c_v);
  std::string name() const override { return "ideal"; }
  double pressure(const ThermoPoint& pt) const override;
  double internal_energy(const ThermoPoint& pt) const override;
  double entropy(const ThermoPoint& pt) const override;
  Partials partials(const ThermoPoint& pt) const override;
  double invert_temperature(double rho, double specific_e) const override;
  double sound_speed2(const ThermoPoint& pt) const override { return pt.theta; }
  double c_v() const { return c_v_; }

 private:
  double c_v_;
};

// Monoatomic component P(Z) of the degenerate-gas closure, with derivative.
struct MonatomicP {
  std::function<double(double)> value;
  std::function<double(double)> deriv;
  static MonatomicP default_closed_form();          // P(Z) = Z (1+Z)^(2/3)
  static MonatomicP from_table(const std::vector<double>& z,
                               const std::vector<double>& p, double p_infinity);
};

class MonatomicRadiation final : public Model {
 public:
  MonatomicRadiation(double p_infinity, double a,
                     MonatomicP P = MonatomicP::default_closed_form());
  std::string name() const override { return "monatomic_radiation"; }
  double pressure(const ThermoPoint& pt) const override;
  double internal_energy(const ThermoPoint& pt) const override;
  double entropy(const ThermoPoint& pt) const override;
  Partials partials(const ThermoPoint& pt) const override;
  double invert_temperature(double rho, double specific_e) const override;
  double sound_speed2(const ThermoPoint& pt) const override;

  double p_infinity() const { return p_inf_; }
  double radiation_a() const { return a_; }
  double P(double z) const { return P_.value(z); }
  double Pprime(double z) const { return P_.deriv(z); }
  // Entropy profile S(Z), quadrature of S'(Z) = -(3/2)(5/3 P - P' Z)/Z^2 with S(inf)=0.
  double S(double z) const;
  double monatomic_pressure(const ThermoPoint& pt) const;
  double monatomic_energy(const ThermoPoint& pt) const;

  // Number of cache nodes, exposed so tests can compare refinements.
  MonatomicRadiation(double p_infinity, double a, MonatomicP P, int table_nodes);

 private:
  void build_entropy_table(int nodes);
  double s_integrand(double z) const;
  double p_inf_, a_;
  MonatomicP P_;
  MonotoneCubic s_table_;        // S over log Z
  double z_lo_, z_hi_;           // tabulated range
  double s_lo_slope_, s_hi_coeff_;  // asymptotic extensions
};

GibbsReport check_gibbs(const Model& model, const Rect& region, int samples);
StabilityReport check_stability(const Model& model, const Rect& region, int samples);
StructuralReport check_structural(const MonatomicRadiation& model, double z_max);

}  // namespace mhd::eos
