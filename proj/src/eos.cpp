#include "mhd/eos.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mhd/errors.hpp"

namespace mhd::eos {

void Model::validate(const ThermoPoint& pt) {
  if (!(pt.rho > 0.0) || !std::isfinite(pt.rho))
    throw DomainError("rho must be positive and finite, got " + std::to_string(pt.rho));
  if (!(pt.theta > 0.0) || !std::isfinite(pt.theta))
    throw DomainError("theta must be positive and finite, got " + std::to_string(pt.theta));
}

double Model::gibbs_free_energy(const ThermoPoint& pt) const {
  validate(pt);
  return internal_energy(pt) - pt.theta * entropy(pt) + pressure(pt) / pt.rho;
}

double Model::sound_speed2(const ThermoPoint& pt) const { return partials(pt).dp_drho; }

double Model::invert_temperature(double rho, double specific_e) const {
  if (!(rho > 0.0) || !(specific_e > 0.0))
    throw DomainError("invert_temperature needs rho > 0 and e > 0");
  double lo = 1e-12, hi = 1.0;
  while (internal_energy({rho, hi}) < specific_e) {
    hi *= 2.0;
    if (hi > 1e30) throw NumericalError("temperature inversion bracket blew up");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (internal_energy({rho, mid}) < specific_e)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 1e-15 * hi) break;
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Ideal polytropic gas: p = rho theta, e = c_v theta, s = log(theta^c_v / rho).

IdealPolytropic::IdealPolytropic(double c_v) : c_v_(c_v) {
  if (!(c_v > 1.0)) throw DomainError("IdealPolytropic requires c_v > 1");
}

double IdealPolytropic::pressure(const ThermoPoint& pt) const {
  validate(pt);
  return pt.rho * pt.theta;
}

double IdealPolytropic::internal_energy(const ThermoPoint& pt) const {
  validate(pt);
  return c_v_ * pt.theta;
}

double IdealPolytropic::entropy(const ThermoPoint& pt) const {
  validate(pt);
  return c_v_ * std::log(pt.theta) - std::log(pt.rho);
}

Partials IdealPolytropic::partials(const ThermoPoint& pt) const {
  validate(pt);
  Partials d;
  d.dp_drho = pt.theta;
  d.dp_dtheta = pt.rho;
  d.de_drho = 0.0;
  d.de_dtheta = c_v_;
  d.ds_drho = -1.0 / pt.rho;
  d.ds_dtheta = c_v_ / pt.theta;
  return d;
}

double IdealPolytropic::invert_temperature(double rho, double specific_e) const {
  if (!(rho > 0.0) || !(specific_e > 0.0))
    throw DomainError("invert_temperature needs rho > 0 and e > 0");
  return specific_e / c_v_;
}

// ---------------------------------------------------------------------------
// Monoatomic + radiation closure.

MonatomicP MonatomicP::default_closed_form() {
  MonatomicP p;
  p.value = [](double z) { return z * std::cbrt((1.0 + z) * (1.0 + z)); };
  p.deriv = [](double z) {
    const double c = std::cbrt(1.0 + z);
    return c * c + (2.0 / 3.0) * z / c;
  };
  return p;
}

MonatomicP MonatomicP::from_table(const std::vector<double>& z,
                                  const std::vector<double>& p, double p_infinity) {
  if (z.size() < 2) throw TabulationError("P table needs at least two rows");
  auto interp = std::make_shared<MonotoneCubic>(z, p);
  const double z_min = z.front(), z_max = z.back();
  const double p_min = p.front();
  MonatomicP out;
  out.value = [interp, z_min, z_max, p_min, p_infinity](double zz) {
    if (zz < z_min) return p_min * zz / z_min;  // P(0) = 0, linear toward vacuum
    if (zz > z_max) {
      if (!(p_infinity > 0.0))
        throw TabulationError("Z beyond P table and no valid p_infinity asymptote");
      return p_infinity * std::pow(zz, 5.0 / 3.0);
    }
    return (*interp)(zz);
  };
  out.deriv = [interp, z_min, z_max, p_min, p_infinity](double zz) {
    if (zz < z_min) return p_min / z_min;
    if (zz > z_max) {
      if (!(p_infinity > 0.0))
        throw TabulationError("Z beyond P table and no valid p_infinity asymptote");
      return p_infinity * (5.0 / 3.0) * std::pow(zz, 2.0 / 3.0);
    }
    return interp->derivative(zz);
  };
  return out;
}

MonatomicRadiation::MonatomicRadiation(double p_infinity, double a, MonatomicP P)
    : MonatomicRadiation(p_infinity, a, std::move(P), 4096) {}

MonatomicRadiation::MonatomicRadiation(double p_infinity, double a, MonatomicP P,
                                       int table_nodes)
    : p_inf_(p_infinity), a_(a), P_(std::move(P)) {
  if (!(p_inf_ > 0.0)) throw DomainError("p_infinity must be positive");
  if (!(a_ > 0.0)) throw DomainError("radiation coefficient a must be positive");
  build_entropy_table(table_nodes);
}

// -S'(Z) = (3/2)(5/3 P(Z) - P'(Z) Z)/Z^2, integrated toward Z = infinity.
double MonatomicRadiation::s_integrand(double z) const {
  return 1.5 * ((5.0 / 3.0) * P_.value(z) - P_.deriv(z) * z) / (z * z);
}

void MonatomicRadiation::build_entropy_table(int nodes) {
  z_lo_ = 1e-8;
  z_hi_ = 1e8;
  std::vector<double> logz(nodes), s(nodes);
  const double l0 = std::log(z_lo_), l1 = std::log(z_hi_);
  for (int i = 0; i < nodes; ++i)
    logz[i] = l0 + (l1 - l0) * static_cast<double>(i) / (nodes - 1);
  // Tail beyond the cutoff: the integrand decays like c t^(-4/3).
  const double c_inf = s_integrand(z_hi_) * std::pow(z_hi_, 4.0 / 3.0);
  s_hi_coeff_ = c_inf;
  s[nodes - 1] = 3.0 * c_inf * std::pow(z_hi_, -1.0 / 3.0);
  auto f = [this](double z) { return s_integrand(z); };
  for (int i = nodes - 2; i >= 0; --i) {
    const double za = std::exp(logz[i]), zb = std::exp(logz[i + 1]);
    s[i] = s[i + 1] + adaptive_simpson(f, za, zb, 1e-13);
  }
  for (double v : s)
    if (!std::isfinite(v)) throw TabulationError("entropy quadrature produced non-finite values");
  s_lo_slope_ = s_integrand(z_lo_) * z_lo_;
  s_table_ = MonotoneCubic(logz, s);
}

double MonatomicRadiation::S(double z) const {
  if (!(z > 0.0)) throw DomainError("S(Z) requires Z > 0");
  if (z < z_lo_) return s_table_(std::log(z_lo_)) + s_lo_slope_ * std::log(z_lo_ / z);
  if (z > z_hi_) {
    const double v = 3.0 * s_hi_coeff_ * std::pow(z, -1.0 / 3.0);
    if (!std::isfinite(v)) throw TabulationError("asymptotic entropy extension failed");
    return v;
  }
  return s_table_(std::log(z));
}

double MonatomicRadiation::monatomic_pressure(const ThermoPoint& pt) const {
  const double z = pt.rho / std::pow(pt.theta, 1.5);
  return std::pow(pt.theta, 2.5) * P_.value(z);
}

double MonatomicRadiation::monatomic_energy(const ThermoPoint& pt) const {
  return 1.5 * monatomic_pressure(pt) / pt.rho;
}

double MonatomicRadiation::pressure(const ThermoPoint& pt) const {
  validate(pt);
  return monatomic_pressure(pt) + a_ * pt.theta * pt.theta;
}

double MonatomicRadiation::internal_energy(const ThermoPoint& pt) const {
  validate(pt);
  return monatomic_energy(pt) + a_ * pt.theta * pt.theta / pt.rho;
}

double MonatomicRadiation::entropy(const ThermoPoint& pt) const {
  validate(pt);
  const double z = pt.rho / std::pow(pt.theta, 1.5);
  return S(z) + 2.0 * a_ * pt.theta / pt.rho;
}

Partials MonatomicRadiation::partials(const ThermoPoint& pt) const {
  validate(pt);
  // Centered differences, relative step 1e-6, one Richardson level.
  auto diff = [this](auto&& fn, double x) {
    const double h = std::max(1e-6, 1e-6 * std::abs(x));
    if (x - h <= 0.0) throw NumericalError("finite-difference stencil leaves the domain");
    const double d1 = (fn(x + h) - fn(x - h)) / (2.0 * h);
    const double d2 = (fn(x + 0.5 * h) - fn(x - 0.5 * h)) / h;
    return (4.0 * d2 - d1) / 3.0;
  };
  Partials d;
  d.dp_drho = diff([&](double r) { return pressure({r, pt.theta}); }, pt.rho);
  d.dp_dtheta = diff([&](double t) { return pressure({pt.rho, t}); }, pt.theta);
  d.de_drho = diff([&](double r) { return internal_energy({r, pt.theta}); }, pt.rho);
  d.de_dtheta = diff([&](double t) { return internal_energy({pt.rho, t}); }, pt.theta);
  d.ds_drho = diff([&](double r) { return entropy({r, pt.theta}); }, pt.rho);
  d.ds_dtheta = diff([&](double t) { return entropy({pt.rho, t}); }, pt.theta);
  for (double v : {d.dp_drho, d.dp_dtheta, d.de_drho, d.de_dtheta, d.ds_drho, d.ds_dtheta})
    if (!std::isfinite(v)) throw NumericalError("non-finite partial derivative");
  return d;
}

double MonatomicRadiation::sound_speed2(const ThermoPoint& pt) const {
  validate(pt);
  const double z = pt.rho / std::pow(pt.theta, 1.5);
  return pt.theta * P_.deriv(z);
}

double MonatomicRadiation::invert_temperature(double rho, double specific_e) const {
  if (!(rho > 0.0) || !(specific_e > 0.0))
    throw DomainError("invert_temperature needs rho > 0 and e > 0");
  // e is strictly increasing in theta; safeguarded Newton with analytic slope.
  auto e_of = [&](double th) { return internal_energy({rho, th}); };
  auto dedt = [&](double th) {
    const double z = rho / std::pow(th, 1.5);
    return 1.5 * std::sqrt(th) * th * (2.5 * P_.value(z) - 1.5 * z * P_.deriv(z)) / rho +
           2.0 * a_ * th / rho;
  };
  double lo = 1e-12, hi = 1.0;
  while (e_of(hi) < specific_e) {
    hi *= 2.0;
    if (hi > 1e30) throw NumericalError("temperature inversion bracket blew up");
  }
  double th = std::clamp(specific_e / (1.5 + a_), lo, hi);
  for (int it = 0; it < 100; ++it) {
    const double r = e_of(th) - specific_e;
    if (r > 0.0)
      hi = th;
    else
      lo = th;
    const double slope = dedt(th);
    double next = (slope > 0.0) ? th - r / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - th) <= 1e-15 * th) return next;
    th = next;
  }
  return th;
}

// ---------------------------------------------------------------------------
// Verification sweeps.

namespace {

void validate_region(const Rect& region, int samples) {
  if (!(region.rho_min > 0.0) || !(region.theta_min > 0.0) ||
      !(region.rho_max > region.rho_min) || !(region.theta_max > region.theta_min))
    throw DomainError("region must be a rectangle strictly inside (0,inf)^2");
  if (samples < 1) throw DomainError("need at least one sample");
}

}  // namespace

GibbsReport check_gibbs(const Model& model, const Rect& region, int samples) {
  validate_region(region, samples);
  std::mt19937 rng(12345);
  std::uniform_real_distribution<double> ur(region.rho_min, region.rho_max);
  std::uniform_real_distribution<double> ut(region.theta_min, region.theta_max);
  GibbsReport rep;
  for (int i = 0; i < samples; ++i) {
    const ThermoPoint pt{ur(rng), ut(rng)};
    const Partials d = model.partials(pt);
    const double p = model.pressure(pt);
    const double s1 = std::max({std::abs(d.de_dtheta), std::abs(pt.theta * d.ds_dtheta), 1e-30});
    const double s2 = std::max({std::abs(d.de_drho), std::abs(pt.theta * d.ds_drho),
                                std::abs(p / (pt.rho * pt.rho)), 1e-30});
    rep.max_residual_theta =
        std::max(rep.max_residual_theta, std::abs(d.de_dtheta - pt.theta * d.ds_dtheta) / s1);
    rep.max_residual_rho = std::max(
        rep.max_residual_rho,
        std::abs(d.de_drho - pt.theta * d.ds_drho - p / (pt.rho * pt.rho)) / s2);
  }
  return rep;
}

StabilityReport check_stability(const Model& model, const Rect& region, int samples) {
  validate_region(region, samples);
  std::mt19937 rng(54321);
  std::uniform_real_distribution<double> ur(region.rho_min, region.rho_max);
  std::uniform_real_distribution<double> ut(region.theta_min, region.theta_max);
  StabilityReport rep;
  for (int i = 0; i < samples; ++i) {
    const ThermoPoint pt{ur(rng), ut(rng)};
    const Partials d = model.partials(pt);
    if (!(d.dp_drho > 0.0) || !(d.de_dtheta > 0.0)) {
      rep.pass = false;
      rep.worst = pt;
      rep.worst_dp_drho = d.dp_drho;
      rep.worst_de_dtheta = d.de_dtheta;
      return rep;
    }
  }
  return rep;
}

StructuralReport check_structural(const MonatomicRadiation& model, double z_max) {
  if (!(z_max > 1.0)) throw DomainError("check_structural requires z_max > 1");
  StructuralReport rep;
  const int n = 400;
  std::vector<double> z(n);
  for (int i = 0; i < n; ++i)
    z[i] = z_max * std::pow(1e-8, 1.0 - static_cast<double>(i) / (n - 1));

  const double p0 = model.P(0.0);
  rep.clauses.push_back({"w2: P(0) = 0", std::abs(p0) < 1e-12,
                         "P(0) = " + std::to_string(p0)});

  bool dpos = true, wpos = true;
  std::string det1, det2;
  for (double zz : z) {
    if (!(model.Pprime(zz) > 0.0)) {
      dpos = false;
      det1 = "P'(Z) <= 0 at Z = " + std::to_string(zz);
      break;
    }
  }
  for (double zz : z) {
    const double w = ((5.0 / 3.0) * model.P(zz) - model.Pprime(zz) * zz) / zz;
    if (!(w > 0.0)) {
      wpos = false;
      det2 = "(5/3 P - P' Z)/Z <= 0 at Z = " + std::to_string(zz);
      break;
    }
  }
  rep.clauses.push_back({"w2: P' > 0", dpos, det1});
  rep.clauses.push_back({"w2: (5/3 P - P' Z)/Z > 0", wpos, det2});

  bool mono = true;
  std::string det3;
  double prev = model.P(z[0]) / std::pow(z[0], 5.0 / 3.0);
  for (int i = 1; i < n; ++i) {
    const double cur = model.P(z[i]) / std::pow(z[i], 5.0 / 3.0);
    if (cur > prev * (1.0 + 1e-12)) {
      mono = false;
      det3 = "P/Z^(5/3) not decreasing near Z = " + std::to_string(z[i]);
      break;
    }
    prev = cur;
  }
  const double limit_est = model.P(z_max) / std::pow(z_max, 5.0 / 3.0);
  const bool limit_ok =
      mono && std::abs(limit_est - model.p_infinity()) < 0.01 * model.p_infinity();
  rep.clauses.push_back({"w3: P/Z^(5/3) decreasing", mono, det3});
  rep.clauses.push_back({"w3: limit = p_infinity",
                         limit_ok,
                         "estimate " + std::to_string(limit_est) + " vs p_infinity " +
                             std::to_string(model.p_infinity())});

  bool s_dec = true;
  std::string det4;
  double s_prev = model.S(z[0]);
  for (int i = 1; i < n; ++i) {
    const double s_cur = model.S(z[i]);
    if (s_cur > s_prev * (1.0 + 1e-12) + 1e-14) {
      s_dec = false;
      det4 = "S not decreasing near Z = " + std::to_string(z[i]);
      break;
    }
    s_prev = s_cur;
  }
  rep.clauses.push_back({"w7: S decreasing", s_dec, det4});
  const double s_end = model.S(z_max);
  rep.clauses.push_back({"w7: S(z_max) < 0.05", s_end < 0.05,
                         "S(z_max) = " + std::to_string(s_end)});

  // ass_cc_p growth constant over a (rho, theta) sweep.
  double c_max = 0.0;
  for (double rho : {0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0})
    for (double th : {0.1, 0.5, 1.0, 2.0, 5.0, 10.0}) {
      const ThermoPoint pt{rho, th};
      const double p = model.pressure(pt);
      const double denom = 1.0 + rho * model.internal_energy(pt) +
                           rho * std::abs(model.entropy(pt));
      c_max = std::max(c_max, std::abs(p) / denom);
    }
  rep.pressure_growth_constant = c_max;
  rep.clauses.push_back({"ass_cc_p: finite growth constant", std::isfinite(c_max),
                         "C = " + std::to_string(c_max)});
  return rep;
}

}  // namespace mhd::eos
