#pragma once

#include "mhd/eos.hpp"
#include "mhd/util.hpp"

namespace mhd::constitutive {

using eos::ThermoPoint;

// Affine-in-theta transport coefficients. The theorem presets constrain the
// slopes; general (rho, theta) dependence is out of scope here.
struct TransportModel {
  double mu0 = 1.0, mu1 = 0.0;
  double eta0 = 0.0, eta1 = 0.0;
  double kappa0 = 1.0, kappa1 = 0.0;
  double zeta0 = 1.0, zeta1 = 0.0;

  double mu(double theta) const { return mu0 + mu1 * theta; }
  double eta(double theta) const { return eta0 + eta1 * theta; }
  double kappa(double theta) const { return kappa0 + kappa1 * theta; }
  double zeta(double theta) const { return zeta0 + zeta1 * theta; }

  // mu > 0, eta >= 0, kappa > 0, zeta > 0 over (0, theta_max].
  void validate(double theta_max = 100.0) const;
};

struct TensorPoint {
  Mat3 D;           // symmetric velocity-gradient part
  Vec3 grad_theta;  // temperature gradient
  Vec3 curl_B;      // current density proxy
};

// (G + G^T)/2
Mat3 sym_grad(const Mat3& grad_u);

// D - (1/3) tr(D) I; the 1/3 stays fixed in 2D runs (tensors live in 3D).
Mat3 traceless(const Mat3& D);

// mu (2D - (2/3) tr D I) + (eta/3) tr D I
Mat3 viscous_stress(const TransportModel& tm, const ThermoPoint& pt, const Mat3& D);

// q = -kappa grad theta
Vec3 heat_flux(const TransportModel& tm, const ThermoPoint& pt, const Vec3& grad_theta);

// (1/theta) (S:D + kappa |grad theta|^2 / theta + zeta |curl B|^2), evaluated
// through the orthogonal split 2 mu |T[D]|^2 + (eta/3)(tr D)^2 so the result
// is a sum of nonnegative terms in floating point as well.
double entropy_production(const TransportModel& tm, const ThermoPoint& pt,
                          const TensorPoint& tensors);

// S:D recomputed from the orthogonal decomposition; used by the solver as the
// viscous heating source.
double stress_power(const TransportModel& tm, const ThermoPoint& pt, const Mat3& D);

// Centered-difference stencil of B around one point. Boundary margins are the
// caller's job; a non-finite neighbor raises StencilError.
struct BNeighborhood {
  Vec3 c;
  Vec3 xm, xp, ym, yp, zm, zp;
  double hx = 1.0, hy = 1.0, hz = 1.0;
};

Vec3 discrete_curl(const BNeighborhood& nb);

// curl B x B at the stencil center.
Vec3 lorentz_force(const BNeighborhood& nb);

}  // namespace mhd::constitutive
